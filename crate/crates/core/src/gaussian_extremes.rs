//! Standard normal cdf/quantile and critical values for the maximum of `d`
//! independent standard normals.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Which maximum the test statistic takes over the `d` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    /// `max_j S_j`
    #[serde(rename = "one-sided-max")]
    OneSided,
    /// `max_j |S_j|`
    #[serde(rename = "two-sided-max")]
    TwoSided,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::OneSided => "one-sided-max",
            Statistic::TwoSided => "two-sided-max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalMethod {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub d: u64,
    pub alpha: f64,
    pub value: f64,
    pub statistic: Statistic,
    pub method: CriticalMethod,
}

/// Extreme-value expansion of the one-sided critical value, together with
/// its root form `√(2 ln d) · √(1 - a(d))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCriticalValue {
    pub critical: CriticalValue,
    /// `√(2 ln d)`
    pub scale: f64,
    /// `a(d) = 1 - value² / (2 ln d)`
    pub a: f64,
}

impl AsymptoticCriticalValue {
    pub fn root_form(&self) -> f64 {
        self.scale * (1.0 - self.a).sqrt()
    }
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must lie in (0, 1), got {p}")))
    }
}

// W. J. Cody, rational Chebyshev approximations for erf/erfc (CALERF).
const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_02e2,
    3.209_377_589_138_469_5e3,
    1.857_777_061_846_031_5e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_171e3,
];
const ERFC_C: [f64; 9] = [
    5.641_884_969_886_701e-1,
    8.883_149_794_388_376,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001e2,
    8.819_522_212_417_69e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const ERFC_D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_099e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_7e3,
    4.362_619_090_143_247e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];
const ERFC_P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_228e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_21e-2,
];
const ERFC_Q: [f64; 5] = [
    2.568_520_192_289_822,
    1.872_952_849_923_467_3,
    5.279_051_029_514_284e-1,
    6.051_834_131_244_132e-2,
    2.335_204_976_268_691_8e-3,
];

const ERF_SMALL: f64 = 0.468_75;

/// `erf(y)` for `|y| ≤ 0.46875`.
fn erf_small(y: f64) -> f64 {
    let ysq = y * y;
    let mut num = ERF_A[4] * ysq;
    let mut den = ysq;
    for i in 0..3 {
        num = (num + ERF_A[i]) * ysq;
        den = (den + ERF_B[i]) * ysq;
    }
    y * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// Scaled complement `exp(y²) erfc(y)` for `y > 0.46875`.
fn erfcx_large(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = ERFC_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERFC_C[i]) * y;
            den = (den + ERFC_D[i]) * y;
        }
        (num + ERFC_C[7]) / (den + ERFC_D[7])
    } else if y >= 6.71e7 {
        FRAC_1_SQRT_PI / y
    } else {
        let ysq = 1.0 / (y * y);
        let mut num = ERFC_P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + ERFC_P[i]) * ysq;
            den = (den + ERFC_Q[i]) * ysq;
        }
        let r = ysq * (num + ERFC_P[4]) / (den + ERFC_Q[4]);
        (FRAC_1_SQRT_PI - r) / y
    }
}

/// `exp(-x²/2)` with the square split so that rounding in `x²` does not
/// inflate the relative error for large `|x|`.
fn exp_half_square(x: f64) -> f64 {
    let head = (x * 16.0).trunc() / 16.0;
    let tail = (x - head) * (x + head);
    (-0.5 * head * head).exp() * (-0.5 * tail).exp()
}

pub fn normal_pdf(x: f64) -> f64 {
    exp_half_square(x) * (-LN_SQRT_2PI).exp()
}

/// `1 - Φ(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 0.0 } else { 1.0 };
    }
    let y = x / SQRT_2;
    if y.abs() <= ERF_SMALL {
        0.5 - 0.5 * erf_small(y)
    } else if x > 0.0 {
        0.5 * erfcx_large(y) * exp_half_square(x)
    } else {
        1.0 - 0.5 * erfcx_large(-y) * exp_half_square(x)
    }
}

/// `Φ(x)`
pub fn normal_cdf(x: f64) -> f64 {
    normal_sf(-x)
}

/// `ln(1 - Φ(x))`, finite far past the point where `1 - Φ(x)` underflows.
pub fn normal_log_sf(x: f64) -> f64 {
    if x < 5.0 {
        normal_sf(x).ln()
    } else if x == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        (0.5 * erfcx_large(x / SQRT_2)).ln() - 0.5 * x * x
    }
}

/// `ln Φ(x)`
pub fn normal_log_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-normal_sf(x)).ln_1p()
    } else {
        normal_log_sf(-x)
    }
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

// M. J. Wichura, AS 241 (PPND16).
const PPND_A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const PPND_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_854e3,
];
const PPND_C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_545,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const PPND_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_8e-9,
];
const PPND_E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const PPND_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

/// Lower-tail quantile for `p ≤ ½`; the argument is never formed as `1 - p`.
fn ppnd_lower(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&PPND_A, r) / poly(&PPND_B, r);
    }
    let r = (-p.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&PPND_C, r) / poly(&PPND_D, r)
    } else {
        let r = r - 5.0;
        poly(&PPND_E, r) / poly(&PPND_F, r)
    };
    -x
}

/// Upper-tail quantile: the `x` with `1 - Φ(x) = q`.
pub fn normal_isf(q: f64) -> Result<f64> {
    check_probability(q, "tail probability")?;
    let mut x = if q <= 0.5 { -ppnd_lower(q) } else { ppnd_lower(1.0 - q) };
    // One or two Newton steps on ln(1 - Φ); the derivative is -φ/(1 - Φ).
    let target = q.ln();
    for _ in 0..2 {
        let log_sf = normal_log_sf(x);
        let mills = (log_sf + 0.5 * x * x + LN_SQRT_2PI).exp();
        x += (log_sf - target) * mills;
    }
    Ok(x)
}

/// `Φ⁻¹(p)`
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_probability(p, "probability")?;
    if p == 0.5 {
        Ok(0.0)
    } else if p < 0.5 {
        Ok(-normal_isf(p)?)
    } else {
        normal_isf(1.0 - p)
    }
}

/// Per-coordinate exceedance `q` with `(1 - q)^d = 1 - alpha`.
fn per_coordinate_tail(d: u64, alpha: f64) -> f64 {
    -((-alpha).ln_1p() / d as f64).exp_m1()
}

/// The `c` solving `P(max_j Z_j > c) = alpha` exactly for `d` i.i.d. standard
/// normals (`max_j |Z_j|` for the two-sided statistic).
pub fn max_critical_exact(d: u64, alpha: f64, statistic: Statistic) -> Result<CriticalValue> {
    if d == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    check_probability(alpha, "alpha")?;
    let q = per_coordinate_tail(d, alpha);
    let value = match statistic {
        Statistic::OneSided => normal_isf(q)?,
        Statistic::TwoSided => normal_isf(0.5 * q)?,
    };
    Ok(CriticalValue {
        d,
        alpha,
        value,
        statistic,
        method: CriticalMethod::Exact,
    })
}

/// Extreme-value expansion of the one-sided critical value, with the
/// vanishing remainder set to zero:
///
/// `√(2 ln d) - ln(-ln(1-α)) / √(2 ln d) - (ln ln d + ln 4π) / (2 √(2 ln d))`
pub fn max_critical_asymptotic(d: u64, alpha: f64) -> Result<AsymptoticCriticalValue> {
    if d < 3 {
        return Err(Error::domain(format!("asymptotic critical value needs d ≥ 3, got {d}")));
    }
    let mut out = max_critical_asymptotic_log_dim((d as f64).ln(), alpha)?;
    out.critical.d = d;
    Ok(out)
}

/// [`max_critical_asymptotic`] parameterized by `ln d`, for dimensions past `u64`.
/// The returned `critical.d` saturates at `u64::MAX`.
pub fn max_critical_asymptotic_log_dim(ln_d: f64, alpha: f64) -> Result<AsymptoticCriticalValue> {
    if !(ln_d > 1.0) || !ln_d.is_finite() {
        return Err(Error::domain(format!("asymptotic critical value needs ln d > 1, got {ln_d}")));
    }
    check_probability(alpha, "alpha")?;
    let scale = (2.0 * ln_d).sqrt();
    let gumbel = (-(-alpha).ln_1p()).ln();
    let value = scale - gumbel / scale - (ln_d.ln() + (4.0 * PI).ln()) / (2.0 * scale);
    Ok(AsymptoticCriticalValue {
        critical: CriticalValue {
            d: ln_d.exp().min(u64::MAX as f64) as u64,
            alpha,
            value,
            statistic: Statistic::OneSided,
            method: CriticalMethod::Asymptotic,
        },
        scale,
        a: 1.0 - value * value / (2.0 * ln_d),
    })
}

/// Smallest (real) `d` beyond which the expansion's `a(d)` is non-negative.
///
/// `a(d) ≥ 0` exactly when `ln(-ln(1-α)) + (ln ln d + ln 4π)/2 ≥ 0`.
pub fn asymptotic_a_nonnegative_from(alpha: f64) -> Result<f64> {
    check_probability(alpha, "alpha")?;
    let gumbel = (-(-alpha).ln_1p()).ln();
    let ln_ln_d = -2.0 * gumbel - (4.0 * PI).ln();
    Ok(ln_ln_d.exp().exp().max(3.0))
}

/// `P(max_j Z_j > t) = 1 - Φ(t)^d`, or `1 - (2Φ(t) - 1)^d` for the two-sided
/// statistic, computed in the log domain.
pub fn gaussian_max_exceed(d: u64, t: f64, statistic: Statistic) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    if t.is_nan() {
        return Err(Error::domain("threshold is NaN"));
    }
    let log_inside = match statistic {
        Statistic::OneSided => normal_log_cdf(t),
        Statistic::TwoSided => {
            if t < 0.0 {
                return Err(Error::domain(format!(
                    "two-sided threshold must be non-negative, got {t}"
                )));
            }
            (-2.0 * normal_sf(t)).ln_1p()
        }
    };
    Ok(-(d as f64 * log_inside).exp_m1())
}
