//! Closed-form quantities around the phase transition at `d = n^{m/2-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavy_tail_dist::{HeavyTailDistribution, TailIndex};

/// Default half-width of the near-critical band, in units of `ln n`.
pub const DEFAULT_BAND_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Subcritical,
    NearCritical,
    Supercritical,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::NearCritical => "near-critical",
            Regime::Supercritical => "supercritical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub n: u64,
    pub d: u64,
    pub m: TailIndex,
    /// `n^{m/2-1}`
    pub threshold_dim: f64,
    /// `ln d - (m/2 - 1) ln n`
    pub log_ratio: f64,
    pub band: f64,
    pub regime: Regime,
    /// The `ε` with `d = n^{m/2-1+ε}`.
    pub epsilon_equivalent: f64,
}

/// Dimension at which the Gaussian max critical value stops calibrating the test.
pub fn phase_threshold(n: u64, m: TailIndex) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    Ok((n as f64).powf(m.value() / 2.0 - 1.0))
}

pub fn classify_regime(n: u64, d: u64, m: TailIndex) -> Result<RegimeReport> {
    if n < 2 {
        return Err(Error::domain(format!("regime classification needs n ≥ 2, got {n}")));
    }
    classify_regime_with_band(n, d, m, DEFAULT_BAND_FACTOR * (n as f64).ln())
}

pub fn classify_regime_with_band(n: u64, d: u64, m: TailIndex, band: f64) -> Result<RegimeReport> {
    if n < 2 || d == 0 {
        return Err(Error::domain(format!("need n ≥ 2 and d ≥ 1, got n={n}, d={d}")));
    }
    if !(band >= 0.0) {
        return Err(Error::domain(format!("band must be non-negative, got {band}")));
    }
    let ln_n = (n as f64).ln();
    let exponent = m.value() / 2.0 - 1.0;
    let log_ratio = (d as f64).ln() - exponent * ln_n;
    let regime = if log_ratio > band {
        Regime::Supercritical
    } else if log_ratio < -band {
        Regime::Subcritical
    } else {
        Regime::NearCritical
    };
    Ok(RegimeReport {
        n,
        d,
        m,
        threshold_dim: phase_threshold(n, m)?,
        log_ratio,
        band,
        regime,
        epsilon_equivalent: log_ratio / ln_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NagaevBound {
    /// Lower bound `1 - [max(0, 1 - τ)]^d` on `P(max_j S_nj > t)`.
    pub bound: f64,
    /// `τ = 0.5 n (1 - F_m(t √n))`, via the cdf of the rescaled law.
    pub per_column_tail: f64,
    /// The same `τ` through `1 / (4 (σ t)^m n^{m/2-1} [ln(σ t √n) ∨ 1]²)`.
    pub per_column_tail_explicit: f64,
    /// `τ ≥ 1`, so the inner factor was clamped to zero.
    pub clamped: bool,
    /// The underlying inequality only holds for `n` large enough; this bound is
    /// a heuristic reference at finite `n`, never a certified one.
    pub asymptotic_only: bool,
}

/// Large-deviation lower bound on the rejection probability of the max test
/// with heavy-tailed coordinates.
///
/// Also a lower bound for the two-sided statistic, which dominates the one-sided one.
pub fn nagaev_size_lower_bound(dist: &HeavyTailDistribution, n: u64, d: u64, threshold: f64) -> Result<NagaevBound> {
    if n == 0 || d == 0 {
        return Err(Error::domain(format!("need n ≥ 1 and d ≥ 1, got n={n}, d={d}")));
    }
    let sigma = dist.sigma();
    let m = dist.tail_index().value();
    let root_n = (n as f64).sqrt();
    let scaled = sigma * threshold * root_n;
    if !(scaled >= 1.0) {
        return Err(Error::domain(format!(
            "σ_m·t·√n = {scaled} lies below 1, outside the tail region where the bound applies"
        )));
    }
    let nf = n as f64;
    let per_column_tail = 0.5 * nf * dist.survival(threshold * root_n);
    let log_clamp = scaled.ln().max(1.0);
    let per_column_tail_explicit =
        1.0 / (4.0 * (sigma * threshold).powf(m) * nf.powf(m / 2.0 - 1.0) * log_clamp * log_clamp);
    let clamped = per_column_tail >= 1.0;
    let bound = if clamped {
        1.0
    } else {
        -(d as f64 * (-per_column_tail).ln_1p()).exp_m1()
    };
    Ok(NagaevBound {
        bound,
        per_column_tail,
        per_column_tail_explicit,
        clamped,
        asymptotic_only: true,
    })
}

/// `((1 - M/d)^d, e^{-M})`
pub fn e_minus_m_envelope(d: u64, big_m: f64) -> Result<(f64, f64)> {
    if !(big_m > 0.0) || !(big_m < d as f64) {
        return Err(Error::domain(format!("envelope needs 0 < M < d, got M={big_m}, d={d}")));
    }
    let df = d as f64;
    Ok(((df * (-big_m / df).ln_1p()).exp(), (-big_m).exp()))
}
