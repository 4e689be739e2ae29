//! Monte Carlo estimates of `P(max_j S_nj > t)` for `S_n = n^{-1/2} Σ_i X_i`
//! with i.i.d. coordinates.
//!
//! Two estimators share one replication kernel:
//!
//! * **direct** simulates all `d` columns per replication and records whether
//!   the maximum exceeds the threshold;
//! * **column-power** simulates a single column per replication, estimates the
//!   per-column non-exceedance `p₁`, and reports `1 - p₁^d`.
//!
//! Every replication owns a ChaCha8 stream seeded from
//! `(master_seed, replication_index)` alone, and per-threshold counts reduce by
//! integer addition, so the result does not depend on the worker count.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_extremes::{gaussian_max_exceed, max_critical_exact, normal_isf, Statistic};
use crate::heavy_tail_dist::{HeavyTailDistribution, TailIndex};

pub const DEFAULT_DRAW_BUDGET: u64 = 2_000_000_000;
pub const DRAW_BUDGET_ENV: &str = "MAXGAP_DRAW_BUDGET";
pub const DEFAULT_CI_LEVEL: f64 = 0.99;

/// Replications handed to a worker at a time; bounds scheduling overhead only.
const MIN_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DataLaw {
    #[serde(rename = "heavy")]
    HeavyTail,
    #[serde(rename = "gaussian")]
    StandardGaussian,
}

impl DataLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            DataLaw::HeavyTail => "heavy",
            DataLaw::StandardGaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Direct,
    ColumnPower,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Direct => "direct",
            Estimator::ColumnPower => "column-power",
        }
    }
}

fn default_ci_level() -> f64 {
    DEFAULT_CI_LEVEL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: TailIndex,
    pub n: u64,
    pub d: u64,
    pub alpha: f64,
    pub statistic: Statistic,
    /// `None` means the exact Gaussian critical value for `(d, alpha, statistic)`.
    #[serde(default)]
    pub threshold: Option<f64>,
    pub data_law: DataLaw,
    pub estimator: Estimator,
    pub reps: u64,
    pub master_seed: u64,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
}

impl ExperimentConfig {
    /// Heavy-tailed, one-sided, column-power config at the exact critical value.
    pub fn new(m: TailIndex, n: u64, d: u64, alpha: f64, reps: u64, master_seed: u64) -> Self {
        ExperimentConfig {
            m,
            n,
            d,
            alpha,
            statistic: Statistic::OneSided,
            threshold: None,
            data_law: DataLaw::HeavyTail,
            estimator: Estimator::ColumnPower,
            reps,
            master_seed,
            ci_level: DEFAULT_CI_LEVEL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.reps == 0 {
            return Err(Error::Config(format!(
                "n, d and reps must all be ≥ 1 (n={}, d={}, reps={})",
                self.n, self.d, self.reps
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Config(format!("ci_level must lie in (0, 1), got {}", self.ci_level)));
        }
        if let Some(t) = self.threshold {
            if t.is_nan() {
                return Err(Error::Config("threshold is NaN".into()));
            }
        }
        Ok(())
    }

    /// The threshold the test compares `max_j S_nj` against.
    pub fn resolved_threshold(&self) -> Result<f64> {
        match self.threshold {
            Some(t) => Ok(t),
            None => Ok(max_critical_exact(self.d, self.alpha, self.statistic)?.value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimateFlag {
    /// No column exceeded; `upper` is the rule-of-three bound on `p_hat`.
    NoExceedances { upper: f64 },
    /// Every column exceeded, so `p₁ = 0` and the delta-method error is degenerate.
    AllExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnDiagnostics {
    /// Estimated per-column non-exceedance probability.
    pub p1_hat: f64,
    pub column_exceedances: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_level: f64,
    pub reps: u64,
    pub master_seed: u64,
    /// Replications (direct) or columns (column-power) above the threshold.
    pub exceedances: u64,
    pub elapsed: Duration,
    #[serde(default)]
    pub column: Option<ColumnDiagnostics>,
    #[serde(default)]
    pub flag: Option<EstimateFlag>,
}

impl McEstimate {
    /// `p_hat` and its interval; everything except wall time.
    pub fn same_outcome(&self, other: &McEstimate) -> bool {
        self.p_hat.to_bits() == other.p_hat.to_bits()
            && self.std_err.to_bits() == other.std_err.to_bits()
            && self.ci_low.to_bits() == other.ci_low.to_bits()
            && self.ci_high.to_bits() == other.ci_high.to_bits()
            && self.exceedances == other.exceedances
            && self.reps == other.reps
            && self.master_seed == other.master_seed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaeEstimate {
    /// `p_hat - gaussian_term`
    pub gae: f64,
    /// Exact `P(max_j Z_j > t)`; carries no Monte Carlo error.
    pub gaussian_term: f64,
    pub threshold: f64,
    pub estimate: McEstimate,
}

/// SplitMix64 finalizer; a bijection on `u64`.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless seed for one replication (or sweep cell).
///
/// For a fixed master seed the map from index to seed is a bijection, so
/// indices never collide within a run.
pub fn derive_replication_seed(master_seed: u64, replication_index: u64) -> u64 {
    let key = mix64(master_seed ^ 0x6a09_e667_f3bc_c909);
    mix64(key.wrapping_add(replication_index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

pub fn replication_rng(master_seed: u64, replication_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_replication_seed(master_seed, replication_index))
}

/// Wilson score interval for a binomial proportion `p` observed over `trials`.
pub fn wilson_interval(p: f64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The exact endpoints at p ∈ {0, 1} are 0 and 1; keep them free of rounding.
    let lo = if p <= 0.0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if p >= 1.0 { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Two-sided normal quantile for a confidence level, e.g. 2.5758 for 0.99.
pub fn z_for_level(level: f64) -> Result<f64> {
    normal_isf(0.5 * (1.0 - level))
}

/// Sampling law of a single coordinate.
#[derive(Debug, Clone, Copy)]
enum Coordinate {
    Heavy(HeavyTailDistribution),
    Gaussian,
}

impl Coordinate {
    fn for_config(config: &ExperimentConfig) -> Result<Self> {
        Ok(match config.data_law {
            DataLaw::HeavyTail => Coordinate::Heavy(HeavyTailDistribution::new(config.m)?),
            DataLaw::StandardGaussian => Coordinate::Gaussian,
        })
    }

    /// `n^{-1/2} Σ_{i ≤ n} X_i`
    #[inline]
    fn scaled_column_sum(&self, rng: &mut ChaCha8Rng, n: u64, inv_sqrt_n: f64) -> f64 {
        let mut sum = 0.0;
        match self {
            Coordinate::Heavy(dist) => {
                for _ in 0..n {
                    sum += dist.draw(rng);
                }
            }
            Coordinate::Gaussian => {
                for _ in 0..n {
                    let z: f64 = StandardNormal.sample(rng);
                    sum += z;
                }
            }
        }
        sum * inv_sqrt_n
    }
}

#[inline]
fn fold_statistic(statistic: Statistic, s: f64) -> f64 {
    match statistic {
        Statistic::OneSided => s,
        Statistic::TwoSided => s.abs(),
    }
}

/// Executes simulations, optionally inside a dedicated thread pool.
#[derive(Debug, Clone)]
pub struct Engine {
    workers: Option<usize>,
    draw_budget: u64,
}

impl Default for Engine {
    fn default() -> Self {
        Engine {
            workers: None,
            draw_budget: DEFAULT_DRAW_BUDGET,
        }
    }
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Default engine with the draw budget taken from `MAXGAP_DRAW_BUDGET` when set.
    pub fn from_env() -> Result<Self> {
        let mut engine = Self::default();
        if let Ok(raw) = std::env::var(DRAW_BUDGET_ENV) {
            let budget = raw
                .trim()
                .replace('_', "")
                .parse::<f64>()
                .ok()
                .filter(|b| *b >= 1.0 && b.is_finite())
                .ok_or_else(|| Error::Config(format!("{DRAW_BUDGET_ENV}={raw} is not a positive number")))?;
            engine.draw_budget = budget as u64;
        }
        Ok(engine)
    }

    /// Runs on a private pool of `workers` threads instead of the ambient one.
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers.max(1));
        self
    }

    /// Runs on whatever rayon pool the caller is in.
    pub fn with_ambient_pool(mut self) -> Self {
        self.workers = None;
        self
    }

    pub fn with_draw_budget(mut self, budget: u64) -> Self {
        self.draw_budget = budget;
        self
    }

    pub fn draw_budget(&self) -> u64 {
        self.draw_budget
    }

    pub fn workers(&self) -> Option<usize> {
        self.workers
    }

    pub(crate) fn install<T, F>(&self, f: F) -> Result<T>
    where
        T: Send,
        F: FnOnce() -> T + Send,
    {
        match self.workers {
            None => Ok(f()),
            Some(w) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| Error::ThreadPool(e.to_string()))?;
                Ok(pool.install(f))
            }
        }
    }

    fn check_budget(&self, draws: u128) -> Result<()> {
        if draws > self.draw_budget as u128 {
            Err(Error::BudgetExceeded {
                required: draws,
                budget: self.draw_budget,
            })
        } else {
            Ok(())
        }
    }

    /// Counts, for each threshold, the replications whose statistic exceeds it.
    fn count_exceedances<F>(&self, reps: u64, thresholds: &[f64], statistic: F) -> Result<Vec<u64>>
    where
        F: Fn(u64) -> f64 + Sync,
    {
        let k = thresholds.len();
        self.install(|| {
            (0..reps as usize)
                .into_par_iter()
                .with_min_len(MIN_CHUNK)
                .fold(
                    || vec![0u64; k],
                    |mut acc, i| {
                        let s = statistic(i as u64);
                        for (count, &t) in acc.iter_mut().zip(thresholds) {
                            if s > t {
                                *count += 1;
                            }
                        }
                        acc
                    },
                )
                .reduce(
                    || vec![0u64; k],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        a
                    },
                )
        })
    }

    pub fn simulate(&self, config: &ExperimentConfig) -> Result<McEstimate> {
        match config.estimator {
            Estimator::Direct => self.simulate_direct(config),
            Estimator::ColumnPower => self.simulate_column_power(config),
        }
    }

    /// Direct estimator at the config's threshold.
    pub fn simulate_direct(&self, config: &ExperimentConfig) -> Result<McEstimate> {
        let t = config.resolved_threshold()?;
        Ok(self.simulate_direct_at(config, &[t])?.remove(0))
    }

    /// Direct estimator evaluated at several thresholds on the same draws.
    pub fn simulate_direct_at(&self, config: &ExperimentConfig, thresholds: &[f64]) -> Result<Vec<McEstimate>> {
        config.validate()?;
        check_thresholds(thresholds)?;
        self.check_budget(config.n as u128 * config.d as u128 * config.reps as u128)?;
        let coordinate = Coordinate::for_config(config)?;
        let z = z_for_level(config.ci_level)?;
        let start = Instant::now();
        let inv_sqrt_n = 1.0 / (config.n as f64).sqrt();
        let counts = self.count_exceedances(config.reps, thresholds, |i| {
            let mut rng = replication_rng(config.master_seed, i);
            let mut max = f64::NEG_INFINITY;
            for _ in 0..config.d {
                let s = coordinate.scaled_column_sum(&mut rng, config.n, inv_sqrt_n);
                max = max.max(fold_statistic(config.statistic, s));
            }
            max
        })?;
        let elapsed = start.elapsed();
        Ok(counts
            .into_iter()
            .map(|c| direct_estimate(c, config, z, elapsed))
            .collect())
    }

    /// Column-power estimator at the config's threshold.
    pub fn simulate_column_power(&self, config: &ExperimentConfig) -> Result<McEstimate> {
        let t = config.resolved_threshold()?;
        Ok(self.simulate_column_power_at(config, &[t])?.remove(0))
    }

    /// Column-power estimator evaluated at several thresholds on the same draws.
    pub fn simulate_column_power_at(
        &self,
        config: &ExperimentConfig,
        thresholds: &[f64],
    ) -> Result<Vec<McEstimate>> {
        config.validate()?;
        check_thresholds(thresholds)?;
        self.check_budget(config.n as u128 * config.reps as u128)?;
        let coordinate = Coordinate::for_config(config)?;
        let z = z_for_level(config.ci_level)?;
        let start = Instant::now();
        let inv_sqrt_n = 1.0 / (config.n as f64).sqrt();
        let counts = self.count_exceedances(config.reps, thresholds, |i| {
            let mut rng = replication_rng(config.master_seed, i);
            fold_statistic(config.statistic, coordinate.scaled_column_sum(&mut rng, config.n, inv_sqrt_n))
        })?;
        let elapsed = start.elapsed();
        Ok(counts
            .into_iter()
            .map(|c| column_power_estimate(c, config, z, elapsed))
            .collect())
    }

    /// Monte Carlo rejection probability minus the exact Gaussian one.
    pub fn gae_at_threshold(&self, config: &ExperimentConfig) -> Result<GaeEstimate> {
        let threshold = config.resolved_threshold()?;
        let estimate = self.simulate(config)?;
        let gaussian_term = gaussian_max_exceed(config.d, threshold, config.statistic)?;
        Ok(GaeEstimate {
            gae: estimate.p_hat - gaussian_term,
            gaussian_term,
            threshold,
            estimate,
        })
    }
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::domain("at least one threshold is required"));
    }
    if thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::domain("threshold is NaN"));
    }
    Ok(())
}

fn direct_estimate(count: u64, config: &ExperimentConfig, z: f64, elapsed: Duration) -> McEstimate {
    let reps = config.reps as f64;
    let p_hat = count as f64 / reps;
    let (ci_low, ci_high) = wilson_interval(p_hat, config.reps, z);
    McEstimate {
        p_hat,
        std_err: (p_hat * (1.0 - p_hat) / reps).sqrt(),
        ci_low: ci_low.min(p_hat),
        ci_high: ci_high.max(p_hat),
        ci_level: config.ci_level,
        reps: config.reps,
        master_seed: config.master_seed,
        exceedances: count,
        elapsed,
        column: None,
        flag: None,
    }
}

/// `1 - (1 - q)^d` in the log domain.
#[inline]
fn power_complement(q: f64, d: f64) -> f64 {
    if q >= 1.0 {
        1.0
    } else {
        -(d * (-q).ln_1p()).exp_m1()
    }
}

fn column_power_estimate(count: u64, config: &ExperimentConfig, z: f64, elapsed: Duration) -> McEstimate {
    let reps = config.reps as f64;
    let d = config.d as f64;
    let q_hat = count as f64 / reps;
    let p1_hat = 1.0 - q_hat;
    let p_hat = power_complement(q_hat, d);
    let (q_lo, q_hi) = wilson_interval(q_hat, config.reps, z);
    let mut ci_low = power_complement(q_lo, d).min(p_hat);
    let mut ci_high = power_complement(q_hi, d).max(p_hat);
    let (std_err, flag) = if count == 0 {
        let upper = power_complement((3.0 / reps).min(1.0), d);
        ci_low = 0.0;
        ci_high = upper;
        (0.0, Some(EstimateFlag::NoExceedances { upper }))
    } else if count == config.reps {
        ci_high = 1.0;
        (0.0, Some(EstimateFlag::AllExceeded))
    } else {
        // d · p₁^{d-1} · se(p₁)
        let slope = d * ((d - 1.0) * (-q_hat).ln_1p()).exp();
        (slope * (p1_hat * q_hat / reps).sqrt(), None)
    };
    McEstimate {
        p_hat,
        std_err,
        ci_low,
        ci_high,
        ci_level: config.ci_level,
        reps: config.reps,
        master_seed: config.master_seed,
        exceedances: count,
        elapsed,
        column: Some(ColumnDiagnostics {
            p1_hat,
            column_exceedances: count,
        }),
        flag,
    }
}
