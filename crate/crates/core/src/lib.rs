//! Desk-scale experiments on the moment-dependent phase transition of the
//! Gaussian max test.
//!
//! With `n` i.i.d. observations of a `d`-dimensional vector whose coordinates
//! have exactly `m` moments, the test rejecting when `max_j S_nj` exceeds the
//! Gaussian max critical value keeps its size for `d` well below `n^{m/2-1}`
//! and breaks down (size toward one) above it. This crate provides the
//! heavy-tailed coordinate law, Gaussian extreme critical values, Monte Carlo
//! size estimators, the analytic lower bound from the large-deviation argument,
//! and a sweep engine that writes phase-diagram data.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment_runner;
pub mod gaussian_extremes;
pub mod heavy_tail_dist;
pub mod monte_carlo;
pub mod quadrature;
pub mod theory_bounds;

pub use error::{Error, Result};
pub use experiment_runner::{run_experiment, run_sweep, self_test, ExperimentResult, SweepResult, SweepSpec};
pub use gaussian_extremes::{max_critical_asymptotic, max_critical_exact, CriticalValue, Statistic};
pub use heavy_tail_dist::{HeavyTailDistribution, TailIndex};
pub use monte_carlo::{DataLaw, Engine, Estimator, ExperimentConfig, McEstimate};
pub use theory_bounds::{classify_regime, nagaev_size_lower_bound, Regime, RegimeReport};
