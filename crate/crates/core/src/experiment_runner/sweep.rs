use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{config_hash, run_experiment};
use super::persist::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::gaussian_extremes::Statistic;
use crate::heavy_tail_dist::TailIndex;
use crate::monte_carlo::{
    derive_replication_seed, DataLaw, Engine, Estimator, ExperimentConfig, McEstimate, DEFAULT_CI_LEVEL,
};
use crate::theory_bounds::{classify_regime, RegimeReport};

/// `d = ⌈coefficient · n^exponent⌉`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRule {
    pub coefficient: f64,
    pub exponent: f64,
}

fn default_data_law() -> DataLaw {
    DataLaw::HeavyTail
}

fn default_ci_level() -> f64 {
    DEFAULT_CI_LEVEL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub m: TailIndex,
    pub alpha: f64,
    pub n_grid: Vec<u64>,
    pub growth_rules: Vec<GrowthRule>,
    pub estimator: Estimator,
    pub statistic: Statistic,
    pub reps: u64,
    pub master_seed: u64,
    #[serde(default = "default_data_law")]
    pub data_law: DataLaw,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
}

/// Relative slack under which `coefficient · n^exponent` counts as an integer,
/// so `100^0.5` maps to 10 even if `powf` lands a few ulps above.
const INTEGER_SNAP: f64 = 1e-9;

pub fn dimension_for(rule: &GrowthRule, n: u64) -> Result<u64> {
    let raw = rule.coefficient * (n as f64).powf(rule.exponent);
    if !raw.is_finite() || raw > u64::MAX as f64 {
        return Err(Error::Config(format!(
            "growth rule {}·n^{} overflows at n={n}",
            rule.coefficient, rule.exponent
        )));
    }
    let nearest = raw.round();
    let d = if (raw - nearest).abs() <= INTEGER_SNAP * nearest.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    Ok((d as u64).max(1))
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| e.context(format!("parsing {}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.growth_rules.is_empty() {
            return Err(Error::Config("n_grid and growth_rules must be non-empty".into()));
        }
        if self.n_grid.contains(&0) {
            return Err(Error::Config("n_grid entries must be ≥ 1".into()));
        }
        for rule in &self.growth_rules {
            if !(rule.exponent > 0.0 && rule.exponent.is_finite()) {
                return Err(Error::Config(format!("growth exponent must be positive, got {}", rule.exponent)));
            }
            if !(rule.coefficient > 0.0 && rule.coefficient.is_finite()) {
                return Err(Error::Config(format!(
                    "growth coefficient must be positive, got {}",
                    rule.coefficient
                )));
            }
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be ≥ 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Cell configs in row order: `n` outer, growth rule inner. Each cell's
    /// seed is derived from the master seed and its index.
    pub fn cells(&self) -> Vec<(u64, GrowthRule, Result<ExperimentConfig>)> {
        let mut out = Vec::with_capacity(self.n_grid.len() * self.growth_rules.len());
        for &n in &self.n_grid {
            for rule in &self.growth_rules {
                let index = out.len() as u64;
                let config = dimension_for(rule, n).map(|d| ExperimentConfig {
                    m: self.m,
                    n,
                    d,
                    alpha: self.alpha,
                    statistic: self.statistic,
                    threshold: None,
                    data_law: self.data_law,
                    estimator: self.estimator,
                    reps: self.reps,
                    master_seed: derive_replication_seed(self.master_seed, index),
                    ci_level: self.ci_level,
                });
                out.push((n, *rule, config));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell_index: u64,
    pub n: u64,
    pub d: u64,
    pub coefficient: f64,
    pub exponent: f64,
    pub config: Option<ExperimentConfig>,
    pub config_hash: Option<String>,
    pub regime: Option<RegimeReport>,
    pub estimate: Option<McEstimate>,
    pub gaussian_term: Option<f64>,
    pub gae: Option<f64>,
    pub nagaev_bound: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub spec: SweepSpec,
    pub spec_hash: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn failed_cells(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

fn run_cell(engine: &Engine, index: u64, n: u64, rule: GrowthRule, config: Result<ExperimentConfig>) -> SweepRow {
    let mut row = SweepRow {
        cell_index: index,
        n,
        d: 0,
        coefficient: rule.coefficient,
        exponent: rule.exponent,
        config: None,
        config_hash: None,
        regime: None,
        estimate: None,
        gaussian_term: None,
        gae: None,
        nagaev_bound: None,
        error: None,
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.d = config.d;
    row.regime = classify_regime(n, config.d, config.m).ok();
    row.config_hash = Some(config_hash(&config));
    match run_experiment(engine, &config) {
        Ok(result) => {
            row.estimate = Some(result.estimate);
            row.gaussian_term = Some(result.gaussian_term);
            row.gae = Some(result.gae);
            row.nagaev_bound = result.nagaev.map(|b| b.bound);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row.config = Some(config);
    row
}

/// Runs every cell; failures are recorded in their row and never abort the sweep.
pub fn run_sweep(engine: &Engine, spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let cells = spec.cells();
    let inner = engine.clone().with_ambient_pool();
    let rows = engine.install(|| {
        cells
            .into_par_iter()
            .enumerate()
            .map(|(i, (n, rule, config))| run_cell(&inner, i as u64, n, rule, config))
            .collect::<Vec<_>>()
    })?;
    Ok(SweepResult {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        spec_hash: config_hash(spec),
        rows,
    })
}
