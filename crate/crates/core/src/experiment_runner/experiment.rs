use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::heavy_tail_dist::HeavyTailDistribution;
use crate::monte_carlo::{Engine, ExperimentConfig, McEstimate};
use crate::theory_bounds::{classify_regime, nagaev_size_lower_bound, NagaevBound, RegimeReport};

/// First 16 hex digits of the SHA-256 of the config's canonical JSON.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub threshold: f64,
    pub estimate: McEstimate,
    pub gaussian_term: f64,
    pub gae: f64,
    /// `None` when `n < 2`.
    pub regime: Option<RegimeReport>,
    /// `None` when the threshold lies outside the bound's tail region.
    pub nagaev: Option<NagaevBound>,
}

pub fn run_experiment(engine: &Engine, config: &ExperimentConfig) -> Result<ExperimentResult> {
    let hash = config_hash(config);
    let wrap = |e: Error| {
        e.context(format!(
            "experiment {hash} (m={}, n={}, d={}, alpha={}, {}, {})",
            config.m,
            config.n,
            config.d,
            config.alpha,
            config.estimator.as_str(),
            config.data_law.as_str()
        ))
    };
    config.validate().map_err(wrap)?;
    let gae = engine.gae_at_threshold(config).map_err(wrap)?;
    let regime = classify_regime(config.n, config.d, config.m).ok();
    let dist = HeavyTailDistribution::new(config.m).map_err(wrap)?;
    let nagaev = nagaev_size_lower_bound(&dist, config.n, config.d, gae.threshold).ok();
    Ok(ExperimentResult {
        config: config.clone(),
        config_hash: hash,
        threshold: gae.threshold,
        estimate: gae.estimate,
        gaussian_term: gae.gaussian_term,
        gae: gae.gae,
        regime,
        nagaev,
    })
}
