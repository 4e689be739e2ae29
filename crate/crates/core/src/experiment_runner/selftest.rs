use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gaussian_extremes::{max_critical_exact, normal_log_cdf, normal_sf, Statistic};
use crate::heavy_tail_dist::{
    absolute_moment_check, absolute_moment_p, second_moment_p, sigma_squared, HeavyTailDistribution, TailIndex,
};
use crate::monte_carlo::{Engine, Estimator, ExperimentConfig};
use crate::theory_bounds::e_minus_m_envelope;

pub const MOMENT_TOLERANCE: f64 = 1e-6;
pub const SIGMA_TOLERANCE: f64 = 1e-9;
pub const VARIANCE_TOLERANCE: f64 = 1e-8;
pub const CRITICAL_TOLERANCE: f64 = 1e-12;
pub const ENVELOPE_REL_TOLERANCE: f64 = 1e-4;
pub const AGREEMENT_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub deviation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub m: TailIndex,
    pub sigma: f64,
    pub sigma_squared: f64,
    /// `(1 + 2m) / σ_m^m`
    pub moment_under_p: f64,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

fn check(name: impl Into<String>, deviation: f64, tolerance: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        // NaN deviations fail
        passed: deviation <= tolerance,
        deviation,
        tolerance,
    }
}

fn failed(name: impl Into<String>) -> CheckOutcome {
    check(name, f64::INFINITY, 0.0)
}

/// Self-test for the default tail index `m = 3`.
pub fn self_test(engine: &Engine) -> Result<SelfTestReport> {
    let dist = HeavyTailDistribution::new(TailIndex::new(3.0)?)?;
    Ok(self_test_for(engine, &dist))
}

/// Runs every identity check against `dist`. Failures are reported, not raised.
pub fn self_test_for(engine: &Engine, dist: &HeavyTailDistribution) -> SelfTestReport {
    let m = dist.tail_index();
    let mv = m.value();
    let mut checks = Vec::new();

    checks.push(match absolute_moment_check(m, 1e-9) {
        Ok(v) => check("moment identity (base law)", (v - (1.0 + 2.0 * mv)).abs(), MOMENT_TOLERANCE),
        Err(_) => failed("moment identity (base law)"),
    });

    let fresh = sigma_squared(m, dist.quadrature_tolerance());
    checks.push(match fresh {
        Ok(s2) => check("stored sigma matches recomputation", (dist.sigma_squared() - s2).abs(), SIGMA_TOLERANCE),
        Err(_) => failed("stored sigma matches recomputation"),
    });

    checks.push(match second_moment_p(dist, 1e-10) {
        Ok(v) => check("unit variance of rescaled law", (v - 1.0).abs(), VARIANCE_TOLERANCE),
        Err(_) => failed("unit variance of rescaled law"),
    });

    checks.push(match (absolute_moment_p(dist, 1e-9), fresh) {
        (Ok(v), Ok(s2)) => {
            let target = (1.0 + 2.0 * mv) / s2.powf(mv / 2.0);
            check("moment identity (rescaled law)", (v - target).abs(), MOMENT_TOLERANCE)
        }
        _ => failed("moment identity (rescaled law)"),
    });

    let mut worst: f64 = 0.0;
    for d in [1u64, 100, 10_000, 1_000_000] {
        for alpha in [0.01, 0.05, 0.1] {
            for stat in [Statistic::OneSided, Statistic::TwoSided] {
                let dev = match max_critical_exact(d, alpha, stat) {
                    Ok(c) => {
                        let inside = match stat {
                            Statistic::OneSided => normal_log_cdf(c.value),
                            Statistic::TwoSided => (-2.0 * normal_sf(c.value)).ln_1p(),
                        };
                        ((d as f64 * inside).exp() - (1.0 - alpha)).abs()
                    }
                    Err(_) => f64::INFINITY,
                };
                worst = worst.max(dev);
            }
        }
    }
    checks.push(check("critical value forward equations", worst, CRITICAL_TOLERANCE));

    let mut worst: f64 = 0.0;
    for big_m in [1.0, 5.0, 10.0] {
        worst = worst.max(match e_minus_m_envelope(1_000_000, big_m) {
            Ok((p, l)) => ((p - l) / l).abs(),
            Err(_) => f64::INFINITY,
        });
    }
    checks.push(check("exp(-M) envelope at d = 1e6", worst, ENVELOPE_REL_TOLERANCE));

    let mut cfg = ExperimentConfig::new(m, 20, 50, 0.05, 20_000, 0x5e1f_7e57);
    let agreement = (|| -> Result<f64> {
        let power = engine.simulate_column_power(&cfg)?;
        cfg.estimator = Estimator::Direct;
        let direct = engine.simulate_direct(&cfg)?;
        let combined = (power.std_err.powi(2) + direct.std_err.powi(2)).sqrt();
        Ok((power.p_hat - direct.p_hat).abs() / combined)
    })();
    checks.push(match agreement {
        Ok(z) => check("direct vs column-power (std errors)", z, AGREEMENT_SIGMAS),
        Err(_) => failed("direct vs column-power (std errors)"),
    });

    let passed = checks.iter().all(|c| c.passed);
    SelfTestReport {
        m,
        sigma: dist.sigma(),
        sigma_squared: dist.sigma_squared(),
        moment_under_p: dist.absolute_moment(),
        checks,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_on_fresh_build() {
        let report = self_test(&Engine::new()).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
        assert!(report.passed);
        assert!((report.moment_under_p - 7.0 / report.sigma.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn perturbed_sigma_fails_moment_check() {
        let m = TailIndex::new(3.0).unwrap();
        let good = HeavyTailDistribution::new(m).unwrap();
        let bad = HeavyTailDistribution::with_sigma_unchecked(m, good.sigma() * 1.01);
        let report = self_test_for(&Engine::new(), &bad);
        assert!(!report.passed);
        let by_name = |n: &str| report.checks.iter().find(|c| c.name == n).unwrap().passed;
        assert!(!by_name("moment identity (rescaled law)"));
        assert!(!by_name("unit variance of rescaled law"));
        assert!(!by_name("stored sigma matches recomputation"));
        assert!(by_name("moment identity (base law)"));
    }
}
