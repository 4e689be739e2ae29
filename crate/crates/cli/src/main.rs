use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use maxgap_core::experiment_runner::{run_experiment, run_sweep, self_test, SweepSpec};
use maxgap_core::gaussian_extremes::{max_critical_asymptotic, max_critical_exact, Statistic};
use maxgap_core::heavy_tail_dist::{absolute_moment_check, sigma_squared, HeavyTailDistribution, TailIndex};
use maxgap_core::monte_carlo::{replication_rng, DataLaw, Engine, Estimator, ExperimentConfig};
use maxgap_core::quadrature::DEFAULT_TOLERANCE;
use maxgap_core::theory_bounds::{classify_regime, nagaev_size_lower_bound, phase_threshold};

#[derive(Parser)]
#[command(name = "maxgap", version, about = "Size of the Gaussian max test under heavy-tailed coordinates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gaussian max critical value
    Critval {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        two_sided: bool,
        /// extreme-value expansion instead of the exact root (one-sided only)
        #[arg(long, conflicts_with = "two_sided")]
        asymptotic: bool,
    },
    /// σ_m² and the m-th absolute moment against 1 + 2m
    Moments {
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
    },
    /// Draws from the unit-variance law, one per line
    Sample {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimated size of one configuration
    Size(SizeArgs),
    /// Run a sweep over (n, growth rule) cells
    Sweep(SweepArgs),
    /// Lower bound, regime and phase threshold
    Bounds {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        d: u64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        two_sided: bool,
    },
    /// Identity checks; exits non-zero if any fails
    Selftest {
        #[arg(long)]
        json: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Direct,
    ColumnPower,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Direct => Estimator::Direct,
            EstimatorArg::ColumnPower => Estimator::ColumnPower,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DataArg {
    Gaussian,
    Heavy,
}

#[derive(Args)]
struct SizeArgs {
    #[arg(long)]
    m: f64,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    d: u64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "column-power")]
    estimator: EstimatorArg,
    #[arg(long)]
    two_sided: bool,
    #[arg(long, value_enum, default_value = "heavy")]
    data: DataArg,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    // overrides for the config file
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[arg(long)]
    two_sided: bool,
}

fn statistic(two_sided: bool) -> Statistic {
    if two_sided {
        Statistic::TwoSided
    } else {
        Statistic::OneSided
    }
}

fn engine(threads: Option<usize>) -> Result<Engine> {
    let engine = Engine::from_env()?;
    Ok(match threads {
        Some(t) => engine.with_workers(t),
        None => engine,
    })
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Critval { d, alpha, two_sided, asymptotic } => {
            if asymptotic {
                print_json(&max_critical_asymptotic(d, alpha)?)?;
            } else {
                print_json(&max_critical_exact(d, alpha, statistic(two_sided))?)?;
            }
        }
        Command::Moments { m, tol } => {
            let m = TailIndex::new(m)?;
            let s2 = sigma_squared(m, tol)?;
            let moment = absolute_moment_check(m, tol)?;
            let target = 1.0 + 2.0 * m.value();
            print_json(&json!({
                "m": m,
                "sigma_squared": s2,
                "sigma": s2.sqrt(),
                "absolute_moment": moment,
                "expected": target,
                "deviation": moment - target,
                "moment_under_p": target / s2.powf(m.value() / 2.0),
            }))?;
        }
        Command::Sample { m, count, seed, out } => {
            let dist = HeavyTailDistribution::new(TailIndex::new(m)?)?;
            let mut rng = replication_rng(seed, 0);
            let sink: Box<dyn Write> = match &out {
                Some(path) => Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?),
                None => Box::new(io::stdout().lock()),
            };
            let mut w = BufWriter::new(sink);
            for _ in 0..count {
                writeln!(w, "{}", dist.draw(&mut rng))?;
            }
            w.flush()?;
        }
        Command::Size(args) => {
            let mut cfg = ExperimentConfig::new(TailIndex::new(args.m)?, args.n, args.d, args.alpha, args.reps, args.seed);
            cfg.estimator = args.estimator.into();
            cfg.statistic = statistic(args.two_sided);
            cfg.data_law = match args.data {
                DataArg::Gaussian => DataLaw::StandardGaussian,
                DataArg::Heavy => DataLaw::HeavyTail,
            };
            let result = run_experiment(&engine(args.threads)?, &cfg)?;
            print_json(&result)?;
        }
        Command::Sweep(args) => {
            let mut spec = SweepSpec::from_file(&args.config)?;
            if let Some(r) = args.reps {
                spec.reps = r;
            }
            if let Some(s) = args.seed {
                spec.master_seed = s;
            }
            if let Some(a) = args.alpha {
                spec.alpha = a;
            }
            if let Some(e) = args.estimator {
                spec.estimator = e.into();
            }
            if args.two_sided {
                spec.statistic = Statistic::TwoSided;
            }
            let result = run_sweep(&engine(args.threads)?, &spec)?;
            if let Some(path) = &args.out_csv {
                result.save_csv(path)?;
            }
            if let Some(path) = &args.out_json {
                result.save_json(path)?;
            }
            if args.out_csv.is_none() && args.out_json.is_none() {
                print_json(&result)?;
            } else {
                for row in &result.rows {
                    match (&row.estimate, &row.error) {
                        (Some(e), _) => eprintln!(
                            "n={:<6} d={:<10} exponent={:<5} p_hat={:.4} ± {:.4}",
                            row.n, row.d, row.exponent, e.p_hat, e.std_err
                        ),
                        (None, err) => eprintln!(
                            "n={:<6} d={:<10} exponent={:<5} error: {}",
                            row.n,
                            row.d,
                            row.exponent,
                            err.as_deref().unwrap_or("unknown")
                        ),
                    }
                }
            }
            let failed = result.failed_cells();
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", result.rows.len());
            }
            return Ok(failed == 0);
        }
        Command::Bounds { m, n, d, alpha, two_sided } => {
            let m = TailIndex::new(m)?;
            let dist = HeavyTailDistribution::new(m)?;
            let critical = max_critical_exact(d, alpha, statistic(two_sided))?;
            let nagaev = nagaev_size_lower_bound(&dist, n, d, critical.value);
            print_json(&json!({
                "critical": critical,
                "phase_threshold": phase_threshold(n, m)?,
                "regime": classify_regime(n, d, m).ok(),
                "nagaev": nagaev.as_ref().ok(),
                "nagaev_error": nagaev.as_ref().err().map(|e| e.to_string()),
            }))?;
        }
        Command::Selftest { json, threads } => {
            let report = self_test(&engine(threads)?)?;
            if json {
                print_json(&report)?;
            } else {
                println!("m = {}  sigma = {:.12}  sigma^2 = {:.12}", report.m, report.sigma, report.sigma_squared);
                println!("(1 + 2m) / sigma^m = {:.12}", report.moment_under_p);
                for c in &report.checks {
                    let tag = if c.passed { "PASS" } else { "FAIL" };
                    println!("{tag}  {:<40} deviation {:.3e} (tolerance {:.1e})", c.name, c.deviation, c.tolerance);
                }
            }
            return Ok(report.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
