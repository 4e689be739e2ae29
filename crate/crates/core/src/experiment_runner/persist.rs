use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::sweep::SweepResult;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 19] = [
    "m",
    "n",
    "d",
    "exponent",
    "alpha",
    "statistic",
    "estimator",
    "reps",
    "master_seed",
    "p_hat",
    "std_err",
    "ci_low",
    "ci_high",
    "gaussian_term",
    "gae",
    "nagaev_bound",
    "regime",
    "epsilon_equivalent",
    "elapsed_ms",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One line per sweep cell. Failed cells keep their grid coordinates and
/// leave the estimate columns empty.
pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    let spec = &result.spec;
    for row in &result.rows {
        let est = row.estimate.as_ref();
        let seed = row.config.as_ref().map(|c| c.master_seed.to_string()).unwrap_or_default();
        w.write_record([
            spec.m.to_string(),
            row.n.to_string(),
            row.d.to_string(),
            row.exponent.to_string(),
            spec.alpha.to_string(),
            spec.statistic.as_str().to_string(),
            spec.estimator.as_str().to_string(),
            spec.reps.to_string(),
            seed,
            opt(est.map(|e| e.p_hat)),
            opt(est.map(|e| e.std_err)),
            opt(est.map(|e| e.ci_low)),
            opt(est.map(|e| e.ci_high)),
            opt(row.gaussian_term),
            opt(row.gae),
            opt(row.nagaev_bound),
            row.regime.map(|r| r.regime.as_str().to_string()).unwrap_or_default(),
            opt(row.regime.map(|r| r.epsilon_equivalent)),
            opt(est.map(|e| e.elapsed.as_secs_f64() * 1e3)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, result)?;
    Ok(())
}

pub fn read_json(path: impl AsRef<Path>) -> Result<SweepResult> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
    let result: SweepResult = serde_json::from_reader(BufReader::new(file))?;
    if result.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema version {} (expected {SCHEMA_VERSION})",
            result.schema_version
        )));
    }
    Ok(result)
}

pub(crate) fn create(path: impl AsRef<Path>) -> Result<BufWriter<File>> {
    let path = path.as_ref();
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::from(e).context(format!("creating {}", path.display())))
}

impl SweepResult {
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(self, create(path)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = create(path)?;
        write_json(self, &mut w)?;
        w.flush()?;
        Ok(())
    }
}
