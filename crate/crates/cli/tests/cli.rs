use std::path::Path;
use std::process::{Command, Output};

fn maxgap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxgap"))
        .args(args)
        .env_remove("MAXGAP_DRAW_BUDGET")
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn critval_prints_exact_value() {
    let v = stdout_json(&maxgap(&["critval", "--d", "1000", "--alpha", "0.05"]));
    assert!((v["value"].as_f64().unwrap() - 3.884_397_501_207_565).abs() < 1e-12);
    assert_eq!(v["statistic"], "one-sided-max");
    let v = stdout_json(&maxgap(&["critval", "--d", "1000", "--alpha", "0.05", "--asymptotic"]));
    assert_eq!(v["critical"]["method"], "asymptotic");
    let v = stdout_json(&maxgap(&["critval", "--d", "10", "--alpha", "0.05", "--two-sided"]));
    assert_eq!(v["statistic"], "two-sided-max");
}

#[test]
fn bad_input_exits_nonzero() {
    let out = maxgap(&["critval", "--d", "10", "--alpha", "1.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
    assert!(!maxgap(&["moments", "--m", "2"]).status.success());
}

#[test]
fn moments_report_identity() {
    let v = stdout_json(&maxgap(&["moments", "--m", "3"]));
    assert!(v["deviation"].as_f64().unwrap().abs() < 1e-6);
    assert!((v["sigma_squared"].as_f64().unwrap() - 2.561_232_131_208_959_5).abs() < 1e-9);
}

#[test]
fn sample_is_seeded() {
    let a = maxgap(&["sample", "--m", "3", "--count", "50", "--seed", "9"]);
    let b = maxgap(&["sample", "--m", "3", "--count", "50", "--seed", "9"]);
    let c = maxgap(&["sample", "--m", "3", "--count", "50", "--seed", "10"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let xs: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(xs.len(), 50);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("draws.txt");
    let out = maxgap(&["sample", "--m", "3", "--count", "50", "--seed", "9", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn size_row_is_reproducible() {
    let args = [
        "size", "--m", "3", "--n", "20", "--d", "30", "--alpha", "0.05", "--reps", "2000", "--seed", "4",
        "--estimator", "direct",
    ];
    let a = stdout_json(&maxgap(&args));
    let mut with_threads = args.to_vec();
    with_threads.extend(["--threads", "3"]);
    let b = stdout_json(&maxgap(&with_threads));
    assert_eq!(a["estimate"]["p_hat"], b["estimate"]["p_hat"]);
    assert_eq!(a["config"]["estimator"], "direct");
    let g = stdout_json(&maxgap(&[
        "size", "--m", "3", "--n", "5", "--d", "10", "--alpha", "0.05", "--reps", "2000", "--seed", "4", "--data",
        "gaussian", "--two-sided",
    ]));
    assert_eq!(g["config"]["data_law"], "gaussian");
    assert_eq!(g["config"]["statistic"], "two-sided-max");
}

#[test]
fn draw_budget_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_maxgap"))
        .args(["size", "--m", "3", "--n", "100", "--d", "100", "--alpha", "0.05", "--reps", "1000", "--seed", "1"])
        .args(["--estimator", "direct"])
        .env("MAXGAP_DRAW_BUDGET", "1000")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn bounds_reports_regime() {
    let v = stdout_json(&maxgap(&["bounds", "--m", "2.5", "--n", "100", "--d", "100000", "--alpha", "0.05"]));
    assert_eq!(v["regime"]["regime"], "supercritical");
    assert!((v["nagaev"]["bound"].as_f64().unwrap() - 0.822_565_715_282_579_6).abs() < 1e-10);
    assert!((v["phase_threshold"].as_f64().unwrap() - 10f64.sqrt()).abs() < 1e-12);
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("spec.toml");
    std::fs::write(
        &path,
        r#"
m = 3.0
alpha = 0.05
n_grid = [10, 20]
estimator = "column-power"
statistic = "one-sided-max"
reps = 500
master_seed = 3

[[growth_rules]]
coefficient = 1.0
exponent = 0.5

[[growth_rules]]
coefficient = 1.0
exponent = 1.5
"#,
    )
    .unwrap();
    path
}

#[test]
fn sweep_writes_outputs_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("out.json");
    let out = maxgap(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out-csv",
        csv.to_str().unwrap(),
        "--out-json",
        json.to_str().unwrap(),
        "--reps",
        "700",
        "--threads",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("m,n,d,exponent,alpha"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["spec"]["reps"], 700);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn sweep_with_failed_cell_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_maxgap"))
        .args(["sweep", "--config", config.to_str().unwrap(), "--estimator", "direct"])
        .env("MAXGAP_DRAW_BUDGET", "200000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let errors = v["rows"].as_array().unwrap().iter().filter(|r| !r["error"].is_null()).count();
    assert!(errors >= 1);
}

#[test]
fn selftest_passes() {
    let out = maxgap(&["selftest", "--json"]);
    let v = stdout_json(&out);
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 6);
    let out = maxgap(&["selftest"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}
