use std::path::Path;
use std::process::{Command, Output};

const TINY: [&str; 12] = [
    "--set", "N=400", "--set", "M=200", "--set", "K=400", "--set", "N2=40", "--set", "m=15", "--set", "replicates=3",
];

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spde-drift"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn asymptotics_reports_the_first_eigenvalue() {
    let out = cli(&["asymptotics"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let lambda1 = report["lambda1"].as_f64().unwrap();
    assert!((lambda1 - 3.2239).abs() < 1e-4, "{lambda1}");
    assert_eq!(report["variances"].as_array().unwrap().len(), 3);
}

#[test]
fn zero_replicates_is_a_config_error() {
    let out = cli(&["experiment", "--set", "replicates=0"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn unknown_key_is_a_config_error() {
    let out = cli(&["asymptotics", "--set", "no_such_key=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = cli(&["asymptotics", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn help_lists_config_keys_and_exit_codes() {
    let text = stdout(&cli(&["--help"]));
    for key in ["theta_star.theta2", "epsilon", "n_time | N", "m_sites | m", "memory_cap"] {
        assert!(text.contains(key), "missing {key}");
    }
    assert!(text.contains("Exit codes"));
}

#[test]
fn simulate_is_reproducible_and_estimate_reads_it_back() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let mut args = vec!["simulate", "--rep", "2", "--output-dir", path(d)];
        args.extend(TINY);
        assert!(cli(&args).status.success());
    }
    for file in ["site_columns.csv", "time_rows.csv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap());
    }
    assert!(a.join("config.json").exists());

    let est_dir = dir.path().join("est");
    let mut args = vec!["estimate", "--input", path(&a), "--output-dir", path(&est_dir)];
    args.extend(TINY);
    let out = cli(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let theta2 = report["estimates"]["theta2"].as_f64().unwrap();
    assert!((theta2 - 0.2).abs() < 0.05, "{theta2}");
    assert!(est_dir.join("estimate.json").exists());
}

#[test]
fn experiment_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["experiment", "--threads", "2", "--output-dir", path(dir.path())];
    args.extend(TINY);
    let out = cli(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("replicates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    for file in ["summary.json", "config.json", "qq_theta0.csv", "hist_theta2.csv", "ecdf_theta1.csv"] {
        assert!(dir.path().join(file).exists(), "missing {file}");
    }
}
