//! End-to-end runs of the `quadtrack` binary.

use std::path::Path;
use std::process::{Command, Output};

use quadtrack::cli::output::{parse_json_summary, CSV_HEADER};

fn quadtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadtrack"))
        .args(args)
        .env_remove("QUADTRACK_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SWEEP: &str = "[sweep]\nparameter = \"p_t\"\nvalues = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0]\n\
[engine]\nmode = \"both\"\ntrials = 2000\nseed = 9\n";

#[test]
fn run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SWEEP);
    let out = dir.path().join("out");
    let o = quadtrack(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 6);
        assert!(fields[2].parse::<f64>().is_ok() && fields[4].parse::<f64>().is_ok(), "{line}");
    }
    assert_eq!(String::from_utf8_lossy(&o.stdout), csv);

    let summary = parse_json_summary(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(summary.rows.len(), 10);
    assert_eq!(summary.seed, 9);
    assert_eq!(summary.config.engine.trials, 2000);
}

#[test]
fn rerun_and_worker_count_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SWEEP);
    let mut bodies = Vec::new();
    for (k, workers) in ["1", "3", "1"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let o = quadtrack(&["run", "--config", &cfg, "--workers", workers, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        bodies.push(std::fs::read(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0], bodies[2]);
}

#[test]
fn malformed_worker_environment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SWEEP);
    let o = Command::new(env!("CARGO_BIN_EXE_quadtrack"))
        .args(["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()])
        .env("QUADTRACK_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("QUADTRACK_WORKERS"));
}

#[test]
fn invalid_window_length_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SWEEP}[link]\nl_s = 0\n"));
    let out = dir.path().join("out");
    let o = quadtrack(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("link.l_s"));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_reported_with_its_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[geometry]\nradius = 1.0\n");
    let o = quadtrack(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("geometry.radius"));
}

#[test]
fn missing_config_file_fails() {
    let o = quadtrack(&["run", "--config", "/nonexistent/experiment.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/experiment.toml"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(quadtrack(&[]).status.code(), Some(2));
    assert_eq!(quadtrack(&["run"]).status.code(), Some(2));
    assert_eq!(quadtrack(&["fly"]).status.code(), Some(2));
    assert_eq!(quadtrack(&["--help"]).status.code(), Some(0));
}

#[test]
fn empty_sweep_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sweep]\nparameter = \"p_t\"\nvalues = []\n");
    let out = dir.path().join("out");
    let o = quadtrack(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.join("sweep.csv").exists());
}

#[test]
fn minimal_config_runs_a_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sweep]\nparameter = \"p_t\"\nvalues = [100.0]\n[engine]\ntrials = 1000\n");
    let out = dir.path().join("out");
    let o = quadtrack(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn run_without_sweep_table_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[engine]\ntrials = 1000\n");
    let o = quadtrack(&["run", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`sweep`"));
}

#[test]
fn command_line_overrides_take_effect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SWEEP);
    let out = dir.path().join("out");
    let o = quadtrack(&[
        "run", "--config", &cfg, "--out", out.to_str().unwrap(), "--trials", "300", "--seed", "4", "--mode", "mc",
    ]);
    assert!(o.status.success());
    let summary = parse_json_summary(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(summary.seed, 4);
    assert!(summary.rows.iter().all(|r| r.trials == 300 && r.analytic.is_none()));
}

#[test]
fn optimize_reports_an_interior_radius() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[noise]\nbackground_gain = 1.6e5\n[link]\np_t = 1000.0\n[output]\nname = \"opt\"\n",
    );
    let out = dir.path().join("out");
    let o = quadtrack(&[
        "optimize-ra", "--config", &cfg, "--min", "5e-4", "--max", "2e-2", "--points", "12", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("interior minimum"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("opt_optimum.json")).unwrap()).unwrap();
    let r_a = json["optimum"]["r_a"].as_f64().unwrap();
    assert!(r_a > 5e-4 && r_a < 2e-2);
}

#[test]
fn optimize_rejects_an_inverted_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = quadtrack(&["optimize-ra", "--config", &cfg, "--min", "1e-2", "--max", "1e-3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn audit_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[link]\nl_s = 4\n[output]\nname = \"chk\"\n");
    let out = dir.path().join("out");
    let o = quadtrack(&["audit", "--config", &cfg, "--draws", "2000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("chk_audit.csv")).unwrap();
    // 13 fading levels times windows {1, 2, 4}
    assert_eq!(table.lines().count(), 1 + 13 * 3);
}

#[test]
fn bundled_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = quadtrack::cli::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(cfg.sweep().is_ok(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
