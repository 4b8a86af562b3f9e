// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const INNOVATION: &str = r#"
name = "innovation"

[model]
kind = "classical-sde"
lambda_tilde = 1.0
gamma = 100.0
Q0 = 0.5
mode = "innovation"

[grid]
dt = 1e-3
T = 1.0

[ensemble]
n_trajectories = 2
master_seed = 5

[output]
trajectory_files = 2
"#;

const PHYSICAL: &str = r#"
name = "physical"

[model]
kind = "classical-sde"
lambda_tilde = 1.0
gamma = 1000.0
Q0 = 0.5

[grid]
dt = 1e-5
T = 2.0

[ensemble]
n_trajectories = 6
master_seed = 9

[analysis]
tests = ["shape"]

[output]
trajectory_files = 2
stride = 10
"#;

const UNPURIFIED: &str = r#"
[model]
kind = "qubit"
gamma = 1.0
omega = 1.0
rho0 = [0.0, 0.0, 0.5]

[grid]
dt = 1e-3
T = 0.5

[ensemble]
n_trajectories = 20
master_seed = 3

[analysis]
tests = ["purity"]
gate = true

[output]
trajectory_files = 0
"#;

fn spikes(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikes")).current_dir(dir).args(args).output().unwrap()
}

fn scenario(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_two_column_innovation_paths() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(&dir, "s.toml", INNOVATION);
    let o = spikes(dir.path(), &["simulate", "--config", &cfg, "--out", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("run");
    for id in 0..2 {
        let csv = fs::read_to_string(run.join(format!("trajectory_{id}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("time,Q"));
        assert_eq!(lines.count(), 1001);
        let dat = fs::read_to_string(run.join(format!("trajectory_{id}.dat"))).unwrap();
        assert!(dat.contains("# column 1: time"));
        assert!(dat.contains("# column 2: Q"));
        assert!(run.join(format!("trajectory_{id}.json")).exists());
    }
    assert!(run.join("report.json").exists());
}

#[test]
fn format_flag_restricts_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(&dir, "s.toml", INNOVATION);
    let o = spikes(dir.path(), &["simulate", "--config", &cfg, "--out", "run", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("run/trajectory_0.json").exists());
    assert!(!dir.path().join("run/trajectory_0.csv").exists());
}

#[test]
fn unknown_key_is_named() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(&dir, "s.toml", &INNOVATION.replace("gamma = 100.0", "gama = 100.0"));
    let o = spikes(dir.path(), &["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gama"), "{}", stderr(&o));
}

#[test]
fn syntax_error_reports_line() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(&dir, "s.toml", "[model]\nkind = \"qubit\"\ngamma = = 1\n");
    let o = spikes(dir.path(), &["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn invalid_parameter_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(&dir, "s.toml", &INNOVATION.replace("Q0 = 0.5", "Q0 = 1.5"));
    let o = spikes(dir.path(), &["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Q0"), "{}", stderr(&o));
}

#[test]
fn oversized_run_is_refused() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(&dir, "s.toml", &format!("{INNOVATION}budget = 100\n"));
    let o = spikes(dir.path(), &["simulate", "--config", &cfg, "--out", "run"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn gated_failure_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(&dir, "s.toml", UNPURIFIED);
    let o = spikes(dir.path(), &["analyze", "--config", &cfg, "--out", "run"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL  purity"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["tests"][0]["pass"], serde_json::Value::Bool(false));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(&dir, "s.toml", PHYSICAL);
    for (workers, out) in [("1", "one"), ("4", "four")] {
        let o = spikes(dir.path(), &["analyze", "--config", &cfg, "--workers", workers, "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |run: &str, f: &str| fs::read(dir.path().join(run).join(f)).unwrap();
    for f in ["events.csv", "events.json", "trajectory_0.csv", "trajectory_1.json", "spikes_1.dat"] {
        assert_eq!(read("one", f), read("four", f), "{f} differs");
    }
    let events = String::from_utf8(read("one", "events.csv")).unwrap();
    assert!(events.starts_with("trajectory,plateau,t_start,t_max,t_end,height,complete,plateau_clock"));
    assert!(events.lines().count() > 10);
}

#[test]
fn seed_flag_changes_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(&dir, "s.toml", INNOVATION);
    for (seed, out) in [("1", "a"), ("2", "b")] {
        assert!(spikes(dir.path(), &["simulate", "--config", &cfg, "--seed", seed, "--out", out]).status.success());
    }
    let read = |run: &str| fs::read(dir.path().join(run).join("trajectory_0.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
}

#[test]
fn figure_five_data() {
    let dir = TempDir::new().unwrap();
    let o = spikes(dir.path(), &["reproduce-figure", "5", "--out", "fig"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dat = fs::read_to_string(dir.path().join("fig/fig5_smoothed.dat")).unwrap();
    assert!(dat.contains("# column 1: step"));
    assert!(dat.lines().any(|l| l.starts_with("# column") && l.contains("Qs")));
    assert!(dir.path().join("fig/fig5_smoothed.csv").exists());
}

#[test]
fn unknown_figure_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = spikes(dir.path(), &["reproduce-figure", "7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = spikes(dir.path(), &["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--config"));
}

#[test]
fn too_few_events_fail_the_test_not_the_run() {
    let dir = TempDir::new().unwrap();
    let text = PHYSICAL.replace(r#"tests = ["shape"]"#, "tests = [\"max-law\"]\ngate = true");
    let cfg = scenario(&dir, "s.toml", &text);
    let o = spikes(dir.path(), &["analyze", "--config", &cfg, "--out", "run"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("insufficient data"));
    assert!(dir.path().join("run/events.csv").exists());
}
