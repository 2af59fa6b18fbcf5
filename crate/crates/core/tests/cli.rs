use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vibrosheet"));
    c.env_remove("VIBROSHEET_WORKERS");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tiny_spec(dir: &Path) -> PathBuf {
    let path = dir.join("spec.json");
    fs::write(
        &path,
        r#"{
  "grid": { "freqs": [14.0, 18.0], "phases": [0.0], "duties_left": [0.6], "duties_right": [0.0] },
  "protocol": { "transient_s": 0.5, "measure_s": 1.0 }
}"#,
    )
    .unwrap();
    path
}

#[test]
fn simulate_prints_signed_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = bin()
        .args(["simulate", "--config"])
        .arg(config("robot.json"))
        .arg("--out")
        .arg(&out)
        .args(["--freq", "16", "--duty-left", "0.6", "--duty-right", "0"])
        .args(["--transient", "0.5", "--measure", "1"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let v: f64 = text
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("velocity_cms="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(v > 0.0, "{text}");
    assert!(text.contains("cot="));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.lines().count() > 100);
    assert!(dir.path().join("traj.manifest.json").exists());
}

#[test]
fn missing_config_is_usage_error() {
    let o = bin()
        .args(["simulate", "--config", "/nonexistent/robot.json"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = bin().args(["sweep", "--bogus"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn coarse_step_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["simulate", "--config"])
        .arg(config("robot.json"))
        .arg("--out")
        .arg(dir.path().join("t.csv"))
        .args(["--dt", "0.01", "--duty-left", "0.6"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn sweep_writes_csv_and_manifest_then_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny_spec(dir.path());
    let out = dir.path().join("run");
    let o = bin()
        .arg("sweep")
        .arg("--spec")
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("runs=2 computed=2 reused=0 failed=0"));
    let csv = fs::read(out.join("sweep.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&csv).lines().count(), 3);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["spec_hash"].as_str().unwrap().len(), 64);

    let o = bin()
        .arg("sweep")
        .arg("--spec")
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .arg("--resume")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("computed=0 reused=2"));
    assert_eq!(fs::read(out.join("sweep.csv")).unwrap(), csv);
}

#[test]
fn workers_from_env_and_flag_agree() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny_spec(dir.path());
    let run = |out: &str, env: Option<&str>, flag: Option<&str>| {
        let mut c = bin();
        c.arg("sweep")
            .arg("--spec")
            .arg(&spec)
            .arg("--out")
            .arg(dir.path().join(out));
        if let Some(n) = env {
            c.env("VIBROSHEET_WORKERS", n);
        }
        if let Some(n) = flag {
            c.args(["--workers", n]);
        }
        let o = c.output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(dir.path().join(out).join("sweep.csv")).unwrap()
    };
    let a = run("env1", Some("1"), None);
    let b = run("flag4", None, Some("4"));
    assert_eq!(a, b);
    let o = bin()
        .env("VIBROSHEET_WORKERS", "0")
        .arg("sweep")
        .arg("--spec")
        .arg(&spec)
        .arg("--out")
        .arg(dir.path().join("zero"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_identical_grids_has_zero_rmse() {
    let dir = tempfile::tempdir().unwrap();
    // the simulated fixture read back as a measurement
    let sim = fs::read_to_string(fixture("comparison_sim.csv")).unwrap();
    let mut rows = sim.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (f, p, dl, dr, v) = (
        col("freq_hz"),
        col("phase_deg"),
        col("duty_left"),
        col("duty_right"),
        col("velocity_mps"),
    );
    let mut exp = String::from("freq_hz,phase_deg,duty_left,duty_right,velocity_mps\n");
    for line in rows {
        let c: Vec<&str> = line.split(',').collect();
        exp.push_str(&format!("{},{},{},{},{}\n", c[f], c[p], c[dl], c[dr], c[v]));
    }
    let exp_path = dir.path().join("exp.csv");
    fs::write(&exp_path, exp).unwrap();
    let out = dir.path().join("cmp");
    let o = bin()
        .arg("compare")
        .arg("--sim")
        .arg(fixture("comparison_sim.csv"))
        .arg("--exp")
        .arg(&exp_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("rmse_cms=0 "), "{}", stdout(&o));
    assert!(out.join("error_map.csv").exists());
    assert!(out.join("rmse_histogram.csv").exists());
}

#[test]
fn compare_reproduces_fixture_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("compare")
        .arg("--sim")
        .arg(fixture("comparison_sim.csv"))
        .arg("--exp")
        .arg(fixture("comparison_exp.csv"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let field = |name: &str| -> f64 {
        text.split_whitespace()
            .find_map(|kv| kv.strip_prefix(name))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((field("rmse_cms=") - 0.59).abs() < 0.005, "{text}");
    assert!((field("pcc=") - 0.80).abs() < 0.005, "{text}");
}

#[test]
fn validate_reports_and_rejects() {
    let o = bin()
        .arg("validate")
        .arg(config("sweep_small.json"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("valid sweep spec: 81 runs"));

    let o = bin()
        .arg("validate")
        .arg(config("robot.json"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("11 links, 10 joints"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut robot: serde_json::Value =
        serde_json::from_slice(&fs::read(config("robot.json")).unwrap()).unwrap();
    robot["materials"]["torsional_stiffness"] = serde_json::json!(-1.0);
    fs::write(&bad, robot.to_string()).unwrap();
    let o = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("torsional_stiffness"));
}
