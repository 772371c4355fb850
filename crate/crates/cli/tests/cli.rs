use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use quadfluid_cli::config::{parse_config, Scenario};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quadfluid"))
}

fn configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    paths
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("case.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--output-dir")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A short matched run on a coarse grid.
const SMALL_MATCHED: &str = r#"
scenario = "matched_coherent"
s_end = 0.5
output_cadence = 0.1
snapshot_cadence = 0.2

[grid]
half_width = 1.0
n_cells = 512

[quantum]
ds = 0.005
"#;

#[test]
fn shipped_configs_cover_every_scenario_and_validate() {
    let mut seen = Vec::new();
    for path in configs() {
        let cfg = parse_config(&fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen.push(cfg.scenario);
        let o = bin().arg("validate").arg(&path).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for s in Scenario::ALL {
        assert!(seen.contains(&s), "no config for {}", s.name());
    }
}

#[test]
fn list_scenarios_names_all() {
    let o = bin().arg("list-scenarios").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for s in Scenario::ALL {
        assert!(text.contains(s.name()));
    }
}

#[test]
fn validate_reports_every_error_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "scenario = \"envelope_only\"\ns_end = \"ten\"\n[strength.constant]\nk0 = 1.0\n\
         [emittance.constant]\neps0 = -1\n[emittance.exponential]\neps0 = 0.02\ngamma = 0.1\n",
    );
    let o = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(":2:9: `s_end`: expected a number"), "{err}");
    assert!(err.contains("`emittance`: ambiguous"), "{err}");
    assert!(err.contains("`beam.sigma0`: missing required key"), "{err}");
}

#[test]
fn negative_emittance_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "scenario = \"mismatched_breathing\"\n[beam]\nsigma0 = 0.15\n[emittance.constant]\neps0 = -1\n",
    );
    let o = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":5:8: `emittance.constant.eps0`"), "{}", stderr(&o));
}

#[test]
fn unknown_scenario_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "scenario = \"vortex\"\n");
    let o = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown scenario `vortex`"));
    let o = bin().arg("validate").arg(dir.path().join("absent.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runs_are_deterministic_and_write_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), SMALL_MATCHED);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&path, out, &["--quiet"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
    let names = [
        "trajectory.csv",
        "diagnostics.csv",
        "summary.json",
        "snapshots/wave_0000.csv",
        "snapshots/wave_0002.csv",
        "snapshots/wave_0004.csv",
        "snapshots/wave_0005.csv",
    ];
    for name in names {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        assert!(x == y, "{name} differs between runs");
    }
    assert_eq!(fs::read_dir(a.join("snapshots")).unwrap().count(), 4);

    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "pass");
    let metrics = summary["metrics"].as_array().unwrap();
    assert!(!metrics.is_empty());
    for m in metrics {
        let id: u32 = m["criterion"].as_str().unwrap().parse().unwrap();
        assert!((1..=10).contains(&id));
    }
    let traj = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 6);
}

#[test]
fn cadence_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), SMALL_MATCHED);
    let out = dir.path().join("out");
    let o = run(&path, &out, &["--cadence", "0.25", "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let diag = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let s: Vec<&str> = diag.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(s, ["0e0", "2.5e-1", "5e-1"]);
    let o = run(&path, &out, &["--cadence", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_metric_exits_with_one() {
    // three cells per sigma are far too coarse for the fluid comparison
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "scenario = \"fluid_vs_quantum\"\n[grid]\nhalf_width = 1.0\nn_cells = 64\n",
    );
    let out = dir.path().join("out");
    let o = run(&path, &out, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL] criterion 6"));
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"status\": \"fail\""));
    assert!(out.join("snapshots/fluid_0000.csv").exists());
}

#[test]
fn solver_error_exits_with_three() {
    // the free Gaussian outgrows a +-1 box well before s = 10
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "scenario = \"free_expansion\"\noutput_cadence = 1.0\n[grid]\nhalf_width = 1.0\nn_cells = 256\n\
         [quantum]\nds = 0.01\n",
    );
    let o = run(&path, &dir.path().join("out"), &["--quiet"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("free_expansion: wave solver:"), "{err}");
    assert!(err.contains("at s = "), "{err}");
}
