use std::path::Path;
use std::process::Command;

use optosync::{run_scenario, Scenario, ScenarioName, SolverChoice, Table};
use optosync_core::config::ConfigMap;

fn scenario(name: ScenarioName, solver: SolverChoice, dir: &Path, cfg: &str) -> Scenario {
    Scenario::from_config(name, solver, dir.to_path_buf(), ConfigMap::parse(cfg).unwrap()).unwrap()
}

fn column(dir: &Path, file: &str, col: &str) -> Vec<f64> {
    Table::read_csv(&dir.join(file)).unwrap().column(col).unwrap()
}

#[test]
fn sync_peak_is_near_complete_synchronization() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(ScenarioName::Sync, SolverChoice::Gaussian, dir.path(), "");
    let report = run_scenario(&s).unwrap();
    let sync = column(dir.path(), "sync.csv", "sync");
    let peak = sync.iter().copied().fold(f64::MIN, f64::max);
    assert!((0.8..=1.0 + 1e-9).contains(&peak), "max S = {peak}");
    assert_eq!(report.get("max_sync"), Some(peak));
    assert!(dir.path().join("sync.svg").exists());
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn undriven_vacuum_stays_at_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "drive_e = 0\nmod_eps = 0\nt_final = 3\nsample_dt = 0.25\nfock_cav = 3\nfock_m1 = 3\nfock_m2 = 3";
    let s = scenario(ScenarioName::Correlations, SolverChoice::Both, dir.path(), cfg);
    run_scenario(&s).unwrap();
    for file in ["correlations.csv", "correlations_lindblad.csv"] {
        for (col, want) in [("sync", 1.0), ("log_neg", 0.0), ("mutual_info", 0.0)] {
            for v in column(dir.path(), file, col) {
                assert!((v - want).abs() < 1e-9, "{file} {col} = {v}");
            }
        }
    }
}

#[test]
fn detuned_second_orbit_shrinks() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(ScenarioName::PhasePortrait, SolverChoice::Gaussian, dir.path(), "detunings = 0.1");
    let report = run_scenario(&s).unwrap();
    let (a1, a2) = (report.get("area_m1[0]").unwrap(), report.get("area_m2[0]").unwrap());
    assert!(a2 < a1, "{a2} vs {a1}");
    let svg = std::fs::read_to_string(dir.path().join("portrait_0.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn identical_inputs_give_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = "detunings = 0, 0.04, 0.08";
    for dir in [&a, &b] {
        run_scenario(&scenario(ScenarioName::DetuningSweep, SolverChoice::Gaussian, dir.path(), cfg)).unwrap();
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("detuning_sweep.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let dm = column(a.path(), "detuning_sweep.csv", "delta_m");
    assert_eq!(dm, vec![0.0, 0.04, 0.08]);
}

#[test]
fn report_records_resolved_setup() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(ScenarioName::Oscillations, SolverChoice::Gaussian, dir.path(), "kappa = 0.12\nrtol = 1e-9");
    run_scenario(&s).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["params"]["kappa"], 0.12);
    assert_eq!(json["params"]["drive_e"], 2.1);
    assert_eq!(json["gaussian_options"]["tol"]["rtol"], 1e-9);
    assert!(json["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    assert_eq!(json["scenario"], "oscillations");
}

#[test]
fn binary_runs_with_config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# short run\nt_final = 2\nsample_dt = 0.5\n").unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_optosync"))
        .args(["run", "sync", "--config"])
        .arg(&cfg)
        .args(["--set", "mod_eps=0.3", "--set", "baseline_factor=2", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(column(&out, "sync.csv", "t_tau"), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    let json = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(json.contains("\"mod_eps\": 0.3"));

    let bad = Command::new(env!("CARGO_BIN_EXE_optosync"))
        .args(["run", "sync", "--set", "colour=3", "--out"])
        .arg(dir.path().join("bad"))
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("colour"));
}
