use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn thermion(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermion"))
        .args(args)
        .current_dir(dir)
        .env_remove("THERMION_WORKERS")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_command_prints_usage_and_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let o = thermion(&["frobnicate"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(thermion(&[], d.path()).status.code(), Some(1));
    assert_eq!(thermion(&["--help"], d.path()).status.code(), Some(0));
}

#[test]
fn config_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("bad.cfg"), "colour = blue\n").unwrap();
    let o = thermion(&["thermal-check", "--config", "bad.cfg"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    assert_eq!(thermion(&["thermal-check", "--config", "missing.cfg"], d.path()).status.code(), Some(1));
    assert_eq!(thermion(&["thermal-check", "--beta", "0,1"], d.path()).status.code(), Some(1));
}

#[test]
fn passing_run_embeds_config_and_versions() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("run.cfg"), "betas = 0.5\nout = first\n").unwrap();
    let o = thermion(&["thermal-check", "--config", "run.cfg", "--beta", "0.1,1,10", "--out", "res"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["status"], "pass");
    let r = json(&d.path().join("res/thermal-check.json"));
    assert_eq!(r["config"]["betas"], serde_json::json!([0.1, 1.0, 10.0]));
    assert_eq!(r["config"]["out"], "res");
    assert!(r["versions"]["thermal"].is_string());
    assert_eq!(r["failures"], serde_json::json!([]));
    let csv = fs::read_to_string(d.path().join("res/thermal_rho.csv")).unwrap();
    assert!(csv.contains("# config betas = 0.1,1,10"));
    assert!(csv.contains("# version cli = "));
    let row = csv.lines().find(|l| !l.starts_with('#') && !l.starts_with("beta")).unwrap();
    for cell in row.split(',') {
        let mantissa = cell.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{cell}");
    }
}

#[test]
fn failed_check_exits_two_with_failure_list() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("wide.cfg"), "thermal_kappa_c = 0.01\n").unwrap();
    let o = thermion(&["thermal-check", "--config", "wide.cfg"], d.path());
    assert_eq!(o.status.code(), Some(2));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["status"], "fail");
    let failures: Vec<&str> = summary["failures"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(failures.contains(&"glued_spread_j0"), "{failures:?}");
    let r = json(&d.path().join("thermion-out/thermal-check.json"));
    assert_eq!(r["failures"], summary["failures"]);
}

#[test]
fn workers_env_is_a_fallback() {
    let d = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["thermal-check", "--beta", "1"];
        args.extend_from_slice(extra);
        let o = Command::new(env!("CARGO_BIN_EXE_thermion")).args(&args).current_dir(d.path()).env("THERMION_WORKERS", "1").output().unwrap();
        assert_eq!(o.status.code(), Some(0));
        json(&d.path().join("thermion-out/thermal-check.json"))["config"]["workers"].as_u64().unwrap()
    };
    assert_eq!(run(&[]), 1);
    assert_eq!(run(&["--workers", "2"]), 2);
}

#[test]
fn fgr_fans_out_over_beta() {
    let d = tempfile::tempdir().unwrap();
    let o = thermion(&["fgr", "--beta", "1,10"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&d.path().join("thermion-out/fgr.json"));
    let shifts = r["result"]["level_shifts"].as_array().unwrap();
    assert_eq!(shifts.len(), 2);
    for (s, b) in shifts.iter().zip([1.0, 10.0]) {
        assert_eq!(s["beta"].as_f64().unwrap(), b);
        for key in ["E", "eps", "F1", "F2", "gamma", "witnesses"] {
            assert!(!s[key].is_null(), "{key}");
        }
    }
}
