use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftrl-exploit")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Every numeric field of every data row parses as a finite float.
fn assert_finite_csv(text: &str) {
    for line in text.lines().skip(1) {
        for field in line.split(',') {
            if let Ok(x) = field.parse::<f64>() {
                assert!(x.is_finite(), "non-finite field {field} in {line}");
            }
        }
    }
}

fn write_line_game(dir: &Path) -> String {
    let p = dir.join("g.json");
    std::fs::write(&p, r#"{"A":[[0.0,0.5,1.0]]}"#).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn trap_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trap.json");
    let o = run(&[
        "trap", "--game", "random:2,2,2", "--kernel", "entropic", "--eta-frac", "0.5", "--delta", "0.1", "--T", "1000",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&out);
    for key in ["event_A", "event_gap", "gap_v_prime", "eta_cap", "M", "surplus", "certified_bound", "T", "eta"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["event_A"], true);
    assert_eq!(v["T"], 1000);
    assert!((v["eta"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!(v["surplus"].as_f64().unwrap() >= v["certified_bound"].as_f64().unwrap());
}

#[test]
fn trap_event_failure_exits_one() {
    // This game has a pure saddle point, so the trap cannot be built.
    let o = run(&["trap", "--game", "random:2,2,7", "--kernel", "entropic", "--T", "100"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("E_A"), "{}", stderr(&o));
}

#[test]
fn step_size_over_cap_exits_one() {
    let o = run(&["trap", "--game", "random:2,2,2", "--kernel", "entropic", "--eta", "0.5", "--T", "100"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cap"));
}

#[test]
fn argument_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_line_game(dir.path());
    let missing_kernel = run(&["bounds", "--game", &game, "--x-hat", "1.0", "--eta", "0.1", "--T", "100"]);
    assert_eq!(missing_kernel.status.code(), Some(2));
    assert!(stderr(&missing_kernel).contains("Usage"));
    for bad in [
        vec!["bounds", "--game", &game, "--x-hat", "1.0", "--kernel", "gaussian", "--eta", "0.1", "--T", "100"],
        vec!["trap", "--game", "random:2,2", "--kernel", "entropic", "--T", "100"],
        vec!["sweep", "--game", &game, "--kernel", "entropic", "--T", "100", "--trials", "3"],
        vec!["trap", "--game", "random:2,2,2", "--kernel", "entropic", "--T", "100", "--eta-frac", "1.5"],
        vec!["fw", "--game", &game, "--kernel", "entropic", "--eta", "0.1", "--T", "10", "--format", "xml"],
    ] {
        assert_eq!(run(&bad).status.code(), Some(2), "{bad:?}");
    }
}

#[test]
fn bounds_table_brackets_the_exact_gap() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_line_game(dir.path());
    for kernel in ["euclidean", "entropic", "tsallis:0.5"] {
        let o = run(&["bounds", "--game", &game, "--x-hat", "1.0", "--kernel", kernel, "--eta", "0.1", "--T", "100", "--format", "csv"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = String::from_utf8(o.stdout).unwrap();
        assert!(text.starts_with("t,lower_dv,upper_dv,lag_lower,lag_upper,lag_continuous"));
        assert_finite_csv(&text);
        for line in text.lines().skip(1) {
            let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            assert!(f[3] - 1e-9 <= f[5] && f[5] <= f[4] + 1e-9, "{kernel}: {line}");
        }
    }
    // JSON: the Euclidean kernel eliminates suboptimal actions at 1/(k eta delta_min) = 20.
    let o = run(&["bounds", "--game", &game, "--x-hat", "1", "--kernel", "euclidean", "--eta", "0.1", "--T", "100"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["saturation_time"].as_f64().unwrap() - 20.0).abs() < 1e-9);
    let o = run(&["bounds", "--game", &game, "--x-hat", "1", "--kernel", "entropic", "--eta", "0.1", "--T", "100"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["saturation_time"].is_null());
}

#[test]
fn simulate_logs_every_round() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("traj.ndjson");
    let o = run(&[
        "simulate", "--game", "random:3,4,5", "--kernel", "tsallis:0.5", "--eta", "0.1", "--T", "50", "--log",
        log.to_str().unwrap(), "--log-scores",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["identity_residual"].as_f64().unwrap().abs() < 1e-9);
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 50);
    for (t, l) in lines.iter().enumerate() {
        assert_eq!(l["t"], t);
        assert_eq!(l["y"].as_array().unwrap().len(), 4);
        assert_eq!(l["score"].as_array().unwrap().len(), 4);
        assert!(l["reward"].is_f64() && l["bregman_increment"].is_f64());
    }
    let csv = run(&["simulate", "--game", "random:3,4,5", "--kernel", "entropic", "--eta", "0.1", "--T", "50", "--x-hat", "0.2,0.3,0.5", "--format", "csv"]);
    assert!(csv.status.success(), "{}", stderr(&csv));
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_finite_csv(&text);
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a.csv", "b.csv", "c.csv"].iter().map(|n| dir.path().join(n)).collect();
    for (p, jobs) in paths.iter().zip(["1", "4", "4"]) {
        let o = run(&[
            "sweep", "--game", "random:2,3,11", "--kernel", "entropic", "--T", "200", "--trials", "200", "--jobs", jobs,
            "--format", "csv", "--out", p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let texts: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(texts[0], texts[1]);
    assert_eq!(texts[1], texts[2]);
    let text = String::from_utf8(texts[0].clone()).unwrap();
    assert!(text.starts_with("trial,seed,pure_nash,event_A,event_gap,surplus,bound,met\n"));
    assert_eq!(text.lines().count(), 201);
    assert_finite_csv(&text);
    // Trap columns are filled exactly when the trap was built, and it always met its bound.
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[3] == "true", !f[5].is_empty(), "{line}");
        if f[3] == "true" {
            assert_eq!(f[7], "true");
        }
    }
    // An explicit base seed overrides the one in the game selector.
    let o = run(&["sweep", "--game", "random:2,3,11", "--seed", "12", "--kernel", "entropic", "--T", "50", "--trials", "20", "--format", "csv"]);
    let p = run(&["sweep", "--game", "random:2,3,12", "--kernel", "entropic", "--T", "50", "--trials", "20", "--format", "csv"]);
    assert_eq!(o.stdout, p.stdout);
}

#[test]
fn sweep_json_summary() {
    let o = run(&["sweep", "--game", "random:2,2,1", "--kernel", "euclidean", "--T", "100", "--trials", "50"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["summary"]["trials"], 50);
    assert_eq!(v["records"].as_array().unwrap().len(), 50);
    assert_eq!(v["summary"]["surplus_met"], v["summary"]["trap_runs"]);
}

#[test]
fn bandit_csv() {
    let o = run(&[
        "bandit", "--game", "random:2,2,2", "--kernel", "entropic", "--eta", "0.05", "--T", "2000", "--trials", "8",
        "--seed", "100", "--format", "csv",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "seed,T,realized_regret,full_info_regret,margin,violated");
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("100,2000,"));
    assert_finite_csv(&text);
    let again = run(&[
        "bandit", "--game", "random:2,2,2", "--kernel", "entropic", "--eta", "0.05", "--T", "2000", "--trials", "8",
        "--seed", "100", "--format", "csv", "--jobs", "1",
    ]);
    assert_eq!(again.stdout, text.as_bytes());
}

#[test]
fn pbr_csv() {
    let o = run(&["pbr", "--game", "random:2,3,0", "--kernel", "entropic", "--T", "500", "--gamma-points", "4", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("gamma,eta,t,epsilon,exploitation,theorem_lower\n"));
    assert_finite_csv(&text);
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(f[3] <= f[0], "accuracy not met: {line}");
    }
}

#[test]
fn fw_matching_pennies() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("mp.json");
    std::fs::write(&p, r#"{"A":[[1,-1],[-1,1]]}"#).unwrap();
    let o = run(&["fw", "--game", p.to_str().unwrap(), "--kernel", "entropic", "--eta", "0.1", "--T", "10", "--iters", "1000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["iterations"], 1000);
    assert!(v["reward_estimate"].as_f64().unwrap().abs() <= 1e-3);
    let x: Vec<f64> = v["x_hat"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((x[0] - 0.5).abs() < 1e-2);
}
