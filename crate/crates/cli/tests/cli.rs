//! End-to-end tests of the `delcon` binary: exit codes, artifact files, and
//! the determinism contract (identical config, identical bytes).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn delcon(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delcon"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn resale_scenario_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "resale.cfg", "kind = resale\nresale.f = uniform\nresale.g = uniform\n");
    let out = delcon(&["run", "resale.cfg", "--out", "a"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("a/summary.txt")).unwrap();
    assert!(summary.contains("auction_revenue_buyback"));
    let rows = fs::read_to_string(dir.path().join("a/resale_buyback.csv")).unwrap();
    assert!(rows.starts_with("theta1,price,sale_prob,profit\n"));

    let again = delcon(&["run", "resale.cfg", "--out", "b"], dir.path());
    assert!(again.status.success());
    for name in ["summary.txt", "resale_buyback.csv", "resale_no_buyback.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} must be bit-identical across reruns");
    }
}

#[test]
fn efficiency_gate_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "pub.cfg", "kind = efficiency\nefficiency.env = public\nefficiency.grid_n = 21\n");
    let out = delcon(&["run", "pub.cfg", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("o/report.txt").exists());
    assert!(dir.path().join("o/transfers.csv").exists());

    write(dir.path(), "riv.cfg", "kind = efficiency\nefficiency.env = rival\nefficiency.grid_n = 21\n");
    let out = delcon(&["run", "riv.cfg", "--out", "r"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_inputs_exit_1_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "empty.cfg", "");
    let out = delcon(&["run", "empty.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));

    write(dir.path(), "bad.cfg", "kind = resale\nresale.f = cauchy\n");
    let out = delcon(&["run", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resale.f"));

    let out = delcon(&["run", "nope.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

const UTILITIES: &str = "outcome,player,theta,u\n\
o,1,0,0\no,1,1,0\no,2,0,0\no,2,1,0\n\
trade,1,0,0\ntrade,1,1,0\ntrade,2,0,0\ntrade,2,1,1\n";

#[test]
fn verify_distinguishes_gate_failures() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "util.csv", UTILITIES);
    // the high agent type trades at half its value: implementable
    write(
        dir.path(),
        "good.csv",
        "theta1,theta2,pmf,outcome,t1,t2\n\
         0,0,0.25,o,0,0\n0,1,0.25,trade,0,0.5\n1,0,0.25,o,0,0\n1,1,0.25,trade,0,0.5\n",
    );
    let out = delcon(&["verify", "good.csv", "util.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    // charging the low type for nothing violates participation
    write(
        dir.path(),
        "bad.csv",
        "theta1,theta2,pmf,outcome,t1,t2\n\
         0,0,0.25,o,0,0.2\n0,1,0.25,trade,0,0.5\n1,0,0.25,o,0,0.2\n1,1,0.25,trade,0,0.5\n",
    );
    let out = delcon(&["verify", "bad.csv", "util.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    // malformed CSV is an input error, not a gate failure
    write(dir.path(), "junk.csv", "theta1,theta2\n0,0\n");
    let out = delcon(&["verify", "junk.csv", "util.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn partnership_scenario_recommends_delegate() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "p.cfg",
        "kind = partnership\npartnership.r1 = 0.6\npartnership.v = ramp:0.5:1\npartnership.grid_n = 41\n",
    );
    let out = delcon(&["run", "p.cfg", "--out", "p"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("p/summary.txt")).unwrap();
    assert!(summary.contains("recommended_delegate = 2"));
    assert!(dir.path().join("p/bid_ask.csv").exists());

    // the proportional split admits no feasible assignment
    write(dir.path(), "q.cfg", "kind = partnership\npartnership.r1 = 0.5\npartnership.grid_n = 41\n");
    let out = delcon(&["run", "q.cfg", "--out", "q"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
