use std::path::PathBuf;
use std::process::{Command, Output};

use qbc_core::harness::RunReport;
use qbc_core::lincode::GeneratorMatrix;
use qbc_core::verify::CriterionReport;

fn qbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbc")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cfg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_reports_and_echoes_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("out/report.json");
    let csv = dir.path().join("report.csv");
    std::fs::create_dir_all(json.parent().unwrap()).unwrap();
    let o = qbc(&[
        "run",
        "--config",
        &cfg("honest.json"),
        "--trials",
        "40",
        "--s",
        "400",
        "--s-prime",
        "80",
        "--json",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("\"trials\": 40"));
    assert!(out.contains("\"s\": 400"));
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report.config.trials, 40);
    assert!(report.stats.gates_passed());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("point,status,metric"));
    assert!(text.contains("gate:ratio_M"));
}

#[test]
fn run_rejects_bad_frequencies() {
    let o = qbc(&["run", "--config", &cfg("honest.json"), "--f-b", "0.05", "--f-c", "0.10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("f_b"));
}

#[test]
fn run_with_missing_config_names_the_path() {
    let o = qbc(&["run", "--config", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/definitely/not/here.json"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(qbc(&["run", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(qbc(&["run", "--alice-strategy", "bribe"]).status.code(), Some(1));
    assert_eq!(qbc(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_writes_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t");
    let o = qbc(&["run", "--trials", "3", "--s", "100", "--transcripts", t.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let n = std::fs::read_dir(&t).unwrap().count();
    assert_eq!(n, 3);
    assert!(t.join("trial-00000.jsonl").exists());
}

#[test]
fn honest_demo_accepts_and_repeats() {
    let a = qbc(&["demo", "--seed", "7", "--s", "8"]);
    let b = qbc(&["demo", "--seed", "7", "--s", "8"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    for step in ["C1", "C2", "C3", "C4", "C5", "C6", "U1", "U3", "U4-U5"] {
        assert!(out.contains(step), "missing step {step}");
    }
    assert!(out.trim_end().ends_with("verdict: ACCEPT"));
    assert!(!out.contains("MISMATCH"));
}

#[test]
fn faked_register_is_tested_against_the_honest_state() {
    // seed 2: the fake is tested along sqrt(2/3)x + sqrt(1/3)y and survives the 1/3 catch chance
    let o = qbc(&["demo", "--seed", "2", "--alice-strategy", "fake-unmeasured:1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.contains("[fake]")).expect("a fake pair is tested");
    assert!(line.contains("0.8165x+0.5774y"));
    assert!(line.contains("pass P = 0.6667"));
}

#[test]
fn demo_refuses_large_s() {
    let o = qbc(&["demo", "--s", "17"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("16"));
}

#[test]
fn code_gen_emits_verified_matrix() {
    let o = qbc(&["code-gen", "-n", "14", "-k", "8", "-d", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let g: GeneratorMatrix = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((g.n(), g.k()), (14, 8));
    assert!(g.verified_min_distance() >= 4);
}

#[test]
fn code_gen_rejects_singleton_violation() {
    let o = qbc(&["code-gen", "-n", "4", "-k", "2", "-d", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Singleton"));
}

#[test]
fn code_check_counts_hamming_weight_three() {
    let o = qbc(&["code-check", &cfg("hamming74.json"), "--d0", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("min distance: 3"));
    assert!(out.contains("from 0000000: 7"));
    assert!(out.contains("0.5345"));
    assert!(out.contains("PASS"));

    let o = qbc(&["code-check", &cfg("hamming74.json"), "--d0", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn code_gen_then_check_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let o = qbc(&["code-gen", "-n", "12", "-k", "7", "-d", "3", "--seed", "5", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = qbc(&["code-check", path.to_str().unwrap(), "--d0", "3"]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)));
    assert!(stdout(&o).contains("code: n = 12, k = 7"));
}

#[test]
fn verify_subset_as_json() {
    let o = qbc(&["verify", "--only", "born,8", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reports: Vec<CriterionReport> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(reports.iter().map(|r| r.id).collect::<Vec<_>>(), vec![1, 8]);
    assert!(reports.iter().all(|r| r.passed));
}

#[test]
fn verify_unknown_criterion() {
    let o = qbc(&["verify", "--only", "nonsense"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_runs_grid_and_handles_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    std::fs::write(&grid, r#"{"s": [200], "f": [[0.10, 0.05, 0.10], [0.10, 0.15, 0.05]]}"#).unwrap();
    let csv = dir.path().join("sweep.csv");
    let o = qbc(&[
        "sweep",
        "--grid",
        grid.to_str().unwrap(),
        "--trials",
        "5",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("point 0") && out.contains("skipped"));
    assert!(std::fs::read_to_string(&csv).unwrap().contains("skipped"));

    let o = qbc(&["sweep", "--grid", "/no/grid.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/grid.json"));
}
