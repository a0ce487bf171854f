use qbc_core::harness::*;
use qbc_core::protocol::ProtocolParams;

fn base(trials: usize, s: usize) -> RunConfig {
    RunConfig { master_seed: 5, trials, params: ProtocolParams { s, ..Default::default() }, ..Default::default() }
}

#[test]
fn identical_config_identical_report() {
    let c = base(12, 300);
    let a = run_batch_with(&c, &BatchOptions { threads: Some(1), ..Default::default() }).unwrap();
    let b = run_batch_with(&c, &BatchOptions { threads: Some(4), ..Default::default() }).unwrap();
    assert_eq!(serde_json::to_string(&a.stats).unwrap(), serde_json::to_string(&b.stats).unwrap());
}

#[test]
fn honest_batch_meets_gates() {
    let stats = run_batch(&base(40, 1000)).unwrap();
    assert!(stats.gates_passed(), "{:?}", stats.gates);
    assert!(stats.gates.iter().any(|g| g.name == "ratio_D"));
    assert_eq!(stats.metric("commit_accept_rate").unwrap().mean, 1.0);
    assert_eq!(stats.violations.total(), 0);
}

#[test]
fn delayed_set_axis_matches_formulas() {
    let grid = SweepGrid { s_prime_ratio: vec![0.0, 0.2], ..Default::default() };
    let report = run_sweep(&grid, &base(30, 1000));
    assert_eq!(report.rows.len(), 2);
    for row in &report.rows {
        assert_eq!(row.status, PointStatus::Completed);
        assert_eq!(row.targets_met, Some(true), "{:?}", row.stats.as_ref().map(|s| &s.gates));
    }
}

#[test]
fn config_file_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(
        &path,
        r#"{"master_seed": 3, "trials": 2, "params": {"s": 100, "f_a": 0.1, "f_b": 0.15, "f_c": 0.05, "ratio_k": 0.6, "ratio_d": 0.1},
            "alice_strategy": {"kind": "over-measure", "extra": {"count": 5}}}"#,
    )
    .unwrap();
    let c = RunConfig::load(&path).unwrap();
    assert_eq!(c.params.s_prime, 0);
    assert!(!c.is_honest());
    let missing = RunConfig::load(&dir.path().join("nope.json")).unwrap_err().to_string();
    assert!(missing.contains("nope.json"));
}

#[test]
fn invalid_config_fails_before_running() {
    let mut c = base(5, 100);
    c.params.f_b = 0.01;
    assert!(matches!(run_batch(&c), Err(HarnessError::Config(_))));
    c = base(0, 100);
    assert!(run_batch(&c).is_err());
}

#[test]
fn transcripts_written_per_trial() {
    let c = base(3, 40);
    let res = run_batch_with(&c, &BatchOptions { keep_transcripts: true, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_transcripts(dir.path(), &res.transcripts).unwrap();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 3);
}
