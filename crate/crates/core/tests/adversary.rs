use qbc_core::adversary::*;
use qbc_core::harness::{run_batch, RunConfig};
use qbc_core::protocol::{Lie, ProtocolParams};
use qbc_core::qstate::{ket_x, QubitState};

fn fake(flips: FlipPlan, policy: FakePolicy, s: usize, trials: usize) -> RunConfig {
    RunConfig {
        master_seed: 31,
        trials,
        params: ProtocolParams { s, ..Default::default() },
        alice_strategy: AliceStrategy::FakeUnmeasured { flips, policy },
        ..Default::default()
    }
}

#[test]
fn strategy_strings_roundtrip() {
    for s in ["honest", "fake-unmeasured:4:best-guess", "over-measure:0.2s", "wrong-preparation:variant-c"] {
        assert_eq!(s.parse::<AliceStrategy>().unwrap().to_string(), s);
    }
    assert_eq!("frequency-cheat:0.1,0.2,0.05".parse::<BobStrategy>().unwrap().to_string(), "frequency-cheat:0.1,0.2,0.05");
    assert!("fake-unmeasured".parse::<AliceStrategy>().is_err());
    assert!("fake-unmeasured:ratio=2".parse::<AliceStrategy>().is_err());
}

#[test]
fn expected_states_at_quarter_turn() {
    let t = std::f64::consts::FRAC_PI_4;
    // announced (1, 1) claims value 1; an honest Bob saw 135 degrees
    let e = expected_state(t, (1, 1), Lie::Honest).unwrap();
    let want = QubitState::from_real((1.0f64 / 3.0).sqrt(), (2.0f64 / 3.0).sqrt()).unwrap();
    assert!((e.fidelity(&want) - 1.0).abs() < 1e-12);
    // a lie-a Bob really saw 45 degrees, which leaves |x>
    let e = expected_state(t, (1, 1), Lie::A).unwrap();
    assert!((e.fidelity(&ket_x()) - 1.0).abs() < 1e-12);
}

#[test]
fn more_flips_never_help() {
    let r3 = measure_binding(&fake(FlipPlan::Count(1), FakePolicy::SendX, 200, 600)).unwrap();
    let r4 = measure_binding(&fake(FlipPlan::Count(4), FakePolicy::SendX, 200, 600)).unwrap();
    assert!(r4.rate <= r3.rate, "{} > {}", r4.rate, r3.rate);
    assert!(r4.within_bound(4.0));
}

#[test]
fn binding_needs_a_faking_alice() {
    let c = RunConfig { params: ProtocolParams { s: 100, ..Default::default() }, ..Default::default() };
    assert!(measure_binding(&c).is_err());
}

#[test]
fn over_measure_small_is_sometimes_missed_large_never() {
    let cfg = |extra| RunConfig {
        master_seed: 32,
        trials: 100,
        params: ProtocolParams { s: 1000, ..Default::default() },
        alice_strategy: AliceStrategy::OverMeasure { extra },
        ..Default::default()
    };
    let big = run_batch(&cfg(Amount::FractionOfS(0.2))).unwrap();
    assert_eq!(big.metric("unveil_accept_rate").unwrap().mean, 0.0);
    let none = run_batch(&cfg(Amount::Count(0))).unwrap();
    assert_eq!(none.metric("unveil_accept_rate").unwrap().mean, 1.0);
}

#[test]
fn early_extraction_scale_limits() {
    let c = RunConfig {
        trials: 2,
        params: ProtocolParams { s: 200, ..Default::default() },
        bob_strategy: BobStrategy::EarlyExtract,
        ..Default::default()
    };
    assert!(run_batch(&c).is_err());
}

#[test]
fn tiny_codes_leak() {
    // n around 4 with k/n = 3/4: the posterior-weighted guess beats a coin
    let c = RunConfig {
        master_seed: 33,
        trials: 3000,
        params: ProtocolParams { s: 5, ratio_k: 0.75, f_a: 0.2, f_b: 0.2, f_c: 0.2 - 1e-9, ..Default::default() },
        bob_strategy: BobStrategy::EarlyExtract,
        ..Default::default()
    };
    let stats = run_batch(&c).unwrap();
    let acc = stats.metric("bob_guess_accuracy").unwrap();
    assert!(acc.mean > 0.5 + 3.0 * acc.std_err(), "{acc:?}");
}
