use std::f64::consts::FRAC_PI_4;

use qbc_core::adversary::{AliceStrategy, BobStrategy, PreparationVariant};
use qbc_core::protocol::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec(params: ProtocolParams) -> TrialSpec {
    TrialSpec::honest(params)
}

#[test]
fn honest_completeness_with_per_pair_angles() {
    let params = ProtocolParams {
        s: 400,
        s_prime: 40,
        theta_policy: ThetaPolicy::Uniform { low: 0.3, high: 1.2 },
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..15 {
        let (out, _) = run_protocol(&spec(params.clone()), &mut rng, false).unwrap();
        assert_eq!(out.unveil_accepted, Some(true), "rejected at {:?}", out.rejected_at);
    }
}

#[test]
fn lie_counts_follow_delayed_set() {
    let c = LieCounts::from_frequencies(1000, 0, [0.10, 0.15, 0.05]).unwrap();
    assert_eq!((c.a, c.b, c.c), (100, 150, 50));
    let c = LieCounts::from_frequencies(1000, 200, [0.10, 0.15, 0.05]).unwrap();
    assert_eq!((c.a, c.b, c.c), (50, 100, 0));
    assert!(LieCounts::from_frequencies(1000, 400, [0.10, 0.15, 0.05]).is_err());
}

#[test]
fn parameter_constraints() {
    let bad = [
        ProtocolParams { f_b: 0.05, f_c: 0.10, ..Default::default() },
        ProtocolParams { f_a: 0.25, ..Default::default() },
        ProtocolParams { ratio_k: 0.5, ..Default::default() },
        ProtocolParams { s_prime: 2000, ..Default::default() },
        ProtocolParams { theta_policy: ThetaPolicy::Fixed(0.0), ..Default::default() },
    ];
    for p in bad {
        assert!(p.validate().is_err(), "{p:?}");
    }
    assert!(ProtocolParams::default().validate().is_ok());
}

#[test]
fn membership_is_angle_independent() {
    for theta in [0.2, FRAC_PI_4, 1.3] {
        let m = membership(theta, Lie::A);
        assert!((m.m - 0.75).abs() < 1e-12 && (m.d - 0.5).abs() < 1e-12);
        assert!((membership(theta, Lie::B).m_minus_d()).abs() < 1e-12);
    }
}

#[test]
fn frequency_cheating_bob_is_caught_by_alice() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let s = TrialSpec {
        params: ProtocolParams { s: 2000, ..Default::default() },
        alice: AliceStrategy::Honest,
        bob: BobStrategy::FrequencyCheat { f_a: 0.01, f_b: 0.20, f_c: 0.01 },
        bit: BitChoice::Zero,
    };
    for _ in 0..5 {
        let (out, _) = run_protocol(&s, &mut rng, false).unwrap();
        assert!(!out.commit_accepted);
        assert_eq!(out.rejected_at, Some(CheckId::AliceCountBand));
        assert!(out.cheat.unwrap().caught_at.is_some());
    }
}

#[test]
fn transcript_file_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (_, t) = run_protocol(&spec(ProtocolParams { s: 40, s_prime: 8, ..Default::default() }), &mut rng, true).unwrap();
    let t = t.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    t.write_jsonl(std::fs::File::create(&path).unwrap()).unwrap();
    let back = Transcript::read_jsonl(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back, t);
}

#[test]
fn committed_parity_matches_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let params = ProtocolParams { s: 300, ..Default::default() };
    for bit in [BitChoice::Zero, BitChoice::One] {
        let mut s = Session::new(&TrialSpec { bit, ..spec(params.clone()) }, false).unwrap();
        s.alice_commit_prepare(&mut rng).unwrap();
        s.bob_partition_measure(&mut rng).unwrap();
        s.bob_announce(&mut rng).unwrap();
        s.alice_detect(&mut rng).unwrap();
        let b = bit.draw(&mut rng);
        let commitment = s.alice_encode_commit(b, &mut rng).unwrap().clone();
        let (c0, c, b2) = s.committed_strings().unwrap();
        assert_eq!(b2, b);
        assert_eq!(c.xor(c0).unwrap(), commitment.c_prime);
        assert_eq!(qbc_core::lincode::dot(c, &commitment.r).unwrap(), b);
        assert_eq!(commitment.n, params.s - s.d().len());
    }
}

#[test]
fn solver_variants_detect_only_lies() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let p = ProtocolParams { s: 1000, ..Default::default() };
    for kind in SolverKind::ALL {
        let out = solve_problem_p(kind, &p, &mut rng).unwrap();
        assert!(out.d_valid);
        assert!(out.d.iter().all(|&i| out.lies[i].is_lie()));
    }
}

#[test]
fn variant_b_preparation_trips_lie_b_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let s = TrialSpec {
        params: ProtocolParams { s: 400, ..Default::default() },
        alice: AliceStrategy::WrongPreparation { variant: PreparationVariant::VariantB },
        bob: BobStrategy::Honest,
        bit: BitChoice::Random,
    };
    let mut lie_b_hits = 0;
    for _ in 0..20 {
        let (out, _) = run_protocol(&s, &mut rng, false).unwrap();
        if let Some(u) = &out.unveil {
            lie_b_hits += (u.verdict.passed(CheckId::U4LieB) == Some(false)) as usize;
        }
    }
    assert!(lie_b_hits > 0);
}
