//! Standalone lie-detection runs: Bob measures every photon, announces with
//! lies, and Alice picks out a set D of detected lies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::ProtocolParams;
use super::session::{Session, TrialSpec};
use super::types::Lie;
use super::ProtocolError;
use crate::adversary::{AliceStrategy, BobStrategy, PreparationVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Every pair measured up front.
    SemiClassical,
    /// Conforming pairs, measuring only when the announced value differs.
    Optimal,
    /// Same-basis pairs, measuring half of them.
    VariantB,
    /// Cross-value pairs, measuring on odd announcements.
    VariantC,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] =
        [SolverKind::SemiClassical, SolverKind::Optimal, SolverKind::VariantB, SolverKind::VariantC];

    fn variant(self) -> PreparationVariant {
        match self {
            SolverKind::SemiClassical => PreparationVariant::AllProduct,
            SolverKind::Optimal => PreparationVariant::Conforming,
            SolverKind::VariantB => PreparationVariant::VariantB,
            SolverKind::VariantC => PreparationVariant::VariantC,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutcome {
    pub d: Vec<usize>,
    pub measured_count: usize,
    /// Every index in D really was a lie.
    pub d_valid: bool,
    pub lies: Vec<Lie>,
}

/// Runs the detection stage with `S' = ∅`.
pub fn solve_problem_p<R: Rng + ?Sized>(
    kind: SolverKind,
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<SolverOutcome, ProtocolError> {
    let spec = TrialSpec {
        params: ProtocolParams { s_prime: 0, ..params.clone() },
        alice: AliceStrategy::WrongPreparation { variant: kind.variant() },
        bob: BobStrategy::Honest,
        bit: Default::default(),
    };
    let mut session = Session::new(&spec, false)?;
    session.alice_commit_prepare(rng)?;
    session.bob_partition_measure(rng)?;
    session.bob_announce(rng)?;
    session.alice_detect(rng)?;
    let records = session.records();
    let d = session.d().to_vec();
    let d_valid = d.iter().all(|&i| records[i].lie.is_lie());
    let measured_count = match kind {
        SolverKind::SemiClassical => params.s,
        _ => session.set_sizes().m,
    };
    Ok(SolverOutcome { d, measured_count, d_valid, lies: records.iter().map(|r| r.lie).collect() })
}

pub fn semi_classical_solver<R: Rng + ?Sized>(params: &ProtocolParams, rng: &mut R) -> Result<SolverOutcome, ProtocolError> {
    solve_problem_p(SolverKind::SemiClassical, params, rng)
}

pub fn optimal_solver<R: Rng + ?Sized>(params: &ProtocolParams, rng: &mut R) -> Result<SolverOutcome, ProtocolError> {
    solve_problem_p(SolverKind::Optimal, params, rng)
}

/// Expected `measured_count / s` for each method.
pub fn expected_measured_ratio(kind: SolverKind, params: &ProtocolParams) -> f64 {
    let [fa, fb, fc] = params.frequencies();
    match kind {
        SolverKind::SemiClassical => 1.0,
        SolverKind::Optimal => 0.25 + (fa + fc) / 2.0,
        SolverKind::VariantB => 0.5,
        SolverKind::VariantC => 0.25 + (fa + fb) / 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_method_yields_valid_d() {
        let params = ProtocolParams { s: 400, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in SolverKind::ALL {
            for _ in 0..5 {
                let out = solve_problem_p(kind, &params, &mut rng).unwrap();
                assert!(out.d_valid, "{kind:?}");
                assert!(out.measured_count <= params.s);
            }
        }
        let out = semi_classical_solver(&params, &mut rng).unwrap();
        assert_eq!(out.measured_count, 400);
    }

    #[test]
    fn expected_ordering() {
        let p = ProtocolParams::default();
        let opt = expected_measured_ratio(SolverKind::Optimal, &p);
        let c = expected_measured_ratio(SolverKind::VariantC, &p);
        let b = expected_measured_ratio(SolverKind::VariantB, &p);
        assert!((opt - 0.325).abs() < 1e-12 && (c - 0.375).abs() < 1e-12);
        assert!(opt < c && c < b);
    }
}
