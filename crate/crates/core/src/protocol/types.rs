use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lincode::{BitString, BlockCode};
use crate::qstate::QubitState;

/// Bob's announcement rule for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lie {
    Honest,
    /// Value flipped, basis kept.
    A,
    /// Basis flipped, value kept.
    B,
    /// Both flipped.
    C,
    /// Unmeasured pair in S', announced uniformly at random.
    RandomSPrime,
}

impl Lie {
    /// Announcement `(p'', q'')` for a measured pair with Bob's result `(p', q')`.
    pub fn apply(self, p: u8, q: u8) -> (u8, u8) {
        match self {
            Lie::Honest | Lie::RandomSPrime => (p, q),
            Lie::A => (p, q ^ 1),
            Lie::B => (p ^ 1, q),
            Lie::C => (p ^ 1, q ^ 1),
        }
    }

    pub fn is_lie(self) -> bool {
        !matches!(self, Lie::Honest)
    }

    pub const MEASURED: [Lie; 4] = [Lie::Honest, Lie::A, Lie::B, Lie::C];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BobSet {
    /// S': photon stored unmeasured until unveil.
    Delayed,
    /// S'': photon measured at commit time.
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AliceSet {
    Measured,
    Unmeasured,
}

/// What Alice actually put into a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preparation {
    Conforming,
    /// Conforming pair measured right away (a pure polarization state).
    Product,
    /// `cos t |x>|0,0> + sin t |y>|0,1>`.
    SameBasis,
    /// `cos t |x>|0,0> + sin t |y>|1,1>`.
    CrossValue,
}

/// God-view bookkeeping for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub index: usize,
    pub q: u8,
    pub theta: f64,
    pub preparation: Preparation,
    pub bob_set: BobSet,
    pub bob_basis: Option<u8>,
    pub bob_outcome: Option<u8>,
    pub lie: Lie,
    pub announced: (u8, u8),
    pub alice_set: AliceSet,
    pub alice_outcome: Option<u8>,
    pub in_d: bool,
}

impl PairRecord {
    pub(crate) fn new(index: usize, q: u8, theta: f64, preparation: Preparation) -> Self {
        Self {
            index,
            q,
            theta,
            preparation,
            bob_set: BobSet::Measured,
            bob_basis: None,
            bob_outcome: None,
            lie: Lie::Honest,
            announced: (0, 0),
            alice_set: AliceSet::Unmeasured,
            alice_outcome: None,
            in_d: false,
        }
    }

    /// Member of `M - D` as Alice will encode it.
    pub fn carries_one(&self) -> bool {
        self.alice_set == AliceSet::Measured && !self.in_d
    }
}

/// What Bob receives at the end of the commit phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commitment {
    pub code: BlockCode,
    pub r: BitString,
    pub c_prime: BitString,
    pub n: usize,
}

/// Alice's classical unveil message; the alpha registers travel through the
/// environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnveilPackage {
    pub b: u8,
    pub c: BitString,
    pub c0: BitString,
    pub q: Vec<u8>,
    pub theta: Vec<f64>,
    /// Claimed outcome for each index Alice declares measured.
    pub p: Vec<Option<u8>>,
    /// Indices whose alpha register was handed to Bob.
    pub transferred: Vec<usize>,
}

/// Identifiers of the individual acceptance checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    /// Alice's own check of |M| and |D| against the agreed lie frequencies.
    AliceCountBand,
    C5Photon,
    C5Subset,
    C5Band,
    U1Consistency,
    U3a,
    U3b,
    U3c,
    U4Band,
    U4LieB,
    U5,
}

impl CheckId {
    pub fn name(self) -> &'static str {
        match self {
            CheckId::AliceCountBand => "alice-count-band",
            CheckId::C5Photon => "c5-photon",
            CheckId::C5Subset => "c5-subset",
            CheckId::C5Band => "c5-band",
            CheckId::U1Consistency => "u1-consistency",
            CheckId::U3a => "u3a",
            CheckId::U3b => "u3b",
            CheckId::U3c => "u3c",
            CheckId::U4Band => "u4-band",
            CheckId::U4LieB => "u4-lie-b",
            CheckId::U5 => "u5",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: CheckId,
    pub passed: bool,
    pub detail: String,
}

/// Where a tested pair came from, known only to the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairOrigin {
    Honest,
    /// Register replaced by a fabricated state.
    Fake,
    /// Non-conforming preparation.
    Nonconforming,
    /// Measured by Alice although announced as unmeasured or vice versa.
    Relabelled,
}

/// One single-pair quantum test performed by Bob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub check: CheckId,
    pub index: usize,
    pub passed: bool,
    pub origin: PairOrigin,
    /// Expected alpha state for U3b tests.
    pub expected: Option<QubitState>,
}

/// Ordered results of a batch of checks; every check runs even after a failure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub checks: Vec<CheckResult>,
}

impl Verdict {
    pub fn push(&mut self, check: CheckId, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult { check, passed, detail: detail.into() });
    }

    pub fn accepted(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<CheckId> {
        self.checks.iter().find(|c| !c.passed).map(|c| c.check)
    }

    pub fn failures(&self) -> Vec<CheckId> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.check).collect()
    }

    pub fn passed(&self, check: CheckId) -> Option<bool> {
        let mut seen = false;
        for c in self.checks.iter().filter(|c| c.check == check) {
            if !c.passed {
                return Some(false);
            }
            seen = true;
        }
        seen.then_some(true)
    }
}

/// Short label of a real qubit state up to global sign, e.g. `0.8165x+0.5774y`.
pub fn state_label(state: &QubitState) -> String {
    let [a0, a1] = state.amplitudes();
    let (mut x, mut y) = (a0.re, a1.re);
    if x < -1e-12 || (x.abs() <= 1e-12 && y < 0.0) {
        x = -x;
        y = -y;
    }
    let clean = |v: f64| if v.abs() < 5e-5 { 0.0 } else { v };
    format!("{:.4}x{:+.4}y", clean(x), clean(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lie_table() {
        assert_eq!(Lie::Honest.apply(1, 0), (1, 0));
        assert_eq!(Lie::A.apply(1, 0), (1, 1));
        assert_eq!(Lie::B.apply(1, 0), (0, 0));
        assert_eq!(Lie::C.apply(1, 0), (0, 1));
    }

    #[test]
    fn labels() {
        let e = QubitState::from_real((2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()).unwrap();
        assert_eq!(state_label(&e), "0.8165x+0.5774y");
        let neg = QubitState::from_real(-(2.0f64 / 3.0).sqrt(), -(1.0f64 / 3.0).sqrt()).unwrap();
        assert_eq!(state_label(&neg), "0.8165x+0.5774y");
        assert_eq!(state_label(&QubitState::one()), "0.0000x+1.0000y");
    }

    #[test]
    fn verdict_tracks_first_failure() {
        let mut v = Verdict::default();
        v.push(CheckId::U3a, true, "");
        v.push(CheckId::U3b, false, "pair 3");
        v.push(CheckId::U5, false, "");
        assert!(!v.accepted());
        assert_eq!(v.first_failure(), Some(CheckId::U3b));
        assert_eq!(v.failures(), vec![CheckId::U3b, CheckId::U5]);
        assert_eq!(v.passed(CheckId::U3a), Some(true));
        assert_eq!(v.passed(CheckId::U4Band), None);
    }
}
