use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::qstate::{PairState, QubitState, DEFAULT_PRODUCT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    Alpha,
    Photon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum LedgerOp {
    Prepare,
    Send { subsystem: Subsystem, to: Party },
    Measure { subsystem: Subsystem, outcome: u8 },
    /// Joint projective test on both registers.
    Project { passed: bool },
    /// Alpha register of a product pair swapped for a fresh state.
    Replace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub party: Party,
    pub index: usize,
    pub op: LedgerOp,
}

/// Holds every pair and tracks which party owns each register.
///
/// All quantum operations go through this type; an operation on a register
/// the acting party does not hold fails with an environment breach.
#[derive(Debug, Clone, Default)]
pub struct RegisterEnvironment {
    pairs: Vec<PairState>,
    owners: Vec<[Party; 2]>,
    ledger: Vec<LedgerEntry>,
}

fn slot(sub: Subsystem) -> usize {
    match sub {
        Subsystem::Alpha => 0,
        Subsystem::Photon => 1,
    }
}

impl RegisterEnvironment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Adds a pair prepared by `party`, who owns both registers.
    pub fn prepare(&mut self, party: Party, state: PairState) -> usize {
        let index = self.pairs.len();
        self.pairs.push(state);
        self.owners.push([party; 2]);
        self.ledger.push(LedgerEntry { party, index, op: LedgerOp::Prepare });
        index
    }

    pub fn owner(&self, index: usize, sub: Subsystem) -> Party {
        self.owners[index][slot(sub)]
    }

    /// Simulator-only view of a pair.
    pub fn state(&self, index: usize) -> &PairState {
        &self.pairs[index]
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    fn require(&self, party: Party, index: usize, sub: Subsystem) -> Result<(), ProtocolError> {
        if index >= self.pairs.len() || self.owner(index, sub) != party {
            return Err(ProtocolError::EnvironmentBreach { party, index, subsystem: sub });
        }
        Ok(())
    }

    pub fn send(&mut self, party: Party, index: usize, sub: Subsystem, to: Party) -> Result<(), ProtocolError> {
        self.require(party, index, sub)?;
        self.owners[index][slot(sub)] = to;
        self.ledger.push(LedgerEntry { party, index, op: LedgerOp::Send { subsystem: sub, to } });
        Ok(())
    }

    /// Measures the photon along `vec`; outcome 0 means `vec`.
    pub fn measure_photon<R: Rng + ?Sized>(
        &mut self,
        party: Party,
        index: usize,
        vec: &QubitState,
        rng: &mut R,
    ) -> Result<u8, ProtocolError> {
        self.require(party, index, Subsystem::Photon)?;
        let (outcome, next) = self.pairs[index].measure_photon_along(vec, rng);
        self.pairs[index] = next;
        self.ledger.push(LedgerEntry {
            party,
            index,
            op: LedgerOp::Measure { subsystem: Subsystem::Photon, outcome },
        });
        Ok(outcome)
    }

    /// Measures alpha along `vec`; outcome 0 means `vec`.
    pub fn measure_alpha<R: Rng + ?Sized>(
        &mut self,
        party: Party,
        index: usize,
        vec: &QubitState,
        rng: &mut R,
    ) -> Result<u8, ProtocolError> {
        self.require(party, index, Subsystem::Alpha)?;
        let (outcome, next) = self.pairs[index].measure_alpha_along(vec, rng);
        self.pairs[index] = next;
        self.ledger.push(LedgerEntry {
            party,
            index,
            op: LedgerOp::Measure { subsystem: Subsystem::Alpha, outcome },
        });
        Ok(outcome)
    }

    /// Projective test onto `target`; needs both registers.
    pub fn project<R: Rng + ?Sized>(
        &mut self,
        party: Party,
        index: usize,
        target: &PairState,
        rng: &mut R,
    ) -> Result<bool, ProtocolError> {
        self.require(party, index, Subsystem::Alpha)?;
        self.require(party, index, Subsystem::Photon)?;
        let (passed, next) = self.pairs[index].project_onto(target, rng);
        self.pairs[index] = next;
        self.ledger.push(LedgerEntry { party, index, op: LedgerOp::Project { passed } });
        Ok(passed)
    }

    /// Replaces the alpha register with `alpha`. Only allowed when the pair
    /// is a product state, so nothing held by the other party changes.
    pub fn replace_alpha(&mut self, party: Party, index: usize, alpha: &QubitState) -> Result<(), ProtocolError> {
        self.require(party, index, Subsystem::Alpha)?;
        let next = self.pairs[index]
            .with_alpha(alpha, DEFAULT_PRODUCT_TOL)
            .ok_or(ProtocolError::EntangledRegister(index))?;
        self.pairs[index] = next;
        self.ledger.push(LedgerEntry { party, index, op: LedgerOp::Replace });
        Ok(())
    }

    /// Replays the ledger from scratch and confirms that every operation was
    /// performed by the owner of the registers it touched.
    pub fn audit(&self) -> Result<(), ProtocolError> {
        let mut owners: Vec<Option<[Party; 2]>> = vec![None; self.pairs.len()];
        for entry in &self.ledger {
            let i = entry.index;
            let breach = |sub| ProtocolError::EnvironmentBreach { party: entry.party, index: i, subsystem: sub };
            if let LedgerOp::Prepare = entry.op {
                owners[i] = Some([entry.party; 2]);
                continue;
            }
            let own = owners[i].as_mut().ok_or(breach(Subsystem::Alpha))?;
            let check = |own: &[Party; 2], sub: Subsystem| {
                if own[slot(sub)] == entry.party {
                    Ok(())
                } else {
                    Err(breach(sub))
                }
            };
            match &entry.op {
                LedgerOp::Prepare => unreachable!(),
                LedgerOp::Send { subsystem, to } => {
                    check(own, *subsystem)?;
                    own[slot(*subsystem)] = *to;
                }
                LedgerOp::Measure { subsystem, .. } => check(own, *subsystem)?,
                LedgerOp::Project { .. } => {
                    check(own, Subsystem::Alpha)?;
                    check(own, Subsystem::Photon)?;
                }
                LedgerOp::Replace => check(own, Subsystem::Alpha)?,
            }
        }
        Ok(())
    }
}
