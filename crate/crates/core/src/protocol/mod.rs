//! Commit and unveil state machines, the register environment and the
//! verification checks.

mod env;
mod membership;
mod params;
mod session;
mod solver;
mod transcript;
mod types;

use thiserror::Error;

pub use env::{LedgerEntry, LedgerOp, Party, RegisterEnvironment, Subsystem};
pub use membership::{
    carrier_posterior, membership, membership_for_policy, set_expectations, BobObservation, Membership, Moments,
    SetExpectations,
};
pub use params::{LieCounts, ProtocolParams, ThetaPolicy, DEFAULT_BLOCK_LEN, DEFAULT_TOLERANCE_Z};
pub use session::{
    run_protocol, BitChoice, CodeSummary, GuessOutcome, InvariantReport, RunOutcome, Session, SetSizes, TrialSpec,
    UnveilReport,
};
pub use solver::{expected_measured_ratio, optimal_solver, semi_classical_solver, solve_problem_p, SolverKind, SolverOutcome};
pub use transcript::{Actor, Event, Transcript};
pub use types::{
    state_label, AliceSet, BobSet, CheckId, CheckResult, Commitment, Lie, PairOrigin, PairRecord, PairTest,
    Preparation, UnveilPackage, Verdict,
};

use crate::lincode::CodeError;
use crate::qstate::QStateError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("{party:?} does not hold the {subsystem:?} register of pair {index}")]
    EnvironmentBreach { party: Party, index: usize, subsystem: Subsystem },
    #[error("pair {0} is entangled; its register cannot be replaced")]
    EntangledRegister(usize),
    #[error("step called out of order: {0}")]
    OutOfOrder(&'static str),
    #[error("unsupported scale: {0}")]
    UnsupportedScale(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    QState(#[from] QStateError),
}
