//! Simulation and verification harness for an entangled-state quantum bit
//! commitment protocol.

pub mod adversary;
pub mod harness;
pub mod lincode;
pub mod protocol;
pub mod qstate;
pub mod verify;
