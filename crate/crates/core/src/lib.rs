//! Frequency-domain stability verdicts for SISO reset control systems.
//!
//! A loop `r → e → C_R → C_L → G → y` with a first-order reset element
//! `C_R` (GFORE or PCI) is classified from the Nyquist Stability Vector of
//! its base linear open loop, cross-checked against a brute-force scan of
//! the `H_β` condition, and can be simulated as a hybrid system.

pub mod demo;
pub mod hbeta;
pub mod lti;
pub mod nsv;
mod poly;
pub mod report;
pub mod reset;
pub mod sim;
pub mod system;

pub use demo::DemoSystem;
pub use hbeta::{FeasibleRegion, HBetaError, HBetaPoint, ScanSpec};
pub use lti::{LtiError, RationalTf, StateSpace};
pub use nsv::{ClassificationReport, FrequencyGrid, NsvError, Verdict};
pub use reset::{ResetElement, ResetError, ResetKind};
pub use sim::{ClosedLoopSystem, SimError, SimOptions, SimTrace, Signal};
pub use system::{SystemDescription, SystemError};

/// Any failure raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Reset(#[from] ResetError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Nsv(#[from] NsvError),
    #[error(transparent)]
    HBeta(#[from] HBetaError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
