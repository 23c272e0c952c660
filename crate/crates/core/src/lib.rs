//! Nonlinear WLS state estimation for an AC grid with an embedded two-terminal
//! VSC-HVDC link, and synthesis of minimum-tamper false-data-injection attacks
//! that hide a converter's capability-limit violation from the estimator.
//!
//! Module map:
//!
//! - [`netcase`]: network data model, case-file format, bundled modified IEEE-14 case.
//! - [`measmodel`]: state vector, measurement functions and Jacobians, configurations,
//!   noisy measurement generation and CSV dump/load.
//! - [`wls`]: Gauss-Newton WLS estimation and largest-normalized-residual bad-data loop.
//! - [`capability`]: converter P-Q capability chart geometry.
//! - [`attacksynth`]: attack candidate enumeration, constrained state search, forging.
//! - [`harness`]: Monte-Carlo trials, campaigns and CSV figure data.

pub mod attacksynth;
pub mod capability;
mod error;
pub mod harness;
pub mod measmodel;
pub mod netcase;
mod numeric;
pub mod wls;

pub use error::{Error, Result};

pub use attacksynth::{AttackPlan, AttackSpec, Candidate};
pub use capability::{OperatingPoint, PQChart};
pub use measmodel::{
    MeasurementConfig, MeasurementKind, MeasurementSpec, MeasurementVector, StateIndex,
    StateLayout, StateVector,
};
pub use netcase::{NetworkCase, OperatingState, Side};
pub use wls::EstimationResult;
