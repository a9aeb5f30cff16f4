//! Age-of-information minimization for a two-user UAV downlink with a covert
//! user, a public user and an aerial warden.
//!
//! The optimizer alternates between an AoI linear program, a trajectory step
//! and a semidefinite beamforming step, each solved by the bundled [`conic`]
//! solver.

pub mod channel;
pub mod conic;
pub mod covertness;
pub mod error;
pub mod harness;
pub mod orchestrator;
pub mod scenario;
pub mod subproblems;
pub mod surrogate;

pub use channel::{CVec, ChannelVector, Position2D, SteeringVector};
pub use covertness::{DetectionReport, EveModel, McEstimate};
pub use error::{Error, Result};
pub use scenario::{default_scenario, load_scenario, parse_scenario, BlockOrder, Scenario};
