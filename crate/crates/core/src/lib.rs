//! Security-failure probabilities, key transport and attack simulation for
//! banded trusted-node QKD segments.
//!
//! A segment of `N` nodes in a line links every node to its next `c`
//! neighbours. Keys travel from node 1 to node `N` over every route at once
//! and are XOR-combined, so an attacker must cover all routes. The crate
//! counts routes, counts the node sets that do so, evaluates the resulting
//! failure probabilities both in closed form and exactly, and checks them
//! by Monte Carlo.
//!
//! Numerical code is generic over [`Scalar`], implemented for `f32`, `f64`
//! and [`num_rational::BigRational`]. The aliases below pick the usual
//! instantiations.

pub mod combinatorics;
pub mod error;
pub mod protocol;
pub mod roots;
pub mod routes;
pub mod scalar;
pub mod security;
pub mod simulator;
pub mod topology;

pub use error::{Error, Result};
pub use routes::{build_routing_scheme, enumerate_routes, route_count, Route, RouteSet, RoutingScheme};
pub use scalar::{CompensatedSum, Scalar};
pub use security::{epsilon_qn, Mode, SecurityParams, SecurityReport};
pub use simulator::{run_trials, CompromiseScenario, TrialStats};
pub use topology::{make_segment, Link, NetworkSegment};

/// Default floating-point probability type.
pub type Probability = f64;
/// Exact rational probability type.
pub type ExactProbability = num_rational::BigRational;

pub type SecurityReportF64 = SecurityReport<Probability>;
pub type ExactSecurityReport = SecurityReport<ExactProbability>;
pub type SecurityParamsF64 = SecurityParams<Probability>;
pub type ExactSecurityParams = SecurityParams<ExactProbability>;
pub type AttackProbabilityF64 = combinatorics::AttackProbability<Probability>;
