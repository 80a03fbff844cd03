//! Stochastic multicommodity road-rail freight routing.
//!
//! The crate models an intermodal network, samples disruption scenarios,
//! builds the linearized routing MILP, solves it with a built-in
//! branch-and-bound solver and wraps everything in a sample average
//! approximation driver.

pub mod model;
pub mod network;
pub mod oracle;
pub mod report;
pub mod saa;
pub mod scenario;
pub mod solver;
