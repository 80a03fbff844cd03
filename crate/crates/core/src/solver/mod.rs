//! Built-in LP/MILP solver: sparse revised simplex plus branch-and-bound.

mod bnb;
mod lu;
pub mod model;
pub mod mps;
pub(crate) mod simplex;

use serde::{Deserialize, Serialize};

pub use bnb::{solve_milp, MilpSolution, MilpStatus};
pub use model::{Column, MilpModel, ModelError, Row, Sense};
pub use mps::{export_mps, parse_mps, read_mps, write_mps, MpsError};
pub use simplex::{solve_lp, Basis, LpSolution, LpStatus, VarStatus};

/// Tolerances and limits shared by the LP and MILP solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub integrality_tol: f64,
    /// Nodes whose bound is within this relative distance of the incumbent
    /// are pruned.
    pub relative_mip_gap: f64,
    pub node_limit: Option<usize>,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Total simplex iterations across all nodes.
    pub iteration_limit: usize,
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_pivot_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            integrality_tol: 1e-6,
            relative_mip_gap: 1e-6,
            node_limit: None,
            time_limit: None,
            iteration_limit: 2_000_000,
            refactor_interval: 100,
            degenerate_pivot_limit: 60,
        }
    }
}
