//! Conic programs over the semidefinite cone and a native solver backend.
//!
//! [`ConicProgram`] is a plain description (objective, equality triplets,
//! PSD blocks). Anything implementing [`ConicSolver`] can consume it; the
//! crate ships [`InteriorPoint`], a dense primal-dual path-following method
//! suited to programs with a few hundred free variables and blocks of side
//! up to a few hundred.

mod interior_point;
mod linalg;
mod program;

pub use interior_point::InteriorPoint;
pub use linalg::{min_eigenvalue, symmetric_from_row_major};
pub use program::{ConicProgram, Equalities, PsdBlock, Triplet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    Malformed(String),
}

/// Outcome classification reported by a backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Converged to the requested tolerance.
    Optimal,
    /// Stopped early (stall or numerical breakdown) at a point whose duality
    /// gap is small but above the requested tolerance. `x` is still feasible.
    Inaccurate,
    /// The PSD constraints (or the equalities) admit no solution.
    Infeasible,
    /// The objective is unbounded below on the feasible set.
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

impl SolveStatus {
    /// Whether the returned point can be used as a solution.
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Inaccurate)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Inaccurate => "optimal_inaccurate",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    /// Primal values of the program variables.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Relative residual of the multiplier (dual) equations.
    pub multiplier_residual: f64,
    /// Relative residual of the PSD-block identities.
    pub block_residual: f64,
    pub relative_gap: f64,
    /// Largest equality violation at `x`.
    pub equality_residual: f64,
    /// Smallest eigenvalue of every PSD block evaluated at `x`.
    pub block_min_eigenvalues: Vec<f64>,
}

/// A backend able to solve a [`ConicProgram`].
pub trait ConicSolver {
    fn name(&self) -> &str;
    fn solve(&self, program: &ConicProgram) -> Result<Solution, SolverError>;
}
