//! Fitted-estimate containers shared by the precision-matrix estimators.

use serde::{Deserialize, Serialize};

use crate::mat::SymMat;

/// Which estimator produced a precision estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Glasso,
    Clime,
    Neighborhood,
    LvglassoSparsePart,
    Thresholded,
}

/// A fitted precision matrix with its regularization and solver diagnostics.
#[derive(Clone, Debug)]
pub struct PrecisionEstimate {
    pub theta: SymMat,
    pub lambda: f64,
    pub method: Method,
    pub iterations: usize,
    /// False only when the iteration cap was hit.
    pub converged: bool,
    /// Objective value where the method defines one.
    pub objective: Option<f64>,
}

/// Iteration caps and tolerances for the iterative solvers.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Outer convergence tolerance (scale-free where the solver defines it so).
    pub tol: f64,
    pub inner_max_iter: usize,
    pub inner_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-6, inner_max_iter: 1000, inner_tol: 1e-9 }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}
