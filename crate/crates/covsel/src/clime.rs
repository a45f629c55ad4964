//! Column-wise constrained l1 minimization for the precision matrix.
//!
//! For each column j: minimize `||w||_1` subject to
//! `||Sigma_hat w - e_j||_inf <= lambda`, then symmetrize the assembled
//! matrix by the min-magnitude rule. The per-column program is solved by
//! linearized ADMM with a box-constrained splitting variable; the contract
//! is the feasibility/objective certificate, not the algorithm.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimate::{Method, PrecisionEstimate, SolverOptions};
use crate::glasso::soft_threshold;
use crate::linalg::sym_eigen;
use crate::mat::SymMat;

/// CLIME fit with per-column certificates kept alongside the estimate.
#[derive(Clone, Debug)]
pub struct ClimeFit {
    pub estimate: PrecisionEstimate,
    /// Pre-symmetrization column solutions, column j solving for e_j.
    pub omega_tilde: DMatrix<f64>,
    /// l1 objective per column, pre-symmetrization.
    pub column_objective: Vec<f64>,
    /// `||Sigma w - e_j||_inf` per column, pre-symmetrization.
    pub column_residual: Vec<f64>,
}

/// Default per-column feasibility/optimality tolerance.
pub const CLIME_TOL: f64 = 1e-7;

struct ColumnSolve {
    omega: DVector<f64>,
    iterations: usize,
    converged: bool,
}

/// Linearized ADMM for one column:
/// minimize ||w||_1 subject to Sigma w - e = z, z in [-lambda, lambda]^p.
fn solve_column(
    sigma: &DMatrix<f64>,
    col: usize,
    lambda: f64,
    op_norm_sq: f64,
    max_iter: usize,
    tol: f64,
    warm: Option<&DVector<f64>>,
) -> ColumnSolve {
    let p = sigma.nrows();
    let e = DVector::from_fn(p, |i, _| if i == col { 1.0 } else { 0.0 });
    let rho = 1.0;
    // Linearization constant must dominate rho * ||Sigma||_2^2.
    let mu = 1.01 * rho * op_norm_sq.max(1e-12);
    let mut w: DVector<f64> = warm.cloned().unwrap_or_else(|| DVector::zeros(p));
    let mut z = DVector::from_fn(p, |i, _| (sigma.row(i).transpose().dot(&w) - e[i]).clamp(-lambda, lambda));
    let mut u: DVector<f64> = DVector::zeros(p);
    let mut converged = false;
    let mut iterations = 0;
    let mut sw = sigma * &w;
    for it in 0..max_iter {
        iterations = it + 1;
        // w-step: proximal on the linearized augmented term.
        let grad = sigma * (&sw - &e - &z + &u);
        for k in 0..p {
            w[k] = soft_threshold(w[k] - (rho / mu) * grad[k], 1.0 / mu);
        }
        sw = sigma * &w;
        // z-step: projection onto the box.
        let target = &sw - &e + &u;
        let z_new = target.map(|v| v.clamp(-lambda, lambda));
        let dual = (&z_new - &z).amax() * rho;
        z = z_new;
        // dual step
        u += &sw - &e - &z;
        let primal = (&sw - &e - &z).amax();
        if primal <= tol && dual <= tol {
            converged = true;
            break;
        }
    }
    ColumnSolve { omega: w, iterations, converged }
}

/// Fits CLIME at a single penalty, returning the min-magnitude-symmetrized
/// estimate plus per-column certificates.
pub fn fit_clime(sigma: &SymMat, lambda: f64, opts: &SolverOptions) -> Result<ClimeFit> {
    if lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let p = sigma.dim();
    for i in 0..p {
        if sigma.get(i, i) <= 0.0 {
            return Err(Error::DegenerateVariable { index: i, value: sigma.get(i, i) });
        }
    }
    let s = sigma.as_matrix();
    let eig = sym_eigen(sigma);
    let op_norm_sq = eig.values.iter().fold(0.0f64, |a, &v| a.max(v.abs())).powi(2);

    let max_iter = opts.max_iter.max(1) * 2000;
    let tol = opts.tol.min(CLIME_TOL);

    let mut omega_tilde = DMatrix::zeros(p, p);
    let mut column_objective = Vec::with_capacity(p);
    let mut column_residual = Vec::with_capacity(p);
    let mut iterations = 0;
    let mut converged = true;
    for j in 0..p {
        let sol = solve_column(s, j, lambda, op_norm_sq, max_iter, tol, None);
        let residual = {
            let mut e = s * &sol.omega;
            e[j] -= 1.0;
            e.amax()
        };
        if residual > lambda + 100.0 * tol.max(1e-9) {
            return Err(Error::Infeasible { col: j, residual, bound: lambda });
        }
        column_objective.push(sol.omega.iter().map(|v| v.abs()).sum());
        column_residual.push(residual);
        iterations = iterations.max(sol.iterations);
        converged &= sol.converged;
        omega_tilde.set_column(j, &sol.omega);
    }

    // Min-magnitude symmetrization: per unordered pair keep the smaller-
    // magnitude entry (ties keep the (i, j), i < j entry).
    let theta = SymMat::from_fn(p, |i, j| {
        if i == j {
            omega_tilde[(i, i)]
        } else {
            let a = omega_tilde[(i, j)];
            let b = omega_tilde[(j, i)];
            if a.abs() <= b.abs() {
                a
            } else {
                b
            }
        }
    });
    let objective = column_objective.iter().sum::<f64>();
    Ok(ClimeFit {
        estimate: PrecisionEstimate {
            theta,
            lambda,
            method: Method::Clime,
            iterations,
            converged,
            objective: Some(objective),
        },
        omega_tilde,
        column_objective,
        column_residual,
    })
}
