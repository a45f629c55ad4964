//! Latent variable graphical model: sparse-plus-low-rank penalized maximum
//! likelihood, solved by three-block ADMM.
//!
//! Minimizes `tr((S - L) Sigma_hat) - log det(S - L)
//! + lambda (gamma sum_{j!=k} |S_jk| + tr L)` over `S - L > 0, L >= 0`.
//! The consensus variable R tracks S - L; its update is the log-det proximal
//! map, S is updated by off-diagonal soft-thresholding, and L by eigenvalue
//! shrinkage followed by projection onto the PSD cone.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimate::SolverOptions;
use crate::glasso::soft_threshold;
use crate::linalg::{l1_off_diagonal, log_det, sym_eigen, trace_product};
use crate::mat::{EdgeSet, SymMat};
use crate::linalg::edge_set;

/// Fitted (S, L) pair with its penalty setting and solver diagnostics.
#[derive(Clone, Debug)]
pub struct LatentDecomposition {
    pub s_hat: SymMat,
    pub l_hat: SymMat,
    pub lambda: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl LatentDecomposition {
    /// Penalized objective at the fitted pair.
    pub fn objective(&self, sigma: &SymMat) -> Result<f64> {
        lvglasso_objective(sigma, &self.s_hat, &self.l_hat, self.lambda, self.gamma)
    }
}

/// Objective of the sparse-plus-low-rank program at (S, L).
pub fn lvglasso_objective(
    sigma: &SymMat,
    s: &SymMat,
    l: &SymMat,
    lambda: f64,
    gamma: f64,
) -> Result<f64> {
    let r = s.sub(l)?;
    let trace_l: f64 = (0..l.dim()).map(|i| l.get(i, i)).sum();
    Ok(trace_product(sigma, &r)? - log_det(&r)? + lambda * (gamma * l1_off_diagonal(s) + trace_l))
}

fn eig_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let sym = SymMat::symmetrized(m).expect("finite symmetric input");
    let eig = sym_eigen(&sym);
    let p = m.nrows();
    let mut scaled = eig.vectors.clone();
    for c in 0..p {
        scaled.column_mut(c).scale_mut(f(eig.values[c]));
    }
    let out = &scaled * eig.vectors.transpose();
    // Exact symmetry for downstream SymMat construction.
    DMatrix::from_fn(p, p, |i, j| 0.5 * (out[(i, j)] + out[(j, i)]))
}

/// Fits the latent variable graphical model by ADMM.
pub fn fit_lvglasso(
    sigma: &SymMat,
    lambda: f64,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<LatentDecomposition> {
    if lambda <= 0.0 || gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda and gamma must be positive, got lambda {lambda}, gamma {gamma}"
        )));
    }
    let p = sigma.dim();
    for i in 0..p {
        if sigma.get(i, i) <= 0.0 {
            return Err(Error::DegenerateVariable { index: i, value: sigma.get(i, i) });
        }
    }
    let smat = sigma.as_matrix();

    // Feasible, cheap start: S = 2 diag(1 / Sigma_ii), L = 0, dual = 0.
    let mut s = DMatrix::from_fn(p, p, |i, j| if i == j { 2.0 / sigma.get(i, i) } else { 0.0 });
    let mut l: DMatrix<f64> = DMatrix::zeros(p, p);
    let mut r;
    let mut u: DMatrix<f64> = DMatrix::zeros(p, p);
    let mut rho = 1.0f64;

    let mut iterations = 0;
    let mut converged = false;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let max_iter = opts.max_iter.max(1) * 50;
    let scale = (p as f64).sqrt();

    for it in 0..max_iter {
        iterations = it + 1;
        // R-step: log-det proximal map. Eigenvalues of Sigma - rho (S - L - U)
        // map through v -> (-v + sqrt(v^2 + 4 rho)) / (2 rho), always positive.
        let c = smat - rho * (&s - &l - &u);
        r = eig_map(&c, |v| (-v + (v * v + 4.0 * rho).sqrt()) / (2.0 * rho));

        // S-step: off-diagonal soft-thresholding of R + L + U.
        let target_s = &r + &l + &u;
        let s_new = DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                target_s[(i, j)]
            } else {
                soft_threshold(target_s[(i, j)], lambda * gamma / rho)
            }
        });

        // L-step: shift eigenvalues of S - R - U by -lambda/rho, clip at 0.
        let target_l = &s_new - &r - &u;
        let l_new = eig_map(&target_l, |v| (v - lambda / rho).max(0.0));

        let ds = &s_new - &s;
        let dl = &l_new - &l;
        dual = rho * (ds - dl).norm() / scale;
        s = s_new;
        l = l_new;

        let gap = &r - &s + &l;
        primal = gap.norm() / scale;
        u += gap;

        if !primal.is_finite() || !dual.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite ADMM residuals at iteration {iterations} (lambda {lambda}, gamma {gamma})"
            )));
        }
        if primal.max(dual) < opts.tol {
            converged = true;
            break;
        }
        // Residual balancing keeps the two residuals within a factor of 10.
        if primal > 10.0 * dual {
            rho *= 2.0;
            u /= 2.0;
        } else if dual > 10.0 * primal {
            rho /= 2.0;
            u *= 2.0;
        }
    }

    let s_hat = SymMat::symmetrized(&s)?;
    let l_hat = SymMat::symmetrized(&l)?;

    // Constraint-set membership: L PSD within slack, S - L PD.
    let l_min = sym_eigen(&l_hat).min();
    if l_min < -1e-8 {
        return Err(Error::Numeric(format!("L eigenvalue {l_min:.3e} below PSD slack")));
    }
    let diff = s_hat.sub(&l_hat)?;
    let diff_min = sym_eigen(&diff).min();
    if diff_min <= 1e-10 {
        return Err(Error::NotPositiveDefinite { min_eig: diff_min });
    }

    Ok(LatentDecomposition {
        s_hat,
        l_hat,
        lambda,
        gamma,
        iterations,
        converged,
        primal_residual: primal,
        dual_residual: dual,
    })
}

/// Support of the sparse part.
pub fn lv_edge_set(fit: &LatentDecomposition, tol: f64) -> EdgeSet {
    edge_set(&fit.s_hat, tol)
}

/// Rank of the low-rank part at a fixed eigenvalue cutoff.
pub fn lv_rank(fit: &LatentDecomposition, tol: f64) -> usize {
    sym_eigen(&fit.l_hat).values.iter().filter(|&&v| v > tol).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DEFAULT_EDGE_TOL;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(p: usize, seed: u64) -> SymMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        SymMat::symmetrized(&(a.transpose() * &a / p as f64 + DMatrix::identity(p, p))).unwrap()
    }

    fn initialization_objective(sigma: &SymMat, lambda: f64, gamma: f64) -> f64 {
        let p = sigma.dim();
        let s0 = SymMat::from_diagonal(&(0..p).map(|i| 2.0 / sigma.get(i, i)).collect::<Vec<_>>());
        lvglasso_objective(sigma, &s0, &SymMat::zeros(p), lambda, gamma).unwrap()
    }

    #[test]
    fn identity_input_gives_identity_and_zero_l() {
        let fit = fit_lvglasso(&SymMat::identity(4), 0.5, 1.0, &SolverOptions::default()).unwrap();
        assert!(fit.converged);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(fit.s_hat.get(i, j), want, epsilon = 1e-4);
                assert_abs_diff_eq!(fit.l_hat.get(i, j), 0.0, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn constraint_membership_on_random_inputs() {
        for seed in [1u64, 7, 19] {
            let sigma = random_spd(5, seed);
            let fit = fit_lvglasso(&sigma, 0.3, 1.0, &SolverOptions::default()).unwrap();
            assert!(sym_eigen(&fit.l_hat).min() >= -1e-8);
            assert!(sym_eigen(&fit.s_hat.sub(&fit.l_hat).unwrap()).min() > 1e-10);
        }
    }

    #[test]
    fn final_objective_beats_initialization() {
        for seed in [3u64, 11] {
            let sigma = random_spd(6, seed);
            let (lambda, gamma) = (0.2, 2.0);
            let fit = fit_lvglasso(&sigma, lambda, gamma, &SolverOptions::default()).unwrap();
            let at_init = initialization_objective(&sigma, lambda, gamma);
            assert!(fit.objective(&sigma).unwrap() <= at_init + 1e-8);
        }
    }

    #[test]
    fn matches_subgradient_oracle_on_small_instance() {
        let sigma = random_spd(4, 42);
        let (lambda, gamma) = (0.2, 2.0);
        let opts = SolverOptions::with_tol(1e-8);
        let fit = fit_lvglasso(&sigma, lambda, gamma, &opts).unwrap();
        let obj = fit.objective(&sigma).unwrap();
        let oracle =
            covsel_testkit::lvglasso_subgradient_best(sigma.as_matrix(), lambda, gamma, 200_000, 0.1);
        assert!(
            (obj - oracle).abs() <= 1e-3,
            "admm {obj} vs subgradient best {oracle}"
        );
    }

    #[test]
    fn larger_gamma_sparsifies_s() {
        let sigma = random_spd(6, 55);
        let opts = SolverOptions::default();
        let mut counts = Vec::new();
        for gamma in [0.5, 1.0, 2.0, 4.0] {
            let fit = fit_lvglasso(&sigma, 0.2, gamma, &opts).unwrap();
            counts.push(lv_edge_set(&fit, DEFAULT_EDGE_TOL).len());
        }
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    }

    #[test]
    fn edge_set_reads_sparse_part_support() {
        let fit = LatentDecomposition {
            s_hat: SymMat::from_fn(3, |i, j| match (i, j) {
                (0, 1) => 0.3,
                (i, j) if i == j => 1.0,
                _ => 0.0,
            }),
            l_hat: SymMat::zeros(3),
            lambda: 0.1,
            gamma: 1.0,
            iterations: 0,
            converged: true,
            primal_residual: 0.0,
            dual_residual: 0.0,
        };
        let e = lv_edge_set(&fit, 0.1);
        assert_eq!(e.len(), 1);
        assert!(e.contains(0, 1));
        assert!(lv_edge_set(&fit, 0.5).is_empty());

        let diag_only = LatentDecomposition {
            s_hat: SymMat::identity(3),
            ..fit
        };
        assert!(lv_edge_set(&diag_only, DEFAULT_EDGE_TOL).is_empty());
    }

    #[test]
    fn rejects_bad_penalties() {
        assert!(fit_lvglasso(&SymMat::identity(3), 0.0, 1.0, &SolverOptions::default()).is_err());
        assert!(fit_lvglasso(&SymMat::identity(3), 0.1, 0.0, &SolverOptions::default()).is_err());
    }
}
