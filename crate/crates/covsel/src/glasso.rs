//! Graphical lasso: l1-penalized Gaussian maximum likelihood for the
//! precision matrix.
//!
//! Minimizes `tr(S Theta) - log det Theta + lambda * sum_{j!=k} |Theta_jk|`
//! by block coordinate descent on the working covariance W (Friedman-style
//! outer loop), with each column subproblem solved as a lasso by coordinate
//! descent. The diagonal is never penalized.
//!
//! Optimality is certified through the stationarity condition
//! `S - W + lambda * Z = 0` with `W = Theta^{-1}` and Z a subgradient of the
//! off-diagonal l1 norm; `kkt_residual` measures the worst violation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimate::{Method, PrecisionEstimate, SolverOptions};
use crate::linalg::{l1_off_diagonal, log_det, spd_inverse, trace_product};
use crate::mat::SymMat;

/// Soft-thresholding operator; returns exactly 0 whenever |x| <= t.
#[inline]
pub(crate) fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Lasso subproblem for one column: minimize
/// `0.5 b' W11 b - s12' b + lambda ||b||_1` by cyclic coordinate descent.
///
/// `beta` is updated in place (warm start). Returns the sweep count.
fn column_lasso(
    w11: &DMatrix<f64>,
    s12: &DVector<f64>,
    lambda: f64,
    beta: &mut DVector<f64>,
    opts: &SolverOptions,
) -> usize {
    let q = s12.len();
    // Maintain g = W11 * beta so each coordinate update is O(q).
    let mut g = w11 * &*beta;
    let mut sweeps = 0;
    for _ in 0..opts.inner_max_iter {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        for k in 0..q {
            let old = beta[k];
            let z = s12[k] - g[k] + w11[(k, k)] * old;
            let new = soft_threshold(z, lambda) / w11[(k, k)];
            if new != old {
                let d = new - old;
                for l in 0..q {
                    g[l] += w11[(k, l)] * d;
                }
                beta[k] = new;
                max_delta = max_delta.max(d.abs());
            }
        }
        if max_delta <= opts.inner_tol * (1.0 + beta.amax()) {
            break;
        }
    }
    sweeps
}

fn check_diagonal(sigma: &SymMat) -> Result<()> {
    for i in 0..sigma.dim() {
        let v = sigma.get(i, i);
        if v <= 0.0 {
            return Err(Error::DegenerateVariable { index: i, value: v });
        }
    }
    Ok(())
}

/// Penalized objective `tr(S Theta) - log det Theta + lambda ||Theta||_{1,off}`.
pub fn glasso_objective(sigma: &SymMat, theta: &SymMat, lambda: f64) -> Result<f64> {
    Ok(trace_product(sigma, theta)? - log_det(theta)? + lambda * l1_off_diagonal(theta))
}

struct GlassoState {
    w: DMatrix<f64>,
    betas: DMatrix<f64>,
}

fn run_glasso(
    sigma: &SymMat,
    lambda: f64,
    opts: &SolverOptions,
    state: &mut GlassoState,
) -> Result<(SymMat, usize, bool)> {
    let p = sigma.dim();
    let s = sigma.as_matrix();
    // Diagonal of W is pinned to the sample covariance diagonal (no diagonal
    // penalty), so only off-diagonals ever move.
    for j in 0..p {
        state.w[(j, j)] = s[(j, j)];
    }

    let mean_off = if p > 1 {
        l1_off_diagonal(sigma) / (p * (p - 1)) as f64
    } else {
        0.0
    };
    let threshold = opts.tol * mean_off;

    let mut iterations = 0;
    let mut converged = false;
    let others: Vec<Vec<usize>> =
        (0..p).map(|j| (0..p).filter(|&i| i != j).collect()).collect();

    let mut w11 = DMatrix::zeros(p.saturating_sub(1), p.saturating_sub(1));
    let mut s12 = DVector::zeros(p.saturating_sub(1));
    let mut beta = DVector::zeros(p.saturating_sub(1));

    while iterations < opts.max_iter {
        iterations += 1;
        let mut change = 0.0f64;
        for j in 0..p {
            let idx = &others[j];
            for (a, &ia) in idx.iter().enumerate() {
                s12[a] = s[(ia, j)];
                beta[a] = state.betas[(ia, j)];
                for (b, &ib) in idx.iter().enumerate() {
                    w11[(a, b)] = state.w[(ia, ib)];
                }
            }
            column_lasso(&w11, &s12, lambda, &mut beta, opts);
            let w12 = &w11 * &beta;
            for (a, &ia) in idx.iter().enumerate() {
                change += (state.w[(ia, j)] - w12[a]).abs();
                state.w[(ia, j)] = w12[a];
                state.w[(j, ia)] = w12[a];
                state.betas[(ia, j)] = beta[a];
            }
        }
        let mean_change = change / (p * (p - 1)).max(1) as f64;
        if mean_change <= threshold {
            converged = true;
            break;
        }
    }

    // Recover Theta from W and the column coefficients.
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let idx = &others[j];
        let mut w12_beta = 0.0;
        for &ia in idx {
            w12_beta += state.w[(ia, j)] * state.betas[(ia, j)];
        }
        let denom = state.w[(j, j)] - w12_beta;
        if denom <= 0.0 || !denom.is_finite() {
            return Err(Error::NotPositiveDefinite { min_eig: denom });
        }
        let tjj = 1.0 / denom;
        theta[(j, j)] = tjj;
        for &ia in idx {
            theta[(ia, j)] = -state.betas[(ia, j)] * tjj;
        }
    }
    let theta = SymMat::symmetrized(&theta)?;
    Ok((theta, iterations, converged))
}

/// Fits the graphical lasso at a single penalty.
pub fn fit_glasso(sigma: &SymMat, lambda: f64, opts: &SolverOptions) -> Result<PrecisionEstimate> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {lambda}")));
    }
    check_diagonal(sigma)?;
    let p = sigma.dim();
    let mut state = GlassoState { w: sigma.as_matrix().clone(), betas: DMatrix::zeros(p, p) };
    let (theta, iterations, converged) = run_glasso(sigma, lambda, opts, &mut state)?;
    let objective = glasso_objective(sigma, &theta, lambda).ok();
    Ok(PrecisionEstimate { theta, lambda, method: Method::Glasso, iterations, converged, objective })
}

/// Fits a descending penalty path, warm-starting each fit from the previous
/// solution. Each element satisfies the single-fit contract independently.
pub fn fit_glasso_path(
    sigma: &SymMat,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<PrecisionEstimate>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if lambdas.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidArgument("path lambdas must be strictly positive".into()));
    }
    if lambdas.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument("path lambdas must be strictly descending".into()));
    }
    check_diagonal(sigma)?;
    let p = sigma.dim();
    let mut state = GlassoState { w: sigma.as_matrix().clone(), betas: DMatrix::zeros(p, p) };
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (theta, iterations, converged) = run_glasso(sigma, lambda, opts, &mut state)?;
        let objective = glasso_objective(sigma, &theta, lambda).ok();
        out.push(PrecisionEstimate {
            theta,
            lambda,
            method: Method::Glasso,
            iterations,
            converged,
            objective,
        });
    }
    Ok(out)
}

/// Maximum stationarity violation of an estimate against the optimality
/// condition, with `W = Theta^{-1}`:
/// diagonal `|S_ii - W_ii|`; active off-diagonals
/// `|S_ij - W_ij + lambda sign(Theta_ij)|`; inactive off-diagonals
/// `max(0, |S_ij - W_ij| - lambda)`.
pub fn kkt_residual(est: &PrecisionEstimate, sigma: &SymMat, lambda: f64) -> Result<f64> {
    if est.theta.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), got: est.theta.dim() });
    }
    let w = spd_inverse(&est.theta)?;
    let p = sigma.dim();
    let mut worst = 0.0f64;
    for i in 0..p {
        worst = worst.max((sigma.get(i, i) - w.get(i, i)).abs());
        for j in (i + 1)..p {
            let r = sigma.get(i, j) - w.get(i, j);
            let t = est.theta.get(i, j);
            let v = if t != 0.0 {
                (r + lambda * t.signum()).abs()
            } else {
                (r.abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{edge_set, min_eigenvalue, DEFAULT_EDGE_TOL};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(p: usize, seed: u64) -> SymMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        SymMat::symmetrized(&(a.transpose() * &a / p as f64 + DMatrix::identity(p, p))).unwrap()
    }

    #[test]
    fn identity_input_gives_identity() {
        for lambda in [0.0, 0.3, 2.0] {
            let est = fit_glasso(&SymMat::identity(4), lambda, &SolverOptions::default()).unwrap();
            assert!(est.converged);
            for i in 0..4 {
                for j in 0..4 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(est.theta.get(i, j), want, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn large_lambda_zeroes_correlated_pair() {
        // KKT holds at the diagonal solution once lambda >= |rho|: the
        // subgradient rho/lambda lies in [-1, 1].
        for rho in [0.4, -0.6] {
            let sigma = SymMat::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]).unwrap();
            let est = fit_glasso(&sigma, rho.abs(), &SolverOptions::default()).unwrap();
            assert_abs_diff_eq!(est.theta.get(0, 1), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(est.theta.get(0, 0), 1.0, epsilon = 1e-9);
            let r = kkt_residual(&est, &sigma, rho.abs()).unwrap();
            assert!(r <= 1e-8, "kkt residual {r}");
        }
    }

    #[test]
    fn diagonal_support_above_max_off_diagonal() {
        let sigma = random_spd(6, 3);
        let lambda = sigma.max_abs_off_diagonal() + 1e-9;
        let est = fit_glasso(&sigma, lambda, &SolverOptions::default()).unwrap();
        assert!(edge_set(&est.theta, DEFAULT_EDGE_TOL).is_empty());
    }

    #[test]
    fn kkt_residual_hand_values() {
        let id = PrecisionEstimate {
            theta: SymMat::identity(2),
            lambda: 0.3,
            method: Method::Glasso,
            iterations: 1,
            converged: true,
            objective: None,
        };
        assert_abs_diff_eq!(kkt_residual(&id, &SymMat::identity(2), 0.3).unwrap(), 0.0, epsilon = 1e-15);

        let sigma = SymMat::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_abs_diff_eq!(kkt_residual(&id, &sigma, 0.1).unwrap(), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn fit_satisfies_kkt_certificate() {
        for seed in [1u64, 2, 3] {
            let sigma = random_spd(8, seed);
            let opts = SolverOptions::with_tol(1e-7);
            let est = fit_glasso(&sigma, 0.1, &opts).unwrap();
            assert!(est.converged);
            assert!(min_eigenvalue(&est.theta) > 0.0);
            let r = kkt_residual(&est, &sigma, 0.1).unwrap();
            assert!(r <= 1e-4, "seed {seed}: kkt residual {r}");
        }
    }

    #[test]
    fn matches_first_order_reference_on_seeded_instance() {
        let sigma = random_spd(5, 17);
        let est = fit_glasso(&sigma, 0.1, &SolverOptions::with_tol(1e-8)).unwrap();
        let reference = covsel_testkit::glasso_first_order(sigma.as_matrix(), 0.1, 200_000);
        for i in 0..5 {
            for j in 0..5 {
                assert_abs_diff_eq!(est.theta.get(i, j), reference[(i, j)], epsilon = 1e-3);
            }
        }
    }

    #[test]
    fn objective_beats_diagonal_feasible_point() {
        let sigma = random_spd(6, 9);
        let lambda = 0.2;
        let est = fit_glasso(&sigma, lambda, &SolverOptions::default()).unwrap();
        let diag = SymMat::from_diagonal(
            &(0..6).map(|i| 1.0 / sigma.get(i, i)).collect::<Vec<_>>(),
        );
        let at_diag = glasso_objective(&sigma, &diag, lambda).unwrap();
        assert!(est.objective.unwrap() <= at_diag + 1e-9);
    }

    #[test]
    fn scale_equivariance() {
        let sigma = random_spd(5, 21);
        let opts = SolverOptions::default();
        let base = fit_glasso(&sigma, 0.15, &opts).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let scaled = fit_glasso(&sigma.scale(c), 0.15 * c, &opts).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    assert_abs_diff_eq!(
                        scaled.theta.get(i, j),
                        base.theta.get(i, j) / c,
                        epsilon = 5.0 * opts.tol
                    );
                }
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let sigma = random_spd(5, 33);
        let perm = [3usize, 0, 4, 1, 2];
        let permuted = SymMat::from_fn(5, |i, j| sigma.get(perm[i], perm[j]));
        let opts = SolverOptions::default();
        let base = fit_glasso(&sigma, 0.1, &opts).unwrap();
        let fitted = fit_glasso(&permuted, 0.1, &opts).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_abs_diff_eq!(
                    fitted.theta.get(i, j),
                    base.theta.get(perm[i], perm[j]),
                    epsilon = 5.0 * opts.tol
                );
            }
        }
    }

    #[test]
    fn path_matches_single_fits_and_counts_decrease_with_lambda() {
        let sigma = random_spd(8, 5);
        let opts = SolverOptions::default();

        let single = fit_glasso(&sigma, 0.2, &opts).unwrap();
        let path = fit_glasso_path(&sigma, &[0.2], &opts).unwrap();
        assert_eq!(path.len(), 1);
        for i in 0..8 {
            for j in 0..8 {
                assert_abs_diff_eq!(path[0].theta.get(i, j), single.theta.get(i, j), epsilon = 1e-6);
            }
        }

        let id_path = fit_glasso_path(&SymMat::identity(3), &[1.0, 0.5], &opts).unwrap();
        for est in &id_path {
            assert!(edge_set(&est.theta, DEFAULT_EDGE_TOL).is_empty());
        }

        let lambdas: Vec<f64> =
            (0..10).map(|k| 0.6 * (10f64).powf(-(k as f64) / 9.0)).collect();
        let path = fit_glasso_path(&sigma, &lambdas, &opts).unwrap();
        let counts: Vec<usize> =
            path.iter().map(|e| edge_set(&e.theta, DEFAULT_EDGE_TOL).len()).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "counts not monotone: {counts:?}");
        for (est, &lambda) in path.iter().zip(&lambdas) {
            let r = kkt_residual(est, &sigma, lambda).unwrap();
            assert!(r <= 1e-4, "lambda {lambda}: residual {r}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let sigma = SymMat::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            fit_glasso(&sigma, 0.1, &SolverOptions::default()),
            Err(Error::DegenerateVariable { index: 0, .. })
        ));
        let ok = SymMat::identity(2);
        assert!(fit_glasso(&ok, -0.1, &SolverOptions::default()).is_err());
        assert!(fit_glasso_path(&ok, &[0.5, 0.5], &SolverOptions::default()).is_err());
        assert!(fit_glasso_path(&ok, &[], &SolverOptions::default()).is_err());
    }
}
