//! Reference implementations used as independent test oracles.
//!
//! Everything here deliberately avoids the production solvers: brute-force
//! first-order methods run to high iteration counts, exhaustive vertex
//! enumeration for tiny linear programs, and naive two-pass statistics.
//! Slow and simple on purpose; only ever used from test code.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

/// Two-pass sample covariance with denominator n.
pub fn two_pass_covariance(rows: &[Vec<f64>], center: bool) -> DMatrix<f64> {
    let n = rows.len();
    let p = rows[0].len();
    let mut mean = vec![0.0; p];
    if center {
        for row in rows {
            for j in 0..p {
                mean[j] += row[j];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
    }
    let mut cov = DMatrix::zeros(p, p);
    for row in rows {
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    cov / n as f64
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn sym_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Clips eigenvalues of a symmetric matrix at `floor`.
fn clip_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let se = sym_part(m).symmetric_eigen();
    let p = m.nrows();
    let lam = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            se.eigenvalues[i].max(floor)
        } else {
            0.0
        }
    });
    sym_part(&(&se.eigenvectors * lam * se.eigenvectors.transpose()))
}

fn log_det_chol(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    Some(2.0 * (0..m.nrows()).map(|i| chol.l()[(i, i)].ln()).sum::<f64>())
}

fn l1_off(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut acc = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                acc += m[(i, j)].abs();
            }
        }
    }
    acc
}

/// Graphical lasso objective; None when theta is not positive definite.
pub fn glasso_objective(sigma: &DMatrix<f64>, theta: &DMatrix<f64>, lambda: f64) -> Option<f64> {
    let ld = log_det_chol(theta)?;
    Some((sigma * theta).trace() - ld + lambda * l1_off(theta))
}

/// First-order reference minimizer of the graphical lasso objective:
/// proximal gradient with backtracking, run to a high iteration count.
pub fn glasso_first_order(sigma: &DMatrix<f64>, lambda: f64, iters: usize) -> DMatrix<f64> {
    let p = sigma.nrows();
    let mut theta = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / sigma[(i, i)] } else { 0.0 });
    let mut alpha = 1.0;
    for _ in 0..iters {
        let inv = theta.clone().cholesky().expect("iterate stays PD").inverse();
        let grad = sigma - &inv;
        let f0 = glasso_objective(sigma, &theta, 0.0).expect("PD iterate");
        // Backtrack until the candidate is PD and satisfies the standard
        // sufficient-decrease bound for the smooth part.
        let mut accepted = None;
        for _ in 0..60 {
            let step = &theta - alpha * &grad;
            let mut cand = step.clone();
            for i in 0..p {
                for j in 0..p {
                    if i != j {
                        cand[(i, j)] = soft(step[(i, j)], alpha * lambda);
                    }
                }
            }
            let cand = sym_part(&cand);
            let diff = &cand - &theta;
            if let Some(fc) = glasso_objective(sigma, &cand, 0.0) {
                let quad = f0
                    + grad.iter().zip(diff.iter()).map(|(g, d)| g * d).sum::<f64>()
                    + diff.norm_squared() / (2.0 * alpha);
                if fc <= quad + 1e-12 {
                    accepted = Some((cand, diff.norm()));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let (next, change) = accepted.expect("backtracking found a PD step");
        theta = next;
        alpha = (alpha * 1.2).min(10.0);
        if change < 1e-13 {
            break;
        }
    }
    theta
}

/// Objective of the sparse-plus-low-rank penalized likelihood at (S, L)
/// = (r + l, l); None when r is not positive definite.
pub fn lvglasso_objective(
    sigma: &DMatrix<f64>,
    r: &DMatrix<f64>,
    l: &DMatrix<f64>,
    lambda: f64,
    gamma: f64,
) -> Option<f64> {
    let ld = log_det_chol(r)?;
    let s = r + l;
    Some((sigma * r).trace() - ld + lambda * (gamma * l1_off(&s) + l.trace()))
}

/// Best objective value found by long-horizon projected subgradient descent
/// on the sparse-plus-low-rank program, parameterized by (R, L) with
/// S = R + L so both cone constraints project separably.
pub fn lvglasso_subgradient_best(
    sigma: &DMatrix<f64>,
    lambda: f64,
    gamma: f64,
    iters: usize,
    step0: f64,
) -> f64 {
    let p = sigma.nrows();
    let mut r = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / sigma[(i, i)] } else { 0.0 });
    let mut l: DMatrix<f64> = DMatrix::zeros(p, p);
    let mut best = lvglasso_objective(sigma, &r, &l, lambda, gamma).expect("feasible start");
    for t in 0..iters {
        let inv = match r.clone().cholesky() {
            Some(c) => c.inverse(),
            None => {
                r = clip_eigenvalues(&r, 1e-9);
                r.clone().cholesky().expect("clipped to PD").inverse()
            }
        };
        let s = &r + &l;
        let mut z = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    z[(i, j)] = s[(i, j)].signum();
                }
            }
        }
        let g_r = sigma - &inv + lambda * gamma * &z;
        let g_l = lambda * gamma * &z + lambda * DMatrix::identity(p, p);
        let alpha = step0 / ((t + 1) as f64).sqrt();
        r = clip_eigenvalues(&(&r - alpha * &g_r), 1e-9);
        l = clip_eigenvalues(&(&l - alpha * &g_l), 0.0);
        if let Some(obj) = lvglasso_objective(sigma, &r, &l, lambda, gamma) {
            if obj < best {
                best = obj;
            }
        }
    }
    best
}

/// Optimal objective of one column of the constrained l1-minimization
/// program, computed by enumerating basic feasible solutions of the
/// split-variable linear program. Only sensible for tiny p.
///
/// Program: minimize sum(x) over x >= 0 in R^{2p}, subject to
/// |sigma (x_plus - x_minus) - e_col|_inf <= lambda.
pub fn clime_column_vertex_objective(sigma: &DMatrix<f64>, lambda: f64, col: usize) -> Option<f64> {
    let p = sigma.nrows();
    let nv = 2 * p;
    // Inequality rows: [sigma, -sigma] x <= lambda 1 + e  and
    //                  [-sigma, sigma] x <= lambda 1 - e.
    let mut a = DMatrix::zeros(2 * p, nv);
    let mut b = DVector::zeros(2 * p);
    for i in 0..p {
        for j in 0..p {
            a[(i, j)] = sigma[(i, j)];
            a[(i, p + j)] = -sigma[(i, j)];
            a[(p + i, j)] = -sigma[(i, j)];
            a[(p + i, p + j)] = sigma[(i, j)];
        }
        let e = if i == col { 1.0 } else { 0.0 };
        b[i] = lambda + e;
        b[p + i] = lambda - e;
    }
    // Constraint index c < 2p selects inequality row c; c >= 2p selects the
    // bound x_{c-2p} = 0.
    let total = 4 * p;
    let mut best: Option<f64> = None;
    for combo in (0..total).combinations(nv) {
        let mut m = DMatrix::zeros(nv, nv);
        let mut rhs = DVector::zeros(nv);
        for (r, &c) in combo.iter().enumerate() {
            if c < 2 * p {
                for v in 0..nv {
                    m[(r, v)] = a[(c, v)];
                }
                rhs[r] = b[c];
            } else {
                m[(r, c - 2 * p)] = 1.0;
                rhs[r] = 0.0;
            }
        }
        let Some(x) = m.lu().solve(&rhs) else { continue };
        if x.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let ax = &a * &x;
        if (0..2 * p).any(|i| ax[i] > b[i] + 1e-9) {
            continue;
        }
        let obj = x.sum();
        best = Some(match best {
            Some(cur) if cur <= obj => cur,
            _ => obj,
        });
    }
    best
}

/// Marginal precision of the observed block computed the brute-force way:
/// invert the full matrix, extract the observed covariance block, invert it.
pub fn marginal_precision_by_full_inversion(
    theta_o: &DMatrix<f64>,
    theta_oh: &DMatrix<f64>,
    theta_h: &DMatrix<f64>,
) -> DMatrix<f64> {
    let po = theta_o.nrows();
    let ph = theta_h.nrows();
    let n = po + ph;
    let mut full = DMatrix::zeros(n, n);
    for i in 0..po {
        for j in 0..po {
            full[(i, j)] = theta_o[(i, j)];
        }
        for j in 0..ph {
            full[(i, po + j)] = theta_oh[(i, j)];
            full[(po + j, i)] = theta_oh[(i, j)];
        }
    }
    for i in 0..ph {
        for j in 0..ph {
            full[(po + i, po + j)] = theta_h[(i, j)];
        }
    }
    let sigma_full = full.try_inverse().expect("full matrix invertible");
    let sigma_o = sigma_full.view((0, 0), (po, po)).into_owned();
    sym_part(&sigma_o.try_inverse().expect("observed covariance invertible"))
}

/// Least squares by the normal equations.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let gram = x.transpose() * x;
    let rhs = x.transpose() * y;
    gram.lu().solve(&rhs).expect("full-rank design")
}
