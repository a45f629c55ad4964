//! Hard thresholding and tuning: threshold selection by oracle edge count or
//! extended BIC, K-fold cross-validation, and the default initial penalty.
//!
//! The thresholding operator keeps an off-diagonal entry only when its
//! magnitude strictly exceeds tau; the diagonal is never touched and the
//! result is not projected back to positive definiteness (only support and
//! sign are asserted downstream).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimate::{PrecisionEstimate, SolverOptions};
use crate::glasso::fit_glasso_path;
use crate::linalg::{edge_set, log_det, sample_covariance, trace_product};
use crate::lvglasso::fit_lvglasso;
use crate::mat::{DataMatrix, EdgeSet, SymMat};

/// A hard-thresholded estimate: base fit, threshold, and resulting support.
#[derive(Clone, Debug)]
pub struct ThresholdedEstimate {
    pub base: PrecisionEstimate,
    pub tau: f64,
    pub theta_tilde: SymMat,
    pub edges: EdgeSet,
}

/// Zeroes off-diagonal entries with |value| <= tau (strict ">" keeps).
pub fn hard_threshold(base: &PrecisionEstimate, tau: f64) -> Result<ThresholdedEstimate> {
    if tau < 0.0 {
        return Err(Error::InvalidArgument(format!("tau must be non-negative, got {tau}")));
    }
    let p = base.theta.dim();
    let theta_tilde = SymMat::from_fn(p, |i, j| {
        let v = base.theta.get(i, j);
        if i == j || v.abs() > tau {
            v
        } else {
            0.0
        }
    });
    let edges = edge_set(&theta_tilde, 0.0);
    Ok(ThresholdedEstimate { base: base.clone(), tau, theta_tilde, edges })
}

/// Result of searching a threshold for a requested edge count.
#[derive(Clone, Debug)]
pub struct ThresholdSearch {
    pub tau: f64,
    pub estimate: ThresholdedEstimate,
    /// True when the achieved count fell short of the request (magnitude
    /// ties removed together, or fewer nonzero pairs than requested).
    pub shortfall: bool,
}

/// Smallest tau among the given distinct magnitudes such that
/// `#{m : m > tau} <= k`. Ties are removed together, so the kept count may
/// undershoot k but never overshoots. Returns (tau, kept_count).
pub fn tau_for_count(magnitudes: impl IntoIterator<Item = f64>, k: usize) -> (f64, usize) {
    let mut mags: Vec<f64> = magnitudes.into_iter().filter(|&m| m > 0.0).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut levels: Vec<(f64, usize)> = Vec::new();
    for m in mags {
        match levels.last_mut() {
            Some((lv, c)) if *lv == m => *c += 1,
            _ => levels.push((m, 1)),
        }
    }

    let mut kept = 0usize;
    let mut tau = levels.first().map_or(0.0, |&(m, _)| m);
    for (idx, &(level, count)) in levels.iter().enumerate() {
        if kept + count > k {
            // Keeping this magnitude level would overshoot; threshold at it.
            tau = level;
            break;
        }
        kept += count;
        tau = levels.get(idx + 1).map_or(0.0, |&(m, _)| m);
    }
    (tau, kept)
}

/// Smallest tau among the distinct |off-diagonal| magnitudes such that the
/// thresholded edge count is <= k. Ties in magnitude are removed together,
/// so the count may undershoot k but never overshoots.
pub fn threshold_for_edge_count(base: &PrecisionEstimate, k: usize) -> Result<ThresholdSearch> {
    let p = base.theta.dim();
    let max_pairs = p * (p - 1) / 2;
    if k > max_pairs {
        return Err(Error::InvalidArgument(format!(
            "requested {k} edges but only {max_pairs} pairs exist"
        )));
    }
    let (tau, _) = tau_for_count(base.theta.upper_triangle().map(|(_, _, v)| v.abs()), k);
    let estimate = hard_threshold(base, tau)?;
    let shortfall = estimate.edges.len() < k;
    Ok(ThresholdSearch { tau, estimate, shortfall })
}

/// Extended BIC: `-2 l + |E| log n + 4 |E| gamma_ebic log p`, with the
/// Gaussian log-likelihood `l = (n/2)(log det Theta - tr(Sigma_hat Theta))`
/// evaluated at the supplied estimate.
pub fn ebic_score(
    edges: &EdgeSet,
    theta: &SymMat,
    sigma_hat: &SymMat,
    n: usize,
    gamma_ebic: f64,
) -> Result<f64> {
    if theta.dim() != sigma_hat.dim() {
        return Err(Error::DimensionMismatch { expected: sigma_hat.dim(), got: theta.dim() });
    }
    if !(0.0..=1.0).contains(&gamma_ebic) {
        return Err(Error::InvalidArgument(format!("gamma_ebic must lie in [0,1], got {gamma_ebic}")));
    }
    let p = theta.dim() as f64;
    let ll = 0.5 * n as f64 * (log_det(theta)? - trace_product(sigma_hat, theta)?);
    let e = edges.len() as f64;
    Ok(-2.0 * ll + e * (n as f64).ln() + 4.0 * e * gamma_ebic * p.ln())
}

/// One (lambda, tau) candidate for EBIC selection.
#[derive(Clone, Debug)]
pub struct EbicCandidate {
    pub lambda: f64,
    pub tau: f64,
    pub theta: SymMat,
    pub edges: EdgeSet,
}

/// Index of the EBIC-minimizing candidate; ties break toward larger tau,
/// then larger lambda (sparser models). Candidates whose likelihood is
/// undefined (non-PD theta) are skipped.
pub fn select_by_ebic(
    candidates: &[EbicCandidate],
    sigma_hat: &SymMat,
    n: usize,
    gamma_ebic: f64,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate list".into()));
    }
    let mut best: Option<(f64, f64, f64, usize)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let Ok(score) = ebic_score(&c.edges, &c.theta, sigma_hat, n, gamma_ebic) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((bs, bt, bl, _)) => {
                score < bs
                    || (score == bs && (c.tau > bt || (c.tau == bt && c.lambda > bl)))
            }
        };
        if better {
            best = Some((score, c.tau, c.lambda, i));
        }
    }
    best.map(|(_, _, _, i)| i)
        .ok_or_else(|| Error::Numeric("no candidate had a defined likelihood".into()))
}

/// Which estimator cross-validation refits per fold.
#[derive(Clone, Copy, Debug)]
pub enum CvMethod {
    Glasso,
    Lvglasso { gamma: f64 },
}

/// K-fold cross-validation over a penalty grid. Folds are contiguous blocks
/// of a seeded shuffle; the score is the held-out negative Gaussian
/// log-likelihood `tr(Sigma_test Theta_train) - log det Theta_train`
/// averaged over folds. Returns the arg-min penalty.
pub fn kfold_cv(
    data: &DataMatrix,
    lambdas: &[f64],
    k_folds: usize,
    method: CvMethod,
    opts: &SolverOptions,
    seed: u64,
) -> Result<f64> {
    let scored = kfold_cv_scores(data, lambdas, k_folds, method, opts, seed)?;
    let mut best = 0usize;
    for i in 1..scored.len() {
        if scored[i].1 < scored[best].1 {
            best = i;
        }
    }
    Ok(scored[best].0)
}

/// As [`kfold_cv`], but returns every (lambda, mean held-out score) pair in
/// descending-lambda order.
pub fn kfold_cv_scores(
    data: &DataMatrix,
    lambdas: &[f64],
    k_folds: usize,
    method: CvMethod,
    opts: &SolverOptions,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if k_folds < 2 {
        return Err(Error::InvalidArgument(format!("K must be at least 2, got {k_folds}")));
    }
    let n = data.n();
    if n < k_folds {
        return Err(Error::TooFewRows { need: k_folds, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    // Contiguous blocks after the shuffle; sizes differ by at most one.
    let mut bounds = Vec::with_capacity(k_folds + 1);
    bounds.push(0usize);
    for f in 1..=k_folds {
        bounds.push(f * n / k_folds);
    }

    let mut descending: Vec<f64> = lambdas.to_vec();
    descending.sort_by(|a, b| b.total_cmp(a));
    descending.dedup();

    let mut scores = vec![0.0f64; descending.len()];
    for f in 0..k_folds {
        let (lo, hi) = (bounds[f], bounds[f + 1]);
        let test_idx: Vec<usize> = order[lo..hi].to_vec();
        if test_idx.len() < 2 {
            return Err(Error::TooFewRows { need: 2, got: test_idx.len() });
        }
        let train_idx: Vec<usize> =
            order[..lo].iter().chain(order[hi..].iter()).copied().collect();
        let train = data.select_rows(&train_idx)?;
        let test = data.select_rows(&test_idx)?;
        let sigma_train = sample_covariance(&train, true)?;
        let sigma_test = sample_covariance(&test, true)?;
        match method {
            CvMethod::Glasso => {
                let path = fit_glasso_path(&sigma_train, &descending, opts)?;
                for (i, est) in path.iter().enumerate() {
                    scores[i] +=
                        trace_product(&sigma_test, &est.theta)? - log_det(&est.theta)?;
                }
            }
            CvMethod::Lvglasso { gamma } => {
                for (i, &lambda) in descending.iter().enumerate() {
                    let fit = fit_lvglasso(&sigma_train, lambda, gamma, opts)?;
                    let marginal = fit.s_hat.sub(&fit.l_hat)?;
                    scores[i] +=
                        trace_product(&sigma_test, &marginal)? - log_det(&marginal)?;
                }
            }
        }
    }

    let k = k_folds as f64;
    Ok(descending.into_iter().zip(scores.into_iter().map(|s| s / k)).collect())
}

/// Default initial penalty `c * sqrt(log p / n)` (natural log).
pub fn default_lambda0(n: usize, p: usize, c: f64) -> f64 {
    c * ((p as f64).ln() / n as f64).sqrt()
}

/// Composed pipeline: fit a dense graphical lasso at `lambda0`, then
/// threshold to the requested edge count.
pub fn tglasso_oracle_count(
    sigma: &SymMat,
    lambda0: f64,
    k: usize,
    opts: &SolverOptions,
) -> Result<ThresholdSearch> {
    let base = crate::glasso::fit_glasso(sigma, lambda0, opts)?;
    threshold_for_edge_count(&base, k)
}
