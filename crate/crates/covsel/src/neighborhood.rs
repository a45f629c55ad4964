//! Neighborhood selection: per-node lasso regressions whose supports define
//! the estimated edge set.
//!
//! Each node is regressed on the remaining columns, minimizing
//! `||y - X theta||_2^2 + lambda ||theta||_1`, and the two directed votes per
//! pair are reconciled by an AND or OR rule.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::SolverOptions;
use crate::glasso::soft_threshold;
use crate::mat::{DataMatrix, EdgeSet};

/// How the two directed supports per pair combine into an edge decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CombineRule {
    /// Keep (i, j) only when both nodewise coefficients are nonzero.
    And,
    /// Keep (i, j) when either nodewise coefficient is nonzero.
    Or,
}

/// Common or per-node penalty levels.
#[derive(Clone, Debug, PartialEq)]
pub enum LassoPenalty {
    Common(f64),
    PerNode(Vec<f64>),
}

impl LassoPenalty {
    fn for_node(&self, j: usize, p: usize) -> Result<f64> {
        let v = match self {
            Self::Common(l) => *l,
            Self::PerNode(ls) => {
                if ls.len() != p {
                    return Err(Error::DimensionMismatch { expected: p, got: ls.len() });
                }
                ls[j]
            }
        };
        if v < 0.0 {
            return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {v}")));
        }
        Ok(v)
    }
}

/// Nodewise lasso coefficients with the assembled edge set.
#[derive(Clone, Debug)]
pub struct NeighborhoodFit {
    /// coef[(i, j)] is the coefficient of predictor i in node j's regression;
    /// the diagonal is structurally zero.
    pub coef: DMatrix<f64>,
    pub lambda_per_node: Vec<f64>,
    pub combine_rule: CombineRule,
    pub edges: EdgeSet,
}

/// Lasso by cyclic coordinate descent on the Gram matrix:
/// minimizes `||y - X theta||_2^2 + lambda ||theta||_1`.
pub fn lasso_cd(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, opts: &SolverOptions) -> Result<Vec<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidArgument("need at least one predictor".into()));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {lambda}")));
    }
    let k = x.ncols();
    let gram = x.transpose() * x;
    let xty = x.transpose() * y;
    let mut theta: DVector<f64> = DVector::zeros(k);
    // g = gram * theta, kept incrementally.
    let mut g: DVector<f64> = DVector::zeros(k);
    for _ in 0..opts.inner_max_iter {
        let mut max_delta = 0.0f64;
        for c in 0..k {
            if gram[(c, c)] == 0.0 {
                continue;
            }
            let old = theta[c];
            let z = xty[c] - g[c] + gram[(c, c)] * old;
            let new = soft_threshold(z, lambda / 2.0) / gram[(c, c)];
            if new != old {
                let d = new - old;
                for l in 0..k {
                    g[l] += gram[(c, l)] * d;
                }
                theta[c] = new;
                max_delta = max_delta.max(d.abs());
            }
        }
        if max_delta <= opts.inner_tol * (1.0 + theta.amax()) {
            break;
        }
    }
    Ok(theta.iter().copied().collect())
}

/// Worst violation of the lasso stationarity condition at `theta`, using
/// the gradient `2 X'(X theta - y)`.
pub fn lasso_kkt_residual(x: &DMatrix<f64>, y: &DVector<f64>, theta: &[f64], lambda: f64) -> f64 {
    let tv = DVector::from_column_slice(theta);
    let grad = 2.0 * x.transpose() * (x * tv - y);
    let mut worst = 0.0f64;
    for (k, &t) in theta.iter().enumerate() {
        let v = if t != 0.0 {
            (grad[k] + lambda * t.signum()).abs()
        } else {
            (grad[k].abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Centers each column and scales it to unit mean-square, so the Gram matrix
/// `X'X / n` has unit diagonal. Errors on constant columns.
fn standardize(data: &DataMatrix) -> Result<DMatrix<f64>> {
    let (n, p) = (data.n(), data.p());
    let x = data.as_matrix();
    let mut out = DMatrix::zeros(n, p);
    for j in 0..p {
        let mean = x.column(j).sum() / n as f64;
        let mut msq = 0.0;
        for i in 0..n {
            let c = x[(i, j)] - mean;
            out[(i, j)] = c;
            msq += c * c;
        }
        msq /= n as f64;
        if msq <= 0.0 {
            return Err(Error::DegenerateVariable { index: j, value: msq });
        }
        let s = 1.0 / msq.sqrt();
        for i in 0..n {
            out[(i, j)] *= s;
        }
    }
    Ok(out)
}

/// Runs the nodewise lasso for every column and assembles the edge set.
pub fn fit_neighborhood(
    data: &DataMatrix,
    lambda: &LassoPenalty,
    rule: CombineRule,
    opts: &SolverOptions,
) -> Result<NeighborhoodFit> {
    let (n, p) = (data.n(), data.p());
    if n < 2 {
        return Err(Error::TooFewRows { need: 2, got: n });
    }
    if p < 2 {
        return Err(Error::InvalidArgument("need at least two variables".into()));
    }
    let xs = standardize(data)?;
    let mut coef = DMatrix::zeros(p, p);
    let mut lambda_per_node = Vec::with_capacity(p);
    for j in 0..p {
        let lam = lambda.for_node(j, p)?;
        lambda_per_node.push(lam);
        let predictors: Vec<usize> = (0..p).filter(|&i| i != j).collect();
        let mut xj = DMatrix::zeros(n, p - 1);
        for (c, &i) in predictors.iter().enumerate() {
            xj.set_column(c, &xs.column(i));
        }
        let y = xs.column(j).into_owned();
        let theta = lasso_cd(&xj, &y, lam, opts)?;
        for (c, &i) in predictors.iter().enumerate() {
            coef[(i, j)] = theta[c];
        }
    }
    let edges = edges_from_coef(&coef, rule)?;
    Ok(NeighborhoodFit { coef, lambda_per_node, combine_rule: rule, edges })
}

/// Edge decisions from a nodewise coefficient matrix at exact-zero resolution.
pub fn edges_from_coef(coef: &DMatrix<f64>, rule: CombineRule) -> Result<EdgeSet> {
    let p = coef.nrows();
    let mut edges = EdgeSet::empty(p);
    for i in 0..p {
        for j in (i + 1)..p {
            let a = coef[(i, j)] != 0.0;
            let b = coef[(j, i)] != 0.0;
            let keep = match rule {
                CombineRule::And => a && b,
                CombineRule::Or => a || b,
            };
            if keep {
                edges.insert(i, j)?;
            }
        }
    }
    Ok(edges)
}

/// Strength of each potential edge under a combine rule: min of the two
/// directed |coefficients| for AND, max for OR. Thresholding these strengths
/// reproduces thresholding the nodewise coefficients then combining.
pub fn edge_strengths(coef: &DMatrix<f64>, rule: CombineRule) -> Vec<(usize, usize, f64)> {
    let p = coef.nrows();
    let mut out = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in (i + 1)..p {
            let a = coef[(i, j)].abs();
            let b = coef[(j, i)].abs();
            let s = match rule {
                CombineRule::And => a.min(b),
                CombineRule::Or => a.max(b),
            };
            out.push((i, j, s));
        }
    }
    out
}
