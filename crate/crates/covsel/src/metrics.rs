//! Edge-recovery scoring: confusion counts over unordered pairs, F1, sign
//! consistency, and the case-study label-share statistic. Only off-diagonal
//! support is ever scored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{EdgeSet, SymMat};

/// Confusion counts over all p(p-1)/2 unordered pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

pub fn confusion(est: &EdgeSet, truth: &EdgeSet) -> Result<Confusion> {
    if est.dim() != truth.dim() {
        return Err(Error::DimensionMismatch { expected: truth.dim(), got: est.dim() });
    }
    let total = est.dim() * (est.dim().saturating_sub(1)) / 2;
    let tp = est.intersection(truth);
    let fp = est.len() - tp;
    let fn_ = truth.len() - tp;
    let tn = total - tp - fp - fn_;
    Ok(Confusion { tp, fp, fn_, tn })
}

/// F1 = TP / (TP + (FP + FN) / 2); 0 when TP = 0 with errors present, 1 when
/// both sets are empty.
pub fn f1(c: &Confusion) -> f64 {
    if c.tp == 0 {
        return if c.fp + c.fn_ == 0 { 1.0 } else { 0.0 };
    }
    c.tp as f64 / (c.tp as f64 + 0.5 * (c.fp + c.fn_) as f64)
}

/// True iff every off-diagonal pair carries the same sign (in {-1, 0, +1},
/// with magnitudes within tol reading as 0) in both matrices.
pub fn sign_consistency(est: &SymMat, truth: &SymMat, tol: f64) -> Result<bool> {
    if est.dim() != truth.dim() {
        return Err(Error::DimensionMismatch { expected: truth.dim(), got: est.dim() });
    }
    let sign = |v: f64| {
        if v > tol {
            1i8
        } else if v < -tol {
            -1
        } else {
            0
        }
    };
    for (i, j, v) in est.upper_triangle() {
        if sign(v) != sign(truth.get(i, j)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Fraction of edges whose endpoints carry equal labels; None for an empty
/// edge set (the ratio is undefined, not zero).
pub fn tuning_share(edges: &EdgeSet, labels: &[String]) -> Result<Option<f64>> {
    if labels.len() != edges.dim() {
        return Err(Error::DimensionMismatch { expected: edges.dim(), got: labels.len() });
    }
    if edges.is_empty() {
        return Ok(None);
    }
    let same = edges.iter().filter(|&(i, j)| labels[i] == labels[j]).count();
    Ok(Some(same as f64 / edges.len() as f64))
}
