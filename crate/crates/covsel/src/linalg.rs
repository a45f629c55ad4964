//! Sample covariance construction and dense symmetric linear algebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mat::{DataMatrix, EdgeSet, SymMat};

/// Default tolerance for reading supports off solver output.
///
/// Coordinate-descent outputs contain exact zeros, ADMM outputs contain
/// near-zeros; a shared default avoids per-caller drift.
pub const DEFAULT_EDGE_TOL: f64 = 1e-8;

/// Covariance denominator convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Denominator {
    /// Maximum-likelihood form, divide by n.
    N,
    /// Unbiased form, divide by n - 1.
    NMinus1,
}

/// Sample covariance with denominator n (the maximum-likelihood form).
pub fn sample_covariance(data: &DataMatrix, center: bool) -> Result<SymMat> {
    sample_covariance_with(data, center, Denominator::N)
}

/// Sample covariance with an explicit denominator convention.
pub fn sample_covariance_with(data: &DataMatrix, center: bool, denom: Denominator) -> Result<SymMat> {
    let n = data.n();
    let p = data.p();
    if n < 2 {
        return Err(Error::TooFewRows { need: 2, got: n });
    }
    let x = data.as_matrix();
    let mean: Vec<f64> = if center {
        (0..p).map(|j| x.column(j).sum() / n as f64).collect()
    } else {
        vec![0.0; p]
    };
    let d = match denom {
        Denominator::N => n as f64,
        Denominator::NMinus1 => (n - 1) as f64,
    };
    let cov = SymMat::from_fn(p, |i, j| {
        let mut acc = 0.0;
        for r in 0..n {
            acc += (x[(r, i)] - mean[i]) * (x[(r, j)] - mean[j]);
        }
        acc / d
    });
    Ok(cov)
}

/// Rescales a covariance to unit diagonal.
pub fn to_correlation(cov: &SymMat) -> Result<SymMat> {
    let p = cov.dim();
    let mut inv_sd = vec![0.0; p];
    for i in 0..p {
        let v = cov.get(i, i);
        if v <= 0.0 {
            return Err(Error::DegenerateVariable { index: i, value: v });
        }
        inv_sd[i] = 1.0 / v.sqrt();
    }
    Ok(SymMat::from_fn(p, |i, j| {
        if i == j {
            1.0
        } else {
            cov.get(i, j) * inv_sd[i] * inv_sd[j]
        }
    }))
}

/// Off-diagonal support of a matrix: edge (i, j) included iff |m[i][j]| > tol.
pub fn edge_set(m: &SymMat, tol: f64) -> EdgeSet {
    let mut edges = EdgeSet::empty(m.dim());
    for (i, j, v) in m.upper_triangle() {
        if v.abs() > tol {
            edges.insert(i, j).expect("upper triangle indices are valid");
        }
    }
    edges
}

/// Eigendecomposition of a symmetric matrix.
pub struct Eigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: DMatrix<f64>,
}

impl Eigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen(m: &SymMat) -> Eigen {
    let se = m.as_matrix().clone().symmetric_eigen();
    let p = m.dim();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(p, p);
    for (c, &k) in order.iter().enumerate() {
        vectors.set_column(c, &se.eigenvectors.column(k));
    }
    Eigen { values, vectors }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &SymMat) -> f64 {
    sym_eigen(m).min()
}

fn require_pd(eig: &Eigen) -> Result<()> {
    let floor = 1e-12 * eig.max().abs().max(1.0);
    if eig.min() <= floor {
        return Err(Error::NotPositiveDefinite { min_eig: eig.min() });
    }
    Ok(())
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(m: &SymMat) -> Result<SymMat> {
    let eig = sym_eigen(m);
    require_pd(&eig)?;
    let p = m.dim();
    let mut scaled = eig.vectors.clone();
    for c in 0..p {
        let s = 1.0 / eig.values[c];
        scaled.column_mut(c).scale_mut(s);
    }
    let inv = &scaled * eig.vectors.transpose();
    SymMat::symmetrized(&inv)
}

/// Log-determinant of a symmetric positive-definite matrix.
pub fn log_det(m: &SymMat) -> Result<f64> {
    let eig = sym_eigen(m);
    require_pd(&eig)?;
    Ok(eig.values.iter().map(|v| v.ln()).sum())
}

/// `sum_ij a[i][j] * b[i][j]`, the trace inner product tr(A B) for symmetric A, B.
pub fn trace_product(a: &SymMat, b: &SymMat) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let (am, bm) = (a.as_matrix(), b.as_matrix());
    Ok(am.iter().zip(bm.iter()).map(|(x, y)| x * y).sum())
}

/// Sum of |off-diagonal| entries.
pub fn l1_off_diagonal(m: &SymMat) -> f64 {
    2.0 * m.upper_triangle().map(|(_, _, v)| v.abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sym(rows: &[&[f64]]) -> SymMat {
        SymMat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn covariance_two_point() {
        let d = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let c = sample_covariance(&d, true).unwrap();
        assert_eq!(c.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn covariance_identical_rows_is_zero() {
        let d = DataMatrix::from_rows(&[vec![3.0, -2.0], vec![3.0, -2.0], vec![3.0, -2.0]]).unwrap();
        let c = sample_covariance(&d, true).unwrap();
        assert!(c.max_abs() == 0.0);
    }

    #[test]
    fn covariance_uncentered() {
        let d = DataMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let c = sample_covariance(&d, false).unwrap();
        assert_abs_diff_eq!(c.get(0, 0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn covariance_rejects_single_row() {
        let d = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(sample_covariance(&d, true), Err(Error::TooFewRows { .. })));
    }

    #[test]
    fn covariance_denominator_flag() {
        let d = DataMatrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let ml = sample_covariance_with(&d, true, Denominator::N).unwrap();
        let ub = sample_covariance_with(&d, true, Denominator::NMinus1).unwrap();
        assert_abs_diff_eq!(ml.get(0, 0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ub.get(0, 0), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn correlation_examples() {
        let c = sym(&[&[4.0, 2.0], &[2.0, 1.0]]);
        assert_eq!(to_correlation(&c).unwrap().to_rows(), vec![vec![1.0, 1.0], vec![1.0, 1.0]]);

        let id = SymMat::identity(3);
        assert_eq!(to_correlation(&id).unwrap(), id);

        let c = sym(&[&[2.0, -1.0], &[-1.0, 2.0]]);
        let r = to_correlation(&c).unwrap();
        assert_abs_diff_eq!(r.get(0, 1), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.get(0, 0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn correlation_rejects_degenerate_diagonal() {
        let c = sym(&[&[0.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(to_correlation(&c), Err(Error::DegenerateVariable { index: 0, .. })));
    }

    #[test]
    fn edge_set_examples() {
        assert!(edge_set(&SymMat::identity(2), 0.0).is_empty());

        let m = sym(&[&[1.0, 0.5], &[0.5, 1.0]]);
        let e = edge_set(&m, 0.0);
        assert_eq!(e.len(), 1);
        assert!(e.contains(0, 1));

        let m = SymMat::from_fn(4, |i, j| match (i, j) {
            (0, 1) => 0.3,
            (0, 2) => -0.05,
            (i, j) if i == j => 1.0,
            _ => 0.0,
        });
        let e = edge_set(&m, 0.1);
        assert_eq!(e.len(), 1);
        assert!(e.contains(0, 1));
    }

    #[test]
    fn edge_set_negation_invariant() {
        let m = sym(&[&[1.0, -0.4, 0.0], &[-0.4, 1.0, 0.2], &[0.0, 0.2, 1.0]]);
        let neg = m.scale(-1.0);
        let a = edge_set(&m, 0.0);
        let b = edge_set(&neg, 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn spd_inverse_and_log_det_diagonal() {
        let m = SymMat::from_diagonal(&[2.0, 0.5]);
        let inv = spd_inverse(&m).unwrap();
        assert_abs_diff_eq!(inv.get(0, 0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(inv.get(1, 1), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log_det(&m).unwrap(), 0.0, epsilon = 1e-12);

        let id = SymMat::identity(4);
        assert_abs_diff_eq!(log_det(&id).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(spd_inverse(&id).unwrap().to_rows(), id.to_rows());
    }

    #[test]
    fn spd_inverse_product_is_identity() {
        // Random seeded 6x6 SPD A^T A + I, verified by multiplication.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
        let spd = SymMat::symmetrized(&(a.transpose() * &a + DMatrix::identity(6, 6))).unwrap();
        let inv = spd_inverse(&spd).unwrap();
        let prod = inv.as_matrix() * spd.as_matrix();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod[(i, j)], want, epsilon = 1e-8);
            }
        }
        // log_det equals sum of log eigenvalues by construction; cross-check
        // against the Cholesky route.
        let chol = spd.as_matrix().clone().cholesky().unwrap();
        let ld_chol = 2.0 * (0..6).map(|i| chol.l()[(i, i)].ln()).sum::<f64>();
        assert_abs_diff_eq!(log_det(&spd).unwrap(), ld_chol, epsilon = 1e-8);
    }

    #[test]
    fn non_pd_error_carries_min_eigenvalue() {
        let m = sym(&[&[1.0, 2.0], &[2.0, 1.0]]);
        match spd_inverse(&m) {
            Err(Error::NotPositiveDefinite { min_eig }) => {
                assert_abs_diff_eq!(min_eig, -1.0, epsilon = 1e-10)
            }
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
        assert!(log_det(&m).is_err());
    }

    #[test]
    fn eigen_reconstructs_and_sorts() {
        let m = sym(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 0.5], &[0.0, 0.5, 1.5]]);
        let eig = sym_eigen(&m);
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let lam = DMatrix::from_fn(3, 3, |i, j| if i == j { eig.values[i] } else { 0.0 });
        let rec = &eig.vectors * lam * eig.vectors.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(rec[(i, j)], m.get(i, j), epsilon = 1e-8);
            }
        }
        // Residual ||m v - lambda v|| per pair.
        let norm = m.as_matrix().norm();
        for k in 0..3 {
            let v = eig.vectors.column(k);
            let r = m.as_matrix() * v - eig.values[k] * v;
            assert!(r.norm() <= 1e-9 * norm);
        }
    }
}
