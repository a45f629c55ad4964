//! Dense symmetric matrices, data matrices, and edge sets.
//!
//! `SymMat` is the shared currency for covariances, precisions, and
//! decomposition components. Symmetry is enforced at construction: either
//! exactly (`from_rows`) or by explicit averaging (`symmetrized`).

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense symmetric p x p real matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMat {
    m: DMatrix<f64>,
}

impl SymMat {
    /// Builds from row data, requiring exact symmetry. A 0 x 0 matrix is
    /// permitted (the hidden block of a fully observed model).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        for i in 0..p {
            for j in (i + 1)..p {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::NotSymmetric { i, j, upper: rows[i][j], lower: rows[j][i] });
                }
            }
        }
        Ok(Self { m: DMatrix::from_fn(p, p, |i, j| rows[i][j]) })
    }

    /// Builds from any square matrix by averaging with its transpose.
    pub fn symmetrized(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        if let Some((i, j)) = find_non_finite(m) {
            return Err(Error::NonFinite { row: i, col: j });
        }
        let avg = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
        Ok(Self { m: avg })
    }

    /// Wraps a matrix that is symmetric by construction.
    ///
    /// Callers must guarantee `m[(i,j)] == m[(j,i)]` exactly; debug builds verify.
    pub(crate) fn from_exact(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() == m.ncols());
        debug_assert!((0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)])));
        Self { m }
    }

    /// Builds by evaluating `f(i, j)` on the upper triangle and mirroring.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(p: usize, mut f: F) -> Self {
        let mut m = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { m }
    }

    pub fn identity(p: usize) -> Self {
        Self { m: DMatrix::identity(p, p) }
    }

    pub fn zeros(p: usize) -> Self {
        Self { m: DMatrix::zeros(p, p) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let p = diag.len();
        Self { m: DMatrix::from_fn(p, p, |i, j| if i == j { diag[i] } else { 0.0 }) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Read-only view of the underlying dense storage.
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)]).collect()
    }

    /// Iterates the strict upper triangle as `(i, j, value)` with `i < j`.
    pub fn upper_triangle(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let p = self.dim();
        (0..p).flat_map(move |i| ((i + 1)..p).map(move |j| (i, j, self.m[(i, j)])))
    }

    /// Largest absolute off-diagonal entry (0 for a 1x1 matrix).
    pub fn max_abs_off_diagonal(&self) -> f64 {
        self.upper_triangle().map(|(_, _, v)| v.abs()).fold(0.0, f64::max)
    }

    /// Maximum absolute entry over the whole matrix.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &SymMat) -> Result<SymMat> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(SymMat::from_exact(&self.m - &other.m))
    }

    pub fn scale(&self, c: f64) -> SymMat {
        SymMat::from_exact(&self.m * c)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let p = self.dim();
        (0..p).map(|i| (0..p).map(|j| self.m[(i, j)]).collect()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMat {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMat::from_rows(&rows)
    }
}

impl From<SymMat> for Vec<Vec<f64>> {
    fn from(m: SymMat) -> Self {
        m.to_rows()
    }
}

fn find_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

/// n observations of p variables, rows are observation vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DataMatrix {
    m: DMatrix<f64>,
}

impl DataMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::TooFewRows { need: 1, got: 0 });
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::InvalidArgument("rows must be non-empty".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        let mut m = DMatrix::zeros(n, p);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(Self { m })
    }

    pub(crate) fn from_matrix(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn p(&self) -> usize {
        self.m.ncols()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.m[(i, j)]).collect()
    }

    /// Returns the rows whose indices appear in `idx`, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<DataMatrix> {
        if idx.is_empty() {
            return Err(Error::TooFewRows { need: 1, got: 0 });
        }
        let mut m = DMatrix::zeros(idx.len(), self.p());
        for (r, &i) in idx.iter().enumerate() {
            if i >= self.n() {
                return Err(Error::InvalidArgument(format!("row index {i} out of range")));
            }
            for j in 0..self.p() {
                m[(r, j)] = self.m[(i, j)];
            }
        }
        Ok(DataMatrix { m })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| (0..self.p()).map(|j| self.m[(i, j)]).collect()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for DataMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        DataMatrix::from_rows(&rows)
    }
}

impl From<DataMatrix> for Vec<Vec<f64>> {
    fn from(m: DataMatrix) -> Self {
        m.to_rows()
    }
}

/// Set of unordered off-diagonal index pairs `(i, j)` with `i < j`, 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSet {
    dim: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn empty(dim: usize) -> Self {
        Self { dim, edges: BTreeSet::new() }
    }

    /// Builds from pairs; order within each pair is normalized to `i < j`.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop ({a},{b}) is not an edge")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j >= dim {
                return Err(Error::InvalidArgument(format!("edge ({i},{j}) out of range for dim {dim}")));
            }
            edges.insert((i, j));
        }
        Ok(Self { dim, edges })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.contains(&(a, b))
    }

    /// Deterministic ascending iteration.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::InvalidArgument(format!("self-loop ({i},{j}) is not an edge")));
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        if b >= self.dim {
            return Err(Error::InvalidArgument(format!("edge ({a},{b}) out of range for dim {}", self.dim)));
        }
        self.edges.insert((a, b));
        Ok(())
    }

    pub fn intersection(&self, other: &EdgeSet) -> usize {
        self.edges.intersection(&other.edges).count()
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.edges.is_subset(&other.edges)
    }

    /// Maximum node degree.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.dim];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }
}
