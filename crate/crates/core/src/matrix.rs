//! Point clouds, dense square matrices and the basic operations on them:
//! pairwise distances, bilinear resizing and Frobenius distance.

use std::fmt;

use crate::error::{Error, Result};

/// Default side length that self-similarity matrices are resized to before
/// fusion and feature extraction.
pub const DEFAULT_COMMON_DIM: usize = 256;

/// An ordered sequence of `N` points in `R^d`, one per time sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeOrderedPointCloud {
    dim: usize,
    points: Vec<f64>,
    timestamps: Option<Vec<f64>>,
}

impl TimeOrderedPointCloud {
    /// Builds a point cloud from a row-major `n x dim` buffer.
    pub fn from_flat(n: usize, dim: usize, points: Vec<f64>) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::EmptyInput);
        }
        if points.len() != n * dim {
            return Err(Error::SizeMismatch {
                expected: n * dim,
                found: points.len(),
            });
        }
        Ok(Self {
            dim,
            points,
            timestamps: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let dim = first.as_ref().len();
        let mut points = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::SizeMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            points.extend_from_slice(row);
        }
        Self::from_flat(rows.len(), dim, points)
    }

    /// Attaches sample times; they must be strictly increasing.
    pub fn with_timestamps(mut self, timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.len() != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                found: timestamps.len(),
            });
        }
        if timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("timestamps must be strictly increasing"));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.len(),
            cols: self.dim,
            data: self.points.clone(),
        }
    }

    pub fn from_dense(m: DenseMatrix) -> Result<Self> {
        Self::from_flat(m.rows, m.cols, m.data)
    }
}

/// Role of a square matrix. The tag decides which invariants
/// [`SquareMatrix::validate`] checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    Distance,
    Similarity,
    Transition,
    Fused,
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MatrixKind::Distance => "distance",
            MatrixKind::Similarity => "similarity",
            MatrixKind::Transition => "transition",
            MatrixKind::Fused => "fused",
        };
        f.write_str(s)
    }
}

/// Dense `n x n` real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    values: Vec<f64>,
    kind: MatrixKind,
}

impl SquareMatrix {
    pub fn new(n: usize, values: Vec<f64>, kind: MatrixKind) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if values.len() != n * n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        Ok(Self { n, values, kind })
    }

    pub fn zeros(n: usize, kind: MatrixKind) -> Self {
        assert!(n > 0, "matrix side must be positive");
        Self {
            n,
            values: vec![0.0; n * n],
            kind,
        }
    }

    pub fn from_fn(n: usize, kind: MatrixKind, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n, kind);
        for i in 0..n {
            for j in 0..n {
                m.values[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_dense(m: DenseMatrix, kind: MatrixKind) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::NotSquare {
                rows: m.rows,
                cols: m.cols,
            });
        }
        Self::new(m.rows, m.data, kind)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: MatrixKind) -> Self {
        self.kind = kind;
        self
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.n,
            cols: self.n,
            data: self.values.clone(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, self.kind, |i, j| self.get(j, i))
    }

    /// Returns `B` with `B[i][j] = A[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        Self::from_fn(self.n, self.kind, |i, j| self.get(perm[i], perm[j]))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Checks the invariants implied by [`MatrixKind`] within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if let Some(index) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let bad = |msg: &str| Err(Error::param(format!("{} matrix {msg}", self.kind)));
        match self.kind {
            MatrixKind::Distance => {
                if !self.is_symmetric(tol) {
                    return bad("is not symmetric");
                }
                if (0..self.n).any(|i| self.get(i, i).abs() > tol) {
                    return bad("has a nonzero diagonal");
                }
                if self.values.iter().any(|&v| v < -tol) {
                    return bad("has negative entries");
                }
            }
            MatrixKind::Similarity => {
                if !self.is_symmetric(tol) {
                    return bad("is not symmetric");
                }
                if self.values.iter().any(|&v| v < -tol || v > 1.0 + tol) {
                    return bad("has entries outside [0, 1]");
                }
            }
            MatrixKind::Transition => {
                if self.values.iter().any(|&v| v < -tol) {
                    return bad("has negative entries");
                }
                for i in 0..self.n {
                    let s: f64 = self.row(i).iter().sum();
                    if (s - 1.0).abs() > tol {
                        return bad("has a row that does not sum to one");
                    }
                }
            }
            MatrixKind::Fused => {
                if self.values.iter().any(|&v| v < -tol) {
                    return bad("has negative entries");
                }
            }
        }
        Ok(())
    }
}

/// General `rows x cols` matrix, the in-memory form of a matrix file.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::SizeMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Self {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

impl From<SquareMatrix> for DenseMatrix {
    fn from(m: SquareMatrix) -> Self {
        DenseMatrix {
            rows: m.n,
            cols: m.n,
            data: m.values,
        }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Self-similarity matrix of Euclidean distances between every pair of samples.
pub fn pairwise_distance_matrix(topc: &TimeOrderedPointCloud) -> Result<SquareMatrix> {
    pairwise_distance_matrix_with(topc, euclidean)
}

/// Like [`pairwise_distance_matrix`] with a caller-supplied metric. The metric
/// is evaluated once per unordered pair and mirrored.
pub fn pairwise_distance_matrix_with<F>(topc: &TimeOrderedPointCloud, metric: F) -> Result<SquareMatrix>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let n = topc.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut d = SquareMatrix::zeros(n, MatrixKind::Distance);
    for i in 0..n {
        let xi = topc.point(i);
        for j in i + 1..n {
            let v = metric(xi, topc.point(j));
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    Ok(d)
}

/// Bilinear resize with corner-aligned sampling: entry `(0, 0)` maps to
/// `(0, 0)` and `(n-1, n-1)` to `(target-1, target-1)`.
///
/// Symmetric inputs give exactly symmetric outputs: the four bilinear terms
/// are summed as `(t00 + t11) + (t01 + t10)`, which is invariant under
/// swapping the row and column coordinates.
pub fn resize_matrix(m: &SquareMatrix, target_n: usize) -> Result<SquareMatrix> {
    if m.n < 2 {
        return Err(Error::param("resize needs a matrix of side at least 2"));
    }
    if target_n < 2 {
        return Err(Error::param(format!("resize target must be at least 2, got {target_n}")));
    }
    if target_n == m.n {
        return Ok(m.clone());
    }
    let taps = bilinear_taps(m.n, target_n);
    let mut out = SquareMatrix::zeros(target_n, m.kind);
    for (p, &(r0, fr)) in taps.iter().enumerate() {
        for (q, &(c0, fc)) in taps.iter().enumerate() {
            let (r1, c1) = (r0 + 1, c0 + 1);
            let t00 = ((1.0 - fr) * (1.0 - fc)) * m.get(r0, c0);
            let t11 = (fr * fc) * m.get(r1, c1);
            let t01 = ((1.0 - fr) * fc) * m.get(r0, c1);
            let t10 = (fr * (1.0 - fc)) * m.get(r1, c0);
            out.set(p, q, (t00 + t11) + (t01 + t10));
        }
    }
    Ok(out)
}

/// For each output index, the lower source index and the fractional offset
/// toward the next one.
fn bilinear_taps(n: usize, target: usize) -> Vec<(usize, f64)> {
    let scale = (n - 1) as f64 / (target - 1) as f64;
    (0..target)
        .map(|p| {
            let x = p as f64 * scale;
            let i0 = (x.floor() as usize).min(n - 2);
            (i0, x - i0 as f64)
        })
        .collect()
}

/// `sqrt(sum (a_ij - b_ij)^2)`.
pub fn frobenius_distance(a: &SquareMatrix, b: &SquareMatrix) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::SizeMismatch {
            expected: a.n,
            found: b.n,
        });
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Sum of `values` taken in ascending order. The result does not depend on
/// the order the values are supplied in.
pub(crate) fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}
