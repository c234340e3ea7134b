//! Gaussian similarity kernels with a neighbor-adaptive bandwidth.
//!
//! For a distance matrix `rho`, the bandwidth of pair `(i, j)` is
//!
//! ```text
//! sigma_ij = beta / 3 * (mean_nn(i) + mean_nn(j) + rho_ij)
//! ```
//!
//! where `mean_nn(i)` is the mean distance from `i` to its `ceil(kappa * N)`
//! nearest neighbors (self excluded, ties broken by lower index), and the
//! kernel is `W_ij = exp(-rho_ij^2 / sigma_ij)`.

use crate::error::{Error, Result};
use crate::matrix::{MatrixKind, SquareMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Proportion of points used as nearest neighbors, in `(0, 1]`.
    pub kappa: f64,
    /// Bandwidth multiplier.
    pub beta: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { kappa: 0.1, beta: 0.5 }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::param(format!("kappa must lie in (0, 1], got {}", self.kappa)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Number of neighbors `ceil(kappa * n)`, capped at the `n - 1` other points.
///
/// The product is taken with a `1e-9` slack before rounding up so that
/// values like `0.1 * 30 = 3.0000000000000004` count as 3.
pub fn neighbor_count(n: usize, kappa: f64) -> Result<usize> {
    let k = (kappa * n as f64 - 1e-9).ceil();
    let k = if k > 0.0 { (k as usize).min(n.saturating_sub(1)) } else { 0 };
    if k == 0 {
        return Err(Error::NoNeighbors { kappa, n });
    }
    Ok(k)
}

/// Indices of the `k` smallest entries of `row` excluding `exclude`, ordered
/// by `(value, index)`.
pub(crate) fn nearest_by<F>(row: &[f64], exclude: usize, k: usize, mut key: F) -> Vec<usize>
where
    F: FnMut(f64) -> f64,
{
    let mut idx: Vec<usize> = (0..row.len()).filter(|&j| j != exclude).collect();
    let cmp = |a: &usize, b: &usize| key_cmp(&mut key, row, *a, *b);
    let mut cmp = cmp;
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &mut cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(&mut cmp);
    idx
}

fn key_cmp<F: FnMut(f64) -> f64>(key: &mut F, row: &[f64], a: usize, b: usize) -> std::cmp::Ordering {
    key(row[a]).total_cmp(&key(row[b])).then(a.cmp(&b))
}

/// Pairwise bandwidths for [`similarity_kernel`]. The result is tagged as a
/// distance matrix; it is symmetric and strictly positive off the diagonal
/// whenever the points are distinct.
pub fn autotuned_sigma(d: &SquareMatrix, params: &KernelParams) -> Result<SquareMatrix> {
    params.validate()?;
    let n = d.n();
    if n < 2 {
        return Err(Error::param("autotuned sigma needs at least 2 points"));
    }
    let k = neighbor_count(n, params.kappa)?;
    let mean_nn: Vec<f64> = (0..n)
        .map(|i| {
            let row = d.row(i);
            let nn = nearest_by(row, i, k, |v| v);
            nn.iter().map(|&j| row[j]).sum::<f64>() / k as f64
        })
        .collect();
    let scale = params.beta / 3.0;
    let mut sigma = SquareMatrix::zeros(n, MatrixKind::Distance);
    for i in 0..n {
        for j in i..n {
            let s = scale * ((mean_nn[i] + mean_nn[j]) + d.get(i, j));
            sigma.set(i, j, s);
            sigma.set(j, i, s);
        }
    }
    Ok(sigma)
}

/// `W_ij = exp(-d_ij^2 / sigma_ij)` with ones on the diagonal.
///
/// Pairs at distance zero map to 1 whatever their bandwidth. Entries that
/// would underflow are clamped to the smallest positive normal `f64` so the
/// kernel stays strictly positive.
pub fn similarity_kernel(d: &SquareMatrix, sigma: &SquareMatrix) -> Result<SquareMatrix> {
    let n = d.n();
    if sigma.n() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: sigma.n(),
        });
    }
    let mut w = SquareMatrix::zeros(n, MatrixKind::Similarity);
    for i in 0..n {
        w.set(i, i, 1.0);
        for j in i + 1..n {
            let dij = d.get(i, j);
            let v = if dij == 0.0 {
                1.0
            } else {
                let s = sigma.get(i, j);
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NonPositiveBandwidth { row: i, col: j });
                }
                (-(dij * dij) / s).exp().max(f64::MIN_POSITIVE)
            };
            w.set(i, j, v);
            w.set(j, i, v);
        }
    }
    Ok(w)
}

/// Distance matrix to similarity kernel in one step.
pub fn affinity(d: &SquareMatrix, params: &KernelParams) -> Result<SquareMatrix> {
    let sigma = autotuned_sigma(d, params)?;
    similarity_kernel(d, &sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{pairwise_distance_matrix, TimeOrderedPointCloud};
    use proptest::prelude::*;

    #[test]
    fn neighbor_count_rounds_up_with_slack() {
        assert_eq!(neighbor_count(30, 0.1).unwrap(), 3);
        assert_eq!(neighbor_count(31, 0.1).unwrap(), 4);
        assert_eq!(neighbor_count(5, 0.1).unwrap(), 1);
        assert_eq!(neighbor_count(5, 1.0).unwrap(), 4);
        assert!(matches!(neighbor_count(1, 1.0), Err(Error::NoNeighbors { .. })));
        assert!(matches!(neighbor_count(2, 1e-12), Err(Error::NoNeighbors { .. })));
        assert!(Error::NoNeighbors { kappa: 0.0, n: 2 }.to_string().starts_with("no neighbors"));
    }

    #[test]
    fn equidistant_points_give_sigma_beta() {
        let d = SquareMatrix::from_fn(3, MatrixKind::Distance, |i, j| if i == j { 0.0 } else { 1.0 });
        let params = KernelParams { kappa: 0.5, beta: 0.5 };
        let s = autotuned_sigma(&d, &params).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((s.get(i, j) - 0.5).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_params_and_tiny_inputs() {
        let d = SquareMatrix::zeros(1, MatrixKind::Distance);
        assert!(autotuned_sigma(&d, &KernelParams::default()).is_err());
        let d = SquareMatrix::zeros(4, MatrixKind::Distance);
        assert!(autotuned_sigma(&d, &KernelParams { kappa: 0.0, beta: 0.5 }).is_err());
        assert!(autotuned_sigma(&d, &KernelParams { kappa: 0.1, beta: -1.0 }).is_err());
    }

    #[test]
    fn kernel_examples() {
        let d = SquareMatrix::new(2, vec![0.0, 2.0, 2.0, 0.0], MatrixKind::Distance).unwrap();
        let s = SquareMatrix::new(2, vec![1.0, 4.0, 4.0, 1.0], MatrixKind::Distance).unwrap();
        let w = similarity_kernel(&d, &s).unwrap();
        assert_eq!(w.get(0, 0), 1.0);
        assert!((w.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((w.get(0, 1) - 0.36788).abs() < 1e-5);

        let zero = SquareMatrix::zeros(2, MatrixKind::Distance);
        let w = similarity_kernel(&zero, &zero).unwrap();
        assert!(w.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn kernel_rejects_bad_sigma() {
        let d = SquareMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0], MatrixKind::Distance).unwrap();
        let s = SquareMatrix::zeros(2, MatrixKind::Distance);
        assert!(matches!(
            similarity_kernel(&d, &s),
            Err(Error::NonPositiveBandwidth { row: 0, col: 1 })
        ));
        assert!(similarity_kernel(&d, &SquareMatrix::zeros(3, MatrixKind::Distance)).is_err());
    }

    #[test]
    fn far_points_stay_strictly_positive() {
        let d = SquareMatrix::new(2, vec![0.0, 1e6, 1e6, 0.0], MatrixKind::Distance).unwrap();
        let s = SquareMatrix::new(2, vec![1.0; 4], MatrixKind::Distance).unwrap();
        let w = similarity_kernel(&d, &s).unwrap();
        assert!(w.get(0, 1) > 0.0);
    }

    fn cloud(points: &[(f64, f64)]) -> SquareMatrix {
        let rows: Vec<[f64; 2]> = points.iter().map(|&(x, y)| [x, y]).collect();
        pairwise_distance_matrix(&TimeOrderedPointCloud::from_rows(&rows).unwrap()).unwrap()
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric_bounded_and_unit_diagonal(
            pts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3..25),
            kappa in 0.05..1.0f64,
            beta in 0.1..2.0f64,
        ) {
            let d = cloud(&pts);
            let params = KernelParams { kappa, beta };
            let s = autotuned_sigma(&d, &params).unwrap();
            prop_assert!(s.is_symmetric(0.0));
            let w = similarity_kernel(&d, &s).unwrap();
            prop_assert!(w.is_symmetric(0.0));
            for i in 0..w.n() {
                prop_assert_eq!(w.get(i, i), 1.0);
                for j in 0..w.n() {
                    prop_assert!(w.get(i, j) > 0.0 && w.get(i, j) <= 1.0);
                }
            }
        }

        #[test]
        fn kernel_is_monotone_in_distance(
            sigma in 0.01..10.0f64,
            a in 0.0..10.0f64,
            b in 0.0..10.0f64,
        ) {
            prop_assume!((a - b).abs() > 1e-6);
            let d = SquareMatrix::new(3, vec![0.0, a, b, a, 0.0, 1.0, b, 1.0, 0.0], MatrixKind::Distance).unwrap();
            let s = SquareMatrix::new(3, vec![sigma; 9], MatrixKind::Distance).unwrap();
            let w = similarity_kernel(&d, &s).unwrap();
            let (near, far) = if a < b { (w.get(0, 1), w.get(0, 2)) } else { (w.get(0, 2), w.get(0, 1)) };
            prop_assert!(near > far || far == f64::MIN_POSITIVE);
        }

        #[test]
        fn kernel_is_homogeneous(
            pts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3..15),
            c in 0.1..10.0f64,
        ) {
            let d = cloud(&pts);
            let s = autotuned_sigma(&d, &KernelParams::default()).unwrap();
            let w = similarity_kernel(&d, &s).unwrap();
            let dc = SquareMatrix::from_fn(d.n(), MatrixKind::Distance, |i, j| c * d.get(i, j));
            let sc = SquareMatrix::from_fn(d.n(), MatrixKind::Distance, |i, j| c * c * s.get(i, j));
            let wc = similarity_kernel(&dc, &sc).unwrap();
            for (x, y) in w.values().iter().zip(wc.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
