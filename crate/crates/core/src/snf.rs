//! Similarity network fusion.
//!
//! Each similarity matrix `W_m` is normalized into a full transition matrix
//! `P_m` (diagonal 1/2) and a masked transition matrix `S_m` supported on the
//! `ceil(kappa * N)` most similar columns of each row. The fusion iterates
//!
//! ```text
//! P_m <- S_m * mean_{k != m}(P_k) * S_m^T
//! ```
//!
//! for `T` rounds, all updates reading the previous round, and returns the
//! symmetrized mean of the final `P_m`.
//!
//! Taken literally the recursion is a random walk that flattens every row
//! toward a constant as `T` grows. With [`SnfParams::normalize`] set, each
//! updated `P_m` is put back into full-transition form (diagonal 1/2, the
//! off-diagonal row scaled to 1/2), as reference SNF implementations do,
//! which keeps the walk anchored.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{nearest_by, neighbor_count};
use crate::matrix::{sorted_sum, MatrixKind, SquareMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnfParams {
    /// Neighborhood proportion for the masked transition matrices.
    pub kappa: f64,
    pub iterations: usize,
    /// Re-normalize each `P_m` to full-transition form after every update.
    pub normalize: bool,
}

impl Default for SnfParams {
    fn default() -> Self {
        Self {
            kappa: 0.1,
            iterations: 20,
            normalize: false,
        }
    }
}

impl SnfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::param(format!("kappa must lie in (0, 1], got {}", self.kappa)));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations must be at least 1"));
        }
        Ok(())
    }
}

/// `P_ij = W_ij / (2 sum_{k != i} W_ik)` off the diagonal, `P_ii = 1/2`.
pub fn full_transition(w: &SquareMatrix) -> Result<SquareMatrix> {
    let mut values = w.values().to_vec();
    to_full_transition(&mut values, w.n())?;
    SquareMatrix::new(w.n(), values, MatrixKind::Transition)
}

/// In-place full-transition normalization of a row-major `n x n` buffer.
fn to_full_transition(values: &mut [f64], n: usize) -> Result<()> {
    let mut buf = Vec::with_capacity(n);
    for (i, row) in values.chunks_exact_mut(n).enumerate() {
        buf.clear();
        buf.extend(row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v));
        let mass = sorted_sum(&mut buf);
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::IsolatedNode { row: i });
        }
        let denom = 2.0 * mass;
        for (j, v) in row.iter_mut().enumerate() {
            *v = if j == i { 0.5 } else { *v / denom };
        }
    }
    Ok(())
}

/// Row-sparse masked transition matrix: for each row, the neighbor columns in
/// descending-similarity order with their normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedTransition {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl MaskedTransition {
    pub fn new(w: &SquareMatrix, kappa: f64) -> Result<Self> {
        let n = w.n();
        let k = neighbor_count(n, kappa)?;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let row = w.row(i);
            let nn = nearest_by(row, i, k, |v| -v);
            let mut vals: Vec<f64> = nn.iter().map(|&j| row[j]).collect();
            let mass = sorted_sum(&mut vals);
            if !(mass > 0.0) || !mass.is_finite() {
                return Err(Error::IsolatedNode { row: i });
            }
            rows.push(nn.into_iter().map(|j| (j, row[j] / mass)).collect());
        }
        Ok(Self { n, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Neighbor columns and weights of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn to_dense(&self) -> SquareMatrix {
        let mut s = SquareMatrix::zeros(self.n, MatrixKind::Transition);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                s.set(i, j, v);
            }
        }
        s
    }

    /// `S * A * S^T`, exploiting the row sparsity of `S`.
    fn sandwich(&self, a: &[f64]) -> Vec<f64> {
        let n = self.n;
        // left = S * A
        let mut left = vec![0.0; n * n];
        for (i, row) in self.rows.iter().enumerate() {
            let out = &mut left[i * n..(i + 1) * n];
            for &(k, s) in row {
                let src = &a[k * n..(k + 1) * n];
                for (o, &x) in out.iter_mut().zip(src) {
                    *o += s * x;
                }
            }
        }
        // out_ij = sum_{b in N_j} left_ib * S_jb
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let l = &left[i * n..(i + 1) * n];
            let o = &mut out[i * n..(i + 1) * n];
            for (j, row) in self.rows.iter().enumerate() {
                o[j] = row.iter().map(|&(b, s)| l[b] * s).sum();
            }
        }
        out
    }
}

/// `S_ij = W_ij / sum_{k in N_i} W_ik` for `j` among the `ceil(kappa N)` most
/// similar columns of row `i` (self excluded, ties to the lower index), zero
/// elsewhere.
pub fn masked_transition(w: &SquareMatrix, kappa: f64) -> Result<SquareMatrix> {
    Ok(MaskedTransition::new(w, kappa)?.to_dense())
}

/// Fuses `M >= 2` same-sized similarity matrices into one.
pub fn snf_fuse(ws: &[SquareMatrix], params: &SnfParams) -> Result<SquareMatrix> {
    params.validate()?;
    let m = ws.len();
    if m < 2 {
        return Err(Error::TooFewModalities { found: m });
    }
    let n = ws[0].n();
    if let Some(bad) = ws.iter().find(|w| w.n() != n) {
        return Err(Error::SizeMismatch {
            expected: n,
            found: bad.n(),
        });
    }
    let masks = ws
        .iter()
        .map(|w| MaskedTransition::new(w, params.kappa))
        .collect::<Result<Vec<_>>>()?;
    let mut ps = ws
        .iter()
        .map(|w| full_transition(w).map(SquareMatrix::into_values))
        .collect::<Result<Vec<_>>>()?;

    let inv = 1.0 / (m - 1) as f64;
    for _ in 0..params.iterations {
        ps = (0..m)
            .into_par_iter()
            .map(|mi| {
                let mut avg = vec![0.0; n * n];
                for (k, p) in ps.iter().enumerate() {
                    if k != mi {
                        for (a, &x) in avg.iter_mut().zip(p) {
                            *a += x;
                        }
                    }
                }
                avg.iter_mut().for_each(|a| *a *= inv);
                let mut next = masks[mi].sandwich(&avg);
                if params.normalize {
                    to_full_transition(&mut next, n)?;
                }
                Ok(next)
            })
            .collect::<Result<_>>()?;
    }

    let mut fused = vec![0.0; n * n];
    for p in &ps {
        for (f, &x) in fused.iter_mut().zip(p) {
            *f += x;
        }
    }
    let inv_m = 1.0 / m as f64;
    let mut out = SquareMatrix::zeros(n, MatrixKind::Fused);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (fused[i * n + j] * inv_m + fused[j * n + i] * inv_m);
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(n: usize, f: impl Fn(usize, usize) -> f64) -> SquareMatrix {
        SquareMatrix::from_fn(n, MatrixKind::Similarity, |i, j| {
            if i == j {
                1.0
            } else {
                f(i.min(j), i.max(j))
            }
        })
    }

    fn pseudo_random(n: usize, salt: u64) -> SquareMatrix {
        sim(n, |i, j| {
            let h = (i as u64 * 7919 + j as u64 * 104_729 + salt * 15_485_863) % 10_007;
            0.05 + 0.9 * h as f64 / 10_007.0
        })
    }

    #[test]
    fn two_by_two_full_transition() {
        let p = full_transition(&sim(2, |_, _| 0.3)).unwrap();
        assert_eq!(p.values(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn isolated_node_is_an_error() {
        let w = sim(3, |i, _| if i == 0 { 0.0 } else { 0.5 });
        let w = SquareMatrix::from_fn(3, MatrixKind::Similarity, |i, j| {
            if i == j {
                1.0
            } else if i == 0 || j == 0 {
                0.0
            } else {
                w.get(i, j)
            }
        });
        assert!(matches!(full_transition(&w), Err(Error::IsolatedNode { row: 0 })));
        assert!(matches!(masked_transition(&w, 1.0), Err(Error::IsolatedNode { row: 0 })));
    }

    #[test]
    fn kappa_one_masks_nothing_off_diagonal() {
        let w = pseudo_random(5, 1);
        let s = masked_transition(&w, 1.0).unwrap();
        for i in 0..5 {
            assert_eq!(s.get(i, i), 0.0);
            assert!((0..5).filter(|&j| j != i).all(|j| s.get(i, j) > 0.0));
            assert!((s.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_ties_prefer_lower_index() {
        let w = sim(4, |_, _| 0.5);
        let s = MaskedTransition::new(&w, 0.25).unwrap();
        assert_eq!(s.row(0), &[(1, 1.0)]);
        assert_eq!(s.row(1), &[(0, 1.0)]);
        assert_eq!(s.row(3), &[(0, 1.0)]);
    }

    #[test]
    fn single_modality_is_rejected() {
        let w = pseudo_random(4, 0);
        let err = snf_fuse(std::slice::from_ref(&w), &SnfParams::default()).unwrap_err();
        assert!(matches!(err, Error::TooFewModalities { found: 1 }));
        assert!(err.to_string().starts_with("need at least two modalities"));
        assert!(snf_fuse(&[w.clone(), pseudo_random(5, 0)], &SnfParams::default()).is_err());
        let bad = SnfParams { kappa: 0.1, iterations: 0, normalize: false };
        assert!(snf_fuse(&[w.clone(), w], &bad).is_err());
    }

    #[test]
    fn sparse_sandwich_matches_dense_product() {
        let w = pseudo_random(9, 3);
        let mask = MaskedTransition::new(&w, 0.3).unwrap();
        let s = mask.to_dense();
        let a = pseudo_random(9, 4);
        let got = mask.sandwich(a.values());
        for i in 0..9 {
            for j in 0..9 {
                let mut expected = 0.0;
                for p in 0..9 {
                    for q in 0..9 {
                        expected += s.get(i, p) * a.get(p, q) * s.get(j, q);
                    }
                }
                assert!((got[i * 9 + j] - expected).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn fused_output_is_symmetric_and_finite() {
        let ws = [pseudo_random(12, 1), pseudo_random(12, 2), pseudo_random(12, 3)];
        let f = snf_fuse(&ws, &SnfParams { kappa: 0.25, iterations: 20, normalize: false }).unwrap();
        assert_eq!(f.kind(), MatrixKind::Fused);
        assert!(f.is_symmetric(0.0));
        f.validate(0.0).unwrap();
    }
}
