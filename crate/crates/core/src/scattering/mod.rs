//! Two-level 2D scattering transform with complex Morlet wavelets.
//!
//! For an image `I`, wavelets `psi_{j,l}` (scale `j`, direction `l`) and a
//! Gaussian lowpass `phi`:
//!
//! ```text
//! order 0:  I * phi
//! order 1:  |I * psi_{j,l}| * phi                          for all (j, l)
//! order 2:  ||I * psi_{j,l}| * psi_{j2,l2}| * phi          for j2 < j
//! ```
//!
//! Every path is pooled to `output_n x output_n` by averaging disjoint
//! blocks of the lowpassed map. Convolutions are periodic.

mod fft;
mod filters;

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

pub use fft::Fft2d;
pub use filters::{build_filter_bank, FilterBank, FrequencyFilter};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringParams {
    /// Number of dyadic scales `J`.
    pub scales: usize,
    /// Number of directions `L`, equally spaced over `[0, pi)`.
    pub directions: usize,
    /// Input image side; a power of two no smaller than `2^J`.
    pub input_n: usize,
    /// Pooled side of every path; must divide `input_n`.
    pub output_n: usize,
    /// Envelope width of the scale-0 wavelet, in pixels.
    pub sigma0: f64,
    /// Center frequency of the scale-0 wavelet, in radians per pixel.
    pub xi0: f64,
}

pub const DEFAULT_XI0: f64 = 3.0 * PI / 4.0;
pub const DEFAULT_SIGMA0: f64 = 0.8 * (2.0 * PI / DEFAULT_XI0);

impl Default for ScatteringParams {
    fn default() -> Self {
        Self {
            scales: 4,
            directions: 8,
            input_n: 256,
            output_n: 32,
            sigma0: DEFAULT_SIGMA0,
            xi0: DEFAULT_XI0,
        }
    }
}

impl ScatteringParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 || self.directions == 0 {
            return Err(Error::param("scales and directions must be at least 1"));
        }
        if !self.input_n.is_power_of_two() || self.input_n < 2 {
            return Err(Error::param(format!("input size {} is not a power of two", self.input_n)));
        }
        if self.scales >= usize::BITS as usize || (1usize << self.scales) > self.input_n {
            return Err(Error::param(format!(
                "2^{} exceeds input size {}",
                self.scales, self.input_n
            )));
        }
        if self.output_n == 0 || self.input_n % self.output_n != 0 {
            return Err(Error::param(format!(
                "output size {} does not divide input size {}",
                self.output_n, self.input_n
            )));
        }
        if !(self.sigma0 > 0.0 && self.xi0 > 0.0) {
            return Err(Error::param("sigma0 and xi0 must be positive"));
        }
        Ok(())
    }

    pub fn order1_paths(&self) -> usize {
        self.directions * self.scales
    }

    pub fn order2_paths(&self) -> usize {
        self.directions * self.directions * self.scales * (self.scales - 1) / 2
    }

    pub fn path_count(&self) -> usize {
        1 + self.order1_paths() + self.order2_paths()
    }

    /// Total number of coefficients, `output_n^2 * (1 + LJ + L^2 J(J-1)/2)`.
    pub fn feature_len(&self) -> usize {
        self.output_n * self.output_n * self.path_count()
    }

    /// Paths in storage order: order 0, then order 1 by `(scale, direction)`,
    /// then order 2 by `(scale1, direction1, scale2, direction2)`.
    pub fn paths(&self) -> Vec<ScatteringPath> {
        let mut paths = Vec::with_capacity(self.path_count());
        paths.push(ScatteringPath::Order0);
        for scale in 0..self.scales {
            for direction in 0..self.directions {
                paths.push(ScatteringPath::Order1 { scale, direction });
            }
        }
        for scale1 in 0..self.scales {
            for direction1 in 0..self.directions {
                for scale2 in 0..scale1 {
                    for direction2 in 0..self.directions {
                        paths.push(ScatteringPath::Order2 {
                            scale1,
                            direction1,
                            scale2,
                            direction2,
                        });
                    }
                }
            }
        }
        paths
    }
}

/// One scattering path: the wavelet sequence applied before the lowpass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScatteringPath {
    Order0,
    Order1 {
        scale: usize,
        direction: usize,
    },
    Order2 {
        scale1: usize,
        direction1: usize,
        scale2: usize,
        direction2: usize,
    },
}

impl ScatteringPath {
    pub fn order(&self) -> usize {
        match self {
            ScatteringPath::Order0 => 0,
            ScatteringPath::Order1 { .. } => 1,
            ScatteringPath::Order2 { .. } => 2,
        }
    }
}

impl fmt::Display for ScatteringPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ScatteringPath::Order0 => write!(f, "S0"),
            ScatteringPath::Order1 { scale, direction } => write!(f, "S1[j={scale},l={direction}]"),
            ScatteringPath::Order2 {
                scale1,
                direction1,
                scale2,
                direction2,
            } => write!(f, "S2[j={scale1},l={direction1};j={scale2},l={direction2}]"),
        }
    }
}

/// Flattened scattering coefficients with their path index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringFeatures {
    output_n: usize,
    paths: Vec<ScatteringPath>,
    coefficients: Vec<f64>,
}

impl ScatteringFeatures {
    pub fn paths(&self) -> &[ScatteringPath] {
        &self.paths
    }

    pub fn output_n(&self) -> usize {
        self.output_n
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coefficients
    }

    fn block_len(&self) -> usize {
        self.output_n * self.output_n
    }

    /// Pooled map of the `index`-th path.
    pub fn block(&self, index: usize) -> &[f64] {
        let b = self.block_len();
        &self.coefficients[index * b..(index + 1) * b]
    }

    fn order_range(&self, order: usize) -> &[f64] {
        let b = self.block_len();
        let start = self.paths.iter().position(|p| p.order() == order);
        let count = self.paths.iter().filter(|p| p.order() == order).count();
        match start {
            Some(s) => &self.coefficients[s * b..(s + count) * b],
            None => &[],
        }
    }

    pub fn order0(&self) -> &[f64] {
        self.order_range(0)
    }

    pub fn order1(&self) -> &[f64] {
        self.order_range(1)
    }

    pub fn order2(&self) -> &[f64] {
        self.order_range(2)
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Euclidean distance between two feature vectors with the same path index.
pub fn scattering_distance(a: &ScatteringFeatures, b: &ScatteringFeatures) -> Result<f64> {
    if a.output_n != b.output_n || a.paths != b.paths {
        return Err(Error::param("scattering features have different path indices"));
    }
    Ok(a.coefficients
        .iter()
        .zip(&b.coefficients)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Periodic convolution of a complex image with a frequency-domain filter.
pub fn convolve(image: &[Complex64], filter: &FrequencyFilter) -> Result<Vec<Complex64>> {
    let len = filter.rows() * filter.cols();
    if image.len() != len {
        return Err(Error::SizeMismatch {
            expected: len,
            found: image.len(),
        });
    }
    let fft = Fft2d::new(filter.rows(), filter.cols());
    let mut buf = image.to_vec();
    fft.forward(&mut buf);
    for (b, h) in buf.iter_mut().zip(filter.hat()) {
        *b *= h;
    }
    fft.inverse(&mut buf);
    Ok(buf)
}

pub fn convolve_real(image: &[f64], filter: &FrequencyFilter) -> Result<Vec<Complex64>> {
    let buf: Vec<Complex64> = image.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    convolve(&buf, filter)
}

/// Lowpass-then-block-average, evaluated in the frequency domain.
///
/// Averaging `b x b` blocks is a periodic correlation with a box followed by
/// decimation; decimation by `b` folds the `n x n` spectrum onto an
/// `m x m` grid (`m = n / b`), so the pooled map is a small inverse DFT of
/// the folded product `U_hat * phi_hat * box_hat`.
struct Pooling {
    n: usize,
    m: usize,
    kernel_hat: Vec<Complex64>,
    small: Fft2d,
}

impl Pooling {
    fn new(bank: &FilterBank) -> Self {
        let p = bank.params();
        let (n, m) = (p.input_n, p.output_n);
        let b = n / m;
        let weight = 1.0 / (b * b) as f64;
        // box[r][c] = 1/b^2 for r, c in {0, -1, ..., -(b-1)} (mod n)
        let in_box = |i: usize| i == 0 || i > n - b;
        let mut kernel_hat: Vec<Complex64> = (0..n * n)
            .map(|idx| {
                let (r, c) = (idx / n, idx % n);
                let v = if in_box(r) && in_box(c) { weight } else { 0.0 };
                Complex64::new(v, 0.0)
            })
            .collect();
        bank.fft().forward(&mut kernel_hat);
        for (k, h) in kernel_hat.iter_mut().zip(bank.phi().hat()) {
            *k *= h;
        }
        Self {
            n,
            m,
            kernel_hat,
            small: Fft2d::new(m, m),
        }
    }

    fn pool(&self, u_hat: &[Complex64], clamp_nonnegative: bool) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut folded = vec![Complex64::default(); m * m];
        for r in 0..n {
            let fr = (r % m) * m;
            let row_u = &u_hat[r * n..(r + 1) * n];
            let row_k = &self.kernel_hat[r * n..(r + 1) * n];
            for c in 0..n {
                folded[fr + c % m] += row_u[c] * row_k[c];
            }
        }
        self.small.inverse(&mut folded);
        let b = (n / m) as f64;
        let scale = 1.0 / (b * b);
        folded
            .into_iter()
            .map(|v| {
                let x = v.re * scale;
                if clamp_nonnegative {
                    x.max(0.0)
                } else {
                    x
                }
            })
            .collect()
    }
}

/// Modulus of `ifft(u_hat * psi_hat)`, returned in the frequency domain.
fn modulus_hat(fft: &Fft2d, u_hat: &[Complex64], psi: &FrequencyFilter) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = u_hat.iter().zip(psi.hat()).map(|(a, b)| a * b).collect();
    fft.inverse(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm(), 0.0);
    }
    fft.forward(&mut buf);
    buf
}

/// Computes all order-0, 1 and 2 coefficients of a square image given as a
/// row-major slice of side `bank.params().input_n`.
///
/// Order-1 paths and their order-2 children are computed in parallel; every
/// block lands in a fixed slot so the output does not depend on the thread
/// count.
pub fn scattering_transform(image: &[f64], bank: &FilterBank) -> Result<ScatteringFeatures> {
    let p = bank.params();
    let n = p.input_n;
    if image.len() != n * n {
        return Err(Error::SizeMismatch {
            expected: n * n,
            found: image.len(),
        });
    }
    if let Some(index) = image.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let fft = bank.fft();
    let pooling = Pooling::new(bank);
    let mut x_hat: Vec<Complex64> = image.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut x_hat);

    let (scales, dirs) = (p.scales, p.directions);
    let first: Vec<(usize, usize)> = (0..scales)
        .flat_map(|j| (0..dirs).map(move |l| (j, l)))
        .collect();
    // For each first-order path: its own block, then its children in
    // (scale2, direction2) order.
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = first
        .par_iter()
        .map(|&(j, l)| {
            let u1_hat = modulus_hat(fft, &x_hat, bank.psi(j, l));
            let own = pooling.pool(&u1_hat, true);
            let mut children = Vec::with_capacity(j * dirs * p.output_n * p.output_n);
            for j2 in 0..j {
                for l2 in 0..dirs {
                    let u2_hat = modulus_hat(fft, &u1_hat, bank.psi(j2, l2));
                    children.extend(pooling.pool(&u2_hat, true));
                }
            }
            (own, children)
        })
        .collect();

    let mut coefficients = Vec::with_capacity(p.feature_len());
    coefficients.extend(pooling.pool(&x_hat, false));
    for (own, _) in &per_path {
        coefficients.extend_from_slice(own);
    }
    for (_, children) in &per_path {
        coefficients.extend_from_slice(children);
    }
    debug_assert_eq!(coefficients.len(), p.feature_len());
    Ok(ScatteringFeatures {
        output_n: p.output_n,
        paths: p.paths(),
        coefficients,
    })
}
