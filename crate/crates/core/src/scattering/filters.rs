//! Morlet filter bank construction.
//!
//! Filters are built in space on the periodic `n x n` grid and stored as
//! their DFTs. Both the Morlet wavelet and the Gaussian envelope are
//! separable in the row and column offsets, so the periodized 2D filters are
//! outer products of periodized 1D factors.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::fft::Fft2d;
use super::ScatteringParams;
use crate::error::{Error, Result};

/// A filter stored in the frequency domain.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyFilter {
    rows: usize,
    cols: usize,
    hat: Vec<Complex64>,
}

impl FrequencyFilter {
    pub fn new(rows: usize, cols: usize, hat: Vec<Complex64>) -> Result<Self> {
        if hat.len() != rows * cols {
            return Err(Error::SizeMismatch {
                expected: rows * cols,
                found: hat.len(),
            });
        }
        Ok(Self { rows, cols, hat })
    }

    /// Transforms a spatial-domain kernel.
    pub fn from_spatial(rows: usize, cols: usize, mut spatial: Vec<Complex64>) -> Result<Self> {
        if spatial.len() != rows * cols {
            return Err(Error::SizeMismatch {
                expected: rows * cols,
                found: spatial.len(),
            });
        }
        Fft2d::new(rows, cols).forward(&mut spatial);
        Self::new(rows, cols, spatial)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn hat(&self) -> &[Complex64] {
        &self.hat
    }

    /// The filter's spatial form, recovered by an inverse DFT.
    pub fn spatial(&self) -> Vec<Complex64> {
        let mut buf = self.hat.clone();
        Fft2d::new(self.rows, self.cols).inverse(&mut buf);
        buf
    }
}

/// `J x L` Morlet wavelets plus one Gaussian lowpass at scale `J`.
#[derive(Debug, Clone)]
pub struct FilterBank {
    params: ScatteringParams,
    /// Indexed `[scale][direction]`.
    psi: Vec<Vec<FrequencyFilter>>,
    phi: FrequencyFilter,
    fft: Fft2d,
}

impl FilterBank {
    pub fn params(&self) -> &ScatteringParams {
        &self.params
    }

    pub fn psi(&self, scale: usize, direction: usize) -> &FrequencyFilter {
        &self.psi[scale][direction]
    }

    pub fn phi(&self) -> &FrequencyFilter {
        &self.phi
    }

    pub fn fft(&self) -> &Fft2d {
        &self.fft
    }

    pub fn wavelet_count(&self) -> usize {
        self.psi.iter().map(Vec::len).sum()
    }

    /// Direction angle `l * pi / L`.
    pub fn angle(&self, direction: usize) -> f64 {
        direction as f64 * PI / self.params.directions as f64
    }
}

pub fn build_filter_bank(params: &ScatteringParams) -> Result<FilterBank> {
    params.validate()?;
    let n = params.input_n;
    let mut psi = Vec::with_capacity(params.scales);
    for j in 0..params.scales {
        let dilation = (1u64 << j) as f64;
        let sigma = params.sigma0 * dilation;
        let xi = params.xi0 / dilation;
        let row = (0..params.directions)
            .map(|l| {
                let theta = l as f64 * PI / params.directions as f64;
                let spatial = morlet(n, sigma, xi * theta.cos(), xi * theta.sin());
                FrequencyFilter::from_spatial(n, n, spatial)
            })
            .collect::<Result<Vec<_>>>()?;
        psi.push(row);
    }

    let sigma_phi = params.sigma0 * (1u64 << params.scales) as f64;
    let g = periodized_gaussian(n, sigma_phi);
    let mass: f64 = g.iter().sum::<f64>().powi(2);
    let spatial = outer(&g, &g)
        .into_iter()
        .map(|v| Complex64::new(v / mass, 0.0))
        .collect();
    let mut phi = FrequencyFilter::from_spatial(n, n, spatial)?;
    // The periodized Gaussian is even, so its DFT is real up to rounding.
    phi.hat.iter_mut().for_each(|v| v.im = 0.0);

    Ok(FilterBank {
        params: params.clone(),
        psi,
        phi,
        fft: Fft2d::new(n, n),
    })
}

/// Signed offset of grid index `i` on a periodic axis of length `n`.
fn signed_offset(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Number of periodic images to sum on each side so that the Gaussian tail
/// beyond them is below double precision.
fn image_count(n: usize, sigma: f64) -> i64 {
    (7.0 * sigma / n as f64).ceil() as i64 + 1
}

/// `sum_t exp(-(x + t n)^2 / sigma^2)` sampled on the grid.
fn periodized_gaussian(n: usize, sigma: f64) -> Vec<f64> {
    let reps = image_count(n, sigma);
    (0..n)
        .map(|i| {
            let x = signed_offset(i, n);
            (-reps..=reps)
                .map(|t| {
                    let y = x + (t * n as i64) as f64;
                    (-(y * y) / (sigma * sigma)).exp()
                })
                .sum()
        })
        .collect()
}

/// `sum_t exp(i k (x + t n)) exp(-(x + t n)^2 / sigma^2)` sampled on the grid.
fn periodized_wave(n: usize, sigma: f64, k: f64) -> Vec<Complex64> {
    let reps = image_count(n, sigma);
    (0..n)
        .map(|i| {
            let x = signed_offset(i, n);
            (-reps..=reps)
                .map(|t| {
                    let y = x + (t * n as i64) as f64;
                    Complex64::from_polar((-(y * y) / (sigma * sigma)).exp(), k * y)
                })
                .sum()
        })
        .collect()
}

fn outer<T: Copy + std::ops::Mul<Output = T>>(rows: &[T], cols: &[T]) -> Vec<T> {
    rows.iter()
        .flat_map(|&r| cols.iter().map(move |&c| r * c))
        .collect()
}

/// Zero-mean Morlet wavelet `(e^{i k.x} - beta) e^{-|x|^2/sigma^2}`,
/// normalized by the envelope mass. `kx` is the wavenumber along columns,
/// `ky` along rows; `beta` cancels the DC component on the grid.
fn morlet(n: usize, sigma: f64, kx: f64, ky: f64) -> Vec<Complex64> {
    let env = periodized_gaussian(n, sigma);
    let wave_x = periodized_wave(n, sigma, kx);
    let wave_y = periodized_wave(n, sigma, ky);
    let env_mass: f64 = env.iter().sum::<f64>().powi(2);
    let wave_mass: Complex64 = wave_y.iter().sum::<Complex64>() * wave_x.iter().sum::<Complex64>();
    let beta = wave_mass / env_mass;

    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let wave = wave_y[r] * wave_x[c];
            let envelope = env[r] * env[c];
            out.push((wave - beta * envelope) / env_mass);
        }
    }
    // Rounding in the periodic sums leaves a tiny mean; remove it.
    let residual = out.iter().sum::<Complex64>() / (n * n) as f64;
    out.iter_mut().for_each(|v| *v -= residual);
    out
}
