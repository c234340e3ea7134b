//! Raw inputs to time-ordered point clouds: MFCC audio features, flattened
//! grayscale video frames, and noise injection at a target peak
//! signal-to-noise ratio.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::io;
use crate::matrix::TimeOrderedPointCloud;

/// Floor applied to mel energies before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

/// A mono audio signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if sample_rate == 0 {
            return Err(Error::param("sample rate must be positive"));
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let (samples, rate) = io::read_wav(path)?;
        Self::new(samples, rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Equally sized grayscale frames, stored contiguously row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FrameSequence {
    pub fn from_flat(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let px = height * width;
        if px == 0 || data.is_empty() {
            return Err(Error::EmptyInput);
        }
        if data.len() % px != 0 {
            return Err(Error::SizeMismatch {
                expected: (data.len() / px + 1) * px,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param(format!(
                "pixel {index} = {} lies outside [0, 1]",
                data[index]
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_frames(height: usize, width: usize, frames: &[Vec<f64>]) -> Result<Self> {
        if let Some(bad) = frames.iter().find(|f| f.len() != height * width) {
            return Err(Error::SizeMismatch {
                expected: height * width,
                found: bad.len(),
            });
        }
        Self::from_flat(height, width, frames.concat())
    }

    /// Reads every `.pgm` file in `dir`, in lexicographic file-name order.
    pub fn read_pgm_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingInput(dir.to_path_buf()),
                _ => Error::Io(e),
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
            .collect();
        paths.sort();
        let mut dims = None;
        let mut data = Vec::new();
        for p in &paths {
            let (w, h, px) = io::read_pgm(p)?;
            match dims {
                None => dims = Some((h, w)),
                Some(d) if d != (h, w) => {
                    return Err(Error::Format(format!(
                        "{}: frame is {h}x{w}, expected {}x{}",
                        p.display(),
                        d.0,
                        d.1
                    )))
                }
                _ => {}
            }
            data.extend(px);
        }
        let (h, w) = dims.ok_or_else(|| Error::MissingInput(dir.join("*.pgm")))?;
        Self::from_flat(h, w, data)
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.height * self.width)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let px = self.height * self.width;
        &self.data[i * px..(i + 1) * px]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// Each frame flattened row-major into one point.
pub fn frames_to_topc(seq: &FrameSequence) -> Result<TimeOrderedPointCloud> {
    TimeOrderedPointCloud::from_flat(seq.len(), seq.height * seq.width, seq.data.clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfccParams {
    pub window: usize,
    pub hop: usize,
    pub n_coeffs: usize,
    pub n_mels: usize,
    pub sample_rate: u32,
}

impl Default for MfccParams {
    fn default() -> Self {
        Self {
            window: 4096,
            hop: 256,
            n_coeffs: 20,
            n_mels: 40,
            sample_rate: 22050,
        }
    }
}

impl MfccParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || self.hop == 0 || self.hop > self.window {
            return Err(Error::param(format!(
                "need 0 < hop <= window and window >= 2, got hop {} window {}",
                self.hop, self.window
            )));
        }
        if self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return Err(Error::param(format!(
                "need 0 < n_coeffs <= n_mels, got {} and {}",
                self.n_coeffs, self.n_mels
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::param("sample rate must be positive"));
        }
        Ok(())
    }

    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.window {
            0
        } else {
            1 + (len - self.window) / self.hop
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters over the `window / 2 + 1` spectrum bins, spanning
/// 0 Hz to Nyquist. Row-major `n_mels x bins`.
fn mel_filterbank(params: &MfccParams) -> Vec<f64> {
    let bins = params.window / 2 + 1;
    let sr = params.sample_rate as f64;
    let top = hz_to_mel(sr / 2.0);
    let edges: Vec<f64> = (0..params.n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (params.n_mels + 1) as f64))
        .collect();
    let mut fb = vec![0.0; params.n_mels * bins];
    for m in 0..params.n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..bins {
            let f = k as f64 * sr / params.window as f64;
            let rise = (f - lo) / (mid - lo);
            let fall = (hi - f) / (hi - mid);
            fb[m * bins + k] = rise.min(fall).max(0.0);
        }
    }
    fb
}

/// Orthonormal DCT-II basis, first `n_out` rows of an `n_in`-point transform.
fn dct_basis(n_in: usize, n_out: usize) -> Vec<f64> {
    let mut basis = Vec::with_capacity(n_in * n_out);
    for k in 0..n_out {
        let scale = if k == 0 { (1.0 / n_in as f64).sqrt() } else { (2.0 / n_in as f64).sqrt() };
        for m in 0..n_in {
            basis.push(scale * (PI * k as f64 * (2 * m + 1) as f64 / (2 * n_in) as f64).cos());
        }
    }
    basis
}

/// Mel-frequency cepstral coefficients, one point per analysis frame:
/// periodic Hann window, magnitude spectrum, mel energies, natural log with a
/// floor, orthonormal DCT-II, first `n_coeffs` values.
pub fn mfcc(clip: &AudioClip, params: &MfccParams) -> Result<TimeOrderedPointCloud> {
    params.validate()?;
    if clip.sample_rate != params.sample_rate {
        return Err(Error::param(format!(
            "clip sample rate {} Hz differs from the configured {} Hz; resample first",
            clip.sample_rate, params.sample_rate
        )));
    }
    let frames = params.frame_count(clip.len());
    if frames == 0 {
        return Err(Error::param(format!(
            "clip of {} samples is shorter than one {}-sample window",
            clip.len(),
            params.window
        )));
    }

    let win = params.window;
    let bins = win / 2 + 1;
    let hann: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / win as f64).cos())
        .collect();
    let fb = mel_filterbank(params);
    let dct = dct_basis(params.n_mels, params.n_coeffs);
    let fft = FftPlanner::new().plan_fft_forward(win);

    let rows: Vec<Vec<f64>> = (0..frames)
        .into_par_iter()
        .map(|f| {
            let start = f * params.hop;
            let mut buf: Vec<Complex64> = clip.samples[start..start + win]
                .iter()
                .zip(&hann)
                .map(|(&s, &w)| Complex64::new(s * w, 0.0))
                .collect();
            fft.process(&mut buf);
            let mag: Vec<f64> = buf[..bins].iter().map(|c| c.norm()).collect();
            let log_mel: Vec<f64> = fb
                .chunks_exact(bins)
                .map(|band| {
                    let e: f64 = band.iter().zip(&mag).map(|(w, m)| w * m).sum();
                    e.max(LOG_FLOOR).ln()
                })
                .collect();
            dct.chunks_exact(params.n_mels)
                .map(|b| b.iter().zip(&log_mel).map(|(a, x)| a * x).sum())
                .collect()
        })
        .collect();
    TimeOrderedPointCloud::from_rows(&rows)
}

/// `20 log10(max|x| / rms(error))`.
pub fn psnr_db(clean: &[f64], noisy: &[f64]) -> Result<f64> {
    if clean.len() != noisy.len() {
        return Err(Error::SizeMismatch {
            expected: clean.len(),
            found: noisy.len(),
        });
    }
    if clean.is_empty() {
        return Err(Error::EmptyInput);
    }
    let peak = clean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mse = clean.iter().zip(noisy).map(|(a, b)| (b - a).powi(2)).sum::<f64>() / clean.len() as f64;
    Ok(20.0 * (peak / mse.sqrt()).log10())
}

/// Adds Gaussian noise scaled so that the injected error has exactly the
/// RMS implied by `target_psnr_db` relative to the signal peak. An infinite
/// target returns the input unchanged.
pub fn add_noise_at_psnr(signal: &[f64], target_psnr_db: f64, seed: u64) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::EmptyInput);
    }
    if target_psnr_db.is_nan() || target_psnr_db == f64::NEG_INFINITY {
        return Err(Error::param(format!("invalid target pSNR {target_psnr_db}")));
    }
    if let Some(index) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let peak = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::param("pSNR is undefined for an all-zero signal"));
    }
    if target_psnr_db == f64::INFINITY {
        return Ok(signal.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..signal.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let rms_z = (z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64).sqrt();
    let target_rms = peak / 10f64.powf(target_psnr_db / 20.0);
    let scale = target_rms / rms_z;
    Ok(signal.iter().zip(&z).map(|(s, n)| s + scale * n).collect())
}

/// Noise over all pixels of a video at once, clamped back to `[0, 1]`.
pub fn add_noise_to_frames(seq: &FrameSequence, target_psnr_db: f64, seed: u64) -> Result<FrameSequence> {
    let mut noisy = add_noise_at_psnr(&seq.data, target_psnr_db, seed)?;
    noisy.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    FrameSequence::from_flat(seq.height, seq.width, noisy)
}

pub fn add_noise_to_clip(clip: &AudioClip, target_psnr_db: f64, seed: u64) -> Result<AudioClip> {
    AudioClip::new(add_noise_at_psnr(&clip.samples, target_psnr_db, seed)?, clip.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::euclidean;

    fn tone(freq: f64, len: usize, sr: u32) -> AudioClip {
        let s = (0..len)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect();
        AudioClip::new(s, sr).unwrap()
    }

    #[test]
    fn one_window_gives_one_frame() {
        let p = MfccParams::default();
        let topc = mfcc(&tone(440.0, 4096, 22050), &p).unwrap();
        assert_eq!((topc.len(), topc.dim()), (1, 20));
    }

    #[test]
    fn frame_count_formula() {
        let p = MfccParams {
            window: 64,
            hop: 16,
            ..MfccParams::default()
        };
        for len in [64, 65, 79, 80, 81, 300] {
            let topc = mfcc(&tone(300.0, len, 22050), &p).unwrap();
            assert_eq!(topc.len(), 1 + (len - 64) / 16);
        }
    }

    #[test]
    fn short_clip_and_wrong_rate_fail() {
        let p = MfccParams::default();
        assert!(mfcc(&tone(440.0, 4095, 22050), &p).is_err());
        assert!(mfcc(&tone(440.0, 8192, 16000), &p).is_err());
    }

    #[test]
    fn silence_frames_are_identical() {
        let clip = AudioClip::new(vec![0.0; 4096 + 256 * 4], 22050).unwrap();
        let topc = mfcc(&clip, &MfccParams::default()).unwrap();
        for i in 1..topc.len() {
            assert_eq!(topc.point(i), topc.point(0));
        }
        // floored log is constant, so only the DC coefficient survives
        let c = topc.point(0);
        assert!((c[0] - LOG_FLOOR.ln() * 40f64.sqrt()).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn dct_basis_is_orthonormal() {
        let b = dct_basis(8, 8);
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = (0..8).map(|m| b[i * 8 + m] * b[j * 8 + m]).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frames_flatten_row_major() {
        let seq = FrameSequence::from_frames(2, 2, &[vec![0.0, 0.1, 0.2, 0.3], vec![1.0; 4]]).unwrap();
        let topc = frames_to_topc(&seq).unwrap();
        assert_eq!((topc.len(), topc.dim()), (2, 4));
        assert_eq!(topc.point(0), &[0.0, 0.1, 0.2, 0.3]);
        assert!(FrameSequence::from_frames(2, 2, &[vec![0.0; 4], vec![0.0; 3]]).is_err());
    }

    #[test]
    fn negated_binary_frame_is_sqrt_hw_away() {
        let f: Vec<f64> = (0..625).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let g: Vec<f64> = f.iter().map(|v| 1.0 - v).collect();
        let topc = frames_to_topc(&FrameSequence::from_frames(25, 25, &[f, g]).unwrap()).unwrap();
        assert_eq!(euclidean(topc.point(0), topc.point(1)), 25.0);
    }

    #[test]
    fn infinite_psnr_is_identity() {
        let x = vec![0.1, -0.4, 0.3];
        assert_eq!(add_noise_at_psnr(&x, f64::INFINITY, 3).unwrap(), x);
        assert!(add_noise_at_psnr(&[0.0, 0.0], 20.0, 3).is_err());
        assert!(add_noise_at_psnr(&[], 20.0, 3).is_err());
    }

    #[test]
    fn noise_hits_target_and_is_deterministic() {
        let x: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.013).sin()).collect();
        let a = add_noise_at_psnr(&x, 20.0, 9).unwrap();
        let b = add_noise_at_psnr(&x, 20.0, 9).unwrap();
        assert_eq!(a, b);
        assert!((psnr_db(&x, &a).unwrap() - 20.0).abs() < 0.1);
    }

    #[test]
    fn video_noise_is_clamped() {
        let seq = FrameSequence::from_frames(2, 2, &[vec![0.0, 1.0, 0.5, 0.2]]).unwrap();
        let noisy = add_noise_to_frames(&seq, 0.0, 1).unwrap();
        assert!(noisy.as_flat().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
