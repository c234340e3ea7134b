//! Seeded synthetic data: cluster point clouds, blob images, parametric
//! curves and a labeled two-modality sequence dataset.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64`, so outputs
//! are identical across platforms and thread counts.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io;
use crate::matrix::TimeOrderedPointCloud;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `n_clusters` centers evenly spaced on the unit circle, `per_cluster`
/// noisy samples of each, in contiguous blocks. Returns the 2D points and
/// their cluster ids.
pub fn gen_clusters(
    n_clusters: usize,
    per_cluster: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<(TimeOrderedPointCloud, Vec<usize>)> {
    if n_clusters < 2 || per_cluster < 1 {
        return Err(Error::param(format!(
            "need at least 2 clusters of at least 1 point, got {n_clusters} x {per_cluster}"
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::param(format!("noise sd must be non-negative, got {noise_sd}")));
    }
    let mut rng = rng(seed);
    let mut points = Vec::with_capacity(2 * n_clusters * per_cluster);
    let mut labels = Vec::with_capacity(n_clusters * per_cluster);
    for c in 0..n_clusters {
        let angle = 2.0 * PI * c as f64 / n_clusters as f64;
        for _ in 0..per_cluster {
            points.push(angle.cos() + noise_sd * normal(&mut rng));
            points.push(angle.sin() + noise_sd * normal(&mut rng));
            labels.push(c);
        }
    }
    Ok((TimeOrderedPointCloud::from_flat(n_clusters * per_cluster, 2, points)?, labels))
}

/// An `n x n` image (row-major, rows along y) of a Gaussian bump with peak 1
/// and standard deviation `radius / 4`, cut off outside the disk of the given
/// radius. Pixel `(r, c)` sits at `((c + 0.5) / n, (r + 0.5) / n)`.
pub fn gen_blob_image(center: (f64, f64), radius: f64, n: usize) -> Result<Vec<f64>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param(format!("radius must be positive, got {radius}")));
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let sigma = radius / 4.0;
    let mut img = Vec::with_capacity(n * n);
    for r in 0..n {
        let y = (r as f64 + 0.5) / n as f64 - center.1;
        for c in 0..n {
            let x = (c as f64 + 0.5) / n as f64 - center.0;
            let d2 = x * x + y * y;
            img.push(if d2 <= radius * radius {
                (-d2 / (2.0 * sigma * sigma)).exp()
            } else {
                0.0
            });
        }
    }
    Ok(img)
}

/// Pointwise maximum of equally sized images.
pub fn compose_max(images: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = images.first().ok_or(Error::EmptyInput)?;
    let mut out = first.clone();
    for img in &images[1..] {
        if img.len() != out.len() {
            return Err(Error::SizeMismatch {
                expected: out.len(),
                found: img.len(),
            });
        }
        out.iter_mut().zip(img).for_each(|(o, &v)| *o = o.max(v));
    }
    Ok(out)
}

/// Initial blob centers of the two-blob displacement image.
pub const BLOB_PAIR_CENTERS: [(f64, f64); 2] = [(0.3, 0.35), (0.45, 0.65)];

/// Two blobs, both displaced by `displacement` along the x axis.
pub fn gen_blob_pair_image(displacement: f64, radius: f64, n: usize) -> Result<Vec<f64>> {
    let blobs = BLOB_PAIR_CENTERS
        .iter()
        .map(|&(x, y)| gen_blob_image((x + displacement, y), radius, n))
        .collect::<Result<Vec<_>>>()?;
    compose_max(&blobs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Cosine1d,
    Ribbon2d,
    Knot3d,
}

impl FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine_1d" => Ok(Self::Cosine1d),
            "ribbon_2d" => Ok(Self::Ribbon2d),
            "knot_3d" => Ok(Self::Knot3d),
            other => Err(Error::param(format!(
                "unknown curve kind {other:?} (expected cosine_1d, ribbon_2d or knot_3d)"
            ))),
        }
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cosine1d => "cosine_1d",
            Self::Ribbon2d => "ribbon_2d",
            Self::Knot3d => "knot_3d",
        })
    }
}

/// Periods traversed by the cosine and ribbon curves.
pub const CURVE_PERIODS: f64 = 3.0;

/// Time samples `t_i = i / n` plus a seeded phase in `[0, 1 / k)`.
pub fn curve_times(n_samples: usize, seed: u64) -> Vec<f64> {
    let phase = rng(seed).random::<f64>() / CURVE_PERIODS;
    (0..n_samples).map(|i| i as f64 / n_samples as f64 + phase).collect()
}

/// Cosine `cos(2 pi k t)`, ribbon `(t, sin(2 pi k t))` with `k` periods over
/// unit time, or a trefoil knot over one full period. The seed picks the
/// starting phase.
pub fn gen_parametric_topc(kind: CurveKind, n_samples: usize, seed: u64) -> Result<TimeOrderedPointCloud> {
    if n_samples < 4 {
        return Err(Error::param(format!("need at least 4 samples, got {n_samples}")));
    }
    let ts = curve_times(n_samples, seed);
    let w = 2.0 * PI * CURVE_PERIODS;
    let rows: Vec<Vec<f64>> = match kind {
        CurveKind::Cosine1d => ts.iter().map(|t| vec![(w * t).cos()]).collect(),
        CurveKind::Ribbon2d => ts.iter().map(|&t| vec![t, (w * t).sin()]).collect(),
        CurveKind::Knot3d => ts
            .iter()
            .map(|t| {
                let s = 2.0 * PI * t;
                vec![s.sin() + 2.0 * (2.0 * s).sin(), s.cos() - 2.0 * (2.0 * s).cos(), -(3.0 * s).sin()]
            })
            .collect(),
    };
    TimeOrderedPointCloud::from_rows(&rows)
}

/// One labeled item with two modalities.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub a: TimeOrderedPointCloud,
    pub b: TimeOrderedPointCloud,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub items: Vec<SynthItem>,
    pub seed: u64,
}

impl SynthDataset {
    pub fn labels(&self) -> Vec<String> {
        self.items.iter().map(|it| format!("c{}", it.label)).collect()
    }

    pub fn item_id(i: usize) -> String {
        format!("item{i:04}")
    }

    /// Writes `items.txt` (`item_id class_id` per line), `labels.txt` and,
    /// per item, `<item_id>/audio.ssmf` (modality A) and
    /// `<item_id>/video.ssmf` (modality B).
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let labels = self.labels();
        let mut manifest = String::new();
        for (i, (item, label)) in self.items.iter().zip(&labels).enumerate() {
            let id = Self::item_id(i);
            manifest.push_str(&format!("{id} {label}\n"));
            let sub = dir.join(&id);
            fs::create_dir_all(&sub)?;
            io::write_matrix(&item.a.to_dense(), sub.join("audio.ssmf"))?;
            io::write_matrix(&item.b.to_dense(), sub.join("video.ssmf"))?;
        }
        fs::write(dir.join("items.txt"), manifest)?;
        io::write_labels(&labels, dir.join("labels.txt"))
    }
}

/// Shape of [`gen_multimodal_dataset_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultimodalParams {
    pub n_classes: usize,
    pub per_class: usize,
    /// In `[0, 1)`; bounds the deviation of each item's time warp.
    pub warp_strength: f64,
    /// Standard deviation of additive per-coordinate noise.
    pub noise_sd: f64,
    pub len_a: usize,
    pub len_b: usize,
    /// Number of distinct motifs; each has one shape per modality.
    pub vocabulary: usize,
    /// Motifs per class string.
    pub string_len: usize,
    /// Knots of each piecewise-linear motif.
    pub motif_knots: usize,
    /// Channels of the latent signal.
    pub channels: usize,
}

impl MultimodalParams {
    pub fn new(n_classes: usize, per_class: usize, warp_strength: f64) -> Self {
        Self {
            n_classes,
            per_class,
            warp_strength,
            noise_sd: 0.0,
            len_a: 80,
            len_b: 50,
            vocabulary: 5,
            string_len: 6,
            motif_knots: 3,
            channels: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 || self.per_class < 2 {
            return Err(Error::param(format!(
                "need at least 2 classes of at least 2 items, got {} x {}",
                self.n_classes, self.per_class
            )));
        }
        if !(0.0..1.0).contains(&self.warp_strength) {
            return Err(Error::param(format!("warp strength must lie in [0, 1), got {}", self.warp_strength)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::param(format!("noise sd must be non-negative, got {}", self.noise_sd)));
        }
        if self.channels == 0 || self.motif_knots == 0 || self.string_len == 0 {
            return Err(Error::param("channels, motif knots and string length must be positive"));
        }
        if self.vocabulary < 2 {
            return Err(Error::param("vocabulary needs at least 2 motifs"));
        }
        let strings = (self.vocabulary as f64).powi(self.string_len as i32);
        if strings < self.n_classes as f64 {
            return Err(Error::param(format!(
                "{} motifs in strings of {} cannot label {} classes",
                self.vocabulary, self.string_len, self.n_classes
            )));
        }
        if self.string_len * self.motif_knots < 2 {
            return Err(Error::param("templates need at least 2 knots"));
        }
        if self.len_a < 4 || self.len_b < 4 {
            return Err(Error::param("sequences need at least 4 samples"));
        }
        Ok(())
    }
}

pub const DIM_A: usize = 8;
pub const DIM_B: usize = 3;
const WARP_TERMS: usize = 3;

/// Vector-valued piecewise-linear signal through knot values at evenly
/// spaced times, one row of knot values per channel.
#[derive(Debug, Clone)]
struct Template(Vec<Vec<f64>>);

impl Template {
    fn random(channels: usize, knots: usize, rng: &mut ChaCha8Rng) -> Self {
        Self(
            (0..channels)
                .map(|_| (0..knots).map(|_| normal(rng)).collect())
                .collect(),
        )
    }

    /// Motifs laid end to end.
    fn concat(motifs: &[Template], string: &[usize]) -> Self {
        let channels = motifs[0].0.len();
        Self(
            (0..channels)
                .map(|ch| string.iter().flat_map(|&m| motifs[m].0[ch].iter().copied()).collect())
                .collect(),
        )
    }

    fn eval(&self, s: f64) -> Vec<f64> {
        let knots = self.0[0].len();
        let x = s.clamp(0.0, 1.0) * (knots - 1) as f64;
        let i = (x.floor() as usize).min(knots - 2);
        let f = x - i as f64;
        self.0.iter().map(|k| k[i] * (1.0 - f) + k[i + 1] * f).collect()
    }
}

/// `tau(t) = t + w sum_k a_k sin(pi k t) / (pi k)` with `sum |a_k| <= 1`,
/// so `tau' >= 1 - w > 0` and `tau` fixes 0 and 1.
#[derive(Debug, Clone)]
pub struct Warp {
    strength: f64,
    coeffs: [f64; WARP_TERMS],
}

impl Warp {
    fn random(strength: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut coeffs = [0.0; WARP_TERMS];
        coeffs.iter_mut().for_each(|c| *c = rng.random::<f64>() * 2.0 - 1.0);
        let l1: f64 = coeffs.iter().map(|c| c.abs()).sum();
        if l1 > 1.0 {
            coeffs.iter_mut().for_each(|c| *c /= l1);
        }
        Self { strength, coeffs }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let bump: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let f = PI * (k + 1) as f64;
                a * (f * t).sin() / f
            })
            .sum();
        t + self.strength * bump
    }
}

/// `rows x cols` matrix of random unit-norm rows, so every output
/// coordinate carries the same signal energy.
fn random_map(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let mut row: Vec<f64> = (0..cols).map(|_| normal(rng)).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.iter_mut().for_each(|v| *v /= norm);
            row
        })
        .collect()
}

fn embed(
    template: &Template,
    warp: &Warp,
    map: &[Vec<f64>],
    len: usize,
    noise_sd: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TimeOrderedPointCloud> {
    let dim = map.len();
    let mut prev = f64::NEG_INFINITY;
    let mut data = Vec::with_capacity(len * dim);
    for i in 0..len {
        let s = warp.eval(i as f64 / (len - 1) as f64);
        if s <= prev {
            return Err(Error::param("time warp is not strictly increasing"));
        }
        prev = s;
        let g = template.eval(s);
        for row in map {
            let v: f64 = row.iter().zip(&g).map(|(m, x)| m * x).sum();
            data.push(v + noise_sd * normal(rng));
        }
    }
    TimeOrderedPointCloud::from_flat(len, dim, data)
}

/// Labeled two-modality sequences with default shape and no additive noise.
pub fn gen_multimodal_dataset(
    n_classes: usize,
    per_class: usize,
    warp_strength: f64,
    seed: u64,
) -> Result<SynthDataset> {
    gen_multimodal_dataset_with(&MultimodalParams::new(n_classes, per_class, warp_strength), seed)
}

/// A shared vocabulary of motifs, each with one random multi-channel shape
/// per modality. Each class is a distinct random string of motifs, so a
/// sequence recurs wherever its string repeats a motif. Every item warps time
/// independently (the same warp for both modalities), embeds modality A in 8
/// and modality B in 3 dimensions through fixed random unit directions, and
/// adds independent Gaussian noise. Items are grouped by class.
pub fn gen_multimodal_dataset_with(params: &MultimodalParams, seed: u64) -> Result<SynthDataset> {
    params.validate()?;
    let mut rng = rng(seed);
    let map_a = random_map(DIM_A, params.channels, &mut rng);
    let map_b = random_map(DIM_B, params.channels, &mut rng);
    let motif = |rng: &mut ChaCha8Rng| Template::random(params.channels, params.motif_knots, rng);
    let motifs_a: Vec<Template> = (0..params.vocabulary).map(|_| motif(&mut rng)).collect();
    let motifs_b: Vec<Template> = (0..params.vocabulary).map(|_| motif(&mut rng)).collect();
    let mut strings: Vec<Vec<usize>> = Vec::with_capacity(params.n_classes);
    while strings.len() < params.n_classes {
        let s: Vec<usize> = (0..params.string_len)
            .map(|_| rng.random_range(0..params.vocabulary))
            .collect();
        if !strings.contains(&s) {
            strings.push(s);
        }
    }
    let mut items = Vec::with_capacity(params.n_classes * params.per_class);
    for (label, string) in strings.iter().enumerate() {
        let ta = Template::concat(&motifs_a, string);
        let tb = Template::concat(&motifs_b, string);
        for _ in 0..params.per_class {
            let warp = Warp::random(params.warp_strength, &mut rng);
            let a = embed(&ta, &warp, &map_a, params.len_a, params.noise_sd, &mut rng)?;
            let b = embed(&tb, &warp, &map_b, params.len_b, params.noise_sd, &mut rng)?;
            items.push(SynthItem { a, b, label });
        }
    }
    Ok(SynthDataset { items, seed })
}
