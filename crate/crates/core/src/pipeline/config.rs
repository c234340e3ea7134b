use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::MfccParams;
use crate::kernel::KernelParams;
use crate::matrix::DEFAULT_COMMON_DIM;
use crate::scattering::ScatteringParams;
use crate::snf::SnfParams;

/// The ten end-to-end retrieval pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PipelineKind {
    AudioL2,
    VideoL2,
    FusedL2,
    AudioScatter,
    VideoScatter,
    FusedScatter,
    AVLateFusedL2,
    AllFusedL2,
    AVLateFusedScatter,
    AllFusedScatter,
}

/// Which per-item matrix a feature is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Audio,
    Video,
    Fused,
}

/// How a per-item matrix becomes a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Representation {
    /// The matrix entries themselves (Frobenius comparison).
    L2,
    Scatter,
}

impl PipelineKind {
    pub const ALL: [PipelineKind; 10] = [
        Self::AudioL2,
        Self::VideoL2,
        Self::FusedL2,
        Self::AudioScatter,
        Self::VideoScatter,
        Self::FusedScatter,
        Self::AVLateFusedL2,
        Self::AllFusedL2,
        Self::AVLateFusedScatter,
        Self::AllFusedScatter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::AudioL2 => "AudioL2",
            Self::VideoL2 => "VideoL2",
            Self::FusedL2 => "FusedL2",
            Self::AudioScatter => "AudioScatter",
            Self::VideoScatter => "VideoScatter",
            Self::FusedScatter => "FusedScatter",
            Self::AVLateFusedL2 => "AVLateFusedL2",
            Self::AllFusedL2 => "AllFusedL2",
            Self::AVLateFusedScatter => "AVLateFusedScatter",
            Self::AllFusedScatter => "AllFusedScatter",
        }
    }

    pub fn representation(self) -> Representation {
        match self {
            Self::AudioL2 | Self::VideoL2 | Self::FusedL2 | Self::AVLateFusedL2 | Self::AllFusedL2 => {
                Representation::L2
            }
            _ => Representation::Scatter,
        }
    }

    /// Object-level distance matrices this pipeline consumes. Single entry
    /// for plain pipelines; two or three for late (downstream) fusion.
    pub fn components(self) -> Vec<(Channel, Representation)> {
        let r = self.representation();
        match self {
            Self::AudioL2 | Self::AudioScatter => vec![(Channel::Audio, r)],
            Self::VideoL2 | Self::VideoScatter => vec![(Channel::Video, r)],
            Self::FusedL2 | Self::FusedScatter => vec![(Channel::Fused, r)],
            Self::AVLateFusedL2 | Self::AVLateFusedScatter => vec![(Channel::Audio, r), (Channel::Video, r)],
            Self::AllFusedL2 | Self::AllFusedScatter => {
                vec![(Channel::Audio, r), (Channel::Video, r), (Channel::Fused, r)]
            }
        }
    }

    pub fn is_late_fused(self) -> bool {
        self.components().len() > 1
    }

    pub fn needs_audio(self) -> bool {
        self.components().iter().any(|(c, _)| *c != Channel::Video)
    }

    pub fn needs_video(self) -> bool {
        self.components().iter().any(|(c, _)| *c != Channel::Audio)
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown pipeline {s:?}")))
    }
}

impl Serialize for PipelineKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for PipelineKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything a pipeline run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub pipeline: PipelineKind,
    /// Side every per-item matrix is resized to; also the scattering input size.
    pub common_dim: usize,
    pub kernel: KernelParams,
    pub snf: SnfParams,
    /// `input_n` is kept equal to `common_dim`.
    pub scattering: ScatteringParams,
    pub mfcc: MfccParams,
    /// Target pSNR of injected noise; `None` or infinity disables noise.
    pub noise_psnr_db: Option<f64>,
    pub seed: u64,
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// Reuse scattering features stored under `output_dir/cache`.
    pub cache: bool,
    /// Write per-item matrices under `output_dir/intermediates`.
    pub dump_intermediates: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineKind::FusedScatter,
            common_dim: DEFAULT_COMMON_DIM,
            kernel: KernelParams::default(),
            snf: SnfParams::default(),
            scattering: ScatteringParams::default(),
            mfcc: MfccParams::default(),
            noise_psnr_db: None,
            seed: 0,
            input_dir: PathBuf::from("."),
            output_dir: PathBuf::from("out"),
            workers: None,
            cache: true,
            dump_intermediates: false,
        }
    }
}

/// Flat key-value settings, as read from a config file or command-line
/// flags. Unset keys leave the current value alone.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub pipeline: Option<PipelineKind>,
    pub common_dim: Option<usize>,
    pub kernel_kappa: Option<f64>,
    pub kernel_beta: Option<f64>,
    pub snf_kappa: Option<f64>,
    pub snf_iterations: Option<usize>,
    pub snf_normalize: Option<bool>,
    pub scales: Option<usize>,
    pub directions: Option<usize>,
    pub output_n: Option<usize>,
    pub sigma0: Option<f64>,
    pub xi0: Option<f64>,
    pub mfcc_window: Option<usize>,
    pub mfcc_hop: Option<usize>,
    pub mfcc_coeffs: Option<usize>,
    pub mfcc_mels: Option<usize>,
    pub sample_rate: Option<u32>,
    pub noise_psnr_db: Option<f64>,
    pub seed: Option<u64>,
    pub input_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub cache: Option<bool>,
    pub dump_intermediates: Option<bool>,
}

impl ConfigOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.message().to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_toml(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

impl PipelineConfig {
    /// Applies every set key; relative paths in a file are taken as given.
    pub fn apply(&mut self, o: &ConfigOverrides) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        set(&mut self.pipeline, &o.pipeline);
        set(&mut self.common_dim, &o.common_dim);
        set(&mut self.kernel.kappa, &o.kernel_kappa);
        set(&mut self.kernel.beta, &o.kernel_beta);
        set(&mut self.snf.kappa, &o.snf_kappa);
        set(&mut self.snf.iterations, &o.snf_iterations);
        set(&mut self.snf.normalize, &o.snf_normalize);
        set(&mut self.scattering.scales, &o.scales);
        set(&mut self.scattering.directions, &o.directions);
        set(&mut self.scattering.output_n, &o.output_n);
        set(&mut self.scattering.sigma0, &o.sigma0);
        set(&mut self.scattering.xi0, &o.xi0);
        set(&mut self.mfcc.window, &o.mfcc_window);
        set(&mut self.mfcc.hop, &o.mfcc_hop);
        set(&mut self.mfcc.n_coeffs, &o.mfcc_coeffs);
        set(&mut self.mfcc.n_mels, &o.mfcc_mels);
        set(&mut self.mfcc.sample_rate, &o.sample_rate);
        if o.noise_psnr_db.is_some() {
            self.noise_psnr_db = o.noise_psnr_db;
        }
        set(&mut self.seed, &o.seed);
        set(&mut self.input_dir, &o.input_dir);
        set(&mut self.output_dir, &o.output_dir);
        if o.workers.is_some() {
            self.workers = o.workers;
        }
        set(&mut self.cache, &o.cache);
        set(&mut self.dump_intermediates, &o.dump_intermediates);
        self.scattering.input_n = self.common_dim;
    }

    pub fn with_overrides(o: &ConfigOverrides) -> Self {
        let mut c = Self::default();
        c.apply(o);
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.common_dim < 2 {
            return Err(Error::param(format!("common_dim must be at least 2, got {}", self.common_dim)));
        }
        self.kernel.validate()?;
        self.snf.validate()?;
        if self.pipeline.representation() == Representation::Scatter {
            if self.scattering.input_n != self.common_dim {
                return Err(Error::param(format!(
                    "scattering input size {} differs from common_dim {}",
                    self.scattering.input_n, self.common_dim
                )));
            }
            self.scattering.validate()?;
        }
        if self.pipeline.needs_audio() {
            self.mfcc.validate()?;
        }
        if let Some(db) = self.noise_psnr_db {
            if db.is_nan() || db == f64::NEG_INFINITY {
                return Err(Error::param(format!("invalid noise_psnr_db {db}")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::param("workers must be at least 1"));
        }
        Ok(())
    }

    /// Target pSNR if noise is actually injected.
    pub fn effective_noise(&self) -> Option<f64> {
        self.noise_psnr_db.filter(|db| db.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in PipelineKind::ALL {
            assert_eq!(k.name().parse::<PipelineKind>().unwrap(), k);
        }
        assert!("AudioL3".parse::<PipelineKind>().is_err());
    }

    #[test]
    fn all_fused_scatter_uses_three_inputs() {
        assert_eq!(
            PipelineKind::AllFusedScatter.components(),
            vec![
                (Channel::Audio, Representation::Scatter),
                (Channel::Video, Representation::Scatter),
                (Channel::Fused, Representation::Scatter)
            ]
        );
        assert!(!PipelineKind::VideoL2.needs_audio());
    }

    #[test]
    fn file_then_flags() {
        let file = ConfigOverrides::from_toml("pipeline = \"AudioL2\"\ncommon_dim = 64\nseed = 3\n").unwrap();
        let flags = ConfigOverrides {
            seed: Some(9),
            ..Default::default()
        };
        let mut c = PipelineConfig::with_overrides(&file);
        c.apply(&flags);
        assert_eq!((c.pipeline, c.common_dim, c.seed), (PipelineKind::AudioL2, 64, 9));
        assert_eq!(c.scattering.input_n, 64);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        assert!(ConfigOverrides::from_toml("colour = 1").is_err());
        assert!(ConfigOverrides::from_toml("pipeline = \"Nope\"").is_err());
        let mut c = PipelineConfig::default();
        c.kernel.kappa = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn infinite_noise_means_none() {
        let o = ConfigOverrides::from_toml("noise_psnr_db = inf").unwrap();
        let c = PipelineConfig::with_overrides(&o);
        assert_eq!(c.effective_noise(), None);
    }
}
