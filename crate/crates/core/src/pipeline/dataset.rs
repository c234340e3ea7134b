//! Dataset directories.
//!
//! A dataset is a directory with a manifest `items.txt`, one
//! `item_id class_id` pair per line, and one subdirectory per item holding
//! `audio.ssmf` (an `N x d` point cloud) or `audio.wav`, and `video.ssmf` or
//! a `video/` directory of PGM frames. Without a manifest, items are the
//! subdirectories in lexicographic order and `labels.txt` gives one class id
//! per item.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{self, AudioClip, FrameSequence, MfccParams};
use crate::io;
use crate::matrix::TimeOrderedPointCloud;

/// One item's point clouds, after optional noise injection.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    pub label: String,
    pub audio: Option<TimeOrderedPointCloud>,
    pub video: Option<TimeOrderedPointCloud>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Audio,
    Video,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Video => "video",
        }
    }
}

/// Reads `(item_id, class_id)` pairs, sorted by item id so that results do
/// not depend on manifest order.
pub fn read_manifest(dir: &Path) -> Result<Vec<(String, String)>> {
    let manifest = dir.join("items.txt");
    let mut entries = if manifest.exists() {
        let text = fs::read_to_string(&manifest)?;
        let mut out = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(id), Some(class), None) => out.push((id.to_string(), class.to_string())),
                _ => {
                    return Err(Error::Format(format!(
                        "{}:{}: expected `item_id class_id`",
                        manifest.display(),
                        lineno + 1
                    )))
                }
            }
        }
        out
    } else {
        let mut ids: Vec<String> = fs::read_dir(dir)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingInput(dir.to_path_buf()),
                _ => Error::Io(e),
            })?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().to_str().map(str::to_owned))
            .collect();
        ids.sort();
        let labels = io::read_labels(dir.join("labels.txt"))?;
        if labels.len() != ids.len() {
            return Err(Error::Format(format!(
                "{} item directories but {} labels",
                ids.len(),
                labels.len()
            )));
        }
        ids.into_iter().zip(labels).collect()
    };
    if entries.is_empty() {
        return Err(Error::EmptyInput);
    }
    entries.sort();
    if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Format(format!("duplicate item id {}", w[0].0)));
    }
    Ok(entries)
}

/// Deterministic per-item noise seed from `(seed, item_id, modality)`.
pub fn noise_seed(seed: u64, item_id: &str, modality: Modality) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((item_id.len() as u64).to_le_bytes());
    h.update(item_id.as_bytes());
    h.update(modality.name().as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn first_existing(candidates: &[PathBuf]) -> Option<&PathBuf> {
    candidates.iter().find(|p| p.exists())
}

/// Loads one modality, injecting noise into the raw signal first.
pub fn load_modality(
    item_dir: &Path,
    modality: Modality,
    mfcc: &MfccParams,
    noise: Option<(f64, u64)>,
) -> Result<TimeOrderedPointCloud> {
    let name = modality.name();
    let ssmf = item_dir.join(format!("{name}.ssmf"));
    let alt = match modality {
        Modality::Audio => item_dir.join("audio.wav"),
        Modality::Video => item_dir.join("video"),
    };
    let path = first_existing(&[ssmf.clone(), alt.clone()])
        .ok_or_else(|| Error::MissingInput(ssmf.clone()))?
        .clone();
    if path == ssmf {
        let topc = TimeOrderedPointCloud::from_dense(io::read_matrix(&path)?)?;
        return match noise {
            None => Ok(topc),
            Some((db, seed)) => {
                let noisy = ingest::add_noise_at_psnr(topc.as_flat(), db, seed)?;
                TimeOrderedPointCloud::from_flat(topc.len(), topc.dim(), noisy)
            }
        };
    }
    match modality {
        Modality::Audio => {
            let mut clip = AudioClip::read_wav(&path)?;
            if let Some((db, seed)) = noise {
                clip = ingest::add_noise_to_clip(&clip, db, seed)?;
            }
            ingest::mfcc(&clip, mfcc)
        }
        Modality::Video => {
            let mut frames = FrameSequence::read_pgm_dir(&path)?;
            if let Some((db, seed)) = noise {
                frames = ingest::add_noise_to_frames(&frames, db, seed)?;
            }
            ingest::frames_to_topc(&frames)
        }
    }
}

/// Loads every item of a dataset directory, in item-id order.
pub fn load_dataset(
    dir: &Path,
    need_audio: bool,
    need_video: bool,
    mfcc: &MfccParams,
    noise_psnr_db: Option<f64>,
    seed: u64,
) -> Result<Vec<Item>> {
    let entries = read_manifest(dir)?;
    entries
        .into_iter()
        .map(|(id, label)| {
            let item_dir = dir.join(&id);
            if !item_dir.is_dir() {
                return Err(Error::MissingInput(item_dir));
            }
            let load = |m: Modality| {
                let noise = noise_psnr_db.map(|db| (db, noise_seed(seed, &id, m)));
                load_modality(&item_dir, m, mfcc, noise)
            };
            let audio = if need_audio { Some(load(Modality::Audio)?) } else { None };
            let video = if need_video { Some(load(Modality::Video)?) } else { None };
            Ok(Item { id, label, audio, video })
        })
        .collect()
}

/// Adds noise to in-memory items exactly as [`load_dataset`] would.
pub fn add_noise(items: &[Item], psnr_db: f64, seed: u64) -> Result<Vec<Item>> {
    let noisy = |topc: &Option<TimeOrderedPointCloud>, id: &str, m: Modality| -> Result<_> {
        topc.as_ref()
            .map(|t| {
                let v = ingest::add_noise_at_psnr(t.as_flat(), psnr_db, noise_seed(seed, id, m))?;
                TimeOrderedPointCloud::from_flat(t.len(), t.dim(), v)
            })
            .transpose()
    };
    items
        .iter()
        .map(|it| {
            Ok(Item {
                id: it.id.clone(),
                label: it.label.clone(),
                audio: noisy(&it.audio, &it.id, Modality::Audio)?,
                video: noisy(&it.video, &it.id, Modality::Video)?,
            })
        })
        .collect()
}
