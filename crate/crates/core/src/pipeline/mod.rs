//! End-to-end retrieval pipelines over a dataset directory.
//!
//! Per item: SSM of each modality, Gaussian affinity, resize to the common
//! dimension, optional similarity network fusion of the two modalities,
//! optional scattering. Items are then compared by Euclidean distance between
//! features, optionally fused downstream, and evaluated by retrieval MAP.

mod cache;
mod config;
mod dataset;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

pub use cache::{CacheKey, FeatureCache};
pub use config::{Channel, ConfigOverrides, PipelineConfig, PipelineKind, Representation};
pub use dataset::{add_noise, load_dataset, load_modality, noise_seed, read_manifest, Item, Modality};
pub use report::{emit_heatmap, heatmap_pixels, render_eval_report, render_report, write_pr_curve};

use crate::error::{Error, Result};
use crate::eval::{self, LabeledCollection, ObjectScores, RetrievalReport};
use crate::io;
use crate::kernel;
use crate::matrix::{
    euclidean, pairwise_distance_matrix, resize_matrix, MatrixKind, SquareMatrix, TimeOrderedPointCloud,
};
use crate::scattering::{build_filter_bank, scattering_transform, FilterBank};
use crate::snf;
use crate::synth::SynthDataset;

/// Per-item affinity matrices at the common dimension.
#[derive(Debug, Clone, Default)]
pub struct ItemMatrices {
    pub audio: Option<SquareMatrix>,
    pub video: Option<SquareMatrix>,
    pub fused: Option<SquareMatrix>,
}

impl ItemMatrices {
    pub fn get(&self, channel: Channel) -> Option<&SquareMatrix> {
        match channel {
            Channel::Audio => self.audio.as_ref(),
            Channel::Video => self.video.as_ref(),
            Channel::Fused => self.fused.as_ref(),
        }
    }
}

fn affinity_at(topc: Option<&TimeOrderedPointCloud>, m: Modality, config: &PipelineConfig) -> Result<SquareMatrix> {
    let topc = topc.ok_or_else(|| Error::param(format!("item lacks the {} modality", m.name())))?;
    let w = kernel::affinity(&pairwise_distance_matrix(topc)?, &config.kernel)?;
    resize_matrix(&w, config.common_dim)
}

/// Builds the per-item matrices the requested channels depend on.
pub fn item_matrices(item: &Item, channels: &BTreeSet<Channel>, config: &PipelineConfig) -> Result<ItemMatrices> {
    let fused = channels.contains(&Channel::Fused);
    let audio = (fused || channels.contains(&Channel::Audio))
        .then(|| affinity_at(item.audio.as_ref(), Modality::Audio, config))
        .transpose()?;
    let video = (fused || channels.contains(&Channel::Video))
        .then(|| affinity_at(item.video.as_ref(), Modality::Video, config))
        .transpose()?;
    let fused = if fused {
        let ws = [audio.clone().expect("built above"), video.clone().expect("built above")];
        Some(snf::snf_fuse(&ws, &config.snf)?)
    } else {
        None
    };
    Ok(ItemMatrices { audio, video, fused })
}

fn scatter_key(m: &SquareMatrix, config: &PipelineConfig) -> String {
    let p = &config.scattering;
    CacheKey::new("scatter-v1")
        .usizes(&[p.scales, p.directions, p.input_n, p.output_n])
        .f64s(&[p.sigma0, p.xi0])
        .f64s(m.values())
        .finish()
}

fn feature(
    m: &SquareMatrix,
    repr: Representation,
    bank: Option<&FilterBank>,
    cache: Option<&FeatureCache>,
    config: &PipelineConfig,
) -> Result<Vec<f64>> {
    match repr {
        Representation::L2 => Ok(m.values().to_vec()),
        Representation::Scatter => {
            let bank = bank.expect("filter bank built for scatter pipelines");
            let compute = || scattering_transform(m.values(), bank).map(|f| f.into_vec());
            match cache {
                Some(c) => c.get_or_compute(&scatter_key(m, config), compute),
                None => compute(),
            }
        }
    }
}

/// Exactly symmetric, zero-diagonal Euclidean distances between features.
pub fn object_distances(features: &[Vec<f64>]) -> SquareMatrix {
    let n = features.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| euclidean(&features[i], &features[j])).collect())
        .collect();
    let mut d = SquareMatrix::zeros(n, MatrixKind::Distance);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

/// Result of one pipeline over a set of items.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub kind: PipelineKind,
    pub scores: ObjectScores,
    pub report: RetrievalReport,
}

/// Evaluates several pipelines at once, sharing per-item work between them.
pub fn evaluate_pipelines(
    items: &[Item],
    kinds: &[PipelineKind],
    config: &PipelineConfig,
    cache: Option<&FeatureCache>,
) -> Result<Vec<PipelineResult>> {
    if items.is_empty() {
        return Err(Error::EmptyInput);
    }
    let needed: BTreeSet<(Channel, Representation)> = kinds.iter().flat_map(|k| k.components()).collect();
    let channels: BTreeSet<Channel> = needed.iter().map(|(c, _)| *c).collect();
    let bank = if needed.iter().any(|(_, r)| *r == Representation::Scatter) {
        let mut p = config.scattering.clone();
        p.input_n = config.common_dim;
        Some(build_filter_bank(&p)?)
    } else {
        None
    };

    let per_item: Vec<BTreeMap<(Channel, Representation), Vec<f64>>> = items
        .par_iter()
        .map(|item| {
            let mats = item_matrices(item, &channels, config)?;
            needed
                .iter()
                .map(|&(c, r)| {
                    let m = mats.get(c).expect("channel built");
                    Ok(((c, r), feature(m, r, bank.as_ref(), cache, config)?))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut distances: BTreeMap<(Channel, Representation), SquareMatrix> = BTreeMap::new();
    for key in &needed {
        let feats: Vec<Vec<f64>> = per_item.iter().map(|m| m[key].clone()).collect();
        distances.insert(*key, object_distances(&feats));
    }

    let labels: Vec<String> = items.iter().map(|it| it.label.clone()).collect();
    kinds
        .iter()
        .map(|&kind| {
            let comps = kind.components();
            let scores = if comps.len() == 1 {
                ObjectScores::Distance(distances[&comps[0]].clone())
            } else {
                let mus: Vec<SquareMatrix> = comps.iter().map(|c| distances[c].clone()).collect();
                ObjectScores::Similarity(eval::downstream_fuse(&mus, &config.kernel, &config.snf)?)
            };
            let collection = LabeledCollection::new(labels.clone(), scores.clone())?;
            let report = eval::evaluate(&collection)?;
            Ok(PipelineResult { kind, scores, report })
        })
        .collect()
}

/// Items of a synthetic dataset, modality A as audio and B as video.
pub fn synth_items(ds: &SynthDataset) -> Vec<Item> {
    let labels = ds.labels();
    ds.items
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (it, label))| Item {
            id: SynthDataset::item_id(i),
            label,
            audio: Some(it.a.clone()),
            video: Some(it.b.clone()),
        })
        .collect()
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::param(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Output of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub item_ids: Vec<String>,
    pub labels: Vec<String>,
    pub result: PipelineResult,
}

/// Loads the dataset named by `config`, runs its pipeline and writes
/// `report.toml`, `pr_curve.csv`, `items.txt`, the object-level matrix
/// (`distances.ssmf`, or `similarity.ssmf` for late fusion) and its
/// heatmap into the output directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    with_workers(config.workers, || run_inner(config))?
}

fn run_inner(config: &PipelineConfig) -> Result<PipelineOutput> {
    let kind = config.pipeline;
    let items = load_dataset(
        &config.input_dir,
        kind.needs_audio(),
        kind.needs_video(),
        &config.mfcc,
        config.effective_noise(),
        config.seed,
    )?;
    let out = &config.output_dir;
    fs::create_dir_all(out)?;
    let cache = if config.cache {
        Some(FeatureCache::open(out.join("cache"))?)
    } else {
        None
    };
    let result = evaluate_pipelines(&items, &[kind], config, cache.as_ref())?
        .pop()
        .expect("one pipeline requested");

    if config.dump_intermediates {
        dump_intermediates(&items, config, &out.join("intermediates"))?;
    }

    let item_ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
    let labels: Vec<String> = items.iter().map(|i| i.label.clone()).collect();
    let manifest: String = item_ids.iter().zip(&labels).map(|(i, l)| format!("{i} {l}\n")).collect();
    fs::write(out.join("items.txt"), manifest)?;
    fs::write(out.join("report.toml"), render_report(config, &result.report)?)?;
    write_pr_curve(&result.report.mean_curve, out.join("pr_curve.csv"))?;
    let (name, m) = match &result.scores {
        ObjectScores::Distance(d) => ("distances", d),
        ObjectScores::Similarity(s) => ("similarity", s),
    };
    io::write_square(m, out.join(format!("{name}.ssmf")))?;
    emit_heatmap(m, out.join(format!("{name}.pgm")))?;

    Ok(PipelineOutput { item_ids, labels, result })
}

fn dump_intermediates(items: &[Item], config: &PipelineConfig, dir: &Path) -> Result<()> {
    let channels: BTreeSet<Channel> = config.pipeline.components().into_iter().map(|(c, _)| c).collect();
    items.par_iter().try_for_each(|item| {
        let sub = dir.join(&item.id);
        fs::create_dir_all(&sub)?;
        let mats = item_matrices(item, &channels, config)?;
        for (name, m) in [("audio", &mats.audio), ("video", &mats.video), ("fused", &mats.fused)] {
            if let Some(m) = m {
                io::write_square(m, sub.join(format!("w_{name}.ssmf")))?;
                emit_heatmap(m, sub.join(format!("w_{name}.pgm")))?;
            }
        }
        Ok(())
    })
}
