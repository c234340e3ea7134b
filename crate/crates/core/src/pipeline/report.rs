use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::config::{PipelineConfig, PipelineKind};
use crate::error::{Error, Result};
use crate::eval::RetrievalReport;
use crate::io;
use crate::matrix::SquareMatrix;

#[derive(Serialize)]
struct ReportFile<'a> {
    pipeline: PipelineKind,
    map: f64,
    items: usize,
    per_class_map: &'a BTreeMap<String, f64>,
    params: Params,
}

/// Everything that affects results. Paths and the worker count do not.
#[derive(Serialize)]
struct Params {
    common_dim: usize,
    kernel_kappa: f64,
    kernel_beta: f64,
    snf_kappa: f64,
    snf_iterations: usize,
    snf_normalize: bool,
    scales: usize,
    directions: usize,
    output_n: usize,
    sigma0: f64,
    xi0: f64,
    mfcc_window: usize,
    mfcc_hop: usize,
    mfcc_coeffs: usize,
    mfcc_mels: usize,
    sample_rate: u32,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_psnr_db: Option<f64>,
}

/// The report as TOML text: `pipeline`, `map`, `items`, then the
/// `[per_class_map]` and `[params]` tables.
pub fn render_report(config: &PipelineConfig, report: &RetrievalReport) -> Result<String> {
    let file = ReportFile {
        pipeline: config.pipeline,
        map: report.map,
        items: report.average_precisions.len(),
        per_class_map: &report.per_class_map,
        params: Params {
            common_dim: config.common_dim,
            kernel_kappa: config.kernel.kappa,
            kernel_beta: config.kernel.beta,
            snf_kappa: config.snf.kappa,
            snf_iterations: config.snf.iterations,
            snf_normalize: config.snf.normalize,
            scales: config.scattering.scales,
            directions: config.scattering.directions,
            output_n: config.scattering.output_n,
            sigma0: config.scattering.sigma0,
            xi0: config.scattering.xi0,
            mfcc_window: config.mfcc.window,
            mfcc_hop: config.mfcc.hop,
            mfcc_coeffs: config.mfcc.n_coeffs,
            mfcc_mels: config.mfcc.n_mels,
            sample_rate: config.mfcc.sample_rate,
            seed: config.seed,
            noise_psnr_db: config.effective_noise(),
        },
    };
    toml::to_string(&file).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Serialize)]
struct EvalFile<'a> {
    map: f64,
    items: usize,
    per_class_map: &'a BTreeMap<String, f64>,
}

/// A report without pipeline parameters, for evaluating a given matrix.
pub fn render_eval_report(report: &RetrievalReport) -> Result<String> {
    let file = EvalFile {
        map: report.map,
        items: report.average_precisions.len(),
        per_class_map: &report.per_class_map,
    };
    toml::to_string(&file).map_err(|e| Error::Format(e.to_string()))
}

/// `recall,precision` rows under a header.
pub fn write_pr_curve(curve: &[(f64, f64)], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["recall", "precision"]).map_err(fmt)?;
    for (r, p) in curve {
        w.write_record([r.to_string(), p.to_string()]).map_err(fmt)?;
    }
    w.flush()?;
    Ok(())
}

/// Min-max scaling to `0..=255`; a constant matrix maps to 128.
pub fn heatmap_pixels(m: &SquareMatrix) -> Result<Vec<u8>> {
    if let Some(index) = m.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (lo, hi) = m
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        return Ok(vec![128; m.values().len()]);
    }
    Ok(m.values()
        .iter()
        .map(|v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
        .collect())
}

/// Writes `m` as an 8-bit binary PGM, one pixel per entry.
pub fn emit_heatmap(m: &SquareMatrix, path: impl AsRef<Path>) -> Result<()> {
    io::write_pgm(&heatmap_pixels(m)?, m.n(), m.n(), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::MatrixKind;

    #[test]
    fn heatmap_min_max() {
        let m = SquareMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0], MatrixKind::Distance).unwrap();
        assert_eq!(heatmap_pixels(&m).unwrap(), vec![0, 255, 255, 0]);
        let c = SquareMatrix::new(2, vec![0.3; 4], MatrixKind::Distance).unwrap();
        assert_eq!(heatmap_pixels(&c).unwrap(), vec![128; 4]);
    }

    #[test]
    fn heatmap_round_trips_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let m = SquareMatrix::from_fn(5, MatrixKind::Distance, |i, j| (i * j) as f64);
        let path = dir.path().join("h.pgm");
        emit_heatmap(&m, &path).unwrap();
        let (w, h, px) = io::read_pgm(&path).unwrap();
        assert_eq!((w, h, px.len()), (5, 5, 25));
        assert_eq!(px[0], 0.0);
        assert_eq!(px[24], 1.0);
    }
}
