//! End-to-end runs over dataset directories.

use std::fs;
use std::path::Path;

use ssmfuse::eval::ObjectScores;
use ssmfuse::io;
use ssmfuse::matrix::MatrixKind;
use ssmfuse::pipeline::{run_pipeline, PipelineConfig, PipelineKind};
use ssmfuse::synth::{gen_multimodal_dataset_with, MultimodalParams};

fn small_config(kind: PipelineKind, input: &Path, output: &Path) -> PipelineConfig {
    let mut c = PipelineConfig {
        pipeline: kind,
        common_dim: 16,
        input_dir: input.to_path_buf(),
        output_dir: output.to_path_buf(),
        cache: false,
        ..PipelineConfig::default()
    };
    c.scattering.scales = 2;
    c.scattering.directions = 4;
    c.scattering.output_n = 4;
    c.scattering.input_n = 16;
    c.snf.normalize = true;
    c
}

fn write_dataset(dir: &Path, seed: u64) {
    let p = MultimodalParams { len_a: 30, len_b: 24, ..MultimodalParams::new(3, 3, 0.4) };
    gen_multimodal_dataset_with(&p, seed).unwrap().write_dir(dir).unwrap();
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    fs::read(path).unwrap()
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().into_string().unwrap())
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), read(dir.join(n)))).collect()
}

#[test]
fn runs_are_byte_identical_across_repeats_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data, 1);
    for kind in [PipelineKind::AllFusedScatter, PipelineKind::FusedL2] {
        let mut runs = Vec::new();
        for (i, workers) in [Some(1), Some(8), Some(8)].into_iter().enumerate() {
            let out = tmp.path().join(format!("{kind}-{i}"));
            let mut c = small_config(kind, &data, &out);
            c.workers = workers;
            c.noise_psnr_db = Some(15.0);
            run_pipeline(&c).unwrap();
            runs.push(outputs(&out));
        }
        assert_eq!(runs[0], runs[1], "{kind}: 1 vs 8 workers");
        assert_eq!(runs[1], runs[2], "{kind}: repeat");
    }
}

#[test]
fn manifest_order_does_not_matter() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data, 2);
    let c = small_config(PipelineKind::FusedScatter, &data, &tmp.path().join("a"));
    run_pipeline(&c).unwrap();

    let manifest = fs::read_to_string(data.join("items.txt")).unwrap();
    let mut lines: Vec<&str> = manifest.lines().collect();
    lines.reverse();
    lines.swap(0, 4);
    fs::write(data.join("items.txt"), lines.join("\n")).unwrap();
    let c2 = PipelineConfig { output_dir: tmp.path().join("b"), ..c.clone() };
    run_pipeline(&c2).unwrap();
    assert_eq!(outputs(&tmp.path().join("a")), outputs(&tmp.path().join("b")));
}

#[test]
fn relabeling_items_permutes_the_object_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data, 3);
    let kind = PipelineKind::AVLateFusedScatter;
    let a = run_pipeline(&small_config(kind, &data, &tmp.path().join("a"))).unwrap();

    // Rename every item so that the sorted order is reversed.
    let renamed = tmp.path().join("renamed");
    fs::create_dir_all(&renamed).unwrap();
    let n = a.item_ids.len();
    let mut manifest = String::new();
    for (i, (id, label)) in a.item_ids.iter().zip(&a.labels).enumerate() {
        let new_id = format!("z{:02}", n - 1 - i);
        fs::create_dir_all(renamed.join(&new_id)).unwrap();
        for f in ["audio.ssmf", "video.ssmf"] {
            fs::copy(data.join(id).join(f), renamed.join(&new_id).join(f)).unwrap();
        }
        manifest.push_str(&format!("{new_id} {label}\n"));
    }
    fs::write(renamed.join("items.txt"), manifest).unwrap();
    let b = run_pipeline(&small_config(kind, &renamed, &tmp.path().join("b"))).unwrap();

    // b's item k is a's item n - 1 - k.
    let perm: Vec<usize> = (0..n).rev().collect();
    let (ma, mb) = (a.result.scores.matrix(), b.result.scores.matrix());
    assert_eq!(&ma.permuted(&perm), mb);
    assert!((a.result.report.map - b.result.report.map).abs() <= 1e-12);
    assert_eq!(a.result.report.per_class_map.len(), b.result.report.per_class_map.len());
}

#[test]
fn infinite_psnr_equals_no_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data, 4);
    let base = small_config(PipelineKind::AudioScatter, &data, &tmp.path().join("none"));
    run_pipeline(&base).unwrap();
    let inf = PipelineConfig {
        noise_psnr_db: Some(f64::INFINITY),
        output_dir: tmp.path().join("inf"),
        ..base.clone()
    };
    run_pipeline(&inf).unwrap();
    assert_eq!(outputs(&tmp.path().join("none")), outputs(&tmp.path().join("inf")));

    let noisy = PipelineConfig {
        noise_psnr_db: Some(5.0),
        output_dir: tmp.path().join("noisy"),
        ..base
    };
    run_pipeline(&noisy).unwrap();
    assert_ne!(read(tmp.path().join("none/distances.ssmf")), read(tmp.path().join("noisy/distances.ssmf")));
}

#[test]
fn scatter_distances_are_symmetric_with_zero_diagonal() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data, 5);
    for kind in [PipelineKind::AudioScatter, PipelineKind::VideoScatter, PipelineKind::FusedScatter] {
        let out = run_pipeline(&small_config(kind, &data, &tmp.path().join(kind.name()))).unwrap();
        let ObjectScores::Distance(d) = &out.result.scores else { panic!("{kind} should rank by distance") };
        assert!(d.is_symmetric(0.0));
        assert!((0..d.n()).all(|i| d.get(i, i) == 0.0));
        let on_disk = io::read_square(tmp.path().join(kind.name()).join("distances.ssmf"), MatrixKind::Distance).unwrap();
        assert_eq!(&on_disk, d);
    }
}

#[test]
fn cache_and_intermediates() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data, 6);
    let out = tmp.path().join("out");
    let mut c = small_config(PipelineKind::FusedScatter, &data, &out);
    c.cache = true;
    c.dump_intermediates = true;
    run_pipeline(&c).unwrap();
    let first = read(out.join("report.toml"));
    let cached = fs::read_dir(out.join("cache")).unwrap().count();
    assert_eq!(cached, 9);
    run_pipeline(&c).unwrap();
    assert_eq!(read(out.join("report.toml")), first);
    let item = out.join("intermediates").join("item0000");
    for f in ["w_audio.ssmf", "w_video.ssmf", "w_fused.ssmf", "w_fused.pgm"] {
        assert!(item.join(f).exists(), "{f}");
    }
    let report = String::from_utf8(first).unwrap();
    for key in ["pipeline = \"FusedScatter\"", "map = ", "[per_class_map]", "[params]", "snf_normalize = true"] {
        assert!(report.contains(key), "{key}");
    }
    let curve = fs::read_to_string(out.join("pr_curve.csv")).unwrap();
    assert!(curve.starts_with("recall,precision\n"));
}

#[test]
fn raw_audio_and_video_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("raw");
    let rate = 8000;
    let mut manifest = String::new();
    for (i, (freq, speed)) in [(300.0, 1usize), (310.0, 1), (1200.0, 3), (1250.0, 3)].into_iter().enumerate() {
        let id = format!("clip{i}");
        let dir = data.join(&id);
        fs::create_dir_all(dir.join("video")).unwrap();
        let samples: Vec<f64> = (0..4000)
            .map(|k| 0.4 * (2.0 * std::f64::consts::PI * freq * k as f64 / rate as f64).sin())
            .collect();
        io::write_wav_f32(&samples, rate, dir.join("audio.wav")).unwrap();
        for f in 0..12 {
            // A vertical bar sweeping across an 8x8 frame.
            let col = (f * speed) % 8;
            let px: Vec<u8> = (0..64).map(|k| if k % 8 == col { 255 } else { 0 }).collect();
            io::write_pgm(&px, 8, 8, dir.join("video").join(format!("f{f:03}.pgm"))).unwrap();
        }
        manifest.push_str(&format!("{id} {}\n", if i < 2 { "low" } else { "high" }));
    }
    fs::write(data.join("items.txt"), manifest).unwrap();

    for kind in [PipelineKind::AudioL2, PipelineKind::VideoL2, PipelineKind::FusedL2] {
        let mut c = small_config(kind, &data, &tmp.path().join(kind.name()));
        c.common_dim = 8;
        c.mfcc.sample_rate = rate;
        c.mfcc.window = 512;
        c.mfcc.hop = 256;
        c.kernel.kappa = 0.2;
        c.snf.kappa = 0.2;
        let out = run_pipeline(&c).unwrap();
        assert_eq!(out.item_ids, ["clip0", "clip1", "clip2", "clip3"]);
        assert!(out.result.report.map.is_finite());
        c.noise_psnr_db = Some(20.0);
        c.output_dir = tmp.path().join(format!("{kind}-noisy"));
        run_pipeline(&c).unwrap();
    }

    // Audio at the wrong rate is rejected.
    let c = small_config(PipelineKind::AudioL2, &data, &tmp.path().join("bad"));
    assert!(run_pipeline(&c).is_err());
}

#[test]
fn missing_inputs_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data, 7);
    fs::remove_file(data.join("item0003").join("video.ssmf")).unwrap();
    let c = small_config(PipelineKind::AudioL2, &data, &tmp.path().join("a"));
    run_pipeline(&c).unwrap();
    let c = small_config(PipelineKind::VideoL2, &data, &tmp.path().join("v"));
    assert!(run_pipeline(&c).unwrap_err().to_string().contains("missing input"));
}
