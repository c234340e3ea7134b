use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ssmfuse::io;
use ssmfuse::matrix::MatrixKind;

fn ssmfuse(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssmfuse"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = ssmfuse(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], cwd: &Path) -> String {
    let out = ssmfuse(args, cwd);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "one-line error expected: {err:?}");
    assert!(err.starts_with("error: "), "{err:?}");
    err
}

#[test]
fn every_subcommand_has_help() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["ssm", "kernel", "snf", "scatter", "eval", "synth", "pipeline"] {
        let text = ok(&[sub, "--help"], tmp.path());
        assert!(text.contains("Usage"), "{sub}");
    }
}

#[test]
fn matrix_chain_from_curve_to_features() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "topc", "-o", "t", "--kind", "ribbon_2d", "--samples", "40"], d);
    ok(&["ssm", "t/ribbon_2d.ssmf", "-o", "d.ssmf", "--resize", "32", "--heatmap", "d.pgm"], d);
    ok(&["kernel", "d.ssmf", "-o", "w.ssmf"], d);
    ok(&["ssm", "t/ribbon_2d.ssmf", "-o", "d2.ssmf", "--resize", "32"], d);
    ok(&["kernel", "d2.ssmf", "-o", "w2.ssmf", "--beta", "0.7"], d);
    ok(&["snf", "w.ssmf", "w2.ssmf", "-o", "f.ssmf", "--kappa", "0.2", "--iterations", "5", "--normalize"], d);
    ok(&["scatter", "f.ssmf", "-o", "s.ssmf", "--scales", "2", "--directions", "4", "--output-res", "8"], d);

    let f = io::read_square(d.join("f.ssmf"), MatrixKind::Fused).unwrap();
    assert_eq!(f.n(), 32);
    let s = io::read_matrix(d.join("s.ssmf")).unwrap();
    // 1 + 8 + 16 paths of 8 x 8
    assert_eq!((s.rows, s.cols), (1, 25 * 64));
    let (w, h, _) = io::read_pgm(d.join("d.pgm")).unwrap();
    assert_eq!((w, h), (32, 32));
}

#[test]
fn eval_writes_report_and_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "clusters", "-o", "c", "--per-cluster", "6", "--noise", "0.05"], d);
    ok(&["ssm", "c/points.ssmf", "-o", "dist.ssmf"], d);
    let report = ok(&["eval", "dist.ssmf", "-l", "c/labels.txt", "--pr-curve", "pr.csv"], d);
    assert!(report.contains("map = 1.0"), "{report}");
    assert!(report.contains("[per_class_map]"));
    let csv = fs::read_to_string(d.join("pr.csv")).unwrap();
    assert!(csv.starts_with("recall,precision\n"));
    ok(&["eval", "dist.ssmf", "-l", "c/labels.txt", "-o", "r.toml"], d);
    assert_eq!(fs::read_to_string(d.join("r.toml")).unwrap(), report);
}

#[test]
fn pipeline_from_config_file_with_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "dataset", "-o", "ds", "--classes", "2", "--per-class", "3", "--warp", "0"], d);
    fs::write(
        d.join("run.toml"),
        "pipeline = \"AudioL2\"\ncommon_dim = 16\nscales = 2\ndirections = 4\noutput_n = 4\ninput_dir = \"ds\"\noutput_dir = \"out\"\nsnf_normalize = true\n",
    )
    .unwrap();
    let line = ok(&["pipeline", "-c", "run.toml", "--pipeline", "FusedScatter"], d);
    assert!(line.starts_with("pipeline FusedScatter map 1.000000"), "{line}");
    let report = fs::read_to_string(d.join("out/report.toml")).unwrap();
    assert!(report.contains("pipeline = \"FusedScatter\""));
    assert!(report.contains("common_dim = 16"));
    assert!(d.join("out/distances.pgm").exists());
}

#[test]
fn synth_blob_and_dataset_layouts() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "blob", "-o", "b", "--displacement", "0.05", "--size", "32"], d);
    assert_eq!(io::read_square(d.join("b/image.ssmf"), MatrixKind::Similarity).unwrap().n(), 32);
    ok(&["synth", "dataset", "-o", "ds", "--classes", "4", "--per-class", "2"], d);
    let labels = io::read_labels(d.join("ds/labels.txt")).unwrap();
    assert_eq!(labels.len(), 8);
    assert!(d.join("ds/item0007/video.ssmf").exists());
}

#[test]
fn errors_are_single_lines_with_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let err = fails(&["kernel", "missing.ssmf", "-o", "w.ssmf"], d);
    assert!(err.contains("missing input"), "{err}");
    fails(&["snf", "only-one.ssmf", "-o", "f.ssmf"], d);
    fails(&["pipeline", "--pipeline", "NotAPipeline"], d);
    fails(&["frobnicate"], d);
    fs::write(d.join("junk.ssmf"), b"XXXXjunk").unwrap();
    let err = fails(&["kernel", "junk.ssmf", "-o", "w.ssmf"], d);
    assert!(err.contains("bad magic"), "{err}");
    fs::write(d.join("bad.toml"), "no_such_key = 1\n").unwrap();
    fails(&["pipeline", "-c", "bad.toml"], d);
    let err = fails(&["synth", "topc", "-o", "t", "--kind", "spiral"], d);
    assert!(err.contains("unknown curve kind"), "{err}");
}
