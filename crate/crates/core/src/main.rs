use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ssmfuse::eval::{self, LabeledCollection, ObjectScores};
use ssmfuse::io;
use ssmfuse::kernel::{self, KernelParams};
use ssmfuse::matrix::{pairwise_distance_matrix, resize_matrix, DenseMatrix, MatrixKind, SquareMatrix};
use ssmfuse::pipeline::{emit_heatmap, render_eval_report, write_pr_curve, ConfigOverrides, PipelineConfig, PipelineKind};
use ssmfuse::scattering::{build_filter_bank, scattering_transform, ScatteringParams};
use ssmfuse::snf::{snf_fuse, SnfParams};
use ssmfuse::synth::{self, CurveKind, MultimodalParams};
use ssmfuse::TimeOrderedPointCloud;

#[derive(Parser)]
#[command(name = "ssmfuse", version, about = "Self-similarity matrices, similarity network fusion and scattering features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Self-similarity (pairwise distance) matrix of a time-ordered point cloud.
    Ssm(SsmArgs),
    /// Gaussian affinity with autotuned bandwidths from a distance matrix.
    Kernel(KernelArgs),
    /// Fuse two or more affinity matrices.
    Snf(SnfArgs),
    /// Scattering coefficients of a square matrix.
    Scatter(ScatterArgs),
    /// Precision-recall and MAP of an object-level matrix.
    Eval(EvalArgs),
    /// Generate synthetic data.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Run a retrieval pipeline over a dataset directory.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SsmArgs {
    /// `N x d` point cloud, as a matrix file or CSV.
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Resize the result to this side.
    #[arg(long)]
    resize: Option<usize>,
    /// Also write a PGM heatmap.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Args)]
struct KernelArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    kappa: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Args)]
struct SnfArgs {
    /// Affinity matrices of equal size.
    #[arg(required = true, num_args = 2..)]
    inputs: Vec<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    kappa: f64,
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    /// Reset the full transition matrices to their normalized form after
    /// every iteration.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Args)]
struct ScatterArgs {
    /// Square matrix; its side must be a power of two unless --resize is given.
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 4)]
    scales: usize,
    #[arg(long, default_value_t = 8)]
    directions: usize,
    #[arg(long = "output-res", default_value_t = 32)]
    output_res: usize,
    #[arg(long)]
    resize: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Object-level matrix.
    matrix: PathBuf,
    /// One class id per line, in matrix order.
    #[arg(short, long)]
    labels: PathBuf,
    /// Rank by descending similarity instead of ascending distance.
    #[arg(long)]
    similarity: bool,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long = "pr-curve")]
    pr_curve: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Noisy points around centers on the unit circle.
    Clusters {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 3)]
        clusters: usize,
        #[arg(long, default_value_t = 100)]
        per_cluster: usize,
        #[arg(long, default_value_t = 0.2)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Two-blob image, both blobs shifted right by a displacement.
    Blob {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        displacement: f64,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = 256)]
        size: usize,
    },
    /// Parametric curve sampled in time.
    Topc {
        #[arg(short, long)]
        output: PathBuf,
        /// cosine_1d, ribbon_2d or knot_3d.
        #[arg(long, default_value = "cosine_1d")]
        kind: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Labeled two-modality dataset directory.
    Dataset {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 6)]
        per_class: usize,
        #[arg(long, default_value_t = 0.5)]
        warp: f64,
        #[arg(long, default_value_t = 0.0)]
        noise_sd: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct PipelineArgs {
    /// Key-value config file; flags override it.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pipeline: Option<PipelineKind>,
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    common_dim: Option<usize>,
    #[arg(long)]
    kernel_kappa: Option<f64>,
    #[arg(long)]
    kernel_beta: Option<f64>,
    #[arg(long)]
    snf_kappa: Option<f64>,
    #[arg(long)]
    snf_iterations: Option<usize>,
    #[arg(long)]
    snf_normalize: Option<bool>,
    #[arg(long)]
    scales: Option<usize>,
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long = "output-res")]
    output_res: Option<usize>,
    /// Target pSNR in dB; `inf` disables noise.
    #[arg(long)]
    noise_psnr_db: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    dump_intermediates: bool,
}

fn read_any(path: &Path) -> Result<DenseMatrix> {
    let m = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        io::read_csv(path)?
    } else {
        io::read_matrix(path)?
    };
    Ok(m)
}

fn read_square(path: &Path, kind: MatrixKind) -> Result<SquareMatrix> {
    SquareMatrix::from_dense(read_any(path)?, kind).with_context(|| path.display().to_string())
}

fn write_out(m: &SquareMatrix, output: &Path, heatmap: Option<&PathBuf>) -> Result<()> {
    io::write_square(m, output)?;
    if let Some(h) = heatmap {
        emit_heatmap(m, h)?;
    }
    Ok(())
}

fn ssm(a: SsmArgs) -> Result<()> {
    let topc = TimeOrderedPointCloud::from_dense(read_any(&a.input)?)?;
    let mut d = pairwise_distance_matrix(&topc)?;
    if let Some(n) = a.resize {
        d = resize_matrix(&d, n)?;
    }
    write_out(&d, &a.output, a.heatmap.as_ref())
}

fn kernel(a: KernelArgs) -> Result<()> {
    let d = read_square(&a.input, MatrixKind::Distance)?;
    let w = kernel::affinity(&d, &KernelParams { kappa: a.kappa, beta: a.beta })?;
    write_out(&w, &a.output, a.heatmap.as_ref())
}

fn snf(a: SnfArgs) -> Result<()> {
    let ws = a
        .inputs
        .iter()
        .map(|p| read_square(p, MatrixKind::Similarity))
        .collect::<Result<Vec<_>>>()?;
    let params = SnfParams { kappa: a.kappa, iterations: a.iterations, normalize: a.normalize };
    let fused = snf_fuse(&ws, &params)?;
    write_out(&fused, &a.output, a.heatmap.as_ref())
}

fn scatter(a: ScatterArgs) -> Result<()> {
    let mut m = read_square(&a.input, MatrixKind::Similarity)?;
    if let Some(n) = a.resize {
        m = resize_matrix(&m, n)?;
    }
    let params = ScatteringParams {
        scales: a.scales,
        directions: a.directions,
        input_n: m.n(),
        output_n: a.output_res,
        ..ScatteringParams::default()
    };
    let bank = build_filter_bank(&params)?;
    let features = scattering_transform(m.values(), &bank)?;
    io::write_matrix(&DenseMatrix::row_vector(features.into_vec()), &a.output)?;
    Ok(())
}

fn evaluate(a: EvalArgs) -> Result<()> {
    let kind = if a.similarity { MatrixKind::Similarity } else { MatrixKind::Distance };
    let m = read_square(&a.matrix, kind)?;
    let labels = io::read_labels(&a.labels)?;
    let scores = if a.similarity { ObjectScores::Similarity(m) } else { ObjectScores::Distance(m) };
    let report = eval::evaluate(&LabeledCollection::new(labels, scores)?)?;
    let text = render_eval_report(&report)?;
    match &a.output {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    if let Some(p) = &a.pr_curve {
        write_pr_curve(&report.mean_curve, p)?;
    }
    Ok(())
}

fn synth(cmd: SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::Clusters { output, clusters, per_cluster, noise, seed } => {
            let (pts, labels) = synth::gen_clusters(clusters, per_cluster, noise, seed)?;
            fs::create_dir_all(&output)?;
            io::write_matrix(&pts.to_dense(), output.join("points.ssmf"))?;
            let labels: Vec<String> = labels.iter().map(|l| format!("c{l}")).collect();
            io::write_labels(&labels, output.join("labels.txt"))?;
        }
        SynthCommand::Blob { output, displacement, radius, size } => {
            let img = synth::gen_blob_pair_image(displacement, radius, size)?;
            fs::create_dir_all(&output)?;
            let m = SquareMatrix::new(size, img, MatrixKind::Similarity)?;
            write_out(&m, &output.join("image.ssmf"), Some(&output.join("image.pgm")))?;
        }
        SynthCommand::Topc { output, kind, samples, seed } => {
            let kind: CurveKind = kind.parse()?;
            let topc = synth::gen_parametric_topc(kind, samples, seed)?;
            fs::create_dir_all(&output)?;
            io::write_matrix(&topc.to_dense(), output.join(format!("{kind}.ssmf")))?;
        }
        SynthCommand::Dataset { output, classes, per_class, warp, noise_sd, seed } => {
            let params = MultimodalParams { noise_sd, ..MultimodalParams::new(classes, per_class, warp) };
            synth::gen_multimodal_dataset_with(&params, seed)?.write_dir(&output)?;
        }
    }
    Ok(())
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let mut config = PipelineConfig::default();
    if let Some(path) = &a.config {
        config.apply(&ConfigOverrides::from_file(path)?);
    }
    config.apply(&ConfigOverrides {
        pipeline: a.pipeline,
        common_dim: a.common_dim,
        kernel_kappa: a.kernel_kappa,
        kernel_beta: a.kernel_beta,
        snf_kappa: a.snf_kappa,
        snf_iterations: a.snf_iterations,
        snf_normalize: a.snf_normalize,
        scales: a.scales,
        directions: a.directions,
        output_n: a.output_res,
        noise_psnr_db: a.noise_psnr_db,
        seed: a.seed,
        input_dir: a.input,
        output_dir: a.output,
        workers: a.workers,
        cache: a.no_cache.then_some(false),
        dump_intermediates: a.dump_intermediates.then_some(true),
        ..ConfigOverrides::default()
    });
    let out = ssmfuse::run_pipeline(&config)?;
    println!("pipeline {} map {:.6} items {}", config.pipeline, out.result.report.map, out.item_ids.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ssm(a) => ssm(a),
        Command::Kernel(a) => kernel(a),
        Command::Snf(a) => snf(a),
        Command::Scatter(a) => scatter(a),
        Command::Eval(a) => evaluate(a),
        Command::Synth(c) => synth(c),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            eprintln!("error: {}", first.strip_prefix("error: ").unwrap_or(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
