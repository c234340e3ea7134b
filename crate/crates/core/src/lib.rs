//! Unsupervised fusion of multimodal time series through self-similarity
//! matrices.
//!
//! Each modality's time series becomes a self-similarity matrix
//! ([`matrix`]), turned into a Gaussian affinity with an adaptive bandwidth
//! ([`kernel`]). Affinities from several modalities are fused by similarity
//! network fusion ([`snf`]), summarized by a 2D scattering transform
//! ([`scattering`]) and compared object-to-object, with retrieval quality
//! measured by mean average precision ([`eval`]).

pub mod error;
pub mod eval;
pub mod ingest;
pub mod io;
pub mod kernel;
pub mod matrix;
pub mod pipeline;
pub mod scattering;
pub mod snf;
pub mod synth;

pub use error::{Error, Result};
pub use kernel::{autotuned_sigma, similarity_kernel, KernelParams};
pub use matrix::{
    frobenius_distance, pairwise_distance_matrix, resize_matrix, DenseMatrix, MatrixKind, SquareMatrix,
    TimeOrderedPointCloud,
};
pub use scattering::{
    build_filter_bank, scattering_distance, scattering_transform, FilterBank, ScatteringFeatures,
    ScatteringParams,
};
pub use snf::{full_transition, masked_transition, snf_fuse, SnfParams};
pub use eval::{
    downstream_fuse, mean_average_precision, precision_recall, rank_items, LabeledCollection, PrCurve,
    RetrievalReport,
};
pub use ingest::{add_noise_at_psnr, frames_to_topc, mfcc, AudioClip, FrameSequence, MfccParams};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineKind};
