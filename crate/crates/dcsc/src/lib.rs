//! Convolutional sparse coding (CSC) image denoising with graph
//! Laplacian regularization.
//!
//! The library decomposes an image as a sum of dictionary filters
//! convolved with sparse coefficient maps and offers three model
//! variants:
//!
//! - `csc`  — convolutional basis pursuit denoising (l1 only),
//! - `scsc` — adds a non-local patch-graph Laplacian regularizer,
//! - `dcsc` — adds dual row/column graph Laplacian regularizers.
//!
//! The optimizer is a nested ADMM: the coefficient subproblem is solved
//! exactly in the frequency domain (circular boundary, rank-one
//! Sherman-Morrison per bin), the l1 term by soft thresholding, and the
//! graph subproblem by matrix-free conjugate gradient on the
//! Kronecker-sum operator alpha Lc (x) I + beta I (x) Lr + eta I.

pub mod coeffs;
pub mod convolve;
pub mod dictionary;
pub mod error;
pub mod fft2;
pub mod graph;
pub mod image;
pub mod inner;
pub mod metrics;
pub mod rng;
pub mod solver;
pub mod synth;
pub mod xupdate;

pub use coeffs::CoeffMapSet;
pub use convolve::{circular_convolve_sum, circular_correlate_sum, lowpass_split};
pub use dictionary::{Dictionary, DictionaryFreq};
pub use error::{Error, Result};
pub use graph::{
    build_line_graph, build_patch_graph, cosine_edge_weight, dglr_value, glr_value,
    DualGraphPrior, GraphConfig, GraphLaplacian, GraphPrior, GraphSide, LineAxis, PatchGraph,
};
pub use image::ImageGrid;
pub use inner::{
    inner_admm_step, kron_operator_apply, soft_threshold, y_update, z_update, CgConfig, InnerState,
};
pub use metrics::{add_gaussian_noise, mse, psnr, NoiseSpec};
pub use solver::{
    objective_value, residuals, solve, IterationStats, SolveResult, SolverConfig, Variant,
};
pub use xupdate::XUpdateWorkspace;
