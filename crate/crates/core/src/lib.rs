//! Kernel PCA through random Fourier features.
//!
//! The crate samples a random feature map approximating a shift-invariant
//! kernel, learns a rank-k subspace of the feature covariance either
//! streaming (Oja) or in batch (eigendecomposition of the accumulated
//! covariance), and evaluates the result against the exact kernel on held-out
//! data. Exact kernel-matrix PCA and Nyström PCA are provided as baselines.
//!
//! The crate is `no_std` with `alloc`. The default `std` feature only enables
//! the faster matrix-multiply backend.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod batchpca;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod kernelmap;
pub mod linalg;
mod math;
pub mod rng;
pub mod streampca;

pub use batchpca::{
    exact_erm, nystrom_erm, rf_erm, CovarianceAccumulator, GramKind, GramModel, Learner, ModelMeta,
    SubspaceModel,
};
pub use data::{split, synth_gaussian_spectrum, Dataset, FeatureStream, StreamMode, StreamSource};
pub use error::{Error, Result};
pub use evaluate::{
    build_eval_set, erm_objective, fourth_moment_from_features, fourth_moment_spectrum,
    gram_deviation, gram_deviation_cov, gram_deviation_cross, kappa_scan, lifted_objective,
    probe_features, procrustes_align, subspace_error, Alignment, EvalSet, ObjectiveReport,
    ProbeFamily, SpectrumDiagnostics,
};
pub use kernelmap::{
    approx_kernel, exact_kernel, sample_feature_map, FeatureMap, KernelFamily, KernelSpec,
};
pub use nalgebra::{DMatrix, DVector};
pub use streampca::{
    estimate_gap, init_oja, learning_rate, oja_step, run_oja, OjaConfig, OjaLearner, OjaOptions,
    OjaState,
};
