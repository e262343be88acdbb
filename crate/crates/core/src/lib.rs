//! Fitness landscape modeling and search over binary latent codes.
//!
//! The pipeline: dense embeddings are projected (PCA or Gaussian random
//! projection) and thresholded at per-dimension training medians into binary
//! codes; a quadratic surrogate over unary and pairwise bit features is
//! fitted by ridge regression; the resulting QUBO landscape is maximized
//! with classical combinatorial search (simulated annealing, a genetic
//! algorithm, random search, greedy hill climbing, a kernel-based latent
//! search); optimized codes decode back to observed samples by Hamming
//! nearest neighbor; and sequence-level ridge or Gaussian-process oracles
//! score the designs. The [`landscape`] module computes the smoothness,
//! ruggedness, spectral and identifiability diagnostics of a fitted
//! landscape and can verify them exhaustively at small dimension.
//!
//! Everything is deterministic: all randomness flows from 64-bit seeds
//! through the documented generator in [`rng`].

pub mod bits;
pub mod data;
pub mod error;
pub mod landscape;
pub mod latent;
pub mod linalg;
pub mod optim;
pub mod oracle;
pub mod qubo;
pub mod retrieve;
pub mod rng;

pub use error::{Error, ErrorClass, Result};

pub use data::{make_split, Dataset, SplitAssignment, SplitMode, SplitRatios};
pub use latent::{
    binarize, fit_pca, fit_random_projection, latent_diagnostics, BinaryCodeSet,
    LatentDiagnostics, ProjectionKind, ProjectionModel,
};
pub use optim::{OptimizationResult, OptimizerSpec, SearchState};
pub use qubo::{build_features, fit_ridge, regression_metrics, FeatureMap, QuboModel, RegressionMetrics};
pub use retrieve::{aggregate_design, retrieval_metrics, RetrievalIndex};
