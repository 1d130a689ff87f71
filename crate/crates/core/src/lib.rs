//! Unsupervised feature selection with a sparsity- and graph-regularized
//! single-layer autoencoder.
//!
//! The pipeline has three phases:
//!
//! 1. build a cosine-similarity kNN graph over the samples ([`graph`]),
//! 2. train an autoencoder whose encoder weights carry an ℓ2,1 column
//!    penalty and whose hidden codes are smoothed over the graph
//!    ([`model`], minimized with the L-BFGS solver in [`optim`]),
//! 3. score every input feature by the Euclidean norm of its encoder
//!    column and rank ([`select`]).
//!
//! [`eval`] holds the clustering and classification harness used to judge
//! a selection, and [`synthetic`] generates datasets with known
//! informative features.
//!
//! Data follows the samples-as-columns convention: a dataset with `d`
//! features and `n` samples is a `d × n` matrix.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod optim;
pub mod select;
pub mod synthetic;

pub use data::{DataMatrix, FeatureRange, Layout};
pub use error::{GafsError, Result};
pub use eval::{LabelVector, SelectionMetrics, Split};
pub use graph::NeighborGraph;
pub use model::{GradientBundle, ModelParams, ObjectiveContext};
pub use optim::{LbfgsConfig, OptimTrace, Termination};
pub use select::{FeatureCount, FeatureRanking, FitResult, GafsConfig};
