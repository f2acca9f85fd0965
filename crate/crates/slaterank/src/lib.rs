//! Context-aware learning to rank.
//!
//! Classic learning-to-rank models score each item of a result list in
//! isolation and only account for item interactions in the loss. This crate
//! scores the whole list ("slate") jointly: a self-attention encoder lets
//! every item's score depend on all other items present in the same slate,
//! both during training and at inference time. The scorer is
//! permutation-equivariant unless positional encodings are enabled, in which
//! case it becomes a re-ranker that can exploit an existing ordering.
//!
//! The crate is organised around six modules:
//!
//! - [`data`] — LETOR/SVMLight-rank parsing, slate assembly, feature
//!   standardization, padding/subsampling, and synthetic dataset generation.
//! - [`nn`] — dense tensors, a reverse-mode differentiation tape with a fixed
//!   operation catalogue, a finite-difference gradient checker, the Adam
//!   optimizer, and a checkpoint format.
//! - [`model`] — the self-attention slate scorer and an MLP baseline.
//! - [`losses`] — pointwise, pairwise and listwise ranking objectives.
//! - [`metrics`] — NDCG at cutoffs and MRR over evaluation splits.
//! - [`harness`] — configuration, the training loop, the re-ranking
//!   pipeline, and the commands behind the `slaterank` binary.
//!
//! A narrative guide with runnable examples lives in the `book/` directory of
//! the repository; its code snippets double as doc-tests for this crate.

pub mod data;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
mod real;

#[cfg(doctest)]
mod guide;

pub use real::{cast, Real};

/// Crate-wide error type aggregating the per-module errors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Nn(#[from] nn::NnError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Loss(#[from] losses::LossError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Config(#[from] harness::ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] nn::CheckpointError),
    #[error(transparent)]
    Harness(#[from] harness::HarnessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for usage/config/data problems,
    /// 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Nn(nn::NnError::NonFiniteLoss { .. }) => 2,
            Error::Harness(harness::HarnessError::NonFiniteLoss { .. }) => 2,
            Error::Harness(harness::HarnessError::GradCheckFailed { .. }) => 2,
            _ => 1,
        }
    }
}
