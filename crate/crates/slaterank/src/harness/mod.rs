//! Everything behind the `slaterank` binary: run configuration, the
//! training loop, evaluation, the re-ranking pipeline with its built-in
//! linear base ranker, the gradient-check command and synthetic dataset
//! generation.
//!
//! All commands are plain functions over a [`RunConfig`] so tests drive
//! them in-process; the binary is a thin argument-parsing shell.

mod checks;
mod config;
mod rerank;
mod synth;
mod train;

pub use checks::{gradcheck_command, GradCheckSummary};
pub use config::{ConfigError, DataConfig, ModelKind, OptimizerConfig, Precision, RunConfig};
pub use rerank::{kfold_base_scores, rerank_pipeline, sort_by_base_scores, LinearBaseRanker, RerankOutcome};
pub use synth::{synth_command, synthetic_splits};
pub use train::{eval_command, load_splits, train_command, train_on, LoadedData, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Training aborted: a slate produced a NaN/Inf loss.
    #[error("non-finite loss on slate '{slate}' (epoch {epoch})")]
    NonFiniteLoss { slate: String, epoch: usize },
    /// The gradient-check command found a loss whose analytic gradient
    /// disagrees with finite differences.
    #[error("gradient check failed for loss '{loss}': max relative error {max_rel_err:e}")]
    GradCheckFailed { loss: String, max_rel_err: f64 },
    /// Cross-validation asked for folds that cannot all be non-empty.
    #[error("cannot split {n_slates} slates into {k} folds (need k >= 2 and k <= slate count)")]
    FoldTooSmall { k: usize, n_slates: usize },
    /// Least-squares fit on a degenerate design matrix.
    #[error("base ranker fit failed: {reason}")]
    SingularFit { reason: String },
}
