//! Neural-network core: dense tensors, reverse-mode differentiation on a
//! tape with a fixed operation catalogue, finite-difference gradient
//! checking, the Adam optimizer, and a little-endian checkpoint format.
//!
//! There is no general broadcasting, no GPU, and no graph optimization —
//! every operation is a plain 2-D matrix op with a hand-written backward
//! pass, which keeps gradients easy to audit and to verify numerically.

mod adam;
mod checkpoint;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, load_checkpoint_into, save_checkpoint, CheckpointError};
pub use gradcheck::{grad_check, GradCheckEntry, GradCheckReport};
pub use tape::{Mode, Tape, Var, MASK_BIAS};
pub use tensor::{glorot_uniform, ParamId, ParamSet, Parameter, Tensor};

/// Errors raised by tensor/tape operations.
#[derive(Debug, thiserror::Error)]
pub enum NnError {
    /// Operand shapes are incompatible for the requested operation.
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    /// A gradient pass was requested for a variable the tape never computed
    /// (stale handle, or a handle from a different tape).
    #[error("backward requested before forward: variable is not on this tape")]
    BackwardBeforeForward,
    /// Dropout probability outside [0, 1).
    #[error("invalid dropout probability {p}: must satisfy 0 <= p < 1")]
    InvalidProbability { p: f64 },
    /// A loss or intermediate scalar came out NaN/Inf.
    #[error("non-finite loss encountered ({what})")]
    NonFiniteLoss { what: String },
}
