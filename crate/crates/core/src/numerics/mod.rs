//! Dense float64 tensors with reverse-mode automatic differentiation,
//! the Adam optimizer, binary cross-entropy, and the checkpoint container.

pub mod adam;
pub mod checkpoint;
mod tape;
mod tensor;

pub use adam::{AdamHyper, AdamState};
pub use tape::{Gradients, Tape, ValueId};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape {shape:?} does not fit {len} data elements")]
    ShapeDataMismatch { shape: Vec<usize>, len: usize },
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: produced a non-finite value")]
    NumericFault { op: &'static str },
    #[error("gather index {index} out of range for {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("degenerate input: {what}")]
    DegenerateInput { what: &'static str },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("value id {id} is not on this tape")]
    UnknownValue { id: usize },
    #[error("checkpoint error: {what}")]
    Checkpoint { what: String },
    #[error("checkpoint format error: {what}")]
    CheckpointFormat { what: String },
    #[error("checkpoint truncated: {what}")]
    CheckpointTruncated { what: String },
}

/// Standalone binary cross-entropy, matching the tape op bit for bit.
/// The prediction is clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(prediction: f64, target: f64) -> f64 {
    const EPS: f64 = 1e-7;
    let p = prediction.clamp(EPS, 1.0 - EPS);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}
