//! Deterministic mini-batch training with Adam and binary cross-entropy,
//! classification metrics, and self-describing model checkpoints.

mod checkpoint;
mod metrics;
mod train;

pub use checkpoint::{checkpoint_load, checkpoint_save, TrainedModel};
pub use metrics::{evaluate, evaluate_encoded, Confusion, Metrics};
pub use train::{train, EpochLog, TrainConfig};

use thiserror::Error;

use crate::models::ModelError;
use crate::numerics::NumericsError;
use crate::text_repr::TextError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("degenerate input: {what}")]
    Degenerate { what: String },
    #[error("statement `{id}` encodes to zero tokens")]
    EmptyStatement { id: String },
    #[error("epoch {epoch} batch {batch}: {source}")]
    Step {
        epoch: usize,
        batch: usize,
        source: ModelError,
    },
    #[error("checkpoint manifest: {what}")]
    Manifest { what: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
