//! Dual projection model trained with a symmetric contrastive loss.
//!
//! Text and audio feature vectors each pass through their own projection
//! head into a shared, L2-normalised embedding space. Matching pairs in a
//! batch are pulled together and the other `N - 1` items serve as negatives.
//! Gradients are derived by hand and everything runs in `f64`.

mod checkpoint;
mod loss;
mod model;
mod optim;
mod train;

use thiserror::Error;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_expecting,
    save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use loss::{contrastive_loss, cosine_matrix, gradients, mean_loss, symmetric_cross_entropy, Batch, LossOutput};
pub use model::{
    embed, BlockKind, Dense, Head, ModelDims, ModelParams, Side, MAX_LOG_TEMPERATURE,
    MIN_LOG_TEMPERATURE, NORM_EPS,
};
pub use optim::{Optimizer, OptimizerConfig};
pub use train::{train, write_loss_csv, LossRecord, PairedFeatures, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum DuoencError {
    #[error("{side:?} features have dimension {actual}, model expects {expected}")]
    DimensionMismatch { side: Side, expected: usize, actual: usize },
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("loss is not finite ({0}); training diverged")]
    NonFiniteLoss(f64),
    #[error("gradient is not finite")]
    NonFiniteGradient,
    #[error("need at least {needed} training pairs, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("no features for {0:?}")]
    MissingFeatures(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint version {found}, expected {expected}")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("checkpoint dimensions {found:?} do not match expected {expected:?}")]
    CheckpointDims { expected: ModelDims, found: ModelDims },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
