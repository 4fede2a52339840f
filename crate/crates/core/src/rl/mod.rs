//! Policy and value networks with hand-written backpropagation, advantage
//! estimation, the clipped PPO update and checkpoint serialisation.

mod checkpoint;
mod gae;
mod net;
mod ppo;
mod tensor;

pub use checkpoint::{Checkpoint, CheckpointMeta, ParamEntry, FORMAT_VERSION, MAGIC};
pub use gae::compute_gae;
pub use net::{
    argmax, entropy, log_softmax, sample_categorical, softmax, Architecture, DropoutMasks, Layer, Mode, Network,
    Param, PolicyOutput, PolicyValueNets, Trace,
};
pub use ppo::{
    clipped_surrogate, loss_and_grad, normalize_advantages, ppo_update, Adam, Gradients, LossTerms, LossWeights,
    Sample, SampleMasks, TrainerConfig, UpdateStats, SECTION,
};
pub use tensor::{Scalar, Tensor};

use thiserror::Error;

use crate::sim::ObsMode;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("shape mismatch: expected {expected} elements, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("network expects {expected} observations, got {actual}")]
    ObservationMode { expected: ObsMode, actual: ObsMode },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("empty training batch")]
    EmptyBatch,
    #[error("non-finite loss; update discarded")]
    NonFiniteLoss,
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format {0}")]
    UnsupportedFormat(u16),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint checksum mismatch (stored {stored:08x}, computed {actual:08x})")]
    Checksum { stored: u32, actual: u32 },
    #[error("checkpoint metadata: {0}")]
    Metadata(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
