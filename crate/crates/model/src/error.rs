use molpc_autograd::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("point feature `{0}` is not in the vocabulary")]
    UnknownFeatureToken(String),
    #[error("token id {0} outside the vocabulary")]
    TokenOutOfRange(usize),
    #[error("encoder memory is empty: no input tokens and no points")]
    EmptyMemory,
    #[error("target has {len} tokens, limit is {max}")]
    TargetTooLong { len: usize, max: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite loss {loss} at step {step}")]
    NonFiniteLoss { step: usize, loss: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
