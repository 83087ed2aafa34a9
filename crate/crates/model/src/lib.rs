//! Encoder-decoder model over text and point clouds: a distance-biased
//! point encoder, a relative-position text encoder, and a causal decoder
//! that cross-attends to both.

pub mod checkpoint;
pub mod config;
pub mod data;
mod error;
pub mod model;
pub mod sample;
pub mod sse;
pub mod train;

pub use config::{DecoderConfig, EncoderConfig, ModelConfig, SseConfig};
pub use data::{encode_example, encode_text, EncodedExample};
pub use error::ModelError;
pub use model::{build_memory, KvCache, Model, PointInput, PointStates};
pub use sample::{sample_ids, sample_text, Sample, SampleMode, SampleOutput};
pub use sse::{relative_position_bucket, sse_embed};
pub use train::{batch_loss, example_loss, StepStats, TrainConfig, Trainer};
