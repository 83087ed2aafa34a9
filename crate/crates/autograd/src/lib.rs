//! Minimal differentiable tensor substrate: a recording [`Graph`] of 2-D ops,
//! named parameters in a [`ParamStore`], an AdamW optimizer, finite-difference
//! gradient checking and a binary checkpoint format.

pub mod checkpoint;
mod error;
pub mod gradcheck;
mod graph;
pub mod optim;
mod params;
mod tensor;

pub use error::{Result, TensorError};
pub use gradcheck::{grad_check, relative_error, GradCheckOptions, GradCheckReport};
pub use graph::{softmax_in_place, Axis, Graph, Var};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use tensor::Tensor;
