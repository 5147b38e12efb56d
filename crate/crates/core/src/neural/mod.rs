//! A small differentiable layer library: forward passes, analytic gradients
//! and Adam, generic over `f32` and `f64`.
//!
//! Sequences are `[time, channels]` per sample; batches add a leading axis.
//! Convolution is cross-correlation (kernels are not flipped).

mod adam;
mod gradcheck;
mod graph;
mod layers;
mod ops;
mod recurrent;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{check_layer, check_model, gradient_check, relative_error};
pub use graph::{ForwardMode, ModelGraph, ModelManifest, SampleGrads};
pub use layers::{Cache, Layer, LayerSpec, Padding};
pub use ops::{cross_entropy, dot, softmax, softmax_cross_entropy};
pub use recurrent::LstmState;
pub use tensor::Tensor;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use thiserror::Error;

pub trait Real: Float + FromPrimitive + NumAssign + Sum + Debug + Default + Send + Sync + 'static {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable literal")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("input of length {got} is too short; this stack needs at least {min_len} time steps")]
    TooShort { got: usize, min_len: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite values after {0}")]
    NonFinite(String),
    #[error("model file: {0}")]
    Io(String),
}
