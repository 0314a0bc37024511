//! Minimal dense-network engine: sequential layers, manual reverse mode, Adam.
//!
//! Training runs in `f32`; gradient checks and the reference paths run in `f64`.
//! Both go through the same generic code.

mod adam;
mod gradcheck;
mod layer;
mod loss;
mod network;

use std::fmt::{Debug, Display};

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckConfig};
pub use layer::{chain_dims, mlp_bn_relu_sigmoid, LayerSpec, BATCHNORM_EPSILON, BATCHNORM_MOMENTUM};
pub use loss::{Loss, MeanAbsoluteError, SquaredError};
pub use network::{
    grad_slices, Activations, Gradients, LayerGrads, LayerParams, Mode, NetworkModel,
};

/// Scalar type a network can run in.
pub trait Real:
    num_traits::Float
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_usize(v: usize) -> Self {
        Self::from_f64(v as f64)
    }
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}
