use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BATCHNORM_MOMENTUM: f64 = 0.1;
pub const BATCHNORM_EPSILON: f64 = 1e-5;

/// One stage of a sequential dense network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
    BatchNorm {
        dim: usize,
        momentum: f64,
        epsilon: f64,
    },
    Relu,
    LeakyRelu {
        slope: f64,
    },
    Sigmoid,
}

impl LayerSpec {
    pub fn dense(in_dim: usize, out_dim: usize) -> Self {
        LayerSpec::Dense { in_dim, out_dim }
    }

    pub fn batchnorm(dim: usize) -> Self {
        LayerSpec::BatchNorm {
            dim,
            momentum: BATCHNORM_MOMENTUM,
            epsilon: BATCHNORM_EPSILON,
        }
    }

    pub fn leaky_relu(slope: f64) -> Self {
        LayerSpec::LeakyRelu { slope }
    }

    /// Number of trainable scalars (running statistics excluded).
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { in_dim, out_dim } => in_dim * out_dim + out_dim,
            LayerSpec::BatchNorm { dim, .. } => 2 * dim,
            _ => 0,
        }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::BatchNorm { .. })
    }
}

/// Validates the width chain and returns `(input_dim, output_dim)`.
pub fn chain_dims(specs: &[LayerSpec]) -> Result<(usize, usize)> {
    let mut width: Option<usize> = None;
    let mut input = None;
    for (index, spec) in specs.iter().enumerate() {
        let (expects, produces) = match *spec {
            LayerSpec::Dense { in_dim, out_dim } => {
                if in_dim == 0 || out_dim == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "layer {index}: dense dimensions must be positive"
                    )));
                }
                (Some(in_dim), Some(out_dim))
            }
            LayerSpec::BatchNorm {
                dim,
                momentum,
                epsilon,
            } => {
                if dim == 0 || !(0.0..=1.0).contains(&momentum) || epsilon <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "layer {index}: invalid batchnorm settings"
                    )));
                }
                (Some(dim), Some(dim))
            }
            LayerSpec::LeakyRelu { slope } if !slope.is_finite() => {
                return Err(Error::InvalidArgument(format!(
                    "layer {index}: leaky-ReLU slope must be finite"
                )));
            }
            _ => (None, None),
        };
        if let Some(e) = expects {
            match width {
                Some(w) if w != e => {
                    return Err(Error::BrokenChain {
                        index,
                        expected: w,
                        found: e,
                    })
                }
                None => input = Some(e),
                _ => {}
            }
        }
        if produces.is_some() {
            width = produces;
        }
    }
    match (input, width) {
        (Some(i), Some(o)) => Ok((i, o)),
        _ => Err(Error::InvalidArgument(
            "network needs at least one dense or batchnorm layer".into(),
        )),
    }
}

/// `dims[0] → dims[1] → …` dense stack with batchnorm + ReLU between dense
/// layers and a sigmoid head.
pub fn mlp_bn_relu_sigmoid(dims: &[usize]) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for (k, pair) in dims.windows(2).enumerate() {
        specs.push(LayerSpec::dense(pair[0], pair[1]));
        if k + 2 < dims.len() {
            specs.push(LayerSpec::batchnorm(pair[1]));
            specs.push(LayerSpec::Relu);
        }
    }
    specs.push(LayerSpec::Sigmoid);
    specs
}
