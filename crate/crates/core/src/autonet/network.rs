use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, Axis, Zip};

use super::layer::{chain_dims, LayerSpec};
use super::Real;
use crate::error::{Error, Result};
use crate::numerics::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Trainable state of one layer.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams<S> {
    /// `weight` is `in_dim × out_dim`; a batch `x` maps to `x · weight + bias`.
    Dense { weight: Array2<S>, bias: Array1<S> },
    BatchNorm {
        gamma: Array1<S>,
        beta: Array1<S>,
        running_mean: Array1<S>,
        running_var: Array1<S>,
    },
    None,
}

/// Gradients with the same layout as the trainable part of [`LayerParams`].
#[derive(Clone, Debug, PartialEq)]
pub enum LayerGrads<S> {
    Dense { weight: Array2<S>, bias: Array1<S> },
    BatchNorm { gamma: Array1<S>, beta: Array1<S> },
    None,
}

impl<S: Real> LayerGrads<S> {
    pub fn slices(&self) -> Vec<&[S]> {
        match self {
            LayerGrads::Dense { weight, bias } => vec![
                weight.as_slice().expect("contiguous"),
                bias.as_slice().expect("contiguous"),
            ],
            LayerGrads::BatchNorm { gamma, beta } => vec![
                gamma.as_slice().expect("contiguous"),
                beta.as_slice().expect("contiguous"),
            ],
            LayerGrads::None => vec![],
        }
    }
}

pub type Gradients<S> = Vec<LayerGrads<S>>;

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn next_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// Sequential network of [`LayerSpec`] stages.
#[derive(Clone, Debug)]
pub struct NetworkModel<S> {
    specs: Vec<LayerSpec>,
    params: Vec<LayerParams<S>>,
    input_dim: usize,
    output_dim: usize,
    version: u64,
}

enum Cache<S> {
    BatchNorm {
        normalized: Array2<S>,
        inv_std: Array1<S>,
    },
    None,
}

/// Per-layer inputs recorded by a forward pass, needed for the backward pass.
pub struct Activations<S> {
    inputs: Vec<Array2<S>>,
    caches: Vec<Cache<S>>,
    output: Array2<S>,
    mode: Mode,
    version: u64,
}

impl<S: Real> Activations<S> {
    pub fn output(&self) -> &Array2<S> {
        &self.output
    }

    pub fn into_output(self) -> Array2<S> {
        self.output
    }

    /// Input seen by layer `k`.
    pub fn layer_input(&self, k: usize) -> &Array2<S> {
        &self.inputs[k]
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Sign pattern of every piecewise-linear kink input (ReLU / leaky ReLU).
    /// Two passes with equal signatures lie on the same linear piece.
    pub fn kink_signature(&self, specs: &[LayerSpec]) -> Vec<bool> {
        let mut sig = Vec::new();
        for (spec, input) in specs.iter().zip(&self.inputs) {
            if matches!(spec, LayerSpec::Relu | LayerSpec::LeakyRelu { .. }) {
                sig.extend(input.iter().map(|&v| v > S::zero()));
            }
        }
        sig
    }
}

fn sigmoid<S: Real>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

impl<S: Real> NetworkModel<S> {
    /// Kaiming-uniform dense weights `U(±√(6/fan_in))`, zero biases, batchnorm
    /// scale 1 / shift 0 / running mean 0 / running variance 1.
    pub fn init(specs: &[LayerSpec], stream: &mut RandomStream) -> Result<Self> {
        let (input_dim, output_dim) = chain_dims(specs)?;
        let mut params = Vec::with_capacity(specs.len());
        for spec in specs {
            params.push(match *spec {
                LayerSpec::Dense { in_dim, out_dim } => {
                    let bound = (6.0 / in_dim as f64).sqrt();
                    let weight = Array2::from_shape_simple_fn((in_dim, out_dim), || {
                        S::from_f64((2.0 * stream.uniform() - 1.0) * bound)
                    });
                    LayerParams::Dense {
                        weight,
                        bias: Array1::zeros(out_dim),
                    }
                }
                LayerSpec::BatchNorm { dim, .. } => LayerParams::BatchNorm {
                    gamma: Array1::ones(dim),
                    beta: Array1::zeros(dim),
                    running_mean: Array1::zeros(dim),
                    running_var: Array1::ones(dim),
                },
                _ => LayerParams::None,
            });
        }
        Ok(NetworkModel {
            specs: specs.to_vec(),
            params,
            input_dim,
            output_dim,
            version: next_version(),
        })
    }

    /// Builds a model from explicit parameters (used when loading archives).
    pub fn from_parts(specs: Vec<LayerSpec>, params: Vec<LayerParams<S>>) -> Result<Self> {
        let (input_dim, output_dim) = chain_dims(&specs)?;
        if specs.len() != params.len() {
            return Err(Error::InvalidArgument(
                "parameter list does not match layer list".into(),
            ));
        }
        for (k, (spec, p)) in specs.iter().zip(&params).enumerate() {
            let ok = match (spec, p) {
                (LayerSpec::Dense { in_dim, out_dim }, LayerParams::Dense { weight, bias }) => {
                    weight.dim() == (*in_dim, *out_dim) && bias.len() == *out_dim
                }
                (
                    LayerSpec::BatchNorm { dim, .. },
                    LayerParams::BatchNorm {
                        gamma,
                        beta,
                        running_mean,
                        running_var,
                    },
                ) => [gamma, beta, running_mean, running_var]
                    .iter()
                    .all(|a| a.len() == *dim),
                (s, LayerParams::None) => !s.is_parametric(),
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "parameters of layer {k} do not match its spec"
                )));
            }
        }
        Ok(NetworkModel {
            specs,
            params,
            input_dim,
            output_dim,
            version: next_version(),
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[LayerParams<S>] {
        &self.params
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn param_count(&self) -> usize {
        self.specs.iter().map(LayerSpec::param_count).sum()
    }

    /// Identifier of the current parameter state; changes on every mutation.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn touch(&mut self) {
        self.version = next_version();
    }

    /// Mutable views of every trainable tensor, in layer order (weight before bias,
    /// scale before shift).
    pub fn trainable_mut(&mut self) -> Vec<&mut [S]> {
        self.touch();
        let mut out = Vec::new();
        for p in &mut self.params {
            match p {
                LayerParams::Dense { weight, bias } => {
                    out.push(weight.as_slice_mut().expect("contiguous"));
                    out.push(bias.as_slice_mut().expect("contiguous"));
                }
                LayerParams::BatchNorm { gamma, beta, .. } => {
                    out.push(gamma.as_slice_mut().expect("contiguous"));
                    out.push(beta.as_slice_mut().expect("contiguous"));
                }
                LayerParams::None => {}
            }
        }
        out
    }

    pub fn trainable(&self) -> Vec<&[S]> {
        let mut out = Vec::new();
        for p in &self.params {
            match p {
                LayerParams::Dense { weight, bias } => {
                    out.push(weight.as_slice().expect("contiguous"));
                    out.push(bias.as_slice().expect("contiguous"));
                }
                LayerParams::BatchNorm { gamma, beta, .. } => {
                    out.push(gamma.as_slice().expect("contiguous"));
                    out.push(beta.as_slice().expect("contiguous"));
                }
                LayerParams::None => {}
            }
        }
        out
    }

    /// Converts every tensor to another precision.
    pub fn cast<T: Real>(&self) -> NetworkModel<T> {
        let c1 = |a: &Array1<S>| a.mapv(|v| T::from_f64(v.to_f64()));
        let params = self
            .params
            .iter()
            .map(|p| match p {
                LayerParams::Dense { weight, bias } => LayerParams::Dense {
                    weight: weight.mapv(|v| T::from_f64(v.to_f64())),
                    bias: c1(bias),
                },
                LayerParams::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => LayerParams::BatchNorm {
                    gamma: c1(gamma),
                    beta: c1(beta),
                    running_mean: c1(running_mean),
                    running_var: c1(running_var),
                },
                LayerParams::None => LayerParams::None,
            })
            .collect();
        NetworkModel {
            specs: self.specs.clone(),
            params,
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            version: next_version(),
        }
    }

    fn check_input(&self, input: &Array2<S>) -> Result<()> {
        if input.ncols() != self.input_dim {
            return Err(Error::ShapeMismatch {
                expected: vec![input.nrows(), self.input_dim],
                actual: input.shape().to_vec(),
            });
        }
        if input.nrows() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        Ok(())
    }

    /// Forward pass. Train mode normalizes with batch statistics and updates the
    /// running statistics; eval mode uses the running statistics and leaves the
    /// model untouched.
    pub fn forward(&mut self, input: &Array2<S>, mode: Mode) -> Result<Activations<S>> {
        match mode {
            Mode::Eval => self.forward_eval(input),
            Mode::Train => self.forward_train(input),
        }
    }

    pub fn forward_eval(&self, input: &Array2<S>) -> Result<Activations<S>> {
        self.check_input(input)?;
        let mut x = input.as_standard_layout().into_owned();
        let mut inputs = Vec::with_capacity(self.specs.len());
        let mut caches = Vec::with_capacity(self.specs.len());
        for (spec, p) in self.specs.iter().zip(&self.params) {
            let (y, cache) = self.apply_layer(spec, p, &x, None)?;
            inputs.push(std::mem::replace(&mut x, y));
            caches.push(cache);
        }
        Ok(Activations {
            inputs,
            caches,
            output: x,
            mode: Mode::Eval,
            version: self.version,
        })
    }

    pub fn forward_train(&mut self, input: &Array2<S>) -> Result<Activations<S>> {
        self.check_input(input)?;
        let batch = input.nrows();
        if batch < 2 && self.specs.iter().any(|s| matches!(s, LayerSpec::BatchNorm { .. })) {
            return Err(Error::BatchTooSmall);
        }
        let mut x = input.as_standard_layout().into_owned();
        let mut inputs = Vec::with_capacity(self.specs.len());
        let mut caches = Vec::with_capacity(self.specs.len());
        let mut updates = Vec::new();
        for (k, (spec, p)) in self.specs.iter().zip(&self.params).enumerate() {
            let mut stats = None;
            let (y, cache) = self.apply_layer(spec, p, &x, Some(&mut stats))?;
            if let Some(s) = stats {
                updates.push((k, s));
            }
            inputs.push(std::mem::replace(&mut x, y));
            caches.push(cache);
        }
        // Running statistics: exponential average with weight `momentum` on the
        // batch mean and the unbiased batch variance.
        let unbias = S::from_f64(batch as f64 / (batch as f64 - 1.0));
        for (k, (mean, var)) in updates {
            let momentum = match self.specs[k] {
                LayerSpec::BatchNorm { momentum, .. } => S::from_f64(momentum),
                _ => unreachable!(),
            };
            if let LayerParams::BatchNorm {
                running_mean,
                running_var,
                ..
            } = &mut self.params[k]
            {
                let keep = S::one() - momentum;
                Zip::from(running_mean)
                    .and(&mean)
                    .for_each(|r, &m| *r = keep * *r + momentum * m);
                Zip::from(running_var)
                    .and(&var)
                    .for_each(|r, &v| *r = keep * *r + momentum * v * unbias);
            }
        }
        self.touch();
        Ok(Activations {
            inputs,
            caches,
            output: x,
            mode: Mode::Train,
            version: self.version,
        })
    }

    /// Eval-mode output only.
    pub fn predict(&self, input: &Array2<S>) -> Result<Array2<S>> {
        self.check_input(input)?;
        let mut x = input.as_standard_layout().into_owned();
        for (spec, p) in self.specs.iter().zip(&self.params) {
            x = self.apply_layer(spec, p, &x, None)?.0;
        }
        Ok(x)
    }

    #[allow(clippy::type_complexity)]
    fn apply_layer(
        &self,
        spec: &LayerSpec,
        p: &LayerParams<S>,
        x: &Array2<S>,
        batch_stats: Option<&mut Option<(Array1<S>, Array1<S>)>>,
    ) -> Result<(Array2<S>, Cache<S>)> {
        let out = match (spec, p) {
            (LayerSpec::Dense { .. }, LayerParams::Dense { weight, bias }) => {
                (x.dot(weight) + bias, Cache::None)
            }
            (
                LayerSpec::BatchNorm { epsilon, .. },
                LayerParams::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                },
            ) => {
                let eps = S::from_f64(*epsilon);
                let (mean, var) = match batch_stats {
                    Some(slot) => {
                        let n = S::from_usize(x.nrows());
                        let mean = x.sum_axis(Axis(0)) / n;
                        let centered = x - &mean;
                        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
                        *slot = Some((mean.clone(), var.clone()));
                        (mean, var)
                    }
                    None => (running_mean.clone(), running_var.clone()),
                };
                let inv_std = var.mapv(|v| S::one() / (v + eps).sqrt());
                let normalized = (x - &mean) * &inv_std;
                let y = &normalized * gamma + beta;
                (y, Cache::BatchNorm { normalized, inv_std })
            }
            (LayerSpec::Relu, _) => (x.mapv(|v| v.max(S::zero())), Cache::None),
            (LayerSpec::LeakyRelu { slope }, _) => {
                let slope = S::from_f64(*slope);
                (
                    x.mapv(|v| if v > S::zero() { v } else { v * slope }),
                    Cache::None,
                )
            }
            (LayerSpec::Sigmoid, _) => (x.mapv(sigmoid), Cache::None),
            _ => unreachable!("layer parameters out of sync with specs"),
        };
        Ok(out)
    }

    fn check_activations(&self, act: &Activations<S>, grad: &Array2<S>) -> Result<()> {
        if act.version != self.version || act.inputs.len() != self.specs.len() {
            return Err(Error::StaleActivations);
        }
        if grad.dim() != act.output.dim() {
            return Err(Error::ShapeMismatch {
                expected: act.output.shape().to_vec(),
                actual: grad.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Reverse pass: gradients of a scalar loss with respect to every trainable
    /// tensor and to the input, given `∂loss/∂output`.
    pub fn backward(
        &self,
        act: &Activations<S>,
        loss_grad: &Array2<S>,
    ) -> Result<(Gradients<S>, Array2<S>)> {
        self.check_activations(act, loss_grad)?;
        let mut grads: Vec<LayerGrads<S>> = Vec::with_capacity(self.specs.len());
        let mut g = loss_grad.to_owned();
        for k in (0..self.specs.len()).rev() {
            let (dx, pg) = self.backward_layer(k, act, g, true);
            grads.push(pg);
            g = dx;
        }
        grads.reverse();
        Ok((grads, g))
    }

    /// Reverse pass that only propagates to the input (no parameter gradients).
    pub fn backward_input(&self, act: &Activations<S>, loss_grad: &Array2<S>) -> Result<Array2<S>> {
        self.check_activations(act, loss_grad)?;
        let mut g = loss_grad.to_owned();
        for k in (0..self.specs.len()).rev() {
            g = self.backward_layer(k, act, g, false).0;
        }
        Ok(g)
    }

    fn backward_layer(
        &self,
        k: usize,
        act: &Activations<S>,
        g: Array2<S>,
        want_params: bool,
    ) -> (Array2<S>, LayerGrads<S>) {
        let x = &act.inputs[k];
        match (&self.specs[k], &self.params[k]) {
            (LayerSpec::Dense { .. }, LayerParams::Dense { weight, .. }) => {
                let dx = g.dot(&weight.t());
                let pg = if want_params {
                    LayerGrads::Dense {
                        weight: standard(x.t().dot(&g)),
                        bias: g.sum_axis(Axis(0)),
                    }
                } else {
                    LayerGrads::None
                };
                (dx, pg)
            }
            (LayerSpec::BatchNorm { .. }, LayerParams::BatchNorm { gamma, .. }) => {
                let Cache::BatchNorm {
                    normalized,
                    inv_std,
                } = &act.caches[k]
                else {
                    unreachable!("batchnorm layer without cache")
                };
                let pg = if want_params {
                    LayerGrads::BatchNorm {
                        gamma: (&g * normalized).sum_axis(Axis(0)),
                        beta: g.sum_axis(Axis(0)),
                    }
                } else {
                    LayerGrads::None
                };
                let dxhat = &g * gamma;
                let dx = match act.mode {
                    Mode::Eval => dxhat * inv_std,
                    Mode::Train => {
                        let n = S::from_usize(x.nrows());
                        let sum_d = dxhat.sum_axis(Axis(0));
                        let sum_dx = (&dxhat * normalized).sum_axis(Axis(0));
                        let mut dx = dxhat * n - &sum_d - &(normalized * &sum_dx);
                        dx *= &(inv_std / n);
                        dx
                    }
                };
                (dx, pg)
            }
            (LayerSpec::Relu, _) => {
                let mut dx = g;
                Zip::from(&mut dx).and(x).for_each(|d, &v| {
                    if v <= S::zero() {
                        *d = S::zero()
                    }
                });
                (dx, LayerGrads::None)
            }
            (LayerSpec::LeakyRelu { slope }, _) => {
                let slope = S::from_f64(*slope);
                let mut dx = g;
                Zip::from(&mut dx).and(x).for_each(|d, &v| {
                    if v <= S::zero() {
                        *d = *d * slope
                    }
                });
                (dx, LayerGrads::None)
            }
            (LayerSpec::Sigmoid, _) => {
                let mut dx = g;
                Zip::from(&mut dx).and(x).for_each(|d, &v| {
                    let s = sigmoid(v);
                    *d = *d * s * (S::one() - s)
                });
                (dx, LayerGrads::None)
            }
            _ => unreachable!("layer parameters out of sync with specs"),
        }
    }
}

/// Row-major copy when a product came out column-major.
fn standard<S: Real>(a: Array2<S>) -> Array2<S> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Flattens gradients in the order of [`NetworkModel::trainable`].
pub fn grad_slices<S: Real>(grads: &Gradients<S>) -> Vec<&[S]> {
    grads.iter().flat_map(|g| g.slices()).collect()
}
