use serde::{Deserialize, Serialize};

use super::{grad_slices, Gradients, NetworkModel, Real};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

/// First/second moment estimates for a list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
    t: u64,
}

impl<S: Real> AdamState<S> {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        AdamState {
            config,
            m: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            t: 0,
        }
    }

    pub fn for_model(config: AdamConfig, model: &NetworkModel<S>) -> Self {
        let sizes: Vec<usize> = model.trainable().iter().map(|s| s.len()).collect();
        Self::new(config, &sizes)
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Negates the first moment of tensor `index` at the given positions; used
    /// when the optimized variable itself is reflected.
    pub fn negate_first_moment(&mut self, index: usize, positions: impl Iterator<Item = usize>) {
        for p in positions {
            self.m[index][p] = -self.m[index][p];
        }
    }

    /// One bias-corrected Adam update of every tensor in `params`.
    pub fn step(&mut self, params: &mut [&mut [S]], grads: &[&[S]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::InvalidArgument(format!(
                "adam: expected {} tensors, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[k].len() || g.len() != self.m[k].len() {
                return Err(Error::ShapeMismatch {
                    expected: vec![self.m[k].len()],
                    actual: vec![p.len(), g.len()],
                });
            }
        }
        self.t += 1;
        let c = self.config;
        let b1 = S::from_f64(c.beta1);
        let b2 = S::from_f64(c.beta2);
        let one_b1 = S::from_f64(1.0 - c.beta1);
        let one_b2 = S::from_f64(1.0 - c.beta2);
        let corr1 = S::from_f64(1.0 / (1.0 - c.beta1.powi(self.t as i32)));
        let corr2 = S::from_f64(1.0 / (1.0 - c.beta2.powi(self.t as i32)));
        let lr = S::from_f64(c.lr);
        let eps = S::from_f64(c.eps);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + one_b1 * gi;
                v[i] = b2 * v[i] + one_b2 * gi * gi;
                let mhat = m[i] * corr1;
                let vhat = v[i] * corr2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Applies one step to every trainable tensor of `model`.
    pub fn step_model(&mut self, model: &mut NetworkModel<S>, grads: &Gradients<S>) -> Result<()> {
        let g = grad_slices(grads);
        let mut p = model.trainable_mut();
        self.step(&mut p, &g)
    }
}
