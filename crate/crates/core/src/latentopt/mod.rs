//! Test-time latent search: fit `z` so that `|A G(z)|` (DPR) or
//! `|A G(z, y)|` (PRCGAN*) matches the measurement, with Adam, restarts and
//! best-ever retention.

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::autonet::{AdamConfig, AdamState, NetworkModel, Real};
use crate::error::{Error, Result};
use crate::measurement::MeasurementOperator;
use crate::numerics::{RandomStream, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentOptConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub restarts: usize,
    /// Compare `z` with `−z` every this many steps and keep the better one.
    #[serde(default)]
    pub sign_flip_period: Option<usize>,
}

impl LatentOptConfig {
    /// 10 000 steps at rate 0.1, three restarts, sign check every 100 steps.
    pub fn dpr() -> Self {
        LatentOptConfig {
            steps: 10_000,
            learning_rate: 0.1,
            restarts: 3,
            sign_flip_period: Some(100),
        }
    }

    /// Same budget with the larger rate 1.0 and no sign handling.
    pub fn prcgan() -> Self {
        LatentOptConfig {
            steps: 10_000,
            learning_rate: 1.0,
            restarts: 3,
            sign_flip_period: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0
            || !(self.learning_rate > 0.0 && self.learning_rate.is_finite())
            || self.sign_flip_period == Some(0)
        {
            return Err(Error::Config(format!("invalid latent optimization config {self:?}")));
        }
        Ok(())
    }
}

/// One measurement to invert, with the stream its restarts draw from
/// (restart `r` uses child `r`).
#[derive(Clone, Debug)]
pub struct LatentProblem {
    pub y: Tensor,
    pub stream: RandomStream,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineResult {
    pub x_hat: Tensor,
    pub z_star: Vec<f64>,
    /// Residuals are `‖y − |A x|‖₂` of the generated image.
    pub initial_residual: f64,
    pub final_residual: f64,
    /// Best residual so far, at `z₀` and after every step.
    pub residual_trace: Vec<f64>,
    pub restart_index: usize,
}

/// The generator seen by the optimizer: `x = G(z)` or `x = G(z, y)`.
#[derive(Clone, Copy)]
pub enum Generator<'a, S> {
    Decoder(&'a NetworkModel<S>),
    Conditional(&'a NetworkModel<S>),
}

impl<S: Real> Generator<'_, S> {
    fn net(&self) -> &NetworkModel<S> {
        match self {
            Generator::Decoder(n) | Generator::Conditional(n) => n,
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Generator::Decoder(n) => n.input_dim(),
            Generator::Conditional(n) => n.input_dim() / 2,
        }
    }

    fn input(&self, z: &Array2<S>, cond: &Array2<S>) -> Array2<S> {
        match self {
            Generator::Decoder(_) => z.clone(),
            Generator::Conditional(_) => {
                let c = ndarray::concatenate(Axis(1), &[z.view(), cond.view()])
                    .expect("equal row counts");
                c.as_standard_layout().into_owned()
            }
        }
    }
}

/// Per row: `‖y − |A G(z)|‖²`, its gradient in `z`, and the generated rows.
pub fn objective_and_gradient<S: Real>(
    gen: Generator<'_, S>,
    op: &MeasurementOperator,
    y: &Array2<f64>,
    cond: &Array2<S>,
    z: &Array2<S>,
) -> Result<(Vec<f64>, Array2<S>, Array2<S>)> {
    let act = gen.net().forward_eval(&gen.input(z, cond))?;
    let x = act.output().mapv(Real::to_f64);
    let (loss, gx) = op.squared_residual_batch(&x, y)?;
    let gin = gen.net().backward_input(&act, &gx.mapv(S::from_f64))?;
    let gz = gin.slice(s![.., ..gen.latent_dim()]).to_owned();
    Ok((loss, gz, act.into_output()))
}

fn objective<S: Real>(
    gen: Generator<'_, S>,
    op: &MeasurementOperator,
    y: &Array2<f64>,
    cond: &Array2<S>,
    z: &Array2<S>,
) -> Result<(Vec<f64>, Array2<S>)> {
    let out = gen.net().predict(&gen.input(z, cond))?;
    let (loss, _) = op.squared_residual_batch(&out.mapv(Real::to_f64), y)?;
    Ok((loss, out))
}

/// Flattened operator input of a measurement.
fn measurement_row(op: &MeasurementOperator, y: &Tensor) -> Result<Vec<f64>> {
    if y.len() != op.output_dim() {
        return Err(Error::ShapeMismatch {
            expected: vec![op.output_dim()],
            actual: y.shape().to_vec(),
        });
    }
    Ok(y.data().to_vec())
}

struct Track<S> {
    best: Vec<f64>,
    best_z: Array2<S>,
    best_x: Array2<S>,
    initial: Vec<f64>,
    traces: Vec<Vec<f64>>,
}

impl<S: Real> Track<S> {
    fn offer(&mut self, loss: &[f64], z: &Array2<S>, x: &Array2<S>) {
        for (r, &l) in loss.iter().enumerate() {
            if l < self.best[r] {
                self.best[r] = l;
                self.best_z.row_mut(r).assign(&z.row(r));
                self.best_x.row_mut(r).assign(&x.row(r));
            }
        }
    }

    fn record(&mut self) {
        for (t, &b) in self.traces.iter_mut().zip(&self.best) {
            t.push(b.max(0.0).sqrt());
        }
    }
}

/// Solves every problem jointly: all (problem, restart) pairs form one batch.
pub fn refine_batch<S: Real>(
    gen: Generator<'_, S>,
    op: &MeasurementOperator,
    problems: &[LatentProblem],
    cfg: &LatentOptConfig,
) -> Result<Vec<RefineResult>> {
    cfg.validate()?;
    let k = gen.latent_dim();
    if let Generator::Conditional(_) = gen {
        if k != op.output_dim() {
            return Err(Error::ShapeMismatch {
                expected: vec![op.output_dim()],
                actual: vec![k],
            });
        }
    }
    if gen.net().output_dim() != op.input_dim() {
        return Err(Error::ShapeMismatch {
            expected: vec![op.input_dim()],
            actual: vec![gen.net().output_dim()],
        });
    }
    let rows = problems.len() * cfg.restarts;
    if rows == 0 {
        return Ok(Vec::new());
    }
    let m = op.output_dim();
    let mut y = Array2::zeros((rows, m));
    let mut z = Array2::zeros((rows, k));
    for (p, prob) in problems.iter().enumerate() {
        let yr = measurement_row(op, &prob.y)?;
        for r in 0..cfg.restarts {
            let row = p * cfg.restarts + r;
            y.row_mut(row).assign(&ndarray::ArrayView1::from(&yr));
            let mut st = prob.stream.child(r as u64);
            for v in z.row_mut(row).iter_mut() {
                *v = S::from_f64(st.standard_normal());
            }
        }
    }
    let cond = y.mapv(S::from_f64);

    let (loss0, x0) = objective(gen, op, &y, &cond, &z)?;
    let mut track = Track {
        best: loss0.clone(),
        best_z: z.clone(),
        best_x: x0,
        initial: loss0,
        traces: vec![Vec::with_capacity(cfg.steps + 1); rows],
    };
    track.record();

    let adam_cfg = AdamConfig {
        lr: cfg.learning_rate,
        ..Default::default()
    };
    let mut adam = AdamState::<S>::new(adam_cfg, &[rows * k]);
    for step in 0..cfg.steps {
        let (loss, gz, x) = objective_and_gradient(gen, op, &y, &cond, &z)?;
        if step > 0 {
            track.offer(&loss, &z, &x);
        }
        {
            let zs = z.as_slice_mut().expect("contiguous");
            adam.step(&mut [zs], &[gz.as_slice().expect("contiguous")])?;
        }
        if let Some(period) = cfg.sign_flip_period {
            if (step + 1) % period == 0 {
                let (l_pos, x_pos) = objective(gen, op, &y, &cond, &z)?;
                let neg = z.mapv(|v| -v);
                let (l_neg, x_neg) = objective(gen, op, &y, &cond, &neg)?;
                track.offer(&l_neg, &neg, &x_neg);
                track.offer(&l_pos, &z, &x_pos);
                for r in 0..rows {
                    if l_neg[r] < l_pos[r] {
                        z.row_mut(r).assign(&neg.row(r));
                        adam.negate_first_moment(0, r * k..(r + 1) * k);
                    }
                }
            }
        }
        if step + 1 == cfg.steps {
            let (loss, x) = objective(gen, op, &y, &cond, &z)?;
            track.offer(&loss, &z, &x);
        }
        track.record();
    }

    let mut out = Vec::with_capacity(problems.len());
    for p in 0..problems.len() {
        let base = p * cfg.restarts;
        let mut pick = base;
        for row in base..base + cfg.restarts {
            if track.best[row] < track.best[pick] {
                pick = row;
            }
        }
        let x: Vec<f64> = track.best_x.row(pick).iter().map(|&v| Real::to_f64(v)).collect();
        let side = (x.len() as f64).sqrt() as usize;
        let x_hat = if side * side == x.len() {
            Tensor::new(&[side, side], x)?
        } else {
            Tensor::new(&[x.len()], x)?
        };
        out.push(RefineResult {
            x_hat,
            z_star: track.best_z.row(pick).iter().map(|&v| Real::to_f64(v)).collect(),
            initial_residual: track.initial[pick].max(0.0).sqrt(),
            final_residual: track.best[pick].max(0.0).sqrt(),
            residual_trace: std::mem::take(&mut track.traces[pick]),
            restart_index: pick - base,
        });
    }
    Ok(out)
}

/// DPR: `z* = argmin ‖y − |A G(z)|‖²`, `x̂ = G(z*)`.
pub fn dpr_solve<S: Real>(
    decoder: &NetworkModel<S>,
    op: &MeasurementOperator,
    problem: &LatentProblem,
    cfg: &LatentOptConfig,
) -> Result<RefineResult> {
    let mut r = refine_batch(Generator::Decoder(decoder), op, std::slice::from_ref(problem), cfg)?;
    Ok(r.pop().expect("one problem"))
}

/// PRCGAN*: `z* = argmin ‖y − |A G(z, y)|‖²`, `x̂ = G(z*, y)`, generator in eval mode.
pub fn prcgan_refine<S: Real>(
    generator: &NetworkModel<S>,
    op: &MeasurementOperator,
    problem: &LatentProblem,
    cfg: &LatentOptConfig,
) -> Result<RefineResult> {
    let mut r = refine_batch(
        Generator::Conditional(generator),
        op,
        std::slice::from_ref(problem),
        cfg,
    )?;
    Ok(r.pop().expect("one problem"))
}
