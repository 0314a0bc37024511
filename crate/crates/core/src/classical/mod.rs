//! Projection solvers for Fourier phase retrieval: Gerchberg–Saxton (error
//! reduction), Fienup's hybrid input-output and Luke's relaxed averaged
//! alternating reflections, with restart selection by measurement residual.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::numerics::{ComplexTensor, Fft2, RandomStream, Tensor};

/// Bins with a magnitude below this get the solve's fallback phase.
pub const ZERO_BIN_THRESHOLD: f64 = 1e-12;

/// Object-domain prior: support mask, nonnegativity and an optional upper bound
/// used inside the iterations. Returned reconstructions are always clamped to
/// `[0, 1]` on the support.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectConstraint {
    h: usize,
    w: usize,
    mask: Vec<bool>,
    upper: Option<f64>,
}

impl ObjectConstraint {
    /// No support restriction.
    pub fn full(h: usize, w: usize) -> Self {
        ObjectConstraint {
            h,
            w,
            mask: vec![true; h * w],
            upper: None,
        }
    }

    /// Support limited to the top-left `sh × sw` corner, matching
    /// [`crate::measurement::zero_pad`].
    pub fn corner(h: usize, w: usize, sh: usize, sw: usize) -> Result<Self> {
        if sh == 0 || sw == 0 || sh > h || sw > w {
            return Err(Error::InvalidArgument(format!(
                "support {sh}x{sw} does not fit in {h}x{w}"
            )));
        }
        let mask = (0..h * w).map(|k| k / w < sh && k % w < sw).collect();
        Ok(ObjectConstraint {
            h,
            w,
            mask,
            upper: None,
        })
    }

    pub fn from_mask(h: usize, w: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != h * w {
            return Err(shape_mismatch(&[h * w], &[mask.len()]));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidArgument("support mask is empty".into()));
        }
        Ok(ObjectConstraint {
            h,
            w,
            mask,
            upper: None,
        })
    }

    /// Also bound pixel values from above inside the iterations.
    pub fn with_upper_bound(mut self, upper: Option<f64>) -> Self {
        self.upper = upper;
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    fn upper(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }

    #[inline]
    fn feasible(&self, i: usize, v: f64) -> bool {
        self.mask[i] && v >= 0.0 && v <= self.upper()
    }

    #[inline]
    fn project_value(&self, i: usize, v: f64) -> f64 {
        if self.mask[i] {
            v.clamp(0.0, self.upper())
        } else {
            0.0
        }
    }

    /// Final-output projection: support, then clamp to `[0, 1]`.
    pub fn project_output(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { v.clamp(0.0, 1.0) } else { 0.0 })
            .collect()
    }
}

/// Fourier-magnitude projector `P_M` for one measurement.
pub struct MagnitudeProjector {
    plan: Arc<Fft2>,
    y: Vec<f64>,
    fallback: Vec<Complex64>,
}

impl MagnitudeProjector {
    /// Draws the unit phases used at zero-magnitude bins from `stream`.
    pub fn new(y: &Tensor, stream: &mut RandomStream) -> Result<Self> {
        let (h, w) = y.dims2()?;
        if let Some(&v) = y.data().iter().find(|&&v| v < 0.0) {
            return Err(Error::NegativeMagnitude(v));
        }
        let fallback = (0..h * w)
            .map(|_| Complex64::from_polar(1.0, 2.0 * PI * stream.uniform()))
            .collect();
        Ok(MagnitudeProjector {
            plan: Fft2::cached(h, w),
            y: y.data().to_vec(),
            fallback,
        })
    }

    /// Replaces the Fourier magnitudes of `x` by `y`, keeping phases; leaves the
    /// complex result in `buf`.
    fn project_complex(&self, x: &[f64], buf: &mut Vec<Complex64>) {
        buf.clear();
        buf.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
        self.plan.forward(buf);
        for ((c, &m), f) in buf.iter_mut().zip(&self.y).zip(&self.fallback) {
            let r = c.norm();
            *c = if r < ZERO_BIN_THRESHOLD { f * m } else { *c * (m / r) };
        }
        self.plan.inverse(buf);
    }

    pub fn project(&self, x: &[f64], out: &mut [f64], buf: &mut Vec<Complex64>) {
        self.project_complex(x, buf);
        for (o, c) in out.iter_mut().zip(buf.iter()) {
            *o = c.re;
        }
    }

    /// `‖|F x| − y‖₂`.
    pub fn residual(&self, x: &[f64], buf: &mut Vec<Complex64>) -> f64 {
        buf.clear();
        buf.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
        self.plan.forward(buf);
        buf.iter()
            .zip(&self.y)
            .map(|(c, &m)| (c.norm() - m) * (c.norm() - m))
            .sum::<f64>()
            .sqrt()
    }
}

/// `P_M(x)`: real part of `idft2(y ⊙ dft2(x)/|dft2(x)|)`, with stream-drawn phases
/// at bins where `|dft2(x)| < 1e-12`.
pub fn magnitude_project(x: &Tensor, y: &Tensor, stream: &mut RandomStream) -> Result<Tensor> {
    if x.shape() != y.shape() {
        return Err(shape_mismatch(y.shape(), x.shape()));
    }
    let p = MagnitudeProjector::new(y, stream)?;
    let mut out = vec![0.0; x.len()];
    p.project(x.data(), &mut out, &mut Vec::new());
    Tensor::new(x.shape(), out)
}

/// [`magnitude_project`] before the real part is taken.
pub fn magnitude_project_complex(
    x: &Tensor,
    y: &Tensor,
    stream: &mut RandomStream,
) -> Result<ComplexTensor> {
    if x.shape() != y.shape() {
        return Err(shape_mismatch(y.shape(), x.shape()));
    }
    let p = MagnitudeProjector::new(y, stream)?;
    let mut buf = Vec::new();
    p.project_complex(x.data(), &mut buf);
    ComplexTensor::new(x.shape(), buf)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case", deny_unknown_fields)]
pub enum Algorithm {
    GerchbergSaxton,
    Hio { beta: f64 },
    Raar { beta: f64 },
}

impl Algorithm {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Algorithm::Hio { beta } if !(beta > 0.0 && beta < 2.0) => Err(
                Error::InvalidArgument(format!("HIO beta {beta} must lie in (0, 2)")),
            ),
            Algorithm::Raar { beta } if !(beta > 0.0 && beta < 1.0) => Err(
                Error::InvalidArgument(format!("RAAR beta {beta} must lie in (0, 1)")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub iters: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub x_hat: Tensor,
    /// `‖|A x_hat| − y‖₂`.
    pub residual: f64,
    pub restart_index: usize,
    /// Residual of the output-projected iterate after every iteration.
    pub residual_trace: Vec<f64>,
}

/// One solve from a uniform random start on the support.
pub fn solve(
    y: &Tensor,
    constraint: &ObjectConstraint,
    config: &SolverConfig,
    stream: &mut RandomStream,
) -> Result<SolveResult> {
    config.algorithm.validate()?;
    if config.iters == 0 {
        return Err(Error::InvalidArgument("iteration count must be >= 1".into()));
    }
    let (h, w) = y.dims2()?;
    if constraint.dims() != (h, w) {
        return Err(shape_mismatch(&[h, w], &[constraint.h, constraint.w]));
    }
    let n = h * w;
    let pm = MagnitudeProjector::new(y, stream)?;
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let u = stream.uniform();
            if constraint.mask[i] {
                u
            } else {
                0.0
            }
        })
        .collect();
    let mut p = vec![0.0; n];
    let mut buf = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(config.iters);
    for _ in 0..config.iters {
        pm.project(&x, &mut p, &mut buf);
        match config.algorithm {
            Algorithm::GerchbergSaxton => {
                for i in 0..n {
                    x[i] = constraint.project_value(i, p[i]);
                }
            }
            Algorithm::Hio { beta } => {
                for i in 0..n {
                    x[i] = if constraint.feasible(i, p[i]) {
                        p[i]
                    } else {
                        x[i] - beta * p[i]
                    };
                }
            }
            Algorithm::Raar { beta } => {
                // x⁺ = β/2 (R_S R_M x + x) + (1 − β) P_M x
                for i in 0..n {
                    let rm = 2.0 * p[i] - x[i];
                    let rs = 2.0 * constraint.project_value(i, rm) - rm;
                    x[i] = 0.5 * beta * (rs + x[i]) + (1.0 - beta) * p[i];
                }
            }
        }
        let out = constraint.project_output(&x);
        trace.push(pm.residual(&out, &mut buf));
    }
    let x_hat = constraint.project_output(&x);
    let residual = *trace.last().expect("at least one iteration");
    Ok(SolveResult {
        x_hat: Tensor::new(&[h, w], x_hat)?,
        residual,
        restart_index: 0,
        residual_trace: trace,
    })
}

pub fn gerchberg_saxton(
    y: &Tensor,
    constraint: &ObjectConstraint,
    iters: usize,
    stream: &mut RandomStream,
) -> Result<SolveResult> {
    let config = SolverConfig {
        algorithm: Algorithm::GerchbergSaxton,
        iters,
    };
    solve(y, constraint, &config, stream)
}

pub fn hio(
    y: &Tensor,
    constraint: &ObjectConstraint,
    beta: f64,
    iters: usize,
    stream: &mut RandomStream,
) -> Result<SolveResult> {
    let config = SolverConfig {
        algorithm: Algorithm::Hio { beta },
        iters,
    };
    solve(y, constraint, &config, stream)
}

pub fn raar(
    y: &Tensor,
    constraint: &ObjectConstraint,
    beta: f64,
    iters: usize,
    stream: &mut RandomStream,
) -> Result<SolveResult> {
    let config = SolverConfig {
        algorithm: Algorithm::Raar { beta },
        iters,
    };
    solve(y, constraint, &config, stream)
}

/// Runs `k` solves on child streams `0..k` of `stream` and keeps the one with
/// the smallest residual (earliest restart on ties).
pub fn best_of_restarts(
    y: &Tensor,
    constraint: &ObjectConstraint,
    config: &SolverConfig,
    k: usize,
    stream: &RandomStream,
) -> Result<SolveResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("restart count must be >= 1".into()));
    }
    let mut best: Option<SolveResult> = None;
    for r in 0..k {
        let mut child = stream.child(r as u64);
        let mut res = solve(y, constraint, config, &mut child)?;
        res.restart_index = r;
        if best.as_ref().map_or(true, |b| res.residual < b.residual) {
            best = Some(res);
        }
    }
    Ok(best.expect("k >= 1"))
}
