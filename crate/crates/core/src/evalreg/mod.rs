//! Evaluation up to the trivial ambiguities of Fourier magnitudes: circular
//! shifts and 180° rotation are removed by cross-correlation registration before
//! MSE, MAE and SSIM are computed.

use serde::Serialize;

use crate::error::{shape_mismatch, Error, Result};
use crate::numerics::{circular_cross_correlate, circular_shift, point_reflect, Tensor};

/// Relative slack used when comparing correlation peaks and candidate errors.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Registration {
    pub delta_s: usize,
    pub delta_t: usize,
    pub rotated: bool,
    #[serde(skip)]
    pub aligned: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    pub mse: f64,
    pub mae: f64,
    pub ssim: f64,
    #[serde(flatten)]
    pub registration: Registration,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub ssim: f64,
}

/// Undoes a shift of `c` by `(s, t)`: `out[i,j] = c[(i+s) % h, (j+t) % w]`.
fn unshift(c: &Tensor, s: usize, t: usize) -> Result<Tensor> {
    let (h, w) = c.dims2()?;
    circular_shift(c, (h - s) % h, (w - t) % w)
}

/// Correlation argmax, preferring the lexicographically smallest shift among
/// peaks within tolerance.
fn best_shift(x: &Tensor, c: &Tensor) -> Result<(usize, usize)> {
    let (_, w) = c.dims2()?;
    let corr = circular_cross_correlate(x, c)?;
    let peak = corr.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let slack = TIE_TOLERANCE * peak.abs().max(1.0);
    let k = corr
        .data()
        .iter()
        .position(|&v| v >= peak - slack)
        .expect("non-empty correlation");
    Ok((k / w, k % w))
}

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(shape_mismatch(a.shape(), b.shape()));
    }
    let n = a.len() as f64;
    Ok(a.data().iter().zip(b.data()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / n)
}

pub fn mae(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(shape_mismatch(a.shape(), b.shape()));
    }
    let n = a.len() as f64;
    Ok(a.data().iter().zip(b.data()).map(|(p, q)| (p - q).abs()).sum::<f64>() / n)
}

/// Aligns `x_hat` to `x` over all circular shifts with and without a 180°
/// rotation. `aligned[i,j] = c[(i+Δs) % h, (j+Δt) % w]` where `c` is `x_hat`
/// or its point reflection.
pub fn register(x: &Tensor, x_hat: &Tensor) -> Result<Registration> {
    if x.shape() != x_hat.shape() {
        return Err(shape_mismatch(x.shape(), x_hat.shape()));
    }
    x.dims2()?;
    let mut best: Option<(f64, Registration)> = None;
    for rotated in [false, true] {
        let c = if rotated {
            point_reflect(x_hat)?
        } else {
            x_hat.clone()
        };
        let (s, t) = best_shift(x, &c)?;
        let aligned = unshift(&c, s, t)?;
        let err = mse(x, &aligned)?;
        let better = match &best {
            None => true,
            Some((e, _)) => err < e - TIE_TOLERANCE * e.max(1e-300),
        };
        if better {
            best = Some((
                err,
                Registration {
                    delta_s: s,
                    delta_t: t,
                    rotated,
                    aligned,
                },
            ));
        }
    }
    Ok(best.expect("two candidates").1)
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let g: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = g.iter().sum();
    g.into_iter().map(|v| v / sum).collect()
}

/// Separable valid-mode filtering with a normalized 1-D kernel on both axes.
fn filter_valid(x: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            rows[i * ow + j] = (0..n).map(|d| k[d] * x[i * w + j + d]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..n).map(|d| k[d] * rows[(i + d) * ow + j]).sum();
        }
    }
    out
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Window side used for an `h × w` image: 11, or the largest odd size that fits.
pub fn ssim_window_size(h: usize, w: usize) -> usize {
    let m = h.min(w).min(SSIM_WINDOW);
    if m % 2 == 0 {
        m - 1
    } else {
        m
    }
}

/// Mean local SSIM over all fully contained Gaussian windows, dynamic range 1.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(shape_mismatch(a.shape(), b.shape()));
    }
    let (h, w) = a.dims2()?;
    if h == 0 || w == 0 {
        return Err(Error::InvalidShape(vec![h, w]));
    }
    let k = gaussian_window(ssim_window_size(h, w), SSIM_SIGMA);
    let (x, y) = (a.data(), b.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
    let mx = filter_valid(x, h, w, &k);
    let my = filter_valid(y, h, w, &k);
    let sxx = filter_valid(&xx, h, w, &k);
    let syy = filter_valid(&yy, h, w, &k);
    let sxy = filter_valid(&xy, h, w, &k);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

pub fn metrics(x: &Tensor, aligned: &Tensor) -> Result<Metrics> {
    Ok(Metrics {
        mse: mse(x, aligned)?,
        mae: mae(x, aligned)?,
        ssim: ssim(x, aligned)?,
    })
}

/// Registers, then scores the aligned reconstruction.
pub fn evaluate(x: &Tensor, x_hat: &Tensor) -> Result<EvalRecord> {
    let registration = register(x, x_hat)?;
    let m = metrics(x, &registration.aligned)?;
    Ok(EvalRecord {
        mse: m.mse,
        mae: m.mae,
        ssim: m.ssim,
        registration,
    })
}

/// Top-left `sh × sw` block.
pub fn crop(x: &Tensor, sh: usize, sw: usize) -> Result<Tensor> {
    let (h, w) = x.dims2()?;
    if sh == 0 || sw == 0 || sh > h || sw > w {
        return Err(Error::InvalidArgument(format!(
            "crop {sh}x{sw} does not fit in {h}x{w}"
        )));
    }
    Tensor::from_fn2(sh, sw, |i, j| x.at2(i, j))
}

/// For zero-padded measurements: registers on the full frame, then scores the
/// top-left `sh × sw` object region.
pub fn evaluate_cropped(x: &Tensor, x_hat: &Tensor, sh: usize, sw: usize) -> Result<EvalRecord> {
    let registration = register(x, x_hat)?;
    let m = metrics(&crop(x, sh, sw)?, &crop(&registration.aligned, sh, sw)?)?;
    Ok(EvalRecord {
        mse: m.mse,
        mae: m.mae,
        ssim: m.ssim,
        registration,
    })
}

/// Normalized histogram of forward-difference gradient magnitudes over the
/// `(h−1) × (w−1)` interior, `bins` equal bins on `[0, √2]`; larger values go
/// to the last bin.
pub fn gradient_magnitude_histogram(x: &Tensor, bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(Error::InvalidArgument("need at least 2 bins".into()));
    }
    let (h, w) = x.dims2()?;
    if h < 2 || w < 2 {
        return Err(Error::InvalidShape(vec![h, w]));
    }
    let top = std::f64::consts::SQRT_2;
    let mut hist = vec![0.0; bins];
    for i in 0..h - 1 {
        for j in 0..w - 1 {
            let dh = x.at2(i + 1, j) - x.at2(i, j);
            let dw = x.at2(i, j + 1) - x.at2(i, j);
            let g = (dh * dh + dw * dw).sqrt();
            let b = ((g / top) * bins as f64) as usize;
            hist[b.min(bins - 1)] += 1.0;
        }
    }
    let n = ((h - 1) * (w - 1)) as f64;
    hist.iter_mut().for_each(|v| *v /= n);
    Ok(hist)
}
