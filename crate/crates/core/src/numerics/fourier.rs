use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{shape_mismatch, Result};
use crate::numerics::{ComplexTensor, Tensor};

/// Orthonormal 2-D DFT plan for one `h × w` frame.
///
/// The forward transform is `X[k, l] = (hw)^{-1/2} Σ x[i, j] e^{-2πi(ki/h + lj/w)}`;
/// the inverse flips the sign of the exponent, so the pair is unitary.
pub struct Fft2 {
    h: usize,
    w: usize,
    fwd_rows: Arc<dyn Fft<f64>>,
    fwd_cols: Arc<dyn Fft<f64>>,
    inv_rows: Arc<dyn Fft<f64>>,
    inv_cols: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<HashMap<(usize, usize), Arc<Fft2>>> = RefCell::new(HashMap::new());
    static WORK: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

impl Fft2 {
    pub fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            h,
            w,
            fwd_rows: planner.plan_fft_forward(w),
            fwd_cols: planner.plan_fft_forward(h),
            inv_rows: planner.plan_fft_inverse(w),
            inv_cols: planner.plan_fft_inverse(h),
        }
    }

    /// Shared per-thread plan for `h × w`.
    pub fn cached(h: usize, w: usize) -> Arc<Fft2> {
        PLANS.with(|p| {
            p.borrow_mut()
                .entry((h, w))
                .or_insert_with(|| Arc::new(Fft2::new(h, w)))
                .clone()
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.fwd_rows, &self.fwd_cols);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.inv_rows, &self.inv_cols);
    }

    fn run(&self, buf: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let (h, w) = (self.h, self.w);
        assert_eq!(buf.len(), h * w, "buffer does not match the planned frame");
        WORK.with(|work| {
            let (tr, scratch) = &mut *work.borrow_mut();
            let need = rows
                .get_inplace_scratch_len()
                .max(cols.get_inplace_scratch_len());
            if scratch.len() < need {
                scratch.resize(need, Complex64::new(0.0, 0.0));
            }
            if w > 1 {
                rows.process_with_scratch(buf, &mut scratch[..rows.get_inplace_scratch_len()]);
            }
            if h > 1 {
                tr.resize(h * w, Complex64::new(0.0, 0.0));
                for i in 0..h {
                    for j in 0..w {
                        tr[j * h + i] = buf[i * w + j];
                    }
                }
                cols.process_with_scratch(tr, &mut scratch[..cols.get_inplace_scratch_len()]);
                for j in 0..w {
                    for i in 0..h {
                        buf[i * w + j] = tr[j * h + i];
                    }
                }
            }
        });
        let scale = 1.0 / ((h * w) as f64).sqrt();
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }
}

/// Orthonormal 2-D DFT of a real `h × w` tensor.
pub fn dft2(x: &Tensor) -> Result<ComplexTensor> {
    let (h, w) = x.dims2()?;
    let mut buf: Vec<Complex64> = x.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft2::cached(h, w).forward(&mut buf);
    ComplexTensor::new(&[h, w], buf)
}

/// Complex-input forward transform.
pub fn dft2_complex(s: &ComplexTensor) -> Result<ComplexTensor> {
    let (h, w) = s.dims2()?;
    let mut buf = s.data().to_vec();
    Fft2::cached(h, w).forward(&mut buf);
    ComplexTensor::new(&[h, w], buf)
}

/// Inverse of [`dft2`].
pub fn idft2(s: &ComplexTensor) -> Result<ComplexTensor> {
    let (h, w) = s.dims2()?;
    let mut buf = s.data().to_vec();
    Fft2::cached(h, w).inverse(&mut buf);
    ComplexTensor::new(&[h, w], buf)
}

fn dft1_direct(input: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = input.len();
    (0..n)
        .map(|k| {
            input
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    // Reduce the index product first so the phase stays exact for large k·i.
                    let angle = sign * 2.0 * PI * ((k * i) % n) as f64 / n as f64;
                    v * Complex64::new(angle.cos(), angle.sin())
                })
                .sum()
        })
        .collect()
}

fn dft2_direct_impl(s: &ComplexTensor, sign: f64) -> Result<ComplexTensor> {
    let (h, w) = s.dims2()?;
    let mut buf = s.data().to_vec();
    for i in 0..h {
        let row = dft1_direct(&buf[i * w..(i + 1) * w], sign);
        buf[i * w..(i + 1) * w].copy_from_slice(&row);
    }
    for j in 0..w {
        let col: Vec<Complex64> = (0..h).map(|i| buf[i * w + j]).collect();
        for (i, v) in dft1_direct(&col, sign).into_iter().enumerate() {
            buf[i * w + j] = v;
        }
    }
    let scale = 1.0 / ((h * w) as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= scale);
    ComplexTensor::new(&[h, w], buf)
}

/// Direct `O(n²)`-per-axis evaluation of [`dft2`]. Slow; kept as the reference
/// the fast path is checked against.
pub fn dft2_direct(x: &Tensor) -> Result<ComplexTensor> {
    dft2_direct_impl(&ComplexTensor::from_real(x), -1.0)
}

/// Direct evaluation of [`idft2`].
pub fn idft2_direct(s: &ComplexTensor) -> Result<ComplexTensor> {
    dft2_direct_impl(s, 1.0)
}

/// `out[s, t] = Σ_{i,j} a[i, j] · b[(i + s) mod h, (j + t) mod w]`, evaluated in
/// the frequency domain.
pub fn circular_cross_correlate(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (h, w) = a.dims2()?;
    if a.shape() != b.shape() {
        return Err(shape_mismatch(a.shape(), b.shape()));
    }
    let plan = Fft2::cached(h, w);
    let mut fa: Vec<Complex64> = a.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut fb: Vec<Complex64> = b.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut fa);
    plan.forward(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = x.conj() * y;
    }
    plan.inverse(&mut fa);
    // Each orthonormal transform contributes (hw)^{-1/2}; the correlation needs
    // one net factor of (hw)^{1/2} back.
    let scale = ((h * w) as f64).sqrt();
    Tensor::new(&[h, w], fa.iter().map(|c| c.re * scale).collect())
}

/// Direct `O((hw)²)` evaluation of [`circular_cross_correlate`].
pub fn circular_cross_correlate_direct(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (h, w) = a.dims2()?;
    if a.shape() != b.shape() {
        return Err(shape_mismatch(a.shape(), b.shape()));
    }
    Tensor::from_fn2(h, w, |s, t| {
        let mut acc = 0.0;
        for i in 0..h {
            for j in 0..w {
                acc += a.at2(i, j) * b.at2((i + s) % h, (j + t) % w);
            }
        }
        acc
    })
}
