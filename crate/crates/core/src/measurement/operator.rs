use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayViewMut1};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Fft2, RandomStream, Tensor};

/// Stream id reserved for drawing Gaussian measurement matrices.
const GAUSSIAN_MATRIX_STREAM: u64 = 0x4741_5553;

/// Serializable identity of a measurement operator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorDescriptor {
    /// Orthonormal 2-D DFT of an `h × w` image.
    Fourier2d { h: usize, w: usize },
    /// Real `m × n` matrix with i.i.d. `N(0, 1/m)` entries drawn from `seed`.
    Gaussian { m: usize, n: usize, seed: u64 },
}

impl OperatorDescriptor {
    pub fn input_dim(&self) -> usize {
        match *self {
            OperatorDescriptor::Fourier2d { h, w } => h * w,
            OperatorDescriptor::Gaussian { n, .. } => n,
        }
    }

    pub fn output_dim(&self) -> usize {
        match *self {
            OperatorDescriptor::Fourier2d { h, w } => h * w,
            OperatorDescriptor::Gaussian { m, .. } => m,
        }
    }

    /// Short stable tag used in file names and report rows.
    pub fn tag(&self) -> String {
        match *self {
            OperatorDescriptor::Fourier2d { h, w } => format!("fourier{h}x{w}"),
            OperatorDescriptor::Gaussian { m, n, seed } => format!("gaussian{m}x{n}s{seed}"),
        }
    }

    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("descriptor serializes")
    }
}

impl fmt::Display for OperatorDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

#[derive(Clone)]
enum Kind {
    Fourier { h: usize, w: usize },
    Dense { m: usize, n: usize, a: Arc<Vec<f64>> },
}

/// The magnitude map `x ↦ |Ax|`.
#[derive(Clone)]
pub struct MeasurementOperator {
    descriptor: Option<OperatorDescriptor>,
    kind: Kind,
}

impl fmt::Debug for MeasurementOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.descriptor {
            Some(d) => write!(f, "MeasurementOperator({d})"),
            None => write!(f, "MeasurementOperator(custom {:?})", self.dims()),
        }
    }
}

/// Linearization of `|A·|` at one point, mapping upstream gradients back to
/// the signal.
pub struct Pullback<'a> {
    op: &'a MeasurementOperator,
    /// `Ax / |Ax|`, zero where `|Ax| = 0`.
    phase: Vec<Complex64>,
    in_shape: Vec<usize>,
}

impl Pullback<'_> {
    /// `Re(Aᴴ (g ⊙ sign(Ax)))`, the gradient of `Σ gᵢ |Ax|ᵢ`.
    pub fn apply(&self, g: &Tensor) -> Result<Tensor> {
        if g.len() != self.phase.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.phase.len()],
                actual: g.shape().to_vec(),
            });
        }
        let mut out = vec![0.0; self.in_shape.iter().product()];
        self.op
            .pullback_row(&self.phase, g.data(), &mut out, &mut Vec::new());
        Tensor::new(&self.in_shape, out)
    }
}

impl MeasurementOperator {
    pub fn fourier2d(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::InvalidArgument("empty Fourier frame".into()));
        }
        Ok(MeasurementOperator {
            descriptor: Some(OperatorDescriptor::Fourier2d { h, w }),
            kind: Kind::Fourier { h, w },
        })
    }

    /// Draws `A ∈ ℝ^{m×n}` with entries `N(0, 1/m)`; the same `(m, n, seed)`
    /// always yields the same matrix.
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument("empty Gaussian operator".into()));
        }
        let mut stream = RandomStream::new(seed, GAUSSIAN_MATRIX_STREAM);
        let scale = 1.0 / (m as f64).sqrt();
        let a: Vec<f64> = (0..m * n).map(|_| scale * stream.standard_normal()).collect();
        Ok(MeasurementOperator {
            descriptor: Some(OperatorDescriptor::Gaussian { m, n, seed }),
            kind: Kind::Dense {
                m,
                n,
                a: Arc::new(a),
            },
        })
    }

    /// Wraps an explicit real `m × n` matrix (row-major). Such operators carry no
    /// descriptor and cannot be persisted.
    pub fn from_matrix(m: usize, n: usize, a: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 || a.len() != m * n || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("bad explicit measurement matrix".into()));
        }
        Ok(MeasurementOperator {
            descriptor: None,
            kind: Kind::Dense {
                m,
                n,
                a: Arc::new(a),
            },
        })
    }

    pub fn from_descriptor(d: &OperatorDescriptor) -> Result<Self> {
        match *d {
            OperatorDescriptor::Fourier2d { h, w } => Self::fourier2d(h, w),
            OperatorDescriptor::Gaussian { m, n, seed } => Self::gaussian(m, n, seed),
        }
    }

    pub fn descriptor(&self) -> Option<&OperatorDescriptor> {
        self.descriptor.as_ref()
    }

    /// `(output_dim, input_dim)`.
    pub fn dims(&self) -> (usize, usize) {
        match &self.kind {
            Kind::Fourier { h, w } => (h * w, h * w),
            Kind::Dense { m, n, .. } => (*m, *n),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dims().1
    }

    pub fn output_dim(&self) -> usize {
        self.dims().0
    }

    pub fn is_fourier(&self) -> bool {
        matches!(self.kind, Kind::Fourier { .. })
    }

    /// Scale between this operator's magnitudes and photon-count units: the
    /// unnormalized DFT for Fourier operators, identity otherwise.
    pub fn count_scale(&self) -> f64 {
        match self.kind {
            Kind::Fourier { h, w } => ((h * w) as f64).sqrt(),
            Kind::Dense { .. } => 1.0,
        }
    }

    /// Matrix entries, for dense operators.
    pub fn matrix(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Dense { a, .. } => Some(a),
            Kind::Fourier { .. } => None,
        }
    }

    fn output_shape(&self) -> Vec<usize> {
        match self.kind {
            Kind::Fourier { h, w } => vec![h, w],
            Kind::Dense { m, .. } => vec![m],
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let n = self.input_dim();
        let ok = match self.kind {
            Kind::Fourier { h, w } => x.shape() == [h, w] || x.shape() == [h * w],
            Kind::Dense { .. } => x.len() == n,
        };
        if !ok {
            return Err(Error::ShapeMismatch {
                expected: match self.kind {
                    Kind::Fourier { h, w } => vec![h, w],
                    Kind::Dense { n, .. } => vec![n],
                },
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// `Ax` for one real signal into `out` (length `output_dim`).
    fn forward_row(&self, x: &[f64], out: &mut Vec<Complex64>) {
        out.clear();
        match &self.kind {
            Kind::Fourier { h, w } => {
                out.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
                Fft2::cached(*h, *w).forward(out);
            }
            Kind::Dense { m, n, a } => {
                for r in 0..*m {
                    let row = &a[r * n..(r + 1) * n];
                    let s: f64 = row.iter().zip(x).map(|(p, q)| p * q).sum();
                    out.push(Complex64::new(s, 0.0));
                }
            }
        }
    }

    /// Accumulates `Re(Aᴴ(g ⊙ phase))` into `out`.
    fn pullback_row(
        &self,
        phase: &[Complex64],
        g: &[f64],
        out: &mut [f64],
        work: &mut Vec<Complex64>,
    ) {
        match &self.kind {
            Kind::Fourier { h, w } => {
                work.clear();
                work.extend(phase.iter().zip(g).map(|(p, &gi)| p * gi));
                // For the unitary DFT, Aᴴ is the inverse transform.
                Fft2::cached(*h, *w).inverse(work);
                for (o, c) in out.iter_mut().zip(work.iter()) {
                    *o = c.re;
                }
            }
            Kind::Dense { m, n, a } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for r in 0..*m {
                    let coef = phase[r].re * g[r];
                    if coef != 0.0 {
                        let row = &a[r * n..(r + 1) * n];
                        for (o, p) in out.iter_mut().zip(row) {
                            *o += coef * p;
                        }
                    }
                }
            }
        }
    }

    /// `y = |Ax|`. Fourier operators return an `h × w` tensor, dense ones a vector.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut ax = Vec::new();
        self.forward_row(x.data(), &mut ax);
        Tensor::new(&self.output_shape(), ax.iter().map(|c| c.norm()).collect())
    }

    pub fn apply_with_gradient(&self, x: &Tensor) -> Result<(Tensor, Pullback<'_>)> {
        self.check_input(x)?;
        let mut ax = Vec::new();
        self.forward_row(x.data(), &mut ax);
        let y = Tensor::new(&self.output_shape(), ax.iter().map(|c| c.norm()).collect())?;
        let phase = ax
            .iter()
            .map(|c| {
                let r = c.norm();
                if r > 0.0 {
                    c / r
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Ok((
            y,
            Pullback {
                op: self,
                phase,
                in_shape: x.shape().to_vec(),
            },
        ))
    }

    /// Row-wise `|Ax|` for a batch of flattened signals.
    pub fn apply_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let (m, n) = self.dims();
        if x.ncols() != n {
            return Err(Error::ShapeMismatch {
                expected: vec![x.nrows(), n],
                actual: x.shape().to_vec(),
            });
        }
        if let Kind::Dense { a, .. } = &self.kind {
            let a = ndarray::ArrayView2::from_shape((m, n), a.as_slice()).expect("matrix shape");
            return Ok(x.dot(&a.t()).mapv(f64::abs));
        }
        let mut out = Array2::zeros((x.nrows(), m));
        let mut ax = Vec::new();
        for (row, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            let row = row.to_vec();
            self.forward_row(&row, &mut ax);
            for (d, c) in dst.iter_mut().zip(&ax) {
                *d = c.norm();
            }
        }
        Ok(out)
    }

    /// For every row: `‖y − |Ax|‖²` and its gradient with respect to `x`.
    pub fn squared_residual_batch(
        &self,
        x: &Array2<f64>,
        y: &Array2<f64>,
    ) -> Result<(Vec<f64>, Array2<f64>)> {
        let (m, n) = self.dims();
        if x.ncols() != n || y.ncols() != m || x.nrows() != y.nrows() {
            return Err(Error::ShapeMismatch {
                expected: vec![x.nrows(), n, m],
                actual: vec![x.nrows(), x.ncols(), y.ncols()],
            });
        }
        let mut losses = Vec::with_capacity(x.nrows());
        let mut grad = Array2::zeros(x.raw_dim());
        if let Kind::Dense { a, .. } = &self.kind {
            let a = ndarray::ArrayView2::from_shape((m, n), a.as_slice()).expect("matrix shape");
            let ax = x.dot(&a.t());
            // d/dx Σ (|Ax| − y)² = Aᵀ (2 (|Ax| − y) ⊙ sign(Ax)).
            let mut up = Array2::zeros(ax.raw_dim());
            for ((axr, yr), mut ur) in ax.rows().into_iter().zip(y.rows()).zip(up.rows_mut()) {
                let mut l = 0.0;
                for ((&v, &t), u) in axr.iter().zip(yr).zip(ur.iter_mut()) {
                    let r = v.abs() - t;
                    l += r * r;
                    *u = 2.0 * r * sign(v);
                }
                losses.push(l);
            }
            grad = up.dot(&a);
            return Ok((losses, grad));
        }
        let mut ax = Vec::new();
        let mut work = Vec::new();
        let mut phase = Vec::new();
        let mut g = vec![0.0; m];
        let mut buf = vec![0.0; n];
        for ((xr, yr), gr) in x.rows().into_iter().zip(y.rows()).zip(grad.rows_mut()) {
            let l = self.residual_row(xr, yr, &mut ax, &mut phase, &mut g, &mut buf, &mut work);
            losses.push(l);
            write_row(gr, &buf);
        }
        Ok((losses, grad))
    }

    #[allow(clippy::too_many_arguments)]
    fn residual_row(
        &self,
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        ax: &mut Vec<Complex64>,
        phase: &mut Vec<Complex64>,
        g: &mut [f64],
        out: &mut [f64],
        work: &mut Vec<Complex64>,
    ) -> f64 {
        let xv: Vec<f64> = x.iter().copied().collect();
        self.forward_row(&xv, ax);
        phase.clear();
        let mut l = 0.0;
        for ((c, &t), gi) in ax.iter().zip(y.iter()).zip(g.iter_mut()) {
            let r = c.norm();
            let d = r - t;
            l += d * d;
            *gi = 2.0 * d;
            phase.push(if r > 0.0 {
                c / r
            } else {
                Complex64::new(0.0, 0.0)
            });
        }
        self.pullback_row(phase, g, out, work);
        l
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn write_row(mut dst: ArrayViewMut1<f64>, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *s;
    }
}

/// Places `x` in the top-left corner of a `factor`-times larger zero frame.
pub fn zero_pad(x: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::InvalidArgument("padding factor must be at least 1".into()));
    }
    let (h, w) = x.dims2()?;
    let (ph, pw) = (h * factor, w * factor);
    let mut out = vec![0.0; ph * pw];
    for i in 0..h {
        out[i * pw..i * pw + w].copy_from_slice(&x.data()[i * w..(i + 1) * w]);
    }
    Tensor::new(&[ph, pw], out)
}
