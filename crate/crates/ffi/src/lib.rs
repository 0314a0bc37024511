//! C ABI over the phaseret core: measurement operators, projection solvers,
//! registration-aware scoring and E2E inference from weight archives.
//!
//! Every function returns a status code (`PHR_OK` on success). Objects are
//! opaque handles released with their `*_free` function. The message of the
//! last failure on the calling thread is available from `phr_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use ndarray::Array2;
use phaseret::classical::{best_of_restarts, Algorithm, ObjectConstraint, SolverConfig};
use phaseret::evalreg::evaluate;
use phaseret::harness::WeightArchive;
use phaseret::measurement::MeasurementOperator;
use phaseret::models::E2eModel;
use phaseret::numerics::{RandomStream, Tensor};
use phaseret::Error;

pub const PHR_OK: i32 = 0;
pub const PHR_NULL_POINTER: i32 = 1;
pub const PHR_INVALID_ARGUMENT: i32 = 2;
pub const PHR_SHAPE_MISMATCH: i32 = 3;
pub const PHR_NON_FINITE: i32 = 4;
pub const PHR_FORMAT: i32 = 5;
pub const PHR_CHECKSUM_MISMATCH: i32 = 6;
pub const PHR_PROVENANCE: i32 = 7;
pub const PHR_MISSING_WEIGHTS: i32 = 8;
pub const PHR_IO: i32 = 9;
pub const PHR_INTERNAL: i32 = 10;

pub const PHR_ALGORITHM_GS: i32 = 0;
pub const PHR_ALGORITHM_HIO: i32 = 1;
pub const PHR_ALGORITHM_RAAR: i32 = 2;

/// A measurement operator `x ↦ |Ax|`.
pub struct PhrOperator(MeasurementOperator);

/// A trained E2E reconstructor.
pub struct PhrE2e(E2eModel);

/// Scores of one reconstruction after registration.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhrEvalRecord {
    pub mse: f64,
    pub mae: f64,
    pub ssim: f64,
    pub delta_s: usize,
    pub delta_t: usize,
    /// 1 when the 180° rotation was undone.
    pub rotated: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Status code for a core error kind.
pub fn status_of(e: &Error) -> i32 {
    match e.kind() {
        "shape_mismatch" | "invalid_shape" | "dimension_mismatch" | "broken_chain" => PHR_SHAPE_MISMATCH,
        "non_finite" => PHR_NON_FINITE,
        "format" | "bad_magic" | "truncated_payload" | "json" | "csv" => PHR_FORMAT,
        "checksum_mismatch" => PHR_CHECKSUM_MISMATCH,
        "provenance_mismatch" => PHR_PROVENANCE,
        "missing_weights" => PHR_MISSING_WEIGHTS,
        "io" | "dataset_missing" => PHR_IO,
        "invalid_argument" | "invalid_config" | "negative_magnitude" | "noiseless" | "batch_too_small" => {
            PHR_INVALID_ARGUMENT
        }
        _ => PHR_INTERNAL,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (i32, String)>) -> i32 {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(())) => PHR_OK,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            PHR_INTERNAL
        }
    }
}

fn core(e: Error) -> (i32, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (i32, String) {
    (PHR_NULL_POINTER, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], (i32, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], (i32, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

/// Message of the last failure on this thread; valid until the next call.
#[no_mangle]
pub extern "C" fn phr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn phr_status_name(code: i32) -> *const c_char {
    let s: &'static CStr = match code {
        PHR_OK => c"ok",
        PHR_NULL_POINTER => c"null_pointer",
        PHR_INVALID_ARGUMENT => c"invalid_argument",
        PHR_SHAPE_MISMATCH => c"shape_mismatch",
        PHR_NON_FINITE => c"non_finite",
        PHR_FORMAT => c"format",
        PHR_CHECKSUM_MISMATCH => c"checksum_mismatch",
        PHR_PROVENANCE => c"provenance",
        PHR_MISSING_WEIGHTS => c"missing_weights",
        PHR_IO => c"io",
        _ => c"internal",
    };
    s.as_ptr()
}

fn put<T>(out: *mut *mut T, v: T) -> Result<(), (i32, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(v)) };
    Ok(())
}

/// Orthonormal 2-D DFT magnitudes of an `h × w` image.
#[no_mangle]
pub extern "C" fn phr_operator_fourier(h: usize, w: usize, out: *mut *mut PhrOperator) -> i32 {
    guard(|| put(out, PhrOperator(MeasurementOperator::fourier2d(h, w).map_err(core)?)))
}

/// Gaussian `m × n` operator with `N(0, 1/m)` entries drawn from `seed`.
#[no_mangle]
pub extern "C" fn phr_operator_gaussian(m: usize, n: usize, seed: u64, out: *mut *mut PhrOperator) -> i32 {
    guard(|| put(out, PhrOperator(MeasurementOperator::gaussian(m, n, seed).map_err(core)?)))
}

/// # Safety
/// `op` must come from a `phr_operator_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn phr_operator_free(op: *mut PhrOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Writes the output (`m`) and input (`n`) lengths.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn phr_operator_dims(op: *const PhrOperator, m: *mut usize, n: *mut usize) -> i32 {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        if m.is_null() || n.is_null() {
            return Err(null("dims"));
        }
        let (a, b) = op.0.dims();
        *m = a;
        *n = b;
        Ok(())
    })
}

fn input_tensor(op: &MeasurementOperator, x: &[f64]) -> Result<Tensor, (i32, String)> {
    let shape = match op.descriptor() {
        Some(phaseret::measurement::OperatorDescriptor::Fourier2d { h, w }) => vec![*h, *w],
        _ => vec![x.len()],
    };
    Tensor::new(&shape, x.to_vec()).map_err(core)
}

/// `y = |A x|`; `x` has `n` entries (row-major for Fourier), `y` has `m`.
///
/// # Safety
/// `x` must hold `n` and `y` `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn phr_operator_apply(
    op: *const PhrOperator,
    x: *const f64,
    n: usize,
    y: *mut f64,
    m: usize,
) -> i32 {
    guard(|| {
        let op = &op.as_ref().ok_or_else(|| null("op"))?.0;
        if (m, n) != op.dims() {
            return Err((PHR_SHAPE_MISMATCH, format!("operator is {:?}, got m={m} n={n}", op.dims())));
        }
        let x = slice(x, n, "x")?;
        let out = slice_mut(y, m, "y")?;
        let r = op.apply(&input_tensor(op, x)?).map_err(core)?;
        out.copy_from_slice(r.data());
        Ok(())
    })
}

/// Best-of-`restarts` projection solve of Fourier magnitudes `y` (`h × w`,
/// full-frame support). Writes the reconstruction and its residual.
///
/// # Safety
/// `y` and `x_out` must hold `h * w` doubles; `residual` may be null.
#[no_mangle]
pub unsafe extern "C" fn phr_solve(
    y: *const f64,
    h: usize,
    w: usize,
    algorithm: i32,
    beta: f64,
    iters: usize,
    restarts: usize,
    seed: u64,
    x_out: *mut f64,
    residual: *mut f64,
) -> i32 {
    guard(|| {
        let y = Tensor::new(&[h, w], slice(y, h * w, "y")?.to_vec()).map_err(core)?;
        let out = slice_mut(x_out, h * w, "x_out")?;
        let algorithm = match algorithm {
            PHR_ALGORITHM_GS => Algorithm::GerchbergSaxton,
            PHR_ALGORITHM_HIO => Algorithm::Hio { beta },
            PHR_ALGORITHM_RAAR => Algorithm::Raar { beta },
            a => return Err((PHR_INVALID_ARGUMENT, format!("unknown algorithm {a}"))),
        };
        let cfg = SolverConfig { algorithm, iters };
        let r = best_of_restarts(&y, &ObjectConstraint::full(h, w), &cfg, restarts, &RandomStream::new(seed, 0))
            .map_err(core)?;
        out.copy_from_slice(r.x_hat.data());
        if !residual.is_null() {
            *residual = r.residual;
        }
        Ok(())
    })
}

/// Registers `x_hat` to `x` (circular shifts and 180° rotation) and scores it.
///
/// # Safety
/// `x` and `x_hat` must hold `h * w` doubles.
#[no_mangle]
pub unsafe extern "C" fn phr_evaluate(
    x: *const f64,
    x_hat: *const f64,
    h: usize,
    w: usize,
    out: *mut PhrEvalRecord,
) -> i32 {
    guard(|| {
        let a = Tensor::new(&[h, w], slice(x, h * w, "x")?.to_vec()).map_err(core)?;
        let b = Tensor::new(&[h, w], slice(x_hat, h * w, "x_hat")?.to_vec()).map_err(core)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = evaluate(&a, &b).map_err(core)?;
        *out = PhrEvalRecord {
            mse: r.mse,
            mae: r.mae,
            ssim: r.ssim,
            delta_s: r.registration.delta_s,
            delta_t: r.registration.delta_t,
            rotated: r.registration.rotated as i32,
        };
        Ok(())
    })
}

/// Loads an E2E model from a weight archive (`path` is UTF-8).
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn phr_e2e_load(path: *const c_char, out: *mut *mut PhrE2e) -> i32 {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (PHR_INVALID_ARGUMENT, "path is not UTF-8".to_string()))?;
        let model = WeightArchive::load(Path::new(p)).and_then(|a| a.e2e()).map_err(core)?;
        put(out, PhrE2e(model))
    })
}

/// # Safety
/// `model` must come from `phr_e2e_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn phr_e2e_free(model: *mut PhrE2e) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Measurement length the model expects.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn phr_e2e_input_dim(model: *const PhrE2e, m: *mut usize) -> i32 {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        *m.as_mut().ok_or_else(|| null("m"))? = model.0.measurement_dim();
        Ok(())
    })
}

/// Reconstructs `count` images (784 values each) from `count × m` magnitudes.
///
/// # Safety
/// `y` must hold `count * m` doubles and `x_out` `count * 784`.
#[no_mangle]
pub unsafe extern "C" fn phr_e2e_reconstruct(
    model: *const PhrE2e,
    y: *const f64,
    count: usize,
    m: usize,
    x_out: *mut f64,
) -> i32 {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.0;
        if m != model.measurement_dim() || count == 0 {
            return Err((
                PHR_SHAPE_MISMATCH,
                format!("model takes {} magnitudes per row, got {m} x {count}", model.measurement_dim()),
            ));
        }
        let y = slice(y, count * m, "y")?;
        let px = model.net.output_dim();
        let out = slice_mut(x_out, count * px, "x_out")?;
        let rows = Array2::from_shape_fn((count, m), |(r, c)| y[r * m + c] as f32);
        let x = model.reconstruct(&rows).map_err(core)?;
        for (o, v) in out.iter_mut().zip(x.iter()) {
            *o = *v as f64;
        }
        Ok(())
    })
}
