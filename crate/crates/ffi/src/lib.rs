//! C ABI for `freeent`.
//!
//! Matrices are opaque `FeMatrix` handles owned by the caller and released
//! with [`fe_matrix_free`]. Every fallible function returns an [`FeStatus`]
//! and writes its result through an out-pointer; on failure a message is
//! available from [`fe_last_error`] until the next call on the same thread.
//! Measures and ensembles are passed as JSON strings in the same format the
//! command-line tool reads from its config files.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use freeent::ensembles::EnsembleSpec;
use freeent::entropy::{ball_log_volume, diagonal_entropy, entropy_upper_bound};
use freeent::error::Error;
use freeent::matrix::{trace_word, ComplexMatrix, StarWord};
use freeent::measures::MeasureSpec;
use freeent::models::circular_moment;
use freeent::schur::schur_decompose;
use freeent::seed::Seed;
use freeent::spectral::{eigenvalues, fk_determinant, offdiag_second_moment, operator_norm};
use num_complex::Complex64;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// A complex number, layout-compatible with C99 `double _Complex`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FeComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for FeComplex {
    fn from(z: Complex64) -> Self {
        FeComplex { re: z.re, im: z.im }
    }
}

/// Opaque square complex matrix.
pub struct FeMatrix(ComplexMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(FeStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = if e.is_numerical() { FeStatus::NumericalFailure } else { FeStatus::InvalidArgument };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FeStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(FeStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FeStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            FeStatus::Panic
        }
    }
}

unsafe fn matrix<'a>(m: *const FeMatrix) -> Result<&'a ComplexMatrix, Fail> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("matrix"))
}

unsafe fn string<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn json<T: serde::de::DeserializeOwned>(s: *const c_char, what: &str) -> Result<T, Fail> {
    serde_json::from_str(string(s, what)?).map_err(|e| invalid(format!("{what}: {e}")))
}

unsafe fn measure(s: *const c_char) -> Result<MeasureSpec, Fail> {
    let m: MeasureSpec = json(s, "measure")?;
    m.validate()?;
    Ok(m)
}

unsafe fn word(s: *const c_char) -> Result<StarWord, Fail> {
    Ok(string(s, "word")?.parse::<StarWord>()?)
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn boxed(m: ComplexMatrix) -> *mut FeMatrix {
    Box::into_raw(Box::new(FeMatrix(m)))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn fe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a `dim x dim` matrix from `dim * dim` row-major entries.
///
/// # Safety
/// `data` must point to `dim * dim` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fe_matrix_new(dim: usize, data: *const FeComplex, out: *mut *mut FeMatrix) -> FeStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let len = dim.checked_mul(dim).ok_or_else(|| invalid("dimension overflows"))?;
        let entries = std::slice::from_raw_parts(data, len).iter().map(|z| Complex64::new(z.re, z.im)).collect();
        write(out, boxed(ComplexMatrix::from_row_major(dim, entries)?))
    })
}

/// Releases a matrix. Null is ignored.
///
/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fe_matrix_free(m: *mut FeMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Dimension of `m`, or 0 for null.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fe_matrix_dim(m: *const FeMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.dim())
}

/// Entry `(i, j)`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fe_matrix_get(m: *const FeMatrix, i: usize, j: usize, out: *mut FeComplex) -> FeStatus {
    guard(|| {
        let m = matrix(m)?;
        if i >= m.dim() || j >= m.dim() {
            return Err(invalid(format!("index ({i}, {j}) out of range for dimension {}", m.dim())));
        }
        write(out, m[(i, j)].into())
    })
}

/// Samples an ensemble given as JSON, e.g. `{"kind":"ginibre","dim":100}`.
///
/// # Safety
/// `ensemble_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fe_ensemble_sample(
    ensemble_json: *const c_char,
    seed: u64,
    out: *mut *mut FeMatrix,
) -> FeStatus {
    guard(|| {
        let spec: EnsembleSpec = json(ensemble_json, "ensemble")?;
        spec.validate()?;
        write(out, boxed(spec.sample(&Seed::new(seed))?))
    })
}

/// Writes the `dim(m)` eigenvalues to `out`, which holds `capacity` values.
///
/// # Safety
/// `m` must be a live handle and `out` must have room for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn fe_eigenvalues(m: *const FeMatrix, out: *mut FeComplex, capacity: usize) -> FeStatus {
    guard(|| {
        let m = matrix(m)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        if capacity < m.dim() {
            return Err(Fail(FeStatus::BufferTooSmall, format!("need {} slots, got {capacity}", m.dim())));
        }
        for (k, z) in eigenvalues(m)?.points().iter().enumerate() {
            out.add(k).write((*z).into());
        }
        Ok(())
    })
}

/// Largest singular value.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fe_operator_norm(m: *const FeMatrix, out: *mut f64) -> FeStatus {
    guard(|| write(out, operator_norm(matrix(m)?)))
}

/// Fuglede-Kadison determinant `|det m|^(1/N)`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fe_fk_determinant(m: *const FeMatrix, out: *mut f64) -> FeStatus {
    guard(|| write(out, fk_determinant(matrix(m)?)))
}

/// `tr(m m*) - (1/N) sum |lambda_i|^2`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fe_offdiag_second_moment(m: *const FeMatrix, out: *mut f64) -> FeStatus {
    guard(|| write(out, offdiag_second_moment(matrix(m)?)?))
}

/// Normalized trace of a word over `{1, *}`, e.g. `"1*1*"`.
///
/// # Safety
/// `m` must be a live handle, `w` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fe_trace_word(m: *const FeMatrix, w: *const c_char, out: *mut FeComplex) -> FeStatus {
    guard(|| {
        let m = matrix(m)?;
        write(out, trace_word(m, &word(w)?).into())
    })
}

/// Star moment of a circular element, i.e. the number of noncrossing
/// pairings of the word that match each `1` with a `*`.
///
/// # Safety
/// `w` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fe_circular_moment(w: *const c_char, out: *mut u64) -> FeStatus {
    guard(|| write(out, circular_moment(&word(w)?)))
}

/// Logarithmic energy of a measure given as JSON; `-inf` for atoms.
///
/// # Safety
/// `measure_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fe_log_energy(measure_json: *const c_char, out: *mut f64) -> FeStatus {
    guard(|| write(out, measure(measure_json)?.log_energy().value))
}

/// Entropy of the diagonal part, `log_energy + 3/4 + log(pi)/2`.
///
/// # Safety
/// `measure_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fe_diagonal_entropy(measure_json: *const c_char, out: *mut f64) -> FeStatus {
    guard(|| write(out, diagonal_entropy(&measure(measure_json)?)))
}

/// Entropy upper bound for Brown measure `measure_json` and offdiagonality `od`.
///
/// # Safety
/// `measure_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fe_entropy_upper_bound(measure_json: *const c_char, od: f64, out: *mut f64) -> FeStatus {
    guard(|| write(out, entropy_upper_bound(&measure(measure_json)?, od)?))
}

/// Normalized log-volume of the offdiagonal ball at dimension `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fe_ball_log_volume(n: usize, od: f64, out: *mut f64) -> FeStatus {
    guard(|| write(out, ball_log_volume(n, od)?))
}

/// Schur decomposition `m = U T U*`. Both outputs are new handles.
///
/// # Safety
/// `m` must be a live handle; `unitary` and `triangular` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fe_schur(
    m: *const FeMatrix,
    unitary: *mut *mut FeMatrix,
    triangular: *mut *mut FeMatrix,
) -> FeStatus {
    guard(|| {
        let m = matrix(m)?;
        if unitary.is_null() || triangular.is_null() {
            return Err(null("output pointer"));
        }
        let s = schur_decompose(m)?;
        let mut t = s.strict_upper.clone();
        for (i, z) in s.diagonal.iter().enumerate() {
            t.as_mut_slice()[i * m.dim() + i] = *z;
        }
        write(unitary, boxed(s.unitary))?;
        write(triangular, boxed(t))
    })
}
