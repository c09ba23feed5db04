//! C ABI over the `edgebarrier` crate.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every entry point returns an [`EbStatus`];
//! on failure [`eb_last_error_message`] describes the error. Matrices are
//! dense `double` arrays: symmetric n×n inputs may be in either order, sample
//! batches are row-major m×n (one sample per row).

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use edgebarrier::lower::{run_lower_walk_on_batch, LowerShiftParams, LowerWalkReport};
use edgebarrier::mp::MpParams;
use edgebarrier::upper::{run_upper_walk_on_batch, select_alpha, UpperShiftParams, UpperWalkReport};
use edgebarrier::walk::WalkOptions;
use edgebarrier::{Error, SampleBatch, SymmetricSpectrum, UpdateMode};
use nalgebra::DMatrix;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BarrierViolation = 3,
    Numerical = 4,
    Precondition = 5,
    Panic = 6,
}

/// Eigendecomposition of a symmetric matrix.
pub struct EbSpectrum(SymmetricSpectrum);

/// Outcome of a lower barrier walk.
pub struct EbLowerWalk(LowerWalkReport);

/// Outcome of an upper barrier walk.
pub struct EbUpperWalk(UpperWalkReport);

/// Scalar summary of a lower walk.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EbLowerWalkSummary {
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub u0: f64,
    pub u_final: f64,
    pub lambda_min: f64,
    /// u_final / (√m − √n)².
    pub ratio: f64,
    pub total_regularity: f64,
    pub regularity_budget: f64,
    pub hard_violations: usize,
    pub soft_violations: usize,
}

/// Scalar summary of an upper walk.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EbUpperWalkSummary {
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub alpha: f64,
    pub u0: f64,
    pub u_final: f64,
    pub lambda_max: f64,
    /// u_final / (√m + √n)².
    pub ratio: f64,
    pub total_regularity: f64,
    pub regularity_budget: f64,
    pub mean_delta1: f64,
    pub mean_delta2: f64,
    pub hard_violations: usize,
    pub soft_violations: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &Error) -> EbStatus {
    match e {
        Error::BarrierViolation { .. } => EbStatus::BarrierViolation,
        Error::Precondition(_) => EbStatus::Precondition,
        Error::PotentialBudget(_) | Error::SingularUpdate(_) | Error::Invariant(_) | Error::NonTermination(_) => {
            EbStatus::Numerical
        }
        _ => EbStatus::InvalidArgument,
    }
}

struct Failure(EbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EbStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> EbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            EbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            EbStatus::Panic
        }
    }
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, Failure> {
    h.as_ref().ok_or_else(|| null(what))
}

fn batch_from(samples: &[f64], m: usize, n: usize) -> Result<SampleBatch, Failure> {
    if m == 0 || n == 0 {
        return Err(Error::EmptyBatch.into());
    }
    Ok(SampleBatch::from_rows(DMatrix::from_row_slice(m, n, samples))?)
}

/// Message of the last failed call on this thread, or "" after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn eb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Decomposes the symmetric n×n matrix `data`.
///
/// # Safety
/// `data` must point to n·n readable doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn eb_spectrum_from_matrix(data: *const f64, n: usize, out: *mut *mut EbSpectrum) -> EbStatus {
    guard(|| {
        if n == 0 {
            return Err(Failure(EbStatus::InvalidArgument, "dimension must be positive".into()));
        }
        let values = slice(data, n * n, "data")?;
        let spectrum = edgebarrier::eigendecompose(&DMatrix::from_column_slice(n, n, values))?;
        write(out, Box::into_raw(Box::new(EbSpectrum(spectrum))), "out")
    })
}

/// Releases a spectrum. Null is ignored.
///
/// # Safety
/// `spectrum` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eb_spectrum_free(spectrum: *mut EbSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Dimension n, or 0 for a null handle.
///
/// # Safety
/// `spectrum` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eb_spectrum_dim(spectrum: *const EbSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.0.dim())
}

/// Copies the eigenvalues, in descending order, into `out[0..len]`; `len`
/// must equal the dimension.
///
/// # Safety
/// `spectrum` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eb_spectrum_eigenvalues(spectrum: *const EbSpectrum, out: *mut f64, len: usize) -> EbStatus {
    guard(|| {
        let s = &handle(spectrum, "spectrum")?.0;
        if len != s.dim() {
            return Err(Error::DimensionMismatch { expected: s.dim(), got: len }.into());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(s.eigenvalues());
        Ok(())
    })
}

/// Spectrum of A + xxᵀ as a new handle. `incremental` selects the secular
/// update (non-zero) or a full re-decomposition (zero).
///
/// # Safety
/// `spectrum` must be a live handle, `x` must hold `n` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn eb_spectrum_rank_one_update(
    spectrum: *const EbSpectrum,
    x: *const f64,
    n: usize,
    incremental: i32,
    out: *mut *mut EbSpectrum,
) -> EbStatus {
    guard(|| {
        let s = &handle(spectrum, "spectrum")?.0;
        let proj = s.project(slice(x, n, "x")?)?;
        let mode = if incremental != 0 {
            UpdateMode::Incremental
        } else {
            UpdateMode::Full
        };
        let updated = edgebarrier::rank_one_update(s, &proj, mode)?;
        write(out, Box::into_raw(Box::new(EbSpectrum(updated))), "out")
    })
}

/// tr((A − u)⁻¹) for u below the spectrum.
///
/// # Safety
/// `spectrum` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_stieltjes_lower(spectrum: *const EbSpectrum, u: f64, out: *mut f64) -> EbStatus {
    guard(|| {
        let value = edgebarrier::stieltjes_lower(&handle(spectrum, "spectrum")?.0, u)?;
        write(out, value, "out")
    })
}

/// tr((u − A)⁻¹) for u above the spectrum.
///
/// # Safety
/// `spectrum` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_stieltjes_upper(spectrum: *const EbSpectrum, u: f64, out: *mut f64) -> EbStatus {
    guard(|| {
        let value = edgebarrier::stieltjes_upper(&handle(spectrum, "spectrum")?.0, u)?;
        write(out, value, "out")
    })
}

/// Support edges ((1 − √ρ)², (1 + √ρ)²) of the Marchenko–Pastur law.
///
/// # Safety
/// `lower` and `upper` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eb_mp_edges(rho: f64, lower: *mut f64, upper: *mut f64) -> EbStatus {
    guard(|| {
        let (lo, hi) = MpParams::new(rho)?.edges();
        write(lower, lo, "lower")?;
        write(upper, hi, "upper")
    })
}

/// Density of the continuous part of the Marchenko–Pastur law at x.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eb_mp_density(rho: f64, x: f64, out: *mut f64) -> EbStatus {
    guard(|| {
        let value = MpParams::new(rho)?.density(x)?;
        write(out, value, "out")
    })
}

/// Largest admissible potential slack α for aspect γ = m/n and ε ∈ (0, 1/4].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eb_select_alpha(gamma: f64, eps: f64, out: *mut f64) -> EbStatus {
    guard(|| write(out, select_alpha(gamma, eps)?, "out"))
}

/// Runs the lower walk over the row-major m×n `samples`.
///
/// # Safety
/// `samples` must hold m·n doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eb_lower_walk_run(
    samples: *const f64,
    m: usize,
    n: usize,
    eps: f64,
    out: *mut *mut EbLowerWalk,
) -> EbStatus {
    guard(|| {
        let batch = batch_from(slice(samples, m * n, "samples")?, m, n)?;
        let report = run_lower_walk_on_batch(&batch, LowerShiftParams::new(eps)?, WalkOptions::default())?;
        write(out, Box::into_raw(Box::new(EbLowerWalk(report))), "out")
    })
}

/// # Safety
/// `walk` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eb_lower_walk_free(walk: *mut EbLowerWalk) {
    if !walk.is_null() {
        drop(Box::from_raw(walk));
    }
}

/// # Safety
/// `walk` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_lower_walk_summary(walk: *const EbLowerWalk, out: *mut EbLowerWalkSummary) -> EbStatus {
    guard(|| {
        let r = &handle(walk, "walk")?.0;
        let hard = r.hard_violations().count();
        let summary = EbLowerWalkSummary {
            n: r.n,
            m: r.m,
            eps: r.eps,
            u0: r.u0,
            u_final: r.u_final,
            lambda_min: r.lambda_min,
            ratio: r.ratio,
            total_regularity: r.total_regularity,
            regularity_budget: r.regularity_budget,
            hard_violations: hard,
            soft_violations: r.violations.len() - hard,
        };
        write(out, summary, "out")
    })
}

/// Copies the barrier positions u_1..u_m into `out[0..len]`; `len` must be m.
///
/// # Safety
/// `walk` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eb_lower_walk_barriers(walk: *const EbLowerWalk, out: *mut f64, len: usize) -> EbStatus {
    guard(|| {
        let r = &handle(walk, "walk")?.0;
        copy_out(r.trajectory.iter().map(|s| s.u_k), r.trajectory.len(), out, len)
    })
}

unsafe fn copy_out(values: impl Iterator<Item = f64>, count: usize, out: *mut f64, len: usize) -> Result<(), Failure> {
    if len != count {
        return Err(Error::DimensionMismatch { expected: count, got: len }.into());
    }
    if count == 0 {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    for (slot, v) in std::slice::from_raw_parts_mut(out, len).iter_mut().zip(values) {
        *slot = v;
    }
    Ok(())
}

/// Runs the upper walk over the row-major m×n `samples`. `moment_bound` is
/// the bound K on sup_y E|⟨X, y⟩|³ (values below 1 are raised to 1); α is
/// selected for γ = m/n.
///
/// # Safety
/// `samples` must hold m·n doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eb_upper_walk_run(
    samples: *const f64,
    m: usize,
    n: usize,
    eps: f64,
    moment_bound: f64,
    out: *mut *mut EbUpperWalk,
) -> EbStatus {
    guard(|| {
        let batch = batch_from(slice(samples, m * n, "samples")?, m, n)?;
        let params = UpperShiftParams::new(eps, m as f64 / n as f64, moment_bound.max(1.0))?;
        let report = run_upper_walk_on_batch(&batch, params, WalkOptions::default())?;
        write(out, Box::into_raw(Box::new(EbUpperWalk(report))), "out")
    })
}

/// # Safety
/// `walk` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eb_upper_walk_free(walk: *mut EbUpperWalk) {
    if !walk.is_null() {
        drop(Box::from_raw(walk));
    }
}

/// # Safety
/// `walk` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_upper_walk_summary(walk: *const EbUpperWalk, out: *mut EbUpperWalkSummary) -> EbStatus {
    guard(|| {
        let r = &handle(walk, "walk")?.0;
        let hard = r.hard_violations().count();
        let summary = EbUpperWalkSummary {
            n: r.n,
            m: r.m,
            eps: r.eps,
            alpha: r.alpha,
            u0: r.u0,
            u_final: r.u_final,
            lambda_max: r.lambda_max,
            ratio: r.ratio,
            total_regularity: r.total_regularity,
            regularity_budget: r.regularity_budget,
            mean_delta1: r.mean_delta1,
            mean_delta2: r.mean_delta2,
            hard_violations: hard,
            soft_violations: r.violations.len() - hard,
        };
        write(out, summary, "out")
    })
}

/// Copies the barrier positions u_1..u_m into `out[0..len]`; `len` must be m.
///
/// # Safety
/// `walk` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eb_upper_walk_barriers(walk: *const EbUpperWalk, out: *mut f64, len: usize) -> EbStatus {
    guard(|| {
        let r = &handle(walk, "walk")?.0;
        copy_out(r.trajectory.iter().map(|s| s.u_k), r.trajectory.len(), out, len)
    })
}
