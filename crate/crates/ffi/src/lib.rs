//! C ABI over the `npmle` library.
//!
//! Conventions:
//! * every fallible function returns an [`NpmleStatus`]; results go through
//!   out-pointers, which are written only on success;
//! * after a non-OK status, [`npmle_last_error_message`] describes the
//!   failure (per thread);
//! * handles ([`NpmleSample`], [`NpmleSolution`]) are opaque, created by
//!   this library and released with the matching `*_free` function;
//! * strings returned by the library are released with
//!   [`npmle_string_free`];
//! * panics never cross the boundary; they surface as
//!   [`NpmleStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use npmle::bounds::{crit_bound, exponential_atom_bound, gaussian_atom_bound, poisson_atom_bound};
use npmle::measures::sample_mixture;
use npmle::{solve_npmle, Error, Kernel, MixingSpec, NpmleSolution as Solution, Sample, SolveConfig};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpmleStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A parameter or observation is outside the kernel's domain.
    Domain = 3,
    InvalidMomentSequence = 4,
    ConstructionRejected = 5,
    UnsupportedSpec = 6,
    Parse = 7,
    Io = 8,
    Internal = 9,
    /// A caller-provided buffer is too small.
    BufferTooSmall = 10,
    Panic = 11,
}

/// Values for the `kernel` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpmleKernel {
    Gaussian = 0,
    Poisson = 1,
    Exponential = 2,
}

/// Kernels travel as `int32_t` so that an out-of-range value from C is an
/// error rather than undefined behaviour.
fn kernel_from(code: i32) -> Result<Kernel, Failure> {
    match code {
        c if c == NpmleKernel::Gaussian as i32 => Ok(Kernel::Gaussian),
        c if c == NpmleKernel::Poisson as i32 => Ok(Kernel::Poisson),
        c if c == NpmleKernel::Exponential as i32 => Ok(Kernel::Exponential),
        other => Err(Failure(NpmleStatus::InvalidArgument, format!("unknown kernel code {other}"))),
    }
}

/// Opaque sorted sample.
pub struct NpmleSample {
    inner: Sample,
}

/// Opaque fitted NPMLE.
pub struct NpmleSolution {
    inner: Solution,
}

/// Solver options; start from [`npmle_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NpmleSolveOptions {
    /// Nonzero to restrict atoms to `[theta_lo, theta_hi]`.
    pub use_window: i32,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub grid_size: usize,
    pub kkt_tol: f64,
    pub max_outer_iters: usize,
}

/// Optimality certificate of a fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NpmleCertificate {
    pub sup_d: f64,
    /// `sup_d − 1`: bound on the per-observation log-likelihood gap.
    pub gap_bound: f64,
    pub argmax_theta: f64,
    pub mean_d: f64,
    pub min_atom_d: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub grid_size_used: usize,
    pub outer_iters: usize,
    pub converged: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> NpmleStatus {
    match err {
        Error::Domain { .. } => NpmleStatus::Domain,
        Error::InvalidArgument(_) => NpmleStatus::InvalidArgument,
        Error::InvalidMomentSequence { .. } => NpmleStatus::InvalidMomentSequence,
        Error::ConstructionRejected { .. } => NpmleStatus::ConstructionRejected,
        Error::UnsupportedSpec(_) => NpmleStatus::UnsupportedSpec,
        Error::Internal(_) => NpmleStatus::Internal,
        Error::Io(_) => NpmleStatus::Io,
        Error::Parse(_) => NpmleStatus::Parse,
    }
}

struct Failure(NpmleStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(NpmleStatus::NullPointer, format!("{name} is null"))
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> NpmleStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            NpmleStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            NpmleStatus::Panic
        }
    }
}

unsafe fn sample_ref<'a>(s: *const NpmleSample) -> Result<&'a Sample, Failure> {
    s.as_ref().map(|s| &s.inner).ok_or_else(|| null("sample"))
}

unsafe fn solution_ref<'a>(s: *const NpmleSolution) -> Result<&'a Solution, Failure> {
    s.as_ref().map(|s| &s.inner).ok_or_else(|| null("solution"))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn c_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(NpmleStatus::Parse, format!("{name} is not valid UTF-8")))
}

/// Message describing the last failure on this thread; empty after a
/// success. Owned by the library and valid until the next call on the
/// same thread.
#[no_mangle]
pub extern "C" fn npmle_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn npmle_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n` observations into a new sample.
///
/// # Safety
/// `values` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn npmle_sample_new(values: *const f64, n: usize, out: *mut *mut NpmleSample) -> NpmleStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Sample::new(std::slice::from_raw_parts(values, n).to_vec())?;
        write(out, Box::into_raw(Box::new(NpmleSample { inner })), "out")
    })
}

/// Draws `n` observations from the mixture described by `spec` (for
/// example `"gaussian:mean=0,sd=1"`), seeded by `seed`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn npmle_sample_simulate(
    kernel: i32,
    spec: *const c_char,
    n: usize,
    seed: u64,
    out: *mut *mut NpmleSample,
) -> NpmleStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec: MixingSpec = c_str(spec, "spec")?.parse()?;
        let inner = sample_mixture(kernel_from(kernel)?, &spec, n, seed)?;
        write(out, Box::into_raw(Box::new(NpmleSample { inner })), "out")
    })
}

/// Number of observations; 0 for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn npmle_sample_len(sample: *const NpmleSample) -> usize {
    sample.as_ref().map_or(0, |s| s.inner.n())
}

/// Copies the sorted observations into `values`, which holds `capacity`
/// doubles.
///
/// # Safety
/// `sample` must be a live handle and `values` writable for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn npmle_sample_values(sample: *const NpmleSample, values: *mut f64, capacity: usize) -> NpmleStatus {
    guard(|| {
        let s = sample_ref(sample)?;
        copy_out(s.values(), values, capacity, "values")
    })
}

/// # Safety
/// `sample` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn npmle_sample_free(sample: *mut NpmleSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, capacity: usize, name: &str) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(null(name));
    }
    if capacity < src.len() {
        return Err(Failure(
            NpmleStatus::BufferTooSmall,
            format!("{name} holds {capacity} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Default solver options.
#[no_mangle]
pub extern "C" fn npmle_solve_options_default() -> NpmleSolveOptions {
    let d = SolveConfig::default();
    NpmleSolveOptions {
        use_window: 0,
        theta_lo: 0.0,
        theta_hi: 0.0,
        grid_size: d.grid_size,
        kkt_tol: d.kkt_tol,
        max_outer_iters: d.max_outer_iters,
    }
}

/// Fits the NPMLE. `options` may be null for the defaults.
///
/// # Safety
/// `sample` must be a live handle, `options` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn npmle_fit(
    kernel: i32,
    sample: *const NpmleSample,
    options: *const NpmleSolveOptions,
    out: *mut *mut NpmleSolution,
) -> NpmleStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = sample_ref(sample)?;
        let opts = options.as_ref().copied().unwrap_or_else(|| npmle_solve_options_default());
        let config = SolveConfig {
            theta_window: (opts.use_window != 0).then_some((opts.theta_lo, opts.theta_hi)),
            grid_size: opts.grid_size,
            kkt_tol: opts.kkt_tol,
            max_outer_iters: opts.max_outer_iters,
            ..SolveConfig::default()
        };
        let inner = solve_npmle(kernel_from(kernel)?, s, &config)?;
        write(out, Box::into_raw(Box::new(NpmleSolution { inner })), "out")
    })
}

/// Number of atoms; 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn npmle_solution_atom_count(solution: *const NpmleSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.pi_hat.len())
}

/// Copies atoms and weights (sorted by atom) into buffers of `capacity`
/// doubles each.
///
/// # Safety
/// `solution` must be a live handle; `atoms` and `weights` writable for
/// `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn npmle_solution_atoms(
    solution: *const NpmleSolution,
    atoms: *mut f64,
    weights: *mut f64,
    capacity: usize,
) -> NpmleStatus {
    guard(|| {
        let s = solution_ref(solution)?;
        copy_out(s.pi_hat.atoms(), atoms, capacity, "atoms")?;
        copy_out(s.pi_hat.weights(), weights, capacity, "weights")
    })
}

/// Per-observation log-likelihood of the fit.
///
/// # Safety
/// `solution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn npmle_solution_log_likelihood(solution: *const NpmleSolution, out: *mut f64) -> NpmleStatus {
    guard(|| {
        let s = solution_ref(solution)?;
        write(out, s.log_likelihood, "out")
    })
}

/// # Safety
/// `solution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn npmle_solution_certificate(
    solution: *const NpmleSolution,
    out: *mut NpmleCertificate,
) -> NpmleStatus {
    guard(|| {
        let s = solution_ref(solution)?;
        let c = &s.certificate;
        let cert = NpmleCertificate {
            sup_d: c.sup_d,
            gap_bound: c.gap_bound,
            argmax_theta: c.argmax_theta,
            mean_d: c.mean_d,
            min_atom_d: c.min_atom_d,
            window_lo: c.window.0,
            window_hi: c.window.1,
            grid_size_used: c.grid_size_used,
            outer_iters: s.outer_iters,
            converged: s.converged as i32,
        };
        write(out, cert, "out")
    })
}

/// The whole fit as a JSON document; release it with [`npmle_string_free`].
///
/// # Safety
/// `solution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn npmle_solution_to_json(solution: *const NpmleSolution, out: *mut *mut c_char) -> NpmleStatus {
    guard(|| {
        let s = solution_ref(solution)?;
        let text = serde_json::to_string(s).map_err(|e| Failure(NpmleStatus::Internal, e.to_string()))?;
        let c = CString::new(text).map_err(|e| Failure(NpmleStatus::Internal, e.to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `solution` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn npmle_solution_free(solution: *mut NpmleSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn npmle_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Deterministic bound on the number of NPMLE atoms for `sample` under
/// `kernel` (Gaussian: critical-point bound with data re-centred; Poisson:
/// `max(x_max, 1)`; exponential: zero-counting bound).
///
/// # Safety
/// `sample` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn npmle_atom_bound(kernel: i32, sample: *const NpmleSample, out: *mut f64) -> NpmleStatus {
    guard(|| {
        let s = sample_ref(sample)?;
        let bound = match kernel_from(kernel)? {
            Kernel::Gaussian => gaussian_atom_bound(s)?,
            Kernel::Poisson => poisson_atom_bound(s)?.max(1) as f64,
            Kernel::Exponential => exponential_atom_bound(s)?,
        };
        write(out, bound, "out")
    })
}

/// Critical-point bound for a natural-parameter kernel with data in
/// `[x_min, x_max]`: writes `N₁` and the bound.
///
/// # Safety
/// `n1` and `bound` must be writable.
#[no_mangle]
pub unsafe extern "C" fn npmle_crit_bound(
    kernel: i32,
    x_min: f64,
    x_max: f64,
    delta: f64,
    n1: *mut f64,
    bound: *mut f64,
) -> NpmleStatus {
    guard(|| {
        if n1.is_null() || bound.is_null() {
            return Err(null("n1/bound"));
        }
        let rep = crit_bound(kernel_from(kernel)?, x_min, x_max, delta)?;
        write(n1, rep.n1, "n1")?;
        write(bound, rep.bound, "bound")
    })
}
