//! C ABI over `momentum_entanglement`.
//!
//! Every fallible function returns a [`MeStatus`]; on failure the message is
//! kept per thread and read back with [`me_last_error_message`]. Grids and
//! Schmidt results are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use momentum_entanglement::amplitude::{amplitude_at, sample_kernel, Budget, JointAmplitudeGrid, Kernel};
use momentum_entanglement::detection::{r_ratio, ConditioningPoint};
use momentum_entanglement::report::{analyze, default_grids, AnalyzeOptions, MeasureOptions};
use momentum_entanglement::schmidt::{schmidt_decompose, SchmidtOptions, SchmidtResult};
use momentum_entanglement::{derive, AtomParams, Error, ErrorClass};

/// Status codes; the nonzero values of the first four match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeStatus {
    Ok = 0,
    Io = 1,
    Config = 2,
    Numerical = 3,
    Budget = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Which default grid [`me_grid_sample`] builds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeGridKind {
    Detection = 0,
    Schmidt = 1,
}

/// Mirrors `AtomParams`; rates in units of `gamma_a`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeAtomParams {
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub omega_12: f64,
    pub epsilon: f64,
    pub coherence_r: f64,
    pub coherence_theta: f64,
    pub eta: f64,
}

impl From<MeAtomParams> for AtomParams {
    fn from(p: MeAtomParams) -> Self {
        AtomParams {
            gamma_a: p.gamma_a,
            gamma_b: p.gamma_b,
            omega_12: p.omega_12,
            epsilon: p.epsilon,
            coherence_r: p.coherence_r,
            coherence_theta: p.coherence_theta,
            eta: p.eta,
        }
    }
}

impl From<AtomParams> for MeAtomParams {
    fn from(p: AtomParams) -> Self {
        MeAtomParams {
            gamma_a: p.gamma_a,
            gamma_b: p.gamma_b,
            omega_12: p.omega_12,
            epsilon: p.epsilon,
            coherence_r: p.coherence_r,
            coherence_theta: p.coherence_theta,
            eta: p.eta,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeReport {
    pub r: f64,
    pub k: f64,
    pub pe: f64,
    pub var_single: f64,
    pub var_coin: f64,
    pub dk0: f64,
    /// 1 when the detection grid resolves the ridge.
    pub detection_adequate: i32,
    /// 1 when the Schmidt grid resolves the ridge.
    pub schmidt_adequate: i32,
}

/// Opaque sampled joint amplitude.
pub struct MeGrid(JointAmplitudeGrid);

/// Opaque Schmidt decomposition.
pub struct MeSchmidt(SchmidtResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MeStatus {
    match e.class() {
        ErrorClass::Config => MeStatus::Config,
        ErrorClass::Numerical => MeStatus::Numerical,
        ErrorClass::Budget => MeStatus::Budget,
        ErrorClass::Io => MeStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), MeStatus>) -> MeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MeStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            MeStatus::Panic
        }
    }
}

fn lift<T>(r: momentum_entanglement::Result<T>) -> Result<T, MeStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn nonnull<'a, T>(p: *const T) -> Result<&'a T, MeStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null pointer argument".into());
        MeStatus::NullPointer
    })
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, MeStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer".into());
        MeStatus::NullPointer
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, 0 if none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn me_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn me_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Fills `out` with the symmetric dark state of splitting `delta`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn me_params_dark_state(delta: f64, eta: f64, out_params: *mut MeAtomParams) -> MeStatus {
    guard(|| {
        *out(out_params)? = AtomParams::dark_state(delta, eta).into();
        Ok(())
    })
}

/// Checks `params`; returns the error class on violation.
///
/// # Safety
/// `params` must be null or point to a valid struct.
#[no_mangle]
pub unsafe extern "C" fn me_params_validate(params: *const MeAtomParams) -> MeStatus {
    guard(|| {
        let p: AtomParams = (*nonnull(params)?).into();
        lift(p.validate())
    })
}

/// Centre and half-width of the narrow ridge in `dq + dk`.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn me_ridge(params: *const MeAtomParams, center: *mut f64, half_width: *mut f64) -> MeStatus {
    guard(|| {
        let p: AtomParams = (*nonnull(params)?).into();
        let ridge = lift(derive(&p))?.ridge();
        *out(center)? = ridge.center;
        *out(half_width)? = ridge.half_width;
        Ok(())
    })
}

/// Unnormalized joint amplitude at one point.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn me_amplitude_at(
    params: *const MeAtomParams,
    dq: f64,
    dk: f64,
    re: *mut f64,
    im: *mut f64,
) -> MeStatus {
    guard(|| {
        let p: AtomParams = (*nonnull(params)?).into();
        let d = lift(derive(&p))?;
        let z = lift(amplitude_at(&d, &p, dq, dk))?;
        *out(re)? = z.re;
        *out(im)? = z.im;
        Ok(())
    })
}

/// Samples the default grid of `kind` at density `scale`. On success the
/// caller owns `*grid` and releases it with [`me_grid_free`].
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn me_grid_sample(
    params: *const MeAtomParams,
    kind: MeGridKind,
    scale: f64,
    grid: *mut *mut MeGrid,
) -> MeStatus {
    guard(|| {
        let slot = out(grid)?;
        *slot = ptr::null_mut();
        let p: AtomParams = (*nonnull(params)?).into();
        let kernel = Kernel::Emission { params: p };
        let (det, sch) = lift(default_grids(&kernel, scale))?;
        let spec = match kind {
            MeGridKind::Detection => det,
            MeGridKind::Schmidt => sch,
        };
        let g = lift(sample_kernel(&kernel, &spec, &Budget::default()))?;
        *slot = Box::into_raw(Box::new(MeGrid(g)));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle from [`me_grid_sample`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn me_grid_free(grid: *mut MeGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn me_grid_dims(grid: *const MeGrid, rows: *mut usize, cols: *mut usize) -> MeStatus {
    guard(|| {
        let g = &nonnull(grid)?.0;
        *out(rows)? = g.n_rows();
        *out(cols)? = g.n_cols();
        Ok(())
    })
}

/// Normalized sample `(i, j)` and its coordinates.
///
/// # Safety
/// Pointers must be null or valid; any of the outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn me_grid_value(
    grid: *const MeGrid,
    i: usize,
    j: usize,
    dq: *mut f64,
    dk: *mut f64,
    re: *mut f64,
    im: *mut f64,
) -> MeStatus {
    guard(|| {
        let g = &nonnull(grid)?.0;
        if i >= g.n_rows() || j >= g.n_cols() {
            set_error(format!("index ({i}, {j}) outside {}x{}", g.n_rows(), g.n_cols()));
            return Err(MeStatus::Config);
        }
        let (q, k) = g.coordinates(i, j);
        let z = g.value(i, j);
        for (p, v) in [(dq, q), (dk, k), (re, z.re), (im, z.im)] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Fedorov ratio conditioned at the peak of the photon marginal.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn me_grid_r_ratio(grid: *const MeGrid, r: *mut f64) -> MeStatus {
    guard(|| {
        let g = &nonnull(grid)?.0;
        *out(r)? = lift(r_ratio(g, ConditioningPoint::PeakOfPhotonMarginal))?.r_ratio;
        Ok(())
    })
}

/// Schmidt decomposition keeping modes down to relative weight `tol`.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn me_schmidt_decompose(grid: *const MeGrid, tol: f64, result: *mut *mut MeSchmidt) -> MeStatus {
    guard(|| {
        let slot = out(result)?;
        *slot = ptr::null_mut();
        let g = &nonnull(grid)?.0;
        let opts = SchmidtOptions {
            tol,
            ..SchmidtOptions::default()
        };
        let res = lift(schmidt_decompose(g, &opts))?;
        *slot = Box::into_raw(Box::new(MeSchmidt(res)));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from [`me_schmidt_decompose`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn me_schmidt_free(result: *mut MeSchmidt) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn me_schmidt_number(result: *const MeSchmidt, k: *mut f64) -> MeStatus {
    guard(|| {
        *out(k)? = nonnull(result)?.0.k;
        Ok(())
    })
}

/// Copies up to `len` normalized eigenvalues, largest first, and stores the
/// number available in `available`.
///
/// # Safety
/// `buf` must be null or point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn me_schmidt_eigenvalues(
    result: *const MeSchmidt,
    buf: *mut f64,
    len: usize,
    available: *mut usize,
) -> MeStatus {
    guard(|| {
        let ev = &nonnull(result)?.0.eigenvalues;
        *out(available)? = ev.len();
        if !buf.is_null() {
            let n = ev.len().min(len);
            ptr::copy_nonoverlapping(ev.as_ptr(), buf, n);
        }
        Ok(())
    })
}

/// Full report at grid density `scale`.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn me_analyze(params: *const MeAtomParams, scale: f64, report: *mut MeReport) -> MeStatus {
    guard(|| {
        let p: AtomParams = (*nonnull(params)?).into();
        let dst = out(report)?;
        let opts = AnalyzeOptions {
            measure: MeasureOptions::default().with_scale(scale),
            convergence: false,
        };
        let rep = lift(analyze(&p, &opts))?;
        let flag = |a: Option<momentum_entanglement::amplitude::Adequacy>| a.map(|a| a.adequate as i32).unwrap_or(1);
        *dst = MeReport {
            r: rep.r,
            k: rep.k,
            pe: rep.pe,
            var_single: rep.variances.var_single,
            var_coin: rep.variances.var_coin,
            dk0: rep.variances.dk0,
            detection_adequate: flag(rep.detection_grid.adequacy),
            schmidt_adequate: flag(rep.schmidt_grid.adequacy),
        };
        Ok(())
    })
}
