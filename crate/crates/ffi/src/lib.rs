//! C interface to `hydrosched`.
//!
//! Instances and solutions are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call
//! returns an [`HsStatus`]; on failure a description is available from
//! [`hs_last_error`] on the same thread until the next failing call.
//! Panics never cross the boundary: they are reported as
//! [`HsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hydrosched::bench::Algorithm;
use hydrosched::heuristic;
use hydrosched::lp::{build_network, solve_lp};
use hydrosched::model::{check_feasibility, Schedule, ScheduleFile, ValleyInstance, DEFAULT_FEASIBILITY_TOL};
use hydrosched::predict::{self, PredictConfig};
use hydrosched::price::{self, PriceDecompConfig};
use hydrosched::HydroError;

/// Result codes of the C interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The instance text or file could not be parsed or failed validation.
    InvalidInstance = 3,
    /// An algorithm parameter was out of range.
    InvalidConfig = 4,
    /// The algorithm ran but returned no feasible schedule.
    NoFeasibleSchedule = 5,
    /// The continuous relaxation has no solution.
    RelaxationInfeasible = 6,
    /// A reservoir index or buffer length did not match the solution.
    OutOfRange = 7,
    Io = 8,
    /// Any other library error.
    Internal = 9,
    /// A panic was caught at the boundary.
    Panic = 10,
}

/// Algorithms available through [`hs_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsAlgorithm {
    /// Continuous relaxation; its schedule is an upper bound, not a plan.
    Lp = 0,
    /// Price decomposition.
    Price = 1,
    /// Interaction prediction.
    Predict = 2,
    /// Relaxation followed by a nearest-schedule sweep.
    Heuristic = 3,
}

impl HsAlgorithm {
    fn from_raw(v: i32) -> Option<Self> {
        [HsAlgorithm::Lp, HsAlgorithm::Price, HsAlgorithm::Predict, HsAlgorithm::Heuristic]
            .into_iter()
            .find(|a| *a as i32 == v)
    }
}

impl From<HsAlgorithm> for Algorithm {
    fn from(a: HsAlgorithm) -> Self {
        match a {
            HsAlgorithm::Lp => Algorithm::Lp,
            HsAlgorithm::Price => Algorithm::Price,
            HsAlgorithm::Predict => Algorithm::Predict,
            HsAlgorithm::Heuristic => Algorithm::Heuristic,
        }
    }
}

/// Opaque valley instance.
pub struct HsInstance(ValleyInstance);

/// Opaque schedule returned by [`hs_solve`].
pub struct HsSolution {
    file: ScheduleFile,
    reservoirs: usize,
    horizon: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(HsStatus, String);

impl From<HydroError> for Failure {
    fn from(e: HydroError) -> Self {
        let status = match &e {
            HydroError::InvalidInstance(_) | HydroError::Dimension { .. } | HydroError::Json(_) => {
                HsStatus::InvalidInstance
            }
            HydroError::InvalidConfig(_) => HsStatus::InvalidConfig,
            HydroError::LpInfeasible { .. } => HsStatus::RelaxationInfeasible,
            HydroError::Io(_) => HsStatus::Io,
            _ => HsStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: HsStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, turning errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            HsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(HsStatus::NullPointer, format!("{name} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(HsStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .map_or_else(|| fail(HsStatus::NullPointer, format!("{name} is null")), Ok)
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .map_or_else(|| fail(HsStatus::NullPointer, format!("{name} is null")), Ok)
}

/// Message of the last failing call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn instance_handle(inst: ValleyInstance, out: &mut *mut HsInstance) -> Result<(), Failure> {
    inst.validate()?;
    *out = Box::into_raw(Box::new(HsInstance(inst)));
    Ok(())
}

/// Parses an instance from JSON text.
///
/// # Safety
///
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_instance_from_json(json: *const c_char, out: *mut *mut HsInstance) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(json, "json")?;
        instance_handle(ValleyInstance::from_json(text)?, out)
    })
}

/// Reads an instance file.
///
/// # Safety
///
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_instance_load(path: *const c_char, out: *mut *mut HsInstance) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        instance_handle(ValleyInstance::load(path)?, out)
    })
}

/// Releases an instance. Null is ignored.
///
/// # Safety
///
/// `instance` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_instance_free(instance: *mut HsInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Number of reservoirs, or 0 for a null handle.
///
/// # Safety
///
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_instance_reservoirs(instance: *const HsInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.num_reservoirs())
}

/// Number of time steps, or 0 for a null handle.
///
/// # Safety
///
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_instance_horizon(instance: *const HsInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.horizon)
}

/// Upper bound on the gain from the continuous relaxation.
///
/// # Safety
///
/// `instance` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_lp_bound(instance: *const HsInstance, out: *mut f64) -> HsStatus {
    guard(|| {
        let inst = &ref_arg(instance, "instance")?.0;
        let out = out_arg(out, "out")?;
        *out = solve_lp(inst, &build_network(inst))?.gain;
        Ok(())
    })
}

fn run_algorithm(inst: &ValleyInstance, algo: HsAlgorithm, max_iters: u32) -> Result<ScheduleFile, Failure> {
    let iters = (max_iters > 0).then_some(max_iters as usize);
    let (schedule, gain, relaxation): (Option<Schedule>, Option<f64>, bool) = match algo {
        HsAlgorithm::Lp => {
            let sol = solve_lp(inst, &build_network(inst))?;
            (Some(sol.schedule), Some(sol.gain), true)
        }
        HsAlgorithm::Price => {
            let mut cfg = PriceDecompConfig::default();
            if let Some(k) = iters {
                cfg.max_iters = k;
            }
            let r = price::run(inst, &cfg)?;
            (r.best, r.best_gain, false)
        }
        HsAlgorithm::Predict => {
            let mut cfg = PredictConfig::default();
            if let Some(k) = iters {
                cfg.max_iters = k;
            }
            let r = predict::run(inst, &cfg)?;
            (r.best, r.best_gain, false)
        }
        HsAlgorithm::Heuristic => {
            let r = heuristic::run(inst)?;
            (r.schedule, r.gain, false)
        }
    };
    let (Some(schedule), Some(gain)) = (schedule, gain) else {
        return fail(HsStatus::NoFeasibleSchedule, "no feasible schedule found");
    };
    let feasible = check_feasibility(inst, &schedule, DEFAULT_FEASIBILITY_TOL)?.feasible;
    Ok(ScheduleFile {
        instance: inst.name.clone(),
        algorithm: Algorithm::from(algo).name().to_string(),
        relaxation,
        feasible,
        gain,
        schedule,
    })
}

/// Solves `instance` with `algorithm`, one of the [`HsAlgorithm`] values
/// (anything else gives [`HsStatus::InvalidConfig`]). `max_iters` caps the iterations of
/// the iterative methods; 0 keeps the default. Returns
/// [`HsStatus::NoFeasibleSchedule`] and a null `out` when nothing feasible
/// was found.
///
/// # Safety
///
/// `instance` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_solve(
    instance: *const HsInstance,
    algorithm: i32,
    max_iters: u32,
    out: *mut *mut HsSolution,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inst = &ref_arg(instance, "instance")?.0;
        let Some(algorithm) = HsAlgorithm::from_raw(algorithm) else {
            return fail(HsStatus::InvalidConfig, format!("unknown algorithm {algorithm}"));
        };
        let file = run_algorithm(inst, algorithm, max_iters)?;
        *out = Box::into_raw(Box::new(HsSolution {
            file,
            reservoirs: inst.num_reservoirs(),
            horizon: inst.horizon,
        }));
        Ok(())
    })
}

/// Releases a solution. Null is ignored.
///
/// # Safety
///
/// `solution` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_solution_free(solution: *mut HsSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Gain of the schedule (the bound for the relaxation), NaN for null.
///
/// # Safety
///
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_solution_gain(solution: *const HsSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.file.gain)
}

/// 1 when the schedule passes the feasibility check, 0 otherwise or for
/// null.
///
/// # Safety
///
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_solution_feasible(solution: *const HsSolution) -> c_int {
    solution.as_ref().map_or(0, |s| c_int::from(s.file.feasible))
}

unsafe fn copy_row(
    solution: *const HsSolution,
    reservoir: usize,
    buf: *mut f64,
    len: usize,
    pick: impl Fn(&Schedule) -> &Vec<Vec<f64>>,
    extra: usize,
) -> HsStatus {
    guard(|| {
        let s = ref_arg(solution, "solution")?;
        if buf.is_null() {
            return fail(HsStatus::NullPointer, "buf is null");
        }
        if reservoir >= s.reservoirs {
            return fail(
                HsStatus::OutOfRange,
                format!("reservoir {reservoir} out of range ({} reservoirs)", s.reservoirs),
            );
        }
        let want = s.horizon + extra;
        if len != want {
            return fail(HsStatus::OutOfRange, format!("buffer holds {len} values, {want} required"));
        }
        let row = &pick(&s.file.schedule)[reservoir];
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(row);
        Ok(())
    })
}

/// Copies the discharges of one reservoir into `buf`, which must hold
/// exactly `horizon` values.
///
/// # Safety
///
/// `solution` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hs_solution_discharge(
    solution: *const HsSolution,
    reservoir: usize,
    buf: *mut f64,
    len: usize,
) -> HsStatus {
    copy_row(solution, reservoir, buf, len, |s| &s.discharge, 0)
}

/// Copies the spillages of one reservoir; `len` must equal `horizon`.
///
/// # Safety
///
/// `solution` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hs_solution_spillage(
    solution: *const HsSolution,
    reservoir: usize,
    buf: *mut f64,
    len: usize,
) -> HsStatus {
    copy_row(solution, reservoir, buf, len, |s| &s.spillage, 0)
}

/// Copies the volumes of one reservoir, initial volume first; `len` must
/// equal `horizon + 1`.
///
/// # Safety
///
/// `solution` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hs_solution_volume(
    solution: *const HsSolution,
    reservoir: usize,
    buf: *mut f64,
    len: usize,
) -> HsStatus {
    copy_row(solution, reservoir, buf, len, |s| &s.volume, 1)
}

/// Serializes the solution in the schedule file format. Free the string
/// with [`hs_string_free`].
///
/// # Safety
///
/// `solution` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_solution_to_json(solution: *const HsSolution, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = ref_arg(solution, "solution")?;
        let text = serde_json::to_string_pretty(&s.file).map_err(HydroError::from)?;
        *out = CString::new(text)
            .or_else(|_| fail(HsStatus::Internal, "JSON contains NUL"))?
            .into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
///
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
