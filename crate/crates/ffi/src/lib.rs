//! C ABI for clperf.
//!
//! Objects are opaque handles created by `clperf_*_new`/`_load`/`_bundled`
//! functions and released with the matching `_free`. Every fallible call
//! returns a [`ClperfStatus`]; on failure `clperf_last_error()` describes the
//! problem for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use clperf::balance;
use clperf::cache_sim;
use clperf::hierarchy::{predict_level, Level, LevelPrediction};
use clperf::kernel::{load_kernel, KernelDescription};
use clperf::machine::{load_machine, MachineDescription};
use clperf::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClperfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Topology = 5,
    Domain = 6,
    Config = 7,
    Unsupported = 8,
    Sizing = 9,
    Measurement = 10,
    Io = 11,
    OutOfRange = 12,
    Panic = 13,
}

/// Values accepted wherever a `level` argument is taken.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClperfLevel {
    Memory = 0,
    L1 = 1,
    L2 = 2,
    L3 = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClperfBalance {
    pub machine_balance_wf: f64,
    pub algorithmic_balance_wf: f64,
    pub lightspeed: f64,
    pub applicable_peak_gflops: f64,
    pub predicted_gflops: f64,
}

pub struct ClperfMachine(MachineDescription);

pub struct ClperfKernel(KernelDescription);

pub struct ClperfPrediction(LevelPrediction);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ClperfStatus {
    match e {
        Error::Parse { .. } => ClperfStatus::Parse,
        Error::Validation { .. } => ClperfStatus::Validation,
        Error::Topology { .. } => ClperfStatus::Topology,
        Error::Domain(_) => ClperfStatus::Domain,
        Error::Config(_) => ClperfStatus::Config,
        Error::Unsupported(_) => ClperfStatus::Unsupported,
        Error::Sizing(_) => ClperfStatus::Sizing,
        Error::Measurement { .. } => ClperfStatus::Measurement,
        Error::Io { .. } => ClperfStatus::Io,
    }
}

struct Failure(ClperfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ClperfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ClperfStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ClperfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(
            ClperfStatus::NullPointer,
            format!("{what} is NULL"),
        ));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            ClperfStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(ClperfStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(ClperfStatus::NullPointer, format!("{what} is NULL")))
}

fn level_arg(level: u32) -> Result<Level, Failure> {
    match level {
        0 => Ok(Level::Memory),
        1..=255 => Ok(Level::Cache(level as u8)),
        _ => Err(Failure(
            ClperfStatus::OutOfRange,
            format!("level {level} out of range"),
        )),
    }
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn clperf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static string.
#[no_mangle]
pub extern "C" fn clperf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parse a machine description from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clperf_machine_load(
    json: *const c_char,
    out: *mut *mut ClperfMachine,
) -> ClperfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = load_machine(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(ClperfMachine(m)));
        Ok(())
    })
}

/// A bundled machine by name (`core2`, `nehalem`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clperf_machine_bundled(
    name: *const c_char,
    out: *mut *mut ClperfMachine,
) -> ClperfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = match str_arg(name, "name")? {
            "core2" => clperf::bundled::core2(),
            "nehalem" => clperf::bundled::nehalem(),
            other => {
                return Err(Failure(
                    ClperfStatus::Config,
                    format!("no bundled machine `{other}`"),
                ))
            }
        };
        *out = Box::into_raw(Box::new(ClperfMachine(m)));
        Ok(())
    })
}

/// # Safety
/// `machine` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn clperf_machine_free(machine: *mut ClperfMachine) {
    if !machine.is_null() {
        drop(Box::from_raw(machine));
    }
}

/// Core cycles to move one cacheline over the memory bus.
///
/// # Safety
/// `machine` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clperf_machine_memory_cycles_per_cacheline(
    machine: *const ClperfMachine,
    out: *mut f64,
) -> ClperfStatus {
    guard(|| {
        let m = ref_arg(machine, "machine")?;
        *out_arg(out, "out")? = m.0.memory_cycles_per_cacheline();
        Ok(())
    })
}

/// A builtin kernel by name (`load`, `store`, `copy`, `triad`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clperf_kernel_builtin(
    name: *const c_char,
    out: *mut *mut ClperfKernel,
) -> ClperfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let name = str_arg(name, "name")?;
        let k = KernelDescription::builtin(name)
            .ok_or_else(|| Failure(ClperfStatus::Config, format!("no builtin kernel `{name}`")))?;
        *out = Box::into_raw(Box::new(ClperfKernel(k)));
        Ok(())
    })
}

/// Parse a kernel description from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clperf_kernel_load(
    json: *const c_char,
    out: *mut *mut ClperfKernel,
) -> ClperfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let k = load_kernel(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(ClperfKernel(k)));
        Ok(())
    })
}

/// # Safety
/// `kernel` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn clperf_kernel_free(kernel: *mut ClperfKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Predict cycles per cacheline update with the working set in `level`
/// (a [`ClperfLevel`] value).
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clperf_predict(
    machine: *const ClperfMachine,
    kernel: *const ClperfKernel,
    level: u32,
    out: *mut *mut ClperfPrediction,
) -> ClperfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = ref_arg(machine, "machine")?;
        let k = ref_arg(kernel, "kernel")?;
        let p = predict_level(&k.0, &m.0, level_arg(level)?)?;
        *out = Box::into_raw(Box::new(ClperfPrediction(p)));
        Ok(())
    })
}

/// # Safety
/// `prediction` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn clperf_prediction_free(prediction: *mut ClperfPrediction) {
    if !prediction.is_null() {
        drop(Box::from_raw(prediction));
    }
}

/// Unrounded total cycles per cacheline update; NaN for a NULL handle.
///
/// # Safety
/// `prediction` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clperf_prediction_total_cycles(
    prediction: *const ClperfPrediction,
) -> f64 {
    prediction.as_ref().map_or(f64::NAN, |p| p.0.total_f64())
}

/// Total cycles rounded half away from zero; -1 for a NULL handle.
///
/// # Safety
/// `prediction` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clperf_prediction_total_rounded(
    prediction: *const ClperfPrediction,
) -> i64 {
    prediction.as_ref().map_or(-1, |p| p.0.total_cycles_rounded)
}

/// L1 execution cycles; NaN for a NULL handle.
///
/// # Safety
/// `prediction` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clperf_prediction_l1_cycles(prediction: *const ClperfPrediction) -> f64 {
    prediction.as_ref().map_or(f64::NAN, |p| p.0.l1_f64())
}

/// Number of bus transfer terms (0 for L1 or a NULL handle).
///
/// # Safety
/// `prediction` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clperf_prediction_transfer_count(
    prediction: *const ClperfPrediction,
) -> usize {
    prediction
        .as_ref()
        .map_or(0, |p| p.0.transfer_contributions.len())
}

/// Cachelines and cycles of transfer term `index`, innermost bus first.
///
/// # Safety
/// `prediction` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn clperf_prediction_transfer(
    prediction: *const ClperfPrediction,
    index: usize,
    cachelines: *mut u32,
    cycles: *mut f64,
) -> ClperfStatus {
    guard(|| {
        let p = ref_arg(prediction, "prediction")?;
        let t = p.0.transfer_contributions.get(index).ok_or_else(|| {
            Failure(
                ClperfStatus::OutOfRange,
                format!("transfer index {index} out of range"),
            )
        })?;
        *out_arg(cachelines, "cachelines")? = t.cachelines;
        *out_arg(cycles, "cycles")? = t.cycles_f64();
        Ok(())
    })
}

/// Balance prediction `min(1, bm / ba) * peak`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clperf_balance(
    bm: f64,
    ba: f64,
    peak_gflops: f64,
    out: *mut ClperfBalance,
) -> ClperfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let r = balance::balance_prediction(bm, ba, peak_gflops)?;
        *out = ClperfBalance {
            machine_balance_wf: r.machine_balance_wf,
            algorithmic_balance_wf: r.algorithmic_balance_wf,
            lightspeed: r.lightspeed,
            applicable_peak_gflops: r.applicable_peak_gflops,
            predicted_gflops: r.predicted_gflops,
        };
        Ok(())
    })
}

/// Simulated steady-state cachelines per update over bus `crossing`
/// (0 = L2-L1) for a working set sized for `level`.
///
/// # Safety
/// Handles must be live; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn clperf_simulate_kernel(
    machine: *const ClperfMachine,
    kernel: *const ClperfKernel,
    level: u32,
    crossing: usize,
    inward: *mut f64,
    outward: *mut f64,
) -> ClperfStatus {
    guard(|| {
        let m = ref_arg(machine, "machine")?;
        let k = ref_arg(kernel, "kernel")?;
        let inward = out_arg(inward, "inward")?;
        let outward = out_arg(outward, "outward")?;
        let r = cache_sim::simulate_kernel(&k.0, &m.0, level_arg(level)?)?;
        if crossing >= r.crossing_labels.len() {
            return Err(Failure(
                ClperfStatus::OutOfRange,
                format!("crossing {crossing} out of range"),
            ));
        }
        *inward = cache_sim::ratio_to_f64(r.inward_per_update(crossing));
        *outward = cache_sim::ratio_to_f64(r.outward_per_update(crossing));
        Ok(())
    })
}
