//! C interface to the wavecell solver.
//!
//! The API hands out two opaque handle types: `WcScenario` (a configured
//! simulation) and `WcRun` (a completed run with its time series). Handles
//! are created and destroyed only through this interface.
//!
//! Functions taking pointers are `unsafe` with the usual C contract: handle
//! arguments must be live values returned by this library (or NULL, which
//! is reported as an argument error rather than dereferenced), string
//! arguments must be NUL-terminated, and output pointers must be valid for
//! writes. Within that contract every function is panic-safe: failures
//! return NULL (constructors) or a nonzero status code, and record a
//! thread-local error retrievable through `wc_last_error_code` /
//! `wc_last_error_message`:
//!
//! * 0 — success
//! * 1 — invalid argument (NULL handle, bad UTF-8, index out of range) or
//!   an internal fault
//! * 2 — configuration error (unparsable config text, invalid parameter)
//! * 3 — numerical failure (instability detected during time integration)
//!
//! Codes 2 and 3 match the `wavecell` CLI's process exit codes.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr::{null, null_mut};

use wavecell::scenario::{
    build_block3d, build_block3d_desk, build_plate, build_plate_desk, build_system,
    config_to_scenario, evaluate_at_points, parse_config, run, write_artifacts, IntegratorKind,
    RunArtifacts, ScenarioConfig,
};
use wavecell::spectra::{critical_dt, Scope};
use wavecell::WaveError;

/// Success.
pub const WC_OK: i32 = 0;
/// NULL handle, malformed string, out-of-range index, or internal fault.
pub const WC_ERR_ARGUMENT: i32 = 1;
/// Configuration rejected (same meaning as CLI exit code 2).
pub const WC_ERR_CONFIG: i32 = 2;
/// Numerical failure during integration (same meaning as CLI exit code 3).
pub const WC_ERR_NUMERICAL: i32 = 3;

/// Opaque handle over a configured scenario.
pub struct WcScenario(ScenarioConfig);

/// Opaque handle over a completed run.
pub struct WcRun(RunArtifacts);

thread_local! {
    static LAST_ERROR: RefCell<(i32, CString)> =
        RefCell::new((WC_OK, CString::new("").unwrap()));
}

fn set_error(code: i32, message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = (code, CString::new(sanitized).unwrap());
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| {
        let mut slot = slot.borrow_mut();
        if slot.0 != WC_OK {
            *slot = (WC_OK, CString::new("").unwrap());
        }
    });
}

fn set_wave_error(e: &WaveError) {
    set_error(e.exit_code(), &e.to_string());
}

/// Runs a fallible closure with a panic barrier; maps the three failure
/// layers (panic, solver error, success) onto the error slot.
fn guarded<T>(f: impl FnOnce() -> Result<T, WaveError>) -> Option<T> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(value)) => {
            clear_error();
            Some(value)
        }
        Ok(Err(e)) => {
            set_wave_error(&e);
            None
        }
        Err(_) => {
            set_error(WC_ERR_ARGUMENT, "internal panic");
            None
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, WaveError> {
    if ptr.is_null() {
        return Err(WaveError::config(format!("{what} must not be NULL")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| WaveError::config(format!("{what} is not valid UTF-8")))
}

unsafe fn scenario_ref<'a>(handle: *const WcScenario) -> Option<&'a ScenarioConfig> {
    if handle.is_null() {
        set_error(WC_ERR_ARGUMENT, "scenario handle is NULL");
        return None;
    }
    Some(unsafe { &(*handle).0 })
}

unsafe fn scenario_mut<'a>(handle: *mut WcScenario) -> Option<&'a mut ScenarioConfig> {
    if handle.is_null() {
        set_error(WC_ERR_ARGUMENT, "scenario handle is NULL");
        return None;
    }
    Some(unsafe { &mut (*handle).0 })
}

unsafe fn run_ref<'a>(handle: *const WcRun) -> Option<&'a RunArtifacts> {
    if handle.is_null() {
        set_error(WC_ERR_ARGUMENT, "run handle is NULL");
        return None;
    }
    Some(unsafe { &(*handle).0 })
}

/// Error code of the most recent call on this thread: 0 success, 1 invalid
/// argument or internal fault, 2 configuration error, 3 numerical failure.
#[no_mangle]
pub extern "C" fn wc_last_error_code() -> i32 {
    LAST_ERROR.with(|slot| slot.borrow().0)
}

/// Human-readable message for the most recent failure on this thread; the
/// empty string after a success. The pointer stays valid until the next
/// wavecell call on the same thread.
#[no_mangle]
pub extern "C" fn wc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().1.as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn wc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a built-in scenario: `name` is "plate" (randomized perforated
/// plate, `seed` selects the hole layout) or "block3d" (3-D block with
/// spherical voids, `seed` ignored). Nonzero `desk` selects the small
/// CI-scale mesh. Returns NULL on error.
///
/// # Safety
/// `name` must be NULL or point to a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wc_scenario_builtin(
    name: *const c_char,
    seed: u64,
    desk: bool,
) -> *mut WcScenario {
    let scenario = guarded(|| {
        let name = unsafe { cstr_arg(name, "scenario name") }?;
        match (name, desk) {
            ("plate", false) => Ok(build_plate(seed)),
            ("plate", true) => Ok(build_plate_desk(seed)),
            ("block3d", false) => Ok(build_block3d()),
            ("block3d", true) => Ok(build_block3d_desk()),
            (other, _) => Err(WaveError::config(format!(
                "unknown built-in scenario `{other}` (expected plate, block3d)"
            ))),
        }
    });
    match scenario {
        Some(cfg) => Box::into_raw(Box::new(WcScenario(cfg))),
        None => null_mut(),
    }
}

/// Parses scenario config text (the same `key = value` format the CLI
/// accepts with `--config`) into a scenario. Returns NULL on error.
///
/// # Safety
/// `text` must be NULL or point to a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wc_scenario_from_config(text: *const c_char) -> *mut WcScenario {
    let scenario = guarded(|| {
        let text = unsafe { cstr_arg(text, "config text") }?;
        config_to_scenario(&parse_config(text)?)
    });
    match scenario {
        Some(cfg) => Box::into_raw(Box::new(WcScenario(cfg))),
        None => null_mut(),
    }
}

/// Overrides the time step. Pass a positive value; the default (stability
/// bound times 0.9) is restored by never calling this.
///
/// # Safety
/// `scenario` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wc_scenario_set_dt(scenario: *mut WcScenario, dt: f64) -> i32 {
    let Some(cfg) = (unsafe { scenario_mut(scenario) }) else {
        return WC_ERR_ARGUMENT;
    };
    if !(dt > 0.0 && dt.is_finite()) {
        set_error(WC_ERR_CONFIG, "dt must be positive and finite");
        return WC_ERR_CONFIG;
    }
    cfg.dt = Some(dt);
    clear_error();
    WC_OK
}

/// Selects the integrator: "cdm", "cdm-hrz", "trapezoidal", "imex" or
/// "leapfrog".
///
/// # Safety
/// `scenario` must be NULL or a live handle from this library; `name` must
/// be NULL or point to a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wc_scenario_set_integrator(
    scenario: *mut WcScenario,
    name: *const c_char,
) -> i32 {
    let Some(cfg) = (unsafe { scenario_mut(scenario) }) else {
        return WC_ERR_ARGUMENT;
    };
    match guarded(|| IntegratorKind::parse(unsafe { cstr_arg(name, "integrator name") }?)) {
        Some(kind) => {
            cfg.integrator = kind;
            WC_OK
        }
        None => wc_last_error_code(),
    }
}

/// Sets the substep count used by the leap-frog integrator.
///
/// # Safety
/// `scenario` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wc_scenario_set_substeps(scenario: *mut WcScenario, m: usize) -> i32 {
    let Some(cfg) = (unsafe { scenario_mut(scenario) }) else {
        return WC_ERR_ARGUMENT;
    };
    if m == 0 {
        set_error(WC_ERR_CONFIG, "substep count must be at least 1");
        return WC_ERR_CONFIG;
    }
    cfg.substeps = m;
    clear_error();
    WC_OK
}

/// Assembles the system and reports the critical time steps: the global
/// bound (all modes) into `dt_global`, and the explicit-subsystem bound
/// governing the mixed integrator into `dt_explicit` (NaN when every DOF
/// is implicit). Either output pointer may be NULL to skip it.
///
/// # Safety
/// `scenario` must be NULL or a live handle from this library; the output
/// pointers must each be NULL or valid for writing one double.
#[no_mangle]
pub unsafe extern "C" fn wc_scenario_critical_dt(
    scenario: *const WcScenario,
    dt_global: *mut f64,
    dt_explicit: *mut f64,
) -> i32 {
    let Some(cfg) = (unsafe { scenario_ref(scenario) }) else {
        return WC_ERR_ARGUMENT;
    };
    let result = guarded(|| {
        let (_mesh, sys) = build_system(cfg)?;
        let global = critical_dt(&sys, Scope::Global)?.dt_crit;
        let explicit = if sys.partition.i_d.is_empty() {
            f64::NAN
        } else {
            critical_dt(&sys, Scope::ExplicitSubsystem)?.dt_crit
        };
        Ok((global, explicit))
    });
    match result {
        Some((g, e)) => {
            if !dt_global.is_null() {
                unsafe { *dt_global = g };
            }
            if !dt_explicit.is_null() {
                unsafe { *dt_explicit = e };
            }
            WC_OK
        }
        None => wc_last_error_code(),
    }
}

/// Runs the scenario to completion. Returns a run handle, or NULL on error
/// (configuration problems give code 2, detected instability code 3).
///
/// # Safety
/// `scenario` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wc_scenario_run(scenario: *const WcScenario) -> *mut WcRun {
    let Some(cfg) = (unsafe { scenario_ref(scenario) }) else {
        return null_mut();
    };
    match guarded(|| run(cfg)) {
        Some(artifacts) => Box::into_raw(Box::new(WcRun(artifacts))),
        None => null_mut(),
    }
}

/// Frees a scenario handle. NULL is accepted and ignored.
///
/// # Safety
/// `scenario` must be NULL or a live handle from this library; the handle
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wc_scenario_free(scenario: *mut WcScenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario) });
    }
}

/// Number of degrees of freedom of the assembled system.
///
/// # Safety
/// `run` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wc_run_n_dof(run: *const WcRun) -> usize {
    unsafe { run_ref(run) }.map_or(0, |r| {
        clear_error();
        r.report.n_dof
    })
}

/// Number of time steps taken.
///
/// # Safety
/// `run` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wc_run_n_steps(run: *const WcRun) -> usize {
    unsafe { run_ref(run) }.map_or(0, |r| {
        clear_error();
        r.report.n_steps
    })
}

/// Time step the run actually used.
///
/// # Safety
/// `run` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wc_run_dt(run: *const WcRun) -> f64 {
    unsafe { run_ref(run) }.map_or(f64::NAN, |r| {
        clear_error();
        r.report.dt_used
    })
}

/// Wall-clock seconds spent in factorization plus time stepping.
///
/// # Safety
/// `run` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wc_run_wall_seconds(run: *const WcRun) -> f64 {
    unsafe { run_ref(run) }.map_or(f64::NAN, |r| {
        clear_error();
        r.report.wall_seconds
    })
}

/// Number of receiver traces recorded.
///
/// # Safety
/// `run` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wc_run_n_receivers(run: *const WcRun) -> usize {
    unsafe { run_ref(run) }.map_or(0, |r| {
        clear_error();
        r.traces.len()
    })
}

/// Recorded sample times. Writes the length to `len` (may be NULL) and
/// returns a pointer into the run handle, valid until the handle is freed.
///
/// # Safety
/// `run` must be NULL or a live handle from this library; `len` must be
/// NULL or valid for writing one size value.
#[no_mangle]
pub unsafe extern "C" fn wc_run_times(run: *const WcRun, len: *mut usize) -> *const f64 {
    let Some(r) = (unsafe { run_ref(run) }) else {
        return null();
    };
    clear_error();
    if !len.is_null() {
        unsafe { *len = r.times.len() };
    }
    r.times.as_ptr()
}

/// Trace of receiver `index`, aligned with `wc_run_times`. Returns NULL if
/// the index is out of range.
///
/// # Safety
/// `run` must be NULL or a live handle from this library; `len` must be
/// NULL or valid for writing one size value.
#[no_mangle]
pub unsafe extern "C" fn wc_run_trace(
    run: *const WcRun,
    index: usize,
    len: *mut usize,
) -> *const f64 {
    let Some(r) = (unsafe { run_ref(run) }) else {
        return null();
    };
    let Some(trace) = r.traces.get(index) else {
        set_error(
            WC_ERR_ARGUMENT,
            &format!(
                "receiver index {index} out of range ({} traces)",
                r.traces.len()
            ),
        );
        return null();
    };
    clear_error();
    if !len.is_null() {
        unsafe { *len = trace.len() };
    }
    trace.as_ptr()
}

/// Elastic energy per recorded step, aligned with `wc_run_times`.
///
/// # Safety
/// `run` must be NULL or a live handle from this library; `len` must be
/// NULL or valid for writing one size value.
#[no_mangle]
pub unsafe extern "C" fn wc_run_energies(run: *const WcRun, len: *mut usize) -> *const f64 {
    let Some(r) = (unsafe { run_ref(run) }) else {
        return null();
    };
    clear_error();
    if !len.is_null() {
        unsafe { *len = r.energies.len() };
    }
    r.energies.as_ptr()
}

/// Evaluates the final displacement field at physical point (x, y, z);
/// pass 0 for unused trailing coordinates. Writes the value to `value`.
///
/// # Safety
/// `run` must be NULL or a live handle from this library; `value` must be
/// NULL or valid for writing one double.
#[no_mangle]
pub unsafe extern "C" fn wc_run_field_at(
    run: *const WcRun,
    x: f64,
    y: f64,
    z: f64,
    value: *mut f64,
) -> i32 {
    let Some(r) = (unsafe { run_ref(run) }) else {
        return WC_ERR_ARGUMENT;
    };
    if value.is_null() {
        set_error(WC_ERR_ARGUMENT, "value output pointer is NULL");
        return WC_ERR_ARGUMENT;
    }
    match guarded(|| evaluate_at_points(&r.mesh, &r.state.u, &[[x, y, z]])) {
        Some(values) => {
            unsafe { *value = values[0] };
            WC_OK
        }
        None => wc_last_error_code(),
    }
}

/// Writes receivers.csv, energy.csv, error.csv and report.txt into `dir`
/// (created if missing) — the same artifact set the CLI produces.
///
/// # Safety
/// `run` must be NULL or a live handle from this library; `dir` must be
/// NULL or point to a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wc_run_write_artifacts(run: *const WcRun, dir: *const c_char) -> i32 {
    let Some(r) = (unsafe { run_ref(run) }) else {
        return WC_ERR_ARGUMENT;
    };
    let result = guarded(|| {
        let dir = unsafe { cstr_arg(dir, "output directory") }?;
        write_artifacts(Path::new(dir), &r.times, &r.traces, &r.energies, &r.report)
    });
    match result {
        Some(_files) => WC_OK,
        None => wc_last_error_code(),
    }
}

/// Frees a run handle. NULL is accepted and ignored.
///
/// # Safety
/// `run` must be NULL or a live handle from this library; the handle must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wc_run_free(run: *mut WcRun) {
    if !run.is_null() {
        drop(unsafe { Box::from_raw(run) });
    }
}
