//! C ABI for the rhoscope measurement library.
//!
//! The surface is small: hand a JSON experiment configuration
//! across the boundary, get back either a single reconstructed element or an
//! opaque matrix handle with accessors. All strings returned to the caller
//! are owned by the caller and must be released with
//! [`rhoscope_string_free`]; handles with [`rhoscope_matrix_free`].
//!
//! Every entry point is panic-safe: panics are caught and surfaced as
//! `RHOSCOPE_PANIC`. A per-thread message describing the most recent failure
//! is available from [`rhoscope_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rhoscope::cli::CliError;
use rhoscope::config::ExperimentConfig;
use rhoscope::pipeline::{Experiment, MatrixEstimate};

/// Status codes returned by every fallible entry point. The numeric values
/// of the first four match the CLI exit codes.
pub const RHOSCOPE_OK: i32 = 0;
pub const RHOSCOPE_VALIDATION: i32 = 2;
pub const RHOSCOPE_NUMERICAL: i32 = 3;
pub const RHOSCOPE_TOLERANCE: i32 = 4;
pub const RHOSCOPE_NULL_ARGUMENT: i32 = 10;
pub const RHOSCOPE_INVALID_UTF8: i32 = 11;
pub const RHOSCOPE_OUT_OF_RANGE: i32 = 12;
pub const RHOSCOPE_PANIC: i32 = 13;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).ok();
    });
}

fn code_for(err: &CliError) -> i32 {
    match err.exit_code() {
        2 => RHOSCOPE_VALIDATION,
        3 => RHOSCOPE_NUMERICAL,
        4 => RHOSCOPE_TOLERANCE,
        _ => RHOSCOPE_NUMERICAL,
    }
}

/// Opaque handle to a reconstructed matrix estimate plus its run report.
pub struct RhoscopeMatrix {
    estimate: MatrixEstimate,
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, i32> {
    if ptr.is_null() {
        set_last_error("null string argument");
        return Err(RHOSCOPE_NULL_ARGUMENT);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        RHOSCOPE_INVALID_UTF8
    })
}

fn run_measurement(config_json: &str) -> Result<MatrixEstimate, i32> {
    let config = ExperimentConfig::from_json(config_json).map_err(|e| {
        set_last_error(&e.to_string());
        RHOSCOPE_VALIDATION
    })?;
    let resolved = config.resolve().map_err(|e| {
        set_last_error(&e.to_string());
        RHOSCOPE_VALIDATION
    })?;
    let mut experiment = Experiment::new(&resolved).map_err(|e| {
        let cli: CliError = e.into();
        set_last_error(&cli.to_string());
        code_for(&cli)
    })?;
    Ok(experiment.measure_full_matrix(&resolved.config))
}

fn guarded<F: FnOnce() -> i32>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_last_error("internal panic");
            RHOSCOPE_PANIC
        }
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn rhoscope_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Measure the full matrix described by a JSON configuration. On success
/// writes a handle to `out` and returns `RHOSCOPE_OK`.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string and `out` a valid
/// pointer; the returned handle must be released with
/// [`rhoscope_matrix_free`].
#[no_mangle]
pub unsafe extern "C" fn rhoscope_matrix_measure(
    config_json: *const c_char,
    out: *mut *mut RhoscopeMatrix,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            set_last_error("null output pointer");
            return RHOSCOPE_NULL_ARGUMENT;
        }
        let text = match unsafe { str_arg(config_json) } {
            Ok(text) => text,
            Err(code) => return code,
        };
        match run_measurement(text) {
            Ok(estimate) => {
                let handle = Box::new(RhoscopeMatrix { estimate });
                unsafe { *out = Box::into_raw(handle) };
                RHOSCOPE_OK
            }
            Err(code) => code,
        }
    })
}

/// Matrix dimension (`n_max + 1`), or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle from [`rhoscope_matrix_measure`].
#[no_mangle]
pub unsafe extern "C" fn rhoscope_matrix_dim(handle: *const RhoscopeMatrix) -> u32 {
    if handle.is_null() {
        return 0;
    }
    unsafe { &*handle }.estimate.dim() as u32
}

/// Read one complex entry.
///
/// # Safety
/// `handle` must be a live handle; `out_re` and `out_im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rhoscope_matrix_entry(
    handle: *const RhoscopeMatrix,
    row: u32,
    col: u32,
    out_re: *mut f64,
    out_im: *mut f64,
) -> i32 {
    guarded(|| {
        if handle.is_null() || out_re.is_null() || out_im.is_null() {
            set_last_error("null argument");
            return RHOSCOPE_NULL_ARGUMENT;
        }
        let matrix = unsafe { &*handle };
        let dim = matrix.estimate.dim() as u32;
        if row >= dim || col >= dim {
            set_last_error("matrix index out of range");
            return RHOSCOPE_OUT_OF_RANGE;
        }
        let value = matrix.estimate.entry(row as usize, col as usize);
        unsafe {
            *out_re = value.re;
            *out_im = value.im;
        }
        RHOSCOPE_OK
    })
}

/// Number of per-element failures recorded in the run report.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rhoscope_matrix_failures(handle: *const RhoscopeMatrix) -> u32 {
    if handle.is_null() {
        return 0;
    }
    unsafe { &*handle }.estimate.report.failures as u32
}

fn to_owned_c_string(text: String) -> *mut c_char {
    match CString::new(text.replace('\0', " ")) {
        Ok(s) => s.into_raw(),
        Err(_) => std::ptr::null_mut(),
    }
}

/// The matrix in the documented JSON form; free with
/// [`rhoscope_string_free`].
///
/// # Safety
/// `handle` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rhoscope_matrix_to_json(handle: *const RhoscopeMatrix) -> *mut c_char {
    if handle.is_null() {
        set_last_error("null handle");
        return std::ptr::null_mut();
    }
    let matrix = unsafe { &*handle };
    to_owned_c_string(rhoscope::fock::matrix_to_json(&matrix.estimate.entries))
}

/// The full run report (config echo, conditioning, probabilities) as JSON;
/// free with [`rhoscope_string_free`].
///
/// # Safety
/// `handle` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rhoscope_matrix_report_json(
    handle: *const RhoscopeMatrix,
) -> *mut c_char {
    if handle.is_null() {
        set_last_error("null handle");
        return std::ptr::null_mut();
    }
    let matrix = unsafe { &*handle };
    match serde_json::to_string_pretty(&matrix.estimate.report) {
        Ok(text) => to_owned_c_string(text),
        Err(e) => {
            set_last_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Release a matrix handle.
///
/// # Safety
/// `handle` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rhoscope_matrix_free(handle: *mut RhoscopeMatrix) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Measure the single element `<n+lambda| rho |n>` described by a JSON
/// configuration. Writes the complex value and the conditioning figure
/// (`|4c|` for off-diagonals, the diagonal divisor otherwise).
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string; output pointers
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn rhoscope_element_measure(
    config_json: *const c_char,
    n: u32,
    lambda: u32,
    out_re: *mut f64,
    out_im: *mut f64,
    out_conditioning: *mut f64,
) -> i32 {
    guarded(|| {
        if out_re.is_null() || out_im.is_null() || out_conditioning.is_null() {
            set_last_error("null output pointer");
            return RHOSCOPE_NULL_ARGUMENT;
        }
        let text = match unsafe { str_arg(config_json) } {
            Ok(text) => text,
            Err(code) => return code,
        };
        let run = || -> Result<rhoscope::pipeline::ElementRecord, i32> {
            let config = ExperimentConfig::from_json(text).map_err(|e| {
                set_last_error(&e.to_string());
                RHOSCOPE_VALIDATION
            })?;
            let resolved = config.resolve().map_err(|e| {
                set_last_error(&e.to_string());
                RHOSCOPE_VALIDATION
            })?;
            let mut experiment = Experiment::new(&resolved).map_err(|e| {
                let cli: CliError = e.into();
                set_last_error(&cli.to_string());
                code_for(&cli)
            })?;
            experiment
                .measure_element(n as usize, lambda as usize)
                .map_err(|e| {
                    let cli: CliError = e.into();
                    set_last_error(&cli.to_string());
                    code_for(&cli)
                })
        };
        match run() {
            Ok(record) => {
                unsafe {
                    *out_re = record.re;
                    *out_im = record.im;
                    *out_conditioning = record.conditioning;
                }
                RHOSCOPE_OK
            }
            Err(code) => code,
        }
    })
}

/// Copy of the most recent error message on this thread, or null if none;
/// free with [`rhoscope_string_free`].
#[no_mangle]
pub extern "C" fn rhoscope_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(message) => to_owned_c_string(message.to_string_lossy().into_owned()),
        None => std::ptr::null_mut(),
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by a rhoscope function; it is
/// invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rhoscope_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
