//! C ABI for the delay-Doppler NOMA link simulator.
//!
//! The surface mirrors the CLI: an experiment handle is built from the same
//! TOML the `--config` flag accepts, and each run writes a CSV file. All
//! functions return an integer status (`DDNOMA_OK` on success); on failure a
//! human-readable message is stored per thread and can be fetched with
//! [`ddnoma_last_error`]. Handles are opaque — only this library allocates
//! and frees them.
//!
//! Status codes match the CLI exit codes where the two overlap: 2 for
//! configuration errors, 3 for numeric failures.

use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ddnoma::harness::{
    ambiguity_csv, ber_to_csv, pulses_csv, run_ber, se_report_csv, ExperimentConfig, PulseFamily,
};
use ddnoma::otfs::OtfsConfig;
use ddnoma::Error;

/// Success.
pub const DDNOMA_OK: c_int = 0;
/// A pointer argument was null, or a string argument was not valid UTF-8.
pub const DDNOMA_ERR_ARG: c_int = 1;
/// The configuration was rejected (same class the CLI exits 2 on).
pub const DDNOMA_ERR_CONFIG: c_int = 2;
/// A numeric routine failed (same class the CLI exits 3 on).
pub const DDNOMA_ERR_NUMERIC: c_int = 3;
/// The output file could not be written.
pub const DDNOMA_ERR_IO: c_int = 4;
/// An internal invariant was violated; the handle is still valid but the
/// result must not be trusted. Please report the message as a bug.
pub const DDNOMA_ERR_PANIC: c_int = 5;

thread_local! {
    static LAST_ERROR: std::cell::RefCell<Option<CString>> = const { std::cell::RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let text = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn code_for(err: &Error) -> c_int {
    match err {
        Error::Config(_) => DDNOMA_ERR_CONFIG,
        Error::Numeric(_) => DDNOMA_ERR_NUMERIC,
    }
}

/// Runs `body` with panics converted to `DDNOMA_ERR_PANIC` so unwinding never
/// crosses the C boundary.
fn guarded(body: impl FnOnce() -> c_int) -> c_int {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic with non-string payload".to_string());
            set_error(format!("internal panic: {msg}"));
            DDNOMA_ERR_PANIC
        }
    }
}

/// Reads a required C string argument, recording an error on failure.
///
/// # Safety
/// `ptr` must be null or point at a NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Option<&'a str> {
    if ptr.is_null() {
        set_error(format!("{what} must not be null"));
        return None;
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Some(s),
        Err(_) => {
            set_error(format!("{what} is not valid UTF-8"));
            None
        }
    }
}

fn write_file(path: &str, text: &str) -> c_int {
    match std::fs::write(path, text) {
        Ok(()) => DDNOMA_OK,
        Err(e) => {
            set_error(format!("writing {path}: {e}"));
            DDNOMA_ERR_IO
        }
    }
}

// ---------------------------------------------------------------------------
// Experiment handle
// ---------------------------------------------------------------------------

/// Opaque experiment description. Create with
/// [`ddnoma_experiment_default`] or [`ddnoma_experiment_from_toml`], release
/// with [`ddnoma_experiment_free`].
pub struct DdnomaExperiment {
    cfg: ExperimentConfig,
}

/// Allocates an experiment with the built-in defaults (Hermite scheme, two
/// users, the standard sweep). Never fails. Free with
/// [`ddnoma_experiment_free`].
#[no_mangle]
pub extern "C" fn ddnoma_experiment_default() -> *mut DdnomaExperiment {
    clear_error();
    Box::into_raw(Box::new(DdnomaExperiment {
        cfg: ExperimentConfig::default(),
    }))
}

/// Parses and validates a TOML experiment description (the same text the CLI
/// accepts via `--config`). Returns null on failure; call
/// [`ddnoma_last_error`] for the reason.
///
/// # Safety
/// `text` must be null or point at a NUL-terminated string that stays valid
/// for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn ddnoma_experiment_from_toml(
    text: *const c_char,
) -> *mut DdnomaExperiment {
    clear_error();
    let mut out: *mut DdnomaExperiment = std::ptr::null_mut();
    guarded(|| {
        let Some(text) = read_str(text, "config text") else {
            return DDNOMA_ERR_ARG;
        };
        match ExperimentConfig::from_toml(text).and_then(|cfg| {
            cfg.validate()?;
            Ok(cfg)
        }) {
            Ok(cfg) => {
                out = Box::into_raw(Box::new(DdnomaExperiment { cfg }));
                DDNOMA_OK
            }
            Err(e) => {
                set_error(e.to_string());
                code_for(&e)
            }
        }
    });
    out
}

/// Releases an experiment handle. Passing null is a no-op. Passing the same
/// handle twice, or a pointer not returned by this library, is undefined
/// behaviour.
///
/// # Safety
/// `handle` must be null or a pointer obtained from
/// [`ddnoma_experiment_default`] or [`ddnoma_experiment_from_toml`] that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn ddnoma_experiment_free(handle: *mut DdnomaExperiment) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Runs the Monte-Carlo bit-error-rate sweep described by `handle` and writes
/// the result CSV (with `#` metadata header lines) to `out_path`. Identical
/// configurations and seeds produce byte-identical files.
///
/// # Safety
/// `handle` must be a live pointer from this library; `out_path` must be null
/// or a NUL-terminated string. Both must stay valid for the duration of the
/// call.
#[no_mangle]
pub unsafe extern "C" fn ddnoma_run_ber_csv(
    handle: *const DdnomaExperiment,
    out_path: *const c_char,
) -> c_int {
    clear_error();
    guarded(|| {
        if handle.is_null() {
            set_error("experiment handle must not be null");
            return DDNOMA_ERR_ARG;
        }
        let Some(path) = read_str(out_path, "output path") else {
            return DDNOMA_ERR_ARG;
        };
        let cfg = &(*handle).cfg;
        match run_ber(cfg) {
            Ok(records) => write_file(path, &ber_to_csv(&records, cfg)),
            Err(e) => {
                set_error(e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Computes the self-ambiguity surface of a pulse train on the delay-Doppler
/// lattice and writes it as CSV. `family` is `"rect"`, `"rrc"`, or
/// `"hermite"`; `order` only matters for Hermite, `beta` only for RRC.
///
/// # Safety
/// `family` and `out_path` must be null or NUL-terminated strings valid for
/// the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn ddnoma_ambiguity_csv(
    family: *const c_char,
    order: u32,
    beta: f64,
    m: u32,
    n: u32,
    delta_f_hz: f64,
    sps: u32,
    out_path: *const c_char,
) -> c_int {
    clear_error();
    guarded(|| {
        let Some(family) = read_str(family, "pulse family") else {
            return DDNOMA_ERR_ARG;
        };
        let Some(path) = read_str(out_path, "output path") else {
            return DDNOMA_ERR_ARG;
        };
        let result = family
            .parse::<PulseFamily>()
            .and_then(|fam| {
                let cfg = OtfsConfig::new(m as usize, n as usize, delta_f_hz, sps as usize)?;
                ambiguity_csv(fam, order as usize, beta, &cfg)
            });
        match result {
            Ok(text) => write_file(path, &text),
            Err(e) => {
                set_error(e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Writes the sampled waveform of a pulse train as CSV rows `idx,t_s,re,im`.
/// Arguments follow [`ddnoma_ambiguity_csv`].
///
/// # Safety
/// `family` and `out_path` must be null or NUL-terminated strings valid for
/// the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn ddnoma_pulses_csv(
    family: *const c_char,
    order: u32,
    beta: f64,
    m: u32,
    n: u32,
    delta_f_hz: f64,
    sps: u32,
    out_path: *const c_char,
) -> c_int {
    clear_error();
    guarded(|| {
        let Some(family) = read_str(family, "pulse family") else {
            return DDNOMA_ERR_ARG;
        };
        let Some(path) = read_str(out_path, "output path") else {
            return DDNOMA_ERR_ARG;
        };
        let result = family
            .parse::<PulseFamily>()
            .and_then(|fam| {
                let cfg = OtfsConfig::new(m as usize, n as usize, delta_f_hz, sps as usize)?;
                pulses_csv(fam, order as usize, beta, &cfg)
            });
        match result {
            Ok(text) => write_file(path, &text),
            Err(e) => {
                set_error(e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Writes the spectral-efficiency comparison table (every ordered scheme pair
/// with bits-per-bin rates and their ratio) as CSV. `qam` is the
/// constellation size, `users` the user count, `k` the resource-group size of
/// the sparse-code scheme.
///
/// # Safety
/// `out_path` must be null or a NUL-terminated string valid for the duration
/// of the call.
#[no_mangle]
pub unsafe extern "C" fn ddnoma_se_report_csv(
    qam: u32,
    users: u32,
    k: u32,
    out_path: *const c_char,
) -> c_int {
    clear_error();
    guarded(|| {
        let Some(path) = read_str(out_path, "output path") else {
            return DDNOMA_ERR_ARG;
        };
        match se_report_csv(qam as usize, users as usize, k as usize) {
            Ok(text) => write_file(path, &text),
            Err(e) => {
                set_error(e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Returns the message for the most recent failure on the calling thread, or
/// null if the last call succeeded. The pointer stays valid until the next
/// call into this library from the same thread; copy it if you need to keep
/// it.
#[no_mangle]
pub extern "C" fn ddnoma_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Returns the library version as a static string; never null.
#[no_mangle]
pub extern "C" fn ddnoma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn cstring(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error_text() -> String {
        let ptr = ddnoma_last_error();
        assert!(!ptr.is_null(), "expected an error message to be recorded");
        unsafe { CStr::from_ptr(ptr) }.to_str().unwrap().to_string()
    }

    #[test]
    fn test_default_handle_round_trip() {
        let handle = ddnoma_experiment_default();
        assert!(!handle.is_null(), "default experiment should allocate");
        unsafe { ddnoma_experiment_free(handle) };
    }

    #[test]
    fn test_from_toml_rejects_null_and_bad_config() {
        let null_handle = unsafe { ddnoma_experiment_from_toml(std::ptr::null()) };
        assert!(null_handle.is_null(), "null text must not yield a handle");
        assert!(last_error_text().contains("null"));

        let bad = cstring("scheme = \"scma\"\nqam_order = 16");
        let bad_handle = unsafe { ddnoma_experiment_from_toml(bad.as_ptr()) };
        assert!(bad_handle.is_null(), "invalid config must not yield a handle");
        assert!(
            !last_error_text().is_empty(),
            "config rejection should leave a message"
        );
    }

    #[test]
    fn test_run_ber_csv_writes_deterministic_file() {
        let toml = cstring(
            "scheme = \"pdm\"\nusers = 2\nm = 4\nn = 2\nsps = 4\npaths = 0\n\
             esn0_db = [30.0]\ntrials = 8\nmin_frames = 8\nstop_errors = 0\nseed = 7",
        );
        let handle = unsafe { ddnoma_experiment_from_toml(toml.as_ptr()) };
        assert!(!handle.is_null(), "config should parse: {}", last_error_text());

        let dir = std::env::temp_dir();
        let path_a = dir.join("ddnoma_ffi_test_a.csv");
        let path_b = dir.join("ddnoma_ffi_test_b.csv");
        let c_a = cstring(path_a.to_str().unwrap());
        let c_b = cstring(path_b.to_str().unwrap());

        let code_a = unsafe { ddnoma_run_ber_csv(handle, c_a.as_ptr()) };
        assert_eq!(code_a, DDNOMA_OK, "first run failed: {}", last_error_text());
        let code_b = unsafe { ddnoma_run_ber_csv(handle, c_b.as_ptr()) };
        assert_eq!(code_b, DDNOMA_OK, "second run failed: {}", last_error_text());

        let a = std::fs::read(&path_a).unwrap();
        let b = std::fs::read(&path_b).unwrap();
        assert!(!a.is_empty(), "CSV should not be empty");
        assert_eq!(a, b, "same handle and seed must give byte-identical CSV");

        unsafe { ddnoma_experiment_free(handle) };
        let _ = std::fs::remove_file(path_a);
        let _ = std::fs::remove_file(path_b);
    }

    #[test]
    fn test_run_ber_csv_rejects_null_arguments() {
        let code = unsafe { ddnoma_run_ber_csv(std::ptr::null(), std::ptr::null()) };
        assert_eq!(code, DDNOMA_ERR_ARG, "null handle should be an argument error");
    }

    #[test]
    fn test_ambiguity_csv_codes() {
        let fam = cstring("rect");
        let dir = std::env::temp_dir().join("ddnoma_ffi_amb.csv");
        let path = cstring(dir.to_str().unwrap());
        let code = unsafe {
            ddnoma_ambiguity_csv(fam.as_ptr(), 0, 0.2, 4, 2, 15_000.0, 4, path.as_ptr())
        };
        assert_eq!(code, DDNOMA_OK, "rect ambiguity failed: {}", last_error_text());
        let text = std::fs::read_to_string(&dir).unwrap();
        assert!(
            text.lines().any(|l| l.starts_with("m,n,")),
            "ambiguity CSV should carry its column header"
        );
        let _ = std::fs::remove_file(&dir);

        let bogus = cstring("sinc");
        let code = unsafe {
            ddnoma_ambiguity_csv(bogus.as_ptr(), 0, 0.2, 4, 2, 15_000.0, 4, path.as_ptr())
        };
        assert_eq!(code, DDNOMA_ERR_CONFIG, "unknown family should map to config error");
    }

    #[test]
    fn test_se_report_matches_library_output() {
        let dir = std::env::temp_dir().join("ddnoma_ffi_se.csv");
        let path = cstring(dir.to_str().unwrap());
        let code = unsafe { ddnoma_se_report_csv(4, 4, 4, path.as_ptr()) };
        assert_eq!(code, DDNOMA_OK, "se report failed: {}", last_error_text());
        let text = std::fs::read_to_string(&dir).unwrap();
        assert_eq!(
            text,
            se_report_csv(4, 4, 4).unwrap(),
            "FFI output should match the library function byte for byte"
        );
        let _ = std::fs::remove_file(&dir);
    }

    #[test]
    fn test_version_is_non_empty() {
        let ptr = ddnoma_version();
        assert!(!ptr.is_null());
        let text = unsafe { CStr::from_ptr(ptr) }.to_str().unwrap();
        assert!(!text.is_empty(), "version string should not be empty");
    }
}
