//! C ABI for the tamp simulator.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns a
//! [`TampStatus`]; the message behind the most recent failure on the calling
//! thread is available from [`tamp_last_error`]. Strings returned by the
//! library are released with [`tamp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tamp::harness::{self, HarnessError, ReportFormat, Transcript};
use tamp::quantum::{self, Certificate, ToyProtocol};
use tamp::structures::{self, MonotoneFamily};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TampStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InadmissibleStructure = 4,
    InvalidScenario = 5,
    ProtocolError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TampReportFormat {
    Text = 0,
    Structured = 1,
}

/// An adversary structure.
pub struct TampStructure(MonotoneFamily);

/// The outcome of a scenario run.
pub struct TampTranscript(Transcript);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("nul bytes removed"));
}

fn fail(status: TampStatus, message: impl Into<String>) -> TampStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> TampStatus) -> TampStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(TampStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, TampStatus> {
    if p.is_null() {
        return Err(fail(TampStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(TampStatus::InvalidUtf8, "argument is not UTF-8"))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

fn harness_status(e: &HarnessError) -> TampStatus {
    match e {
        HarnessError::Parse { .. } => TampStatus::ParseError,
        HarnessError::InadmissibleStructure { .. } => TampStatus::InadmissibleStructure,
        HarnessError::Invalid(_) => TampStatus::InvalidScenario,
    }
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn tamp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses `threshold(n,t)`, `sets(n; ...)` or `access(n; ...)`.
///
/// # Safety
/// `literal` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tamp_structure_parse(literal: *const c_char, out: *mut *mut TampStructure) -> TampStatus {
    guard(|| {
        if out.is_null() {
            return fail(TampStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(literal) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match text.parse::<MonotoneFamily>() {
            Ok(a) => {
                *out = Box::into_raw(Box::new(TampStructure(a)));
                TampStatus::Ok
            }
            Err(e) => fail(TampStatus::ParseError, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must come from [`tamp_structure_parse`] or be null.
#[no_mangle]
pub unsafe extern "C" fn tamp_structure_free(s: *mut TampStructure) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of players, or 0 for a null handle.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tamp_structure_players(s: *const TampStructure) -> u32 {
    s.as_ref().map_or(0, |s| s.0.n() as u32)
}

/// Writes whether the partial and the robust cover conditions hold.
///
/// # Safety
/// `s` must be a live handle; the flags must be writable.
#[no_mangle]
pub unsafe extern "C" fn tamp_structure_admissibility(s: *const TampStructure, partial: *mut bool, robust: *mut bool) -> TampStatus {
    guard(|| {
        let Some(s) = s.as_ref() else { return fail(TampStatus::NullArgument, "null structure") };
        if partial.is_null() || robust.is_null() {
            return fail(TampStatus::NullArgument, "null output pointer");
        }
        *partial = structures::partially_robust_admissible(&s.0);
        *robust = structures::robust_admissible(&s.0);
        TampStatus::Ok
    })
}

/// Canonical literal for the structure; free with [`tamp_string_free`].
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tamp_structure_literal(s: *const TampStructure) -> *mut c_char {
    match s.as_ref() {
        Some(s) => to_c_string(s.0.literal()),
        None => ptr::null_mut(),
    }
}

unsafe fn run_loaded(loaded: Result<harness::Scenario, HarnessError>, out: *mut *mut TampTranscript) -> TampStatus {
    match loaded {
        Ok(s) => {
            *out = Box::into_raw(Box::new(TampTranscript(harness::run_scenario(&s))));
            TampStatus::Ok
        }
        Err(e) => fail(harness_status(&e), e.to_string()),
    }
}

/// Loads and runs scenario text.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tamp_scenario_run(text: *const c_char, out: *mut *mut TampTranscript) -> TampStatus {
    guard(|| {
        if out.is_null() {
            return fail(TampStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        match read_str(text) {
            Ok(t) => run_loaded(harness::load_scenario(t), out),
            Err(s) => s,
        }
    })
}

/// Loads and runs a scenario file; circuit paths resolve against its
/// directory.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tamp_scenario_run_file(path: *const c_char, out: *mut *mut TampTranscript) -> TampStatus {
    guard(|| {
        if out.is_null() {
            return fail(TampStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        match read_str(path) {
            Ok(p) => run_loaded(harness::load_scenario_file(Path::new(p)), out),
            Err(s) => s,
        }
    })
}

/// True when every trial verdict and every aggregate check passed.
///
/// # Safety
/// `t` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tamp_transcript_all_pass(t: *const TampTranscript) -> bool {
    t.as_ref().is_some_and(|t| t.0.all_pass())
}

/// Number of trials in the transcript.
///
/// # Safety
/// `t` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tamp_transcript_trials(t: *const TampTranscript) -> u64 {
    t.as_ref().map_or(0, |t| t.0.verdicts.len() as u64)
}

/// Renders a report; free the string with [`tamp_string_free`].
///
/// # Safety
/// `t` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tamp_transcript_report(t: *const TampTranscript, format: TampReportFormat, out: *mut *mut c_char) -> TampStatus {
    guard(|| {
        let Some(t) = t.as_ref() else { return fail(TampStatus::NullArgument, "null transcript") };
        if out.is_null() {
            return fail(TampStatus::NullArgument, "null output pointer");
        }
        let format = match format {
            TampReportFormat::Text => ReportFormat::Text,
            TampReportFormat::Structured => ReportFormat::Structured,
        };
        *out = to_c_string(harness::report(&t.0, format));
        TampStatus::Ok
    })
}

/// # Safety
/// `t` must come from a `tamp_scenario_run*` call or be null.
#[no_mangle]
pub unsafe extern "C" fn tamp_transcript_free(t: *mut TampTranscript) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Runs the purification attack on a toy protocol (`entangling`,
/// `revealing` or `measure-then-flip`). `flip_fidelity` receives NaN when no
/// flip exists. `report` may be null; otherwise it receives the rendered
/// report.
///
/// # Safety
/// `toy` must be a nul-terminated string; output pointers must be writable
/// (`report` may be null).
#[no_mangle]
pub unsafe extern "C" fn tamp_attack_demo(
    toy: *const c_char,
    trace_distance: *mut f64,
    flip_fidelity: *mut f64,
    distinguishable: *mut bool,
    report: *mut *mut c_char,
) -> TampStatus {
    guard(|| {
        if trace_distance.is_null() || flip_fidelity.is_null() || distinguishable.is_null() {
            return fail(TampStatus::NullArgument, "null output pointer");
        }
        let name = match read_str(toy) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let toy: ToyProtocol = match name.parse() {
            Ok(t) => t,
            Err(e) => return fail(TampStatus::ParseError, e),
        };
        match quantum::mayers_attack_demo(toy) {
            Ok(r) => {
                *trace_distance = r.trace_distance;
                *flip_fidelity = r.flip_fidelity.unwrap_or(f64::NAN);
                *distinguishable = r.certified == Certificate::Distinguishable;
                if !report.is_null() {
                    *report = to_c_string(r.render());
                }
                TampStatus::Ok
            }
            Err(e) => fail(TampStatus::ProtocolError, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn tamp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
