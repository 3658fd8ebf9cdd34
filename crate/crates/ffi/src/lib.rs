//! C ABI over the hardening pipeline.
//!
//! A caller creates a session, configures it, and runs `harden`, `analyze` or `diff` on
//! source text. Every entry point returns a [`SolhardenStatus`]; results and the last error
//! message are borrowed from the session and stay valid until the next run or until the
//! session is freed. Panics never cross the boundary.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use solharden::pipeline::{parse_strategies, run_pipeline, PipelineConfig, PipelineError};
use solharden::report::{render_json, DiffSection};
use solharden::vm::{run_scenario, Scenario};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolhardenStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// The source failed to parse; the message carries file and line.
    Syntax = 3,
    /// Unknown strategy name or other bad option.
    Config = 4,
    /// Graph construction, hardening or the time budget failed.
    Pipeline = 5,
    /// The scenario is malformed or could not be replayed.
    Scenario = 6,
    /// The diff classified a benign transaction as BROKEN; results are still available.
    Broken = 7,
    /// An internal panic was caught.
    Internal = 8,
}

/// Opaque session handle.
pub struct SolhardenSession {
    config: PipelineConfig,
    last_error: Option<CString>,
    hardened: Option<CString>,
    report_text: Option<CString>,
    report_json: Option<CString>,
}

impl SolhardenSession {
    fn new() -> Self {
        SolhardenSession {
            config: PipelineConfig::default(),
            last_error: None,
            hardened: None,
            report_text: None,
            report_json: None,
        }
    }

    fn clear(&mut self) {
        self.last_error = None;
        self.hardened = None;
        self.report_text = None;
        self.report_json = None;
    }

    fn fail(&mut self, status: SolhardenStatus, msg: impl Into<String>) -> SolhardenStatus {
        self.last_error = Some(to_cstring(msg.into()));
        status
    }
}

#[derive(Clone, Copy)]
enum Mode {
    Harden,
    Analyze,
}

/// Interior NULs cannot appear in C strings, so they are replaced.
fn to_cstring(s: String) -> CString {
    CString::new(s).unwrap_or_else(|e| {
        let bytes: Vec<u8> = e.into_vec().into_iter().map(|b| if b == 0 { b'?' } else { b }).collect();
        CString::new(bytes).expect("NULs replaced")
    })
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, SolhardenStatus> {
    if p.is_null() {
        return Err(SolhardenStatus::NullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| SolhardenStatus::InvalidUtf8)
}

fn opt_ptr(s: &Option<CString>) -> *const c_char {
    s.as_ref().map_or(ptr::null(), |c| c.as_ptr())
}

fn pipeline_status(e: &PipelineError) -> SolhardenStatus {
    match e {
        PipelineError::Parse(_) => SolhardenStatus::Syntax,
        _ => SolhardenStatus::Pipeline,
    }
}

/// Runs `f` on the session, converting argument errors and panics into statuses.
fn with_session(
    session: *mut SolhardenSession,
    f: impl FnOnce(&mut SolhardenSession) -> Result<SolhardenStatus, (SolhardenStatus, String)>,
) -> SolhardenStatus {
    let Some(s) = (unsafe { session.as_mut() }) else { return SolhardenStatus::NullArgument };
    match catch_unwind(AssertUnwindSafe(|| f(s))) {
        Ok(Ok(status)) => status,
        Ok(Err((status, msg))) => s.fail(status, msg),
        Err(_) => {
            s.clear();
            s.fail(SolhardenStatus::Internal, "internal error")
        }
    }
}

fn arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SolhardenStatus, String)> {
    unsafe { read_str(p) }.map_err(|st| match st {
        SolhardenStatus::NullArgument => (st, format!("{what} is null")),
        _ => (st, format!("{what} is not valid UTF-8")),
    })
}

fn run(
    s: &mut SolhardenSession,
    source: *const c_char,
    name: *const c_char,
    mode: Mode,
    scenario: Option<*const c_char>,
) -> Result<SolhardenStatus, (SolhardenStatus, String)> {
    s.clear();
    if matches!(mode, Mode::Harden) && s.config.strategies.is_empty() {
        return Err((SolhardenStatus::Config, "hardening needs at least one strategy".into()));
    }
    let source = arg(source, "source")?;
    let name = arg(name, "name")?;
    let scenario = match scenario {
        Some(p) => Some(Scenario::from_toml(arg(p, "scenario")?).map_err(|e| (SolhardenStatus::Scenario, e.to_string()))?),
        None => None,
    };
    let out = run_pipeline(source, name, &s.config, matches!(mode, Mode::Analyze))
        .map_err(|e| (pipeline_status(&e), e.diagnostics(name).join("\n")))?;
    let mut report = out.report.clone();
    let mut status = SolhardenStatus::Ok;
    if let (Some(sc), Some(hardened)) = (&scenario, &out.hardened) {
        let d = run_scenario(&out.original, hardened, sc).map_err(|e| (SolhardenStatus::Scenario, e.to_string()))?;
        if d.has_broken() {
            status = SolhardenStatus::Broken;
        }
        report.diff = Some(DiffSection::from(&d));
    }
    s.hardened = out.hardened_source.map(to_cstring);
    s.report_text = Some(to_cstring(report.to_text()));
    s.report_json = Some(to_cstring(render_json(std::slice::from_ref(&report))));
    Ok(status)
}

/// Creates a session with both strategies enabled. Free it with [`solharden_session_free`].
#[no_mangle]
pub extern "C" fn solharden_session_new() -> *mut SolhardenSession {
    Box::into_raw(Box::new(SolhardenSession::new()))
}

/// Frees a session. Passing null is a no-op.
///
/// # Safety
/// `session` must come from [`solharden_session_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn solharden_session_free(session: *mut SolhardenSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Selects strategies from a comma-separated list such as `"reentrancy,integer"`.
///
/// # Safety
/// `session` must be a live handle and `strategies` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn solharden_set_strategies(session: *mut SolhardenSession, strategies: *const c_char) -> SolhardenStatus {
    with_session(session, |s| {
        s.last_error = None;
        let list = arg(strategies, "strategies")?;
        s.config.strategies = parse_strategies(list).map_err(|e| (SolhardenStatus::Config, e))?;
        Ok(SolhardenStatus::Ok)
    })
}

/// Toggles the HCC marker comment on synthesized statements.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn solharden_set_mark_patches(session: *mut SolhardenSession, enabled: bool) -> SolhardenStatus {
    with_session(session, |s| {
        s.config.emit.mark_patches = enabled;
        Ok(SolhardenStatus::Ok)
    })
}

/// Hardens `source`; `name` is used in diagnostics and reports.
///
/// # Safety
/// `session` must be a live handle; `source` and `name` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn solharden_harden(
    session: *mut SolhardenSession,
    source: *const c_char,
    name: *const c_char,
) -> SolhardenStatus {
    with_session(session, |s| run(s, source, name, Mode::Harden, None))
}

/// Detects without producing hardened output.
///
/// # Safety
/// Same as [`solharden_harden`].
#[no_mangle]
pub unsafe extern "C" fn solharden_analyze(
    session: *mut SolhardenSession,
    source: *const c_char,
    name: *const c_char,
) -> SolhardenStatus {
    with_session(session, |s| run(s, source, name, Mode::Analyze, None))
}

/// Hardens `source` and replays the TOML `scenario` on both versions.
///
/// # Safety
/// Same as [`solharden_harden`]; `scenario` must also be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn solharden_diff(
    session: *mut SolhardenSession,
    source: *const c_char,
    name: *const c_char,
    scenario: *const c_char,
) -> SolhardenStatus {
    with_session(session, |s| run(s, source, name, Mode::Harden, Some(scenario)))
}

/// Hardened source from the last run, or null after analysis or failure.
///
/// # Safety
/// `session` must be a live handle. The string is owned by the session.
#[no_mangle]
pub unsafe extern "C" fn solharden_hardened_source(session: *const SolhardenSession) -> *const c_char {
    session.as_ref().map_or(ptr::null(), |s| opt_ptr(&s.hardened))
}

/// Text report from the last successful run, or null.
///
/// # Safety
/// As for [`solharden_hardened_source`].
#[no_mangle]
pub unsafe extern "C" fn solharden_report_text(session: *const SolhardenSession) -> *const c_char {
    session.as_ref().map_or(ptr::null(), |s| opt_ptr(&s.report_text))
}

/// JSON report (an array with one file entry) from the last successful run, or null.
///
/// # Safety
/// As for [`solharden_hardened_source`].
#[no_mangle]
pub unsafe extern "C" fn solharden_report_json(session: *const SolhardenSession) -> *const c_char {
    session.as_ref().map_or(ptr::null(), |s| opt_ptr(&s.report_json))
}

/// Message for the last failed call, or null if it succeeded.
///
/// # Safety
/// As for [`solharden_hardened_source`].
#[no_mangle]
pub unsafe extern "C" fn solharden_last_error(session: *const SolhardenSession) -> *const c_char {
    session.as_ref().map_or(ptr::null(), |s| opt_ptr(&s.last_error))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn solharden_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_nul_is_replaced() {
        assert_eq!(to_cstring("a\0b".into()).to_str().unwrap(), "a?b");
    }

    #[test]
    fn null_session_is_rejected() {
        let src = CString::new("contract C {}").unwrap();
        let status = unsafe { solharden_harden(ptr::null_mut(), src.as_ptr(), src.as_ptr()) };
        assert_eq!(status, SolhardenStatus::NullArgument);
        assert!(unsafe { solharden_last_error(ptr::null()) }.is_null());
    }
}
