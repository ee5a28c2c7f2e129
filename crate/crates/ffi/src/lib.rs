//! C ABI over the reserve-exchange engine.
//!
//! Scenarios are opaque handles created by one of the `rx_scenario_*`
//! constructors and released with [`rx_scenario_free`]. Every fallible call
//! returns an [`RxStatus`]; on failure a message is available from
//! [`rx_last_error`] until the next call on the same thread. Strings returned
//! through out-parameters are owned by the caller and released with
//! [`rx_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use reserve_exchange::allocation::clear_market;
use reserve_exchange::cli::{run, CliError, Command, Flags};
use reserve_exchange::coalition::{least_core_epsilon, LeastCoreOptions, MarketGame};
use reserve_exchange::payments::{mlc_report, vcg_report};
use reserve_exchange::scenario::{Scenario, ScenarioError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidScenario = 5,
    InvalidArgument = 6,
    BufferTooSmall = 7,
    Engine = 8,
    /// `casestudy` ran but a reference check failed; the report is still
    /// returned.
    ReferenceMismatch = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RxMechanism {
    Vcg = 0,
    Mlc = 1,
}

/// Opaque scenario handle.
pub struct RxScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(RxStatus, String);

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let status = match e {
            ScenarioError::Io { .. } => RxStatus::Io,
            ScenarioError::Parse { .. } => RxStatus::Parse,
            ScenarioError::Invalid(_) => RxStatus::InvalidScenario,
        };
        Failure(status, e.to_string())
    }
}

impl From<reserve_exchange::Error> for Failure {
    fn from(e: reserve_exchange::Error) -> Self {
        Failure(RxStatus::Engine, format!("{}: {e}", e.code()))
    }
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = match e {
            CliError::Engine(_) => RxStatus::Engine,
            _ => RxStatus::InvalidArgument,
        };
        Failure(status, format!("{}: {e}", e.code()))
    }
}

/// Runs `f`, turning errors and panics into a status and the thread's last
/// error message.
fn guard(f: impl FnOnce() -> Result<RxStatus, Failure>) -> RxStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
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
            set_error(format!("internal panic: {msg}"));
            RxStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(RxStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(RxStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(s: *const RxScenario) -> Result<&'a Scenario, Failure> {
    s.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| Failure(RxStatus::NullPointer, "scenario handle is null".into()))
}

fn null(what: &str) -> Failure {
    Failure(RxStatus::NullPointer, format!("{what} is null"))
}

unsafe fn store(out: *mut *mut RxScenario, s: Scenario) -> Result<RxStatus, Failure> {
    *out = Box::into_raw(Box::new(RxScenario { inner: s }));
    Ok(RxStatus::Ok)
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses and validates a scenario document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rx_scenario_from_json(
    json: *const c_char,
    out: *mut *mut RxScenario,
) -> RxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(json, "json")?;
        store(out, Scenario::from_json(text)?)
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rx_scenario_load(
    path: *const c_char,
    out: *mut *mut RxScenario,
) -> RxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        store(out, Scenario::load(path)?)
    })
}

/// The bundled case-study scenario.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rx_scenario_casestudy(out: *mut *mut RxScenario) -> RxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        store(out, Scenario::casestudy())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `s` must come from an `rx_scenario_*` constructor and not be used after.
#[no_mangle]
pub unsafe extern "C" fn rx_scenario_free(s: *mut RxScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rx_scenario_area_count(s: *const RxScenario, out: *mut usize) -> RxStatus {
    guard(|| {
        let s = handle(s)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = s.network.area_count();
        Ok(RxStatus::Ok)
    })
}

/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rx_scenario_link_count(s: *const RxScenario, out: *mut usize) -> RxStatus {
    guard(|| {
        let s = handle(s)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = s.network.link_count();
        Ok(RxStatus::Ok)
    })
}

/// SHA-256 hex digest of the scenario document, caller-owned.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rx_scenario_digest(s: *const RxScenario, out: *mut *mut c_char) -> RxStatus {
    guard(|| {
        let s = handle(s)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CString::new(s.digest()).unwrap_or_default().into_raw();
        Ok(RxStatus::Ok)
    })
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Failure(
            RxStatus::BufferTooSmall,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

/// Efficient allocation, in link declaration order, and market value.
///
/// # Safety
/// `allocation` must point to `len` writable doubles, `value` to one.
#[no_mangle]
pub unsafe extern "C" fn rx_clear_market(
    s: *const RxScenario,
    allocation: *mut f64,
    len: usize,
    value: *mut f64,
) -> RxStatus {
    guard(|| {
        let s = handle(s)?;
        let value = value.as_mut().ok_or_else(|| null("value"))?;
        let out = out_slice(allocation, len, s.network.link_count(), "allocation")?;
        let r = clear_market(&s.bids, &s.network, &s.grid)?;
        out.copy_from_slice(r.allocation.fractions());
        *value = r.value;
        Ok(RxStatus::Ok)
    })
}

/// Payments and revealed utilities, in area declaration order.
///
/// # Safety
/// `payments` and `utilities` must each point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rx_payments(
    s: *const RxScenario,
    mechanism: RxMechanism,
    payments: *mut f64,
    utilities: *mut f64,
    len: usize,
) -> RxStatus {
    guard(|| {
        let s = handle(s)?;
        let n = s.network.area_count();
        let p = out_slice(payments, len, n, "payments")?;
        let u = out_slice(utilities, len, n, "utilities")?;
        let game = MarketGame::new(&s.bids, &s.network, &s.grid)?;
        let report = match mechanism {
            RxMechanism::Vcg => vcg_report(&game)?,
            RxMechanism::Mlc => mlc_report(&game, &LeastCoreOptions::default())?,
        };
        p.copy_from_slice(&report.payments());
        u.copy_from_slice(&report.revealed_utilities());
        Ok(RxStatus::Ok)
    })
}

/// Least-core value epsilon* of the bid profile.
///
/// # Safety
/// `epsilon_star` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn rx_least_core(s: *const RxScenario, epsilon_star: *mut f64) -> RxStatus {
    guard(|| {
        let s = handle(s)?;
        let out = epsilon_star.as_mut().ok_or_else(|| null("epsilon_star"))?;
        let game = MarketGame::new(&s.bids, &s.network, &s.grid)?;
        *out = least_core_epsilon(&game, &LeastCoreOptions::default())?.epsilon_star;
        Ok(RxStatus::Ok)
    })
}

/// Runs a command by name and returns the JSON report.
///
/// `s` may be null for `certify-groves` and `casestudy`. `flags_json` may be
/// null or a JSON object with any of `seed`, `samples`, `scale`,
/// `coalition`, `tol`, `tie_break`. On `RX_STATUS_OK` and
/// `RX_STATUS_REFERENCE_MISMATCH`, `*report_json` receives a caller-owned
/// string.
///
/// # Safety
/// String arguments must be NUL-terminated or null as documented;
/// `report_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rx_run(
    command: *const c_char,
    s: *const RxScenario,
    flags_json: *const c_char,
    report_json: *mut *mut c_char,
) -> RxStatus {
    guard(|| {
        if report_json.is_null() {
            return Err(null("report_json"));
        }
        *report_json = ptr::null_mut();
        let command: Command = str_arg(command, "command")?.parse()?;
        let flags: Flags = if flags_json.is_null() {
            Flags::default()
        } else {
            serde_json::from_str(str_arg(flags_json, "flags_json")?)
                .map_err(|e| Failure(RxStatus::InvalidArgument, format!("invalid-flag: {e}")))?
        };
        let scenario = s.as_ref().map(|h| &h.inner);
        let report = run(command, scenario, &flags)?;
        *report_json = CString::new(report.to_json()).unwrap_or_default().into_raw();
        if report.passed() {
            Ok(RxStatus::Ok)
        } else {
            set_error("casestudy: reference check failed");
            Ok(RxStatus::ReferenceMismatch)
        }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `p` must come from this library and not be used after.
#[no_mangle]
pub unsafe extern "C" fn rx_string_free(p: *mut c_char) {
    if !p.is_null() {
        drop(CString::from_raw(p));
    }
}

/// Whether `status` denotes success.
#[no_mangle]
pub extern "C" fn rx_status_ok(status: RxStatus) -> c_int {
    (status == RxStatus::Ok) as c_int
}
