//! C ABI over the simulator.
//!
//! Scenarios and run outcomes are opaque handles owned by the caller and
//! released with their `_free` function. Every fallible call returns a
//! [`TownsimStatus`]; on anything but `TOWNSIM_STATUS_OK` the message is available
//! from [`townsim_last_error`] on the same thread. Strings handed out by the
//! library must be released with [`townsim_string_free`].
//!
//! Runs use the built-in scripted oracle, so they need no network and are
//! reproducible from the scenario seed.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use townsim::decision::ScriptedOracle;
use townsim::economy::{final_price, Money, Rate};
use townsim::engine::{self, RunOutcome};
use townsim::world::{load_scenario, RunMode, Scenario};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TownsimStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidScenario = 3,
    InvalidArgument = 4,
    Backend = 5,
    Io = 6,
    Panic = 7,
}

/// Run modes for [`townsim_run`]. Plain integers so an out-of-range value
/// from C is an error rather than undefined behaviour.
pub const TOWNSIM_MODE_DETERMINISTIC: u32 = 0;
pub const TOWNSIM_MODE_PARALLEL: u32 = 1;

/// A validated scenario.
pub struct TownsimScenario(Scenario);

/// The result of one completed run.
pub struct TownsimOutcome(RunOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(TownsimStatus, String);

impl Failure {
    fn new(status: TownsimStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

/// Runs `f`, recording the error message and turning panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TownsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TownsimStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            TownsimStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(TownsimStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(TownsimStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(TownsimStatus::NullArgument, format!("{name} is null")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(TownsimStatus::NullArgument, format!("{name} is null")))
}

fn out_string(out: &mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| Failure::new(TownsimStatus::InvalidArgument, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into the library from this thread.
#[no_mangle]
pub extern "C" fn townsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn townsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn townsim_scenario_load(path: *const c_char, out: *mut *mut TownsimScenario) -> TownsimStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let sc = load_scenario(path).map_err(|e| Failure::new(TownsimStatus::InvalidScenario, e.to_string()))?;
        *out = Box::into_raw(Box::new(TownsimScenario(sc)));
        Ok(())
    })
}

/// Parses and validates a scenario from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn townsim_scenario_from_json(
    json: *const c_char,
    out: *mut *mut TownsimScenario,
) -> TownsimStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let text = str_arg(json, "json")?;
        let sc =
            Scenario::from_json_str(text).map_err(|e| Failure::new(TownsimStatus::InvalidScenario, e.to_string()))?;
        *out = Box::into_raw(Box::new(TownsimScenario(sc)));
        Ok(())
    })
}

/// Overrides the seed.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn townsim_scenario_set_seed(scenario: *mut TownsimScenario, seed: u64) -> TownsimStatus {
    guard(|| {
        mut_arg(scenario, "scenario")?.0.sim.seed = seed;
        Ok(())
    })
}

/// Overrides the number of simulated days.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn townsim_scenario_set_days(scenario: *mut TownsimScenario, days: u32) -> TownsimStatus {
    guard(|| {
        mut_arg(scenario, "scenario")?.0.sim.days = days;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn townsim_scenario_free(scenario: *mut TownsimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario with the scripted oracle. `mode` is one of the
/// `TOWNSIM_MODE_*` constants.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn townsim_run(
    scenario: *const TownsimScenario,
    mode: u32,
    out: *mut *mut TownsimOutcome,
) -> TownsimStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let sc = &ref_arg(scenario, "scenario")?.0;
        let oracle = ScriptedOracle::new(sc.sim.oracle.clone(), sc.sim.seed);
        let mode = match mode {
            TOWNSIM_MODE_DETERMINISTIC => RunMode::Deterministic,
            TOWNSIM_MODE_PARALLEL => RunMode::Parallel,
            m => {
                return Err(Failure::new(
                    TownsimStatus::InvalidArgument,
                    format!("unknown mode {m}"),
                ))
            }
        };
        let outcome =
            engine::run(sc, &oracle, mode).map_err(|e| Failure::new(TownsimStatus::Backend, e.to_string()))?;
        *out = Box::into_raw(Box::new(TownsimOutcome(outcome)));
        Ok(())
    })
}

/// Number of events in the run's log, or 0 for a null handle.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn townsim_outcome_event_count(outcome: *const TownsimOutcome) -> u64 {
    outcome.as_ref().map_or(0, |o| o.0.log.len() as u64)
}

/// Total spent at shops over the run, in cents.
///
/// # Safety
/// `outcome` must be a live handle; `cents` must be writable.
#[no_mangle]
pub unsafe extern "C" fn townsim_outcome_revenue_cents(
    outcome: *const TownsimOutcome,
    cents: *mut i64,
) -> TownsimStatus {
    guard(|| {
        let cents = mut_arg(cents, "cents")?;
        let o = &ref_arg(outcome, "outcome")?.0;
        *cents = o.log.purchases().map(|p| p.final_price).sum::<Money>().cents();
        Ok(())
    })
}

/// The event log as JSON Lines. Free the result with [`townsim_string_free`].
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn townsim_outcome_events_jsonl(
    outcome: *const TownsimOutcome,
    out: *mut *mut c_char,
) -> TownsimStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        out_string(out, ref_arg(outcome, "outcome")?.0.log.to_jsonl())
    })
}

/// The analytics summary as JSON. Free the result with [`townsim_string_free`].
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn townsim_outcome_summary_json(
    outcome: *const TownsimOutcome,
    out: *mut *mut c_char,
) -> TownsimStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let summary = townsim::analytics::Summary::from_log(&ref_arg(outcome, "outcome")?.0.log);
        let json =
            serde_json::to_string_pretty(&summary).map_err(|e| Failure::new(TownsimStatus::Io, e.to_string()))?;
        out_string(out, json)
    })
}

/// Writes the log, memory dump and reports into `dir`, as the CLI does.
///
/// # Safety
/// `outcome` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn townsim_outcome_write(outcome: *const TownsimOutcome, dir: *const c_char) -> TownsimStatus {
    guard(|| {
        let o = &ref_arg(outcome, "outcome")?.0;
        let dir = str_arg(dir, "dir")?;
        townsim::cli::write_outputs(Path::new(dir), o, false)
            .map_err(|e| Failure::new(TownsimStatus::Io, format!("{dir}: {e}")))?;
        Ok(())
    })
}

/// # Safety
/// `outcome` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn townsim_outcome_free(outcome: *mut TownsimOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn townsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Price after a discount given in parts per million, rounded half up.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn townsim_final_price_cents(base_cents: i64, discount_ppm: u32, out: *mut i64) -> TownsimStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let rate =
            Rate::from_ppm(discount_ppm).map_err(|e| Failure::new(TownsimStatus::InvalidArgument, e.to_string()))?;
        let p = final_price(Money::from_cents(base_cents), rate)
            .map_err(|e| Failure::new(TownsimStatus::InvalidArgument, e.to_string()))?;
        *out = p.cents();
        Ok(())
    })
}
