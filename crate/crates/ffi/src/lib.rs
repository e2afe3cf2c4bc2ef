//! C ABI over `fraccons`.
//!
//! Every fallible call returns an [`FcStatus`]; on failure the message is kept
//! per thread and read back with [`fc_last_error`]. Objects cross the boundary
//! as opaque handles that the caller releases with the matching `*_free`.
//! Strings are copied into caller buffers with `snprintf` semantics: the
//! return is the full length without the terminator, and at most `cap - 1`
//! bytes plus a NUL are written.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fraccons::conslaw::ResidualReport;
use fraccons::scenario::{parse_config, reports_csv, run_verify, ScenarioConfig};
use fraccons::tfde::GridFunction;
use fraccons::{selftest, specialfn, Error};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parameter = 3,
    Domain = 4,
    Grid = 5,
    Numeric = 6,
    SingularData = 7,
    Inadmissible = 8,
    Solver = 9,
    Config = 10,
    Io = 11,
    OutOfRange = 12,
    Panic = 13,
}

impl From<&Error> for FcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parameter(_) | Error::ZeroSubstitution => FcStatus::Parameter,
            Error::Domain { .. } => FcStatus::Domain,
            Error::InsufficientGrid(_) | Error::GridMismatch(_) | Error::Shape(_) => FcStatus::Grid,
            Error::GammaPole(_) | Error::NonConvergence { .. } | Error::Range(_) => FcStatus::Numeric,
            Error::SingularData(_) => FcStatus::SingularData,
            Error::Inadmissible { .. } => FcStatus::Inadmissible,
            Error::Solver { .. } => FcStatus::Solver,
            Error::Config(_) => FcStatus::Config,
            Error::Io(_) => FcStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: FcStatus, msg: impl Into<String>) -> FcStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> FcStatus {
    let s = FcStatus::from(&e);
    fail(s, e.to_string())
}

/// Run `f`, turning panics into [`FcStatus::Panic`].
fn guard(f: impl FnOnce() -> FcStatus) -> FcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(FcStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

/// Copy `s` into `buf` (capacity `cap`); returns the full length of `s`.
///
/// # Safety
/// `buf` is null or valid for `cap` bytes.
unsafe fn copy_out(s: &str, buf: *mut c_char, cap: usize) -> usize {
    if !buf.is_null() && cap > 0 {
        let n = s.len().min(cap - 1);
        ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
    }
    s.len()
}

/// Message of the last failed call on this thread, copied like the other
/// string getters; 0 when there is none.
///
/// # Safety
/// `buf` is null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn fc_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(m) => copy_out(m.to_str().unwrap_or(""), buf, cap),
        None => copy_out("", buf, cap),
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// special functions

unsafe fn write_scalar(out: *mut f64, r: fraccons::Result<f64>) -> FcStatus {
    if out.is_null() {
        return fail(FcStatus::NullPointer, "out is null");
    }
    match r {
        Ok(v) => {
            *out = v;
            FcStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Γ(z).
///
/// # Safety
/// `out` is null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fc_gamma(z: f64, out: *mut f64) -> FcStatus {
    guard(|| write_scalar(out, specialfn::gamma(z)))
}

/// Two-parameter Mittag-Leffler function `E_{a,b}(z)`.
///
/// # Safety
/// `out` is null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fc_mittag_leffler(a: f64, b: f64, z: f64, out: *mut f64) -> FcStatus {
    guard(|| write_scalar(out, specialfn::mittag_leffler(a, b, z, &specialfn::SeriesControl::default())))
}

/// Gauss hypergeometric function `₂F₁(a, b; c; z)`.
///
/// # Safety
/// `out` is null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fc_hyp2f1(a: f64, b: f64, c: f64, z: f64, out: *mut f64) -> FcStatus {
    guard(|| write_scalar(out, specialfn::hyp2f1(a, b, c, z)))
}

// ---------------------------------------------------------------------------
// scenarios

/// A validated scenario configuration.
pub struct FcScenario(ScenarioConfig);

/// A space-time field on a grid.
pub struct FcField(GridFunction);

/// Rows of a verification run.
pub struct FcReport {
    rows: Vec<ResidualReport>,
    failures: usize,
}

/// Summary of one report row. `convergence_ratio` is NaN when the row has no
/// coarser partner.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FcReportRow {
    pub n_steps: usize,
    pub n_x: usize,
    pub linf: f64,
    pub l2: f64,
    pub excluded_nodes: usize,
    pub convergence_ratio: f64,
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, FcStatus> {
    if p.is_null() {
        return Err(fail(FcStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(FcStatus::InvalidUtf8, format!("{name}: {e}")))
}

/// Parse and validate a TOML scenario.
///
/// # Safety
/// `toml` is a NUL-terminated string; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fc_scenario_parse(toml: *const c_char, out: *mut *mut FcScenario) -> FcStatus {
    guard(|| {
        if out.is_null() {
            return fail(FcStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let text = match str_arg(toml, "toml") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_config(text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(FcScenario(cfg)));
                FcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `sc` is null or a handle from [`fc_scenario_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fc_scenario_free(sc: *mut FcScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Solve (or sample the exact solution) on `n_steps` time steps.
///
/// # Safety
/// `sc` is a live scenario handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fc_scenario_solve(sc: *const FcScenario, n_steps: usize, out: *mut *mut FcField) -> FcStatus {
    guard(|| {
        if sc.is_null() || out.is_null() {
            return fail(FcStatus::NullPointer, "scenario or out is null");
        }
        *out = ptr::null_mut();
        match (*sc).0.solve(n_steps) {
            Ok(u) => {
                *out = Box::into_raw(Box::new(FcField(u)));
                FcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Run the refinement study of the scenario.
///
/// # Safety
/// `sc` is a live scenario handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fc_scenario_verify(sc: *const FcScenario, out: *mut *mut FcReport) -> FcStatus {
    guard(|| {
        if sc.is_null() || out.is_null() {
            return fail(FcStatus::NullPointer, "scenario or out is null");
        }
        *out = ptr::null_mut();
        match run_verify(&(*sc).0) {
            Ok(o) => {
                *out = Box::into_raw(Box::new(FcReport {
                    rows: o.reports,
                    failures: o.failures.len(),
                }));
                FcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

// ---------------------------------------------------------------------------
// fields

/// # Safety
/// `f` is null or a live field handle.
#[no_mangle]
pub unsafe extern "C" fn fc_field_free(f: *mut FcField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of time nodes and space nodes.
///
/// # Safety
/// `f` is a live field handle; `n_t` and `n_x` are valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fc_field_dims(f: *const FcField, n_t: *mut usize, n_x: *mut usize) -> FcStatus {
    if f.is_null() || n_t.is_null() || n_x.is_null() {
        return fail(FcStatus::NullPointer, "field or dims pointer is null");
    }
    *n_t = (*f).0.time().len();
    *n_x = (*f).0.space().len();
    FcStatus::Ok
}

/// Field values (weight applied), row-major by time node, into `buf` of
/// `len` doubles; `len` must equal `n_t * n_x`.
///
/// # Safety
/// `f` is a live field handle; `buf` is valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fc_field_values(f: *const FcField, buf: *mut f64, len: usize) -> FcStatus {
    guard(|| {
        if f.is_null() || buf.is_null() {
            return fail(FcStatus::NullPointer, "field or buffer is null");
        }
        let m = (*f).0.materialize();
        if m.len() != len {
            return fail(FcStatus::OutOfRange, format!("buffer holds {len} values, field has {}", m.len()));
        }
        for (i, v) in m.iter().enumerate() {
            *buf.add(i) = *v;
        }
        FcStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// reports

/// # Safety
/// `r` is null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn fc_report_free(r: *mut FcReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of rows; 0 for a null handle.
///
/// # Safety
/// `r` is null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn fc_report_len(r: *const FcReport) -> usize {
    if r.is_null() {
        0
    } else {
        (*r).rows.len()
    }
}

/// Number of rows whose refinement ratio missed the threshold.
///
/// # Safety
/// `r` is null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn fc_report_failures(r: *const FcReport) -> usize {
    if r.is_null() {
        0
    } else {
        (*r).failures
    }
}

/// # Safety
/// `r` is a live report handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fc_report_row(r: *const FcReport, i: usize, out: *mut FcReportRow) -> FcStatus {
    if r.is_null() || out.is_null() {
        return fail(FcStatus::NullPointer, "report or out is null");
    }
    let rep = &*r;
    let Some(row) = rep.rows.get(i) else {
        return fail(FcStatus::OutOfRange, format!("row {i} of {}", rep.rows.len()));
    };
    *out = FcReportRow {
        n_steps: row.n_steps,
        n_x: row.n_x,
        linf: row.linf,
        l2: row.l2,
        excluded_nodes: row.excluded_nodes,
        convergence_ratio: row.convergence_ratio.unwrap_or(f64::NAN),
    };
    FcStatus::Ok
}

/// Vector id of row `i`; returns its length, or 0 with an error recorded
/// when `i` is out of range.
///
/// # Safety
/// `r` is a live report handle; `buf` is null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn fc_report_id(r: *const FcReport, i: usize, buf: *mut c_char, cap: usize) -> usize {
    if r.is_null() {
        fail(FcStatus::NullPointer, "report is null");
        return 0;
    }
    let rep = &*r;
    match rep.rows.get(i) {
        Some(row) => copy_out(&row.provenance_id, buf, cap),
        None => {
            fail(FcStatus::OutOfRange, format!("row {i} of {}", rep.rows.len()));
            0
        }
    }
}

/// The report as CSV; returns the full length.
///
/// # Safety
/// `r` is a live report handle; `buf` is null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn fc_report_csv(r: *const FcReport, buf: *mut c_char, cap: usize) -> usize {
    if r.is_null() {
        fail(FcStatus::NullPointer, "report is null");
        return 0;
    }
    match reports_csv(&(*r).rows) {
        Ok(s) => copy_out(&s, buf, cap),
        Err(e) => {
            from_error(e);
            0
        }
    }
}

// ---------------------------------------------------------------------------
// acceptance matrix

/// Run criterion `number` (1-12); `*passed` is set to 1 or 0.
///
/// # Safety
/// `passed` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fc_selftest(number: u8, passed: *mut i32) -> FcStatus {
    guard(|| {
        if passed.is_null() {
            return fail(FcStatus::NullPointer, "passed is null");
        }
        match selftest::run_criterion(number) {
            Ok(r) => {
                *passed = i32::from(r.passed);
                if !r.passed {
                    set_error(r.to_string());
                }
                FcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
