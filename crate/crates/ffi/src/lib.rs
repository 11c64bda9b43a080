//! C ABI over the kincal library.
//!
//! Objects cross the boundary as opaque handles created by `kc_*_new`/
//! `kc_*_load` style functions and released with the matching `kc_*_free`.
//! Every fallible function returns a [`KcStatus`]; on failure a message is
//! available from [`kc_last_error`] on the same thread until the next call
//! that fails.
//!
//! Panics never unwind into the caller: they are caught and reported as
//! `KC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use kincal::calibration::PosteriorProblem;
use kincal::config::parse_problem;
use kincal::kinetics::{production_rates, GasState};
use kincal::mechanism::{parse_mechanism, Mechanism};
use kincal::reactor::simulate_case;
use kincal::sampler::Chain;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    SimulationFailed = 4,
    IoError = 5,
    Panic = 6,
}

/// A parsed reaction mechanism.
pub struct KcMechanism {
    inner: Mechanism,
}

/// A posterior problem: mechanism, active parameters, prior and targets.
pub struct KcProblem {
    inner: PosteriorProblem,
}

/// A chain loaded from disk.
pub struct KcChain {
    inner: Chain,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: KcStatus, msg: impl Into<String>) -> KcStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> KcStatus) -> KcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(KcStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, KcStatus> {
    if p.is_null() {
        return Err(fail(KcStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(KcStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn kc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a handle holding the bundled baseline mechanism.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn kc_mechanism_baseline(out: *mut *mut KcMechanism) -> KcStatus {
    guard(|| {
        if out.is_null() {
            return fail(KcStatus::NullPointer, "out is null");
        }
        let h = Box::new(KcMechanism {
            inner: Mechanism::baseline(),
        });
        *out = Box::into_raw(h);
        KcStatus::Ok
    })
}

/// Parses mechanism text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kc_mechanism_parse(
    text: *const c_char,
    out: *mut *mut KcMechanism,
) -> KcStatus {
    guard(|| {
        if out.is_null() {
            return fail(KcStatus::NullPointer, "out is null");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_mechanism(text) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(KcMechanism { inner: m }));
                KcStatus::Ok
            }
            Err(e) => fail(KcStatus::ParseError, e.to_string()),
        }
    })
}

/// Releases a mechanism handle. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kc_mechanism_free(m: *mut KcMechanism) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of species, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kc_mechanism_n_species(m: *const KcMechanism) -> usize {
    m.as_ref().map_or(0, |m| m.inner.n_species())
}

/// Number of reactions (duplicate lines count once), or 0 for null.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kc_mechanism_n_reactions(m: *const KcMechanism) -> usize {
    m.as_ref().map_or(0, |m| m.inner.reactions.len())
}

/// Forward and reverse rate constants and net rates at temperature `t` (K)
/// and concentrations `conc` (mol/cm^3, mechanism species order). Output
/// arrays hold `n_reactions` values each; any of them may be null.
///
/// # Safety
/// `conc` must point to `n_species` doubles and each non-null output to
/// `n_reactions` doubles.
#[no_mangle]
pub unsafe extern "C" fn kc_rates(
    m: *const KcMechanism,
    t: f64,
    conc: *const f64,
    n_species: usize,
    kf: *mut f64,
    kr: *mut f64,
    q: *mut f64,
    n_reactions: usize,
) -> KcStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            return fail(KcStatus::NullPointer, "mechanism is null");
        };
        let mech = &m.inner;
        if conc.is_null() {
            return fail(KcStatus::NullPointer, "conc is null");
        }
        if n_species != mech.n_species() || n_reactions != mech.reactions.len() {
            return fail(KcStatus::InvalidArgument, "array lengths do not match the mechanism");
        }
        if !(t > 0.0) {
            return fail(KcStatus::InvalidArgument, "temperature must be positive");
        }
        for s in &mech.species {
            if let Err(e) = s.thermo_props(t) {
                return fail(KcStatus::InvalidArgument, e.to_string());
            }
        }
        let c = std::slice::from_raw_parts(conc, n_species).to_vec();
        let ev = production_rates(mech, &GasState::new(t, c));
        for (dst, src) in [(kf, &ev.kf), (kr, &ev.kr), (q, &ev.net_rates)] {
            if !dst.is_null() {
                std::slice::from_raw_parts_mut(dst, n_reactions).copy_from_slice(src);
            }
        }
        KcStatus::Ok
    })
}

/// Simulates the single target defined in `case_text` (problem-file
/// grammar) with mechanism `m` and stores the observable in `out`.
///
/// # Safety
/// `case_text` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kc_simulate(
    m: *const KcMechanism,
    case_text: *const c_char,
    out: *mut f64,
) -> KcStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            return fail(KcStatus::NullPointer, "mechanism is null");
        };
        if out.is_null() {
            return fail(KcStatus::NullPointer, "out is null");
        }
        let text = match str_arg(case_text, "case_text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let cfg = match parse_problem(text) {
            Ok(c) => c,
            Err(e) => return fail(KcStatus::ParseError, e.to_string()),
        };
        let [target] = cfg.targets.as_slice() else {
            return fail(KcStatus::InvalidArgument, "case text must define exactly one target");
        };
        if let Err(e) = target.case.validate(&m.inner) {
            return fail(KcStatus::InvalidArgument, e.to_string());
        }
        match simulate_case(&m.inner, &target.case, &cfg.integrator) {
            Ok(v) => {
                *out = v;
                KcStatus::Ok
            }
            Err(e) => fail(KcStatus::SimulationFailed, e.to_string()),
        }
    })
}

/// Builds a posterior problem from problem-file text. The mechanism handle
/// is copied; pass null to use the bundled baseline.
///
/// # Safety
/// `text` must be NUL-terminated; `m` null or live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kc_problem_new(
    text: *const c_char,
    m: *const KcMechanism,
    out: *mut *mut KcProblem,
) -> KcStatus {
    guard(|| {
        if out.is_null() {
            return fail(KcStatus::NullPointer, "out is null");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let cfg = match parse_problem(text) {
            Ok(c) => c,
            Err(e) => return fail(KcStatus::ParseError, e.to_string()),
        };
        let mech = m.as_ref().map_or_else(Mechanism::baseline, |m| m.inner.clone());
        match PosteriorProblem::from_config(mech, &cfg) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(KcProblem { inner: p }));
                KcStatus::Ok
            }
            Err(e) => fail(KcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `p` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kc_problem_free(p: *mut KcProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of active parameters, or 0 for null.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kc_problem_dim(p: *const KcProblem) -> usize {
    p.as_ref().map_or(0, |p| p.inner.dim())
}

/// Prior means of the active parameters.
///
/// # Safety
/// `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kc_problem_prior_means(p: *const KcProblem, out: *mut f64, n: usize) -> KcStatus {
    guard(|| {
        let Some(p) = p.as_ref() else {
            return fail(KcStatus::NullPointer, "problem is null");
        };
        if out.is_null() {
            return fail(KcStatus::NullPointer, "out is null");
        }
        if n != p.inner.dim() {
            return fail(KcStatus::InvalidArgument, "length does not match the problem dimension");
        }
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&p.inner.prior.means());
        KcStatus::Ok
    })
}

/// Log-posterior (up to a constant) at `theta`; −inf outside the prior
/// bounds or when a target simulation fails.
///
/// # Safety
/// `theta` must point to `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kc_problem_log_posterior(
    p: *const KcProblem,
    theta: *const f64,
    n: usize,
    out: *mut f64,
) -> KcStatus {
    guard(|| {
        let Some(p) = p.as_ref() else {
            return fail(KcStatus::NullPointer, "problem is null");
        };
        if theta.is_null() || out.is_null() {
            return fail(KcStatus::NullPointer, "theta or out is null");
        }
        if n != p.inner.dim() {
            return fail(KcStatus::InvalidArgument, "length does not match the problem dimension");
        }
        let theta = std::slice::from_raw_parts(theta, n);
        *out = p.inner.log_posterior(theta);
        KcStatus::Ok
    })
}

/// Loads a chain file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kc_chain_load(path: *const c_char, out: *mut *mut KcChain) -> KcStatus {
    guard(|| {
        if out.is_null() {
            return fail(KcStatus::NullPointer, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Chain::load(Path::new(path)) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(KcChain { inner: c }));
                KcStatus::Ok
            }
            Err(kincal::sampler::SamplerError::Io(e)) => fail(KcStatus::IoError, e.to_string()),
            Err(e) => fail(KcStatus::ParseError, e.to_string()),
        }
    })
}

/// # Safety
/// `c` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kc_chain_free(c: *mut KcChain) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Walker count, parameter count and number of stored records.
///
/// # Safety
/// Output pointers may be null; non-null ones must be writable.
#[no_mangle]
pub unsafe extern "C" fn kc_chain_shape(
    c: *const KcChain,
    walkers: *mut usize,
    dim: *mut usize,
    records: *mut usize,
) -> KcStatus {
    guard(|| {
        let Some(c) = c.as_ref() else {
            return fail(KcStatus::NullPointer, "chain is null");
        };
        for (dst, v) in [
            (walkers, c.inner.n_walkers),
            (dim, c.inner.dim),
            (records, c.inner.stored()),
        ] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        KcStatus::Ok
    })
}

/// Copies the position of `walker` at stored `record` into `out`.
///
/// # Safety
/// `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kc_chain_position(
    c: *const KcChain,
    record: usize,
    walker: usize,
    out: *mut f64,
    n: usize,
) -> KcStatus {
    guard(|| {
        let Some(c) = c.as_ref() else {
            return fail(KcStatus::NullPointer, "chain is null");
        };
        if out.is_null() {
            return fail(KcStatus::NullPointer, "out is null");
        }
        let ch = &c.inner;
        if record >= ch.stored() || walker >= ch.n_walkers || n != ch.dim {
            return fail(KcStatus::InvalidArgument, "index or length out of range");
        }
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(ch.position(record, walker));
        KcStatus::Ok
    })
}
