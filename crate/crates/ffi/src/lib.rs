//! C ABI over `ineqstat`.
//!
//! Every fallible call returns an [`IneqStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and
//! read back with [`ineq_last_error`]. Objects are opaque handles that the
//! caller releases with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ineqstat::distributions::{self, TwoClassModel};
use ineqstat::kinetic::{self, AgentEnsemble, Engine, ExchangeRule, RuleKind};
use ineqstat::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IneqStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Range = 3,
    Config = 4,
    NoIntersection = 5,
    NonPhysical = 6,
    InsufficientData = 7,
    SingularDiffusion = 8,
    Format = 9,
    EmptyJoin = 10,
    Degenerate = 11,
    Io = 12,
    Panic = 13,
}

/// Exchange rule selector for [`ineq_engine_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IneqRule {
    Fixed = 0,
    Uniform = 1,
}

/// Two-class income density.
pub struct IneqModel(TwoClassModel);

/// Money-exchange simulation state.
pub struct IneqEngine(Engine);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> IneqStatus {
    match err {
        Error::Domain(_) => IneqStatus::Domain,
        Error::Range(_) => IneqStatus::Range,
        Error::Config(_) => IneqStatus::Config,
        Error::NoIntersection { .. } => IneqStatus::NoIntersection,
        Error::NonPhysical { .. } => IneqStatus::NonPhysical,
        Error::InsufficientData { .. } => IneqStatus::InsufficientData,
        Error::SingularDiffusion { .. } => IneqStatus::SingularDiffusion,
        Error::Format { .. } | Error::Json(_) => IneqStatus::Format,
        Error::EmptyJoin { .. } => IneqStatus::EmptyJoin,
        Error::MalformedCurve(_) | Error::DegenerateCurve(_) => IneqStatus::Degenerate,
        Error::Io { .. } => IneqStatus::Io,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), IneqStatus>>(f: F) -> IneqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IneqStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside ineqstat");
            IneqStatus::Panic
        }
    }
}

fn check<T>(r: ineqstat::Result<T>) -> Result<T, IneqStatus> {
    r.map_err(|e| {
        set_error(&e.to_string());
        status_of(&e)
    })
}

fn out<T>(p: *mut T, v: T) -> Result<(), IneqStatus> {
    if p.is_null() {
        set_error("null output pointer");
        return Err(IneqStatus::NullPointer);
    }
    // SAFETY: non-null, caller guarantees it points to writable T
    unsafe { p.write(v) };
    Ok(())
}

fn handle<'a, T>(p: *const T) -> Result<&'a T, IneqStatus> {
    // SAFETY: caller passes a handle obtained from this library or null
    unsafe { p.as_ref() }.ok_or_else(|| {
        set_error("null handle");
        IneqStatus::NullPointer
    })
}

fn handle_mut<'a, T>(p: *mut T) -> Result<&'a mut T, IneqStatus> {
    // SAFETY: as in `handle`, and the caller does not alias it
    unsafe { p.as_mut() }.ok_or_else(|| {
        set_error("null handle");
        IneqStatus::NullPointer
    })
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; empty if none failed.
#[no_mangle]
pub extern "C" fn ineq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ineq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn ineq_model_new(t: f64, alpha: f64, r0: f64, model: *mut *mut IneqModel) -> IneqStatus {
    guard(|| {
        let m = check(TwoClassModel::new(t, alpha, r0))?;
        out(model, Box::into_raw(Box::new(IneqModel(m))))
    })
}

/// Releases a model; null is ignored.
#[no_mangle]
pub extern "C" fn ineq_model_free(model: *mut IneqModel) {
    if !model.is_null() {
        // SAFETY: pointer came from `ineq_model_new` and is freed once
        drop(unsafe { Box::from_raw(model) });
    }
}

#[no_mangle]
pub extern "C" fn ineq_model_pdf(model: *const IneqModel, r: f64, value: *mut f64) -> IneqStatus {
    guard(|| {
        let m = handle(model)?;
        out(value, check(m.0.pdf(r))?)
    })
}

/// Complementary CDF `P(income >= r)`.
#[no_mangle]
pub extern "C" fn ineq_model_ccdf(model: *const IneqModel, r: f64, value: *mut f64) -> IneqStatus {
    guard(|| {
        let m = handle(model)?;
        out(value, check(m.0.ccdf(r))?)
    })
}

#[no_mangle]
pub extern "C" fn ineq_model_mean(model: *const IneqModel, value: *mut f64) -> IneqStatus {
    guard(|| {
        let m = handle(model)?;
        out(value, m.0.mean())
    })
}

/// Income `r` with `P(income >= r) = p`.
#[no_mangle]
pub extern "C" fn ineq_model_inverse_ccdf(model: *const IneqModel, p: f64, value: *mut f64) -> IneqStatus {
    guard(|| {
        let m = handle(model)?;
        out(value, check(m.0.inverse_ccdf(p))?)
    })
}

#[no_mangle]
pub extern "C" fn ineq_lorenz_exponential(x: f64, y: *mut f64) -> IneqStatus {
    guard(|| out(y, check(distributions::lorenz_exponential(x))?))
}

#[no_mangle]
pub extern "C" fn ineq_lorenz_two_class(x: f64, f: f64, y: *mut f64) -> IneqStatus {
    guard(|| out(y, check(distributions::lorenz_two_class(x, f))?))
}

/// Boundary between the exponential fit `c1 e^{-r/T}` and the power-law fit
/// `c2 r^{-alpha}`, and the population share above it.
#[no_mangle]
pub extern "C" fn ineq_class_boundary(
    t: f64,
    alpha: f64,
    c1: f64,
    c2: f64,
    r_star: *mut f64,
    upper_fraction: *mut f64,
) -> IneqStatus {
    guard(|| {
        let b = check(distributions::class_boundary(t, alpha, c1, c2))?;
        out(r_star, b.r_star)?;
        out(upper_fraction, b.upper_fraction)
    })
}

/// Engine with `n_agents` agents sharing `total_quanta` equally. `floor`
/// is the lowest allowed balance (0, or negative for debt).
#[no_mangle]
pub extern "C" fn ineq_engine_new(
    n_agents: usize,
    total_quanta: i64,
    rule: IneqRule,
    delta: i64,
    floor: i64,
    seed: u64,
    engine: *mut *mut IneqEngine,
) -> IneqStatus {
    guard(|| {
        let ens = check(AgentEnsemble::new(n_agents, total_quanta))?;
        let kind = match rule {
            IneqRule::Fixed => RuleKind::Fixed,
            IneqRule::Uniform => RuleKind::Uniform,
        };
        let rule = check(ExchangeRule::new(kind, delta, floor))?;
        out(engine, Box::into_raw(Box::new(IneqEngine(Engine::new(ens, rule, seed)))))
    })
}

/// Releases an engine; null is ignored.
#[no_mangle]
pub extern "C" fn ineq_engine_free(engine: *mut IneqEngine) {
    if !engine.is_null() {
        // SAFETY: pointer came from `ineq_engine_new` and is freed once
        drop(unsafe { Box::from_raw(engine) });
    }
}

#[no_mangle]
pub extern "C" fn ineq_engine_run(engine: *mut IneqEngine, steps: u64) -> IneqStatus {
    guard(|| {
        handle_mut(engine)?.0.run(steps);
        Ok(())
    })
}

/// Entropy of the balance histogram with one-quantum bins.
#[no_mangle]
pub extern "C" fn ineq_engine_entropy(engine: *const IneqEngine, value: *mut f64) -> IneqStatus {
    guard(|| {
        let e = handle(engine)?;
        out(value, check(e.0.ensemble().histogram(1).entropy())?)
    })
}

/// Temperature and chemical potential in quanta.
#[no_mangle]
pub extern "C" fn ineq_engine_thermo(
    engine: *const IneqEngine,
    temperature: *mut f64,
    potential: *mut f64,
) -> IneqStatus {
    guard(|| {
        let e = handle(engine)?;
        let (t, mu) = check(kinetic::temperature_and_potential(e.0.ensemble()))?;
        out(temperature, t)?;
        out(potential, mu)
    })
}

/// Recomputed integer sum of all balances.
#[no_mangle]
pub extern "C" fn ineq_engine_balance_sum(engine: *const IneqEngine, sum: *mut i64) -> IneqStatus {
    guard(|| out(sum, handle(engine)?.0.ensemble().balance_sum()))
}

/// Copies up to `capacity` balances into `buffer` and stores the number of
/// agents in `n_agents`. Pass a null buffer to query the count only.
#[no_mangle]
pub extern "C" fn ineq_engine_balances(
    engine: *const IneqEngine,
    buffer: *mut i64,
    capacity: usize,
    n_agents: *mut usize,
) -> IneqStatus {
    guard(|| {
        let b = handle(engine)?.0.ensemble().balances();
        if !buffer.is_null() {
            let n = capacity.min(b.len());
            // SAFETY: caller guarantees `buffer` holds `capacity` elements
            unsafe { ptr::copy_nonoverlapping(b.as_ptr(), buffer, n) };
        }
        out(n_agents, b.len())
    })
}
