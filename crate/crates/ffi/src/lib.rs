//! C ABI over `scalaw`.
//!
//! Objects are opaque heap handles released with their `*_free` function.
//! Every fallible call returns a [`ScalawStatus`] and writes results through
//! out-pointers; on failure the message is kept per thread and can be fetched
//! with [`scalaw_last_error_message`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use scalaw::{ComputeFrontier, Error, ExperimentDataset, FitConfig, OffsetMode, ScalingLaw};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalawStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Schema = 4,
    FitFailed = 5,
    Domain = 6,
    Panic = 7,
}

pub struct ScalawDataset(ExperimentDataset);
pub struct ScalawLaw(ScalingLaw);
pub struct ScalawFrontier(ComputeFrontier);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScalawLawParams {
    pub a: f64,
    pub b: f64,
    pub e: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScalawFrontierParams {
    pub xi: f64,
    pub g: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub f: f64,
    pub e: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ScalawStatus {
    match e {
        Error::MissingColumn(_) | Error::Row { .. } | Error::EmptyDataset | Error::NoMatchingRecords(_) => ScalawStatus::Schema,
        Error::Parse(_) => ScalawStatus::Parse,
        Error::Unidentifiable(_)
        | Error::TooFewRecords { .. }
        | Error::NoConvergence { .. }
        | Error::AllCandidatesFailed(_)
        | Error::BootstrapUnreliable { .. } => ScalawStatus::FitFailed,
        Error::InvalidArgument(_) | Error::UnknownPreset(_) => ScalawStatus::InvalidArgument,
        _ => ScalawStatus::Domain,
    }
}

/// Runs `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), ScalawStatus>) -> ScalawStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScalawStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            ScalawStatus::Panic
        }
    }
}

fn check<T>(r: scalaw::Result<T>) -> Result<T, ScalawStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, ScalawStatus> {
    p.as_ref().ok_or_else(|| {
        set_error(format!("{what} is null"));
        ScalawStatus::NullPointer
    })
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, ScalawStatus> {
    p.as_mut().ok_or_else(|| {
        set_error(format!("{what} is null"));
        ScalawStatus::NullPointer
    })
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, ScalawStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(ScalawStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not UTF-8"));
        ScalawStatus::Parse
    })
}

/// Message of the last failed call on this thread, or null. Release with
/// [`scalaw_string_free`].
#[no_mangle]
pub extern "C" fn scalaw_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// FLOPs per parameter-token for a preset name (`baseline`, `equivariant_mixed`,
/// `pure_multivector`) or a decimal number.
#[no_mangle]
pub unsafe extern "C" fn scalaw_xi_preset(name: *const c_char, xi_out: *mut f64) -> ScalawStatus {
    guard(|| {
        let name = c_str(name, "name")?;
        *out(xi_out, "xi_out")? = check(scalaw::flops::parse_xi(name))?;
        Ok(())
    })
}

/// Parses experiment CSV text.
#[no_mangle]
pub unsafe extern "C" fn scalaw_dataset_from_csv(csv: *const c_char, dataset_out: *mut *mut ScalawDataset) -> ScalawStatus {
    guard(|| {
        let text = c_str(csv, "csv")?;
        let slot = out(dataset_out, "dataset_out")?;
        let ds = check(scalaw::parse_records(text))?;
        *slot = Box::into_raw(Box::new(ScalawDataset(ds)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_dataset_len(dataset: *const ScalawDataset, len_out: *mut usize) -> ScalawStatus {
    guard(|| {
        *out(len_out, "len_out")? = deref(dataset, "dataset")?.0.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_dataset_free(dataset: *mut ScalawDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_law_new(params: *const ScalawLawParams, law_out: *mut *mut ScalawLaw) -> ScalawStatus {
    guard(|| {
        let p = deref(params, "params")?;
        let slot = out(law_out, "law_out")?;
        let law = check(ScalingLaw::new(p.a, p.b, p.e, p.alpha, p.beta))?;
        *slot = Box::into_raw(Box::new(ScalawLaw(law)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_law_params(law: *const ScalawLaw, params_out: *mut ScalawLawParams) -> ScalawStatus {
    guard(|| {
        let l = deref(law, "law")?.0;
        *out(params_out, "params_out")? = ScalawLawParams { a: l.a, b: l.b, e: l.e, alpha: l.alpha, beta: l.beta };
        Ok(())
    })
}

/// Predicted loss at `n` parameters and `d` tokens.
#[no_mangle]
pub unsafe extern "C" fn scalaw_law_eval(law: *const ScalawLaw, n: f64, d: f64, loss_out: *mut f64) -> ScalawStatus {
    guard(|| {
        let l = deref(law, "law")?;
        *out(loss_out, "loss_out")? = check(l.0.eval(n, d))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_law_free(law: *mut ScalawLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// Fits a law with the default start grid. `objective_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn scalaw_fit(
    dataset: *const ScalawDataset,
    delta: f64,
    free_offset: bool,
    law_out: *mut *mut ScalawLaw,
    objective_out: *mut f64,
) -> ScalawStatus {
    guard(|| {
        let ds = deref(dataset, "dataset")?;
        let slot = out(law_out, "law_out")?;
        let mode = if free_offset { OffsetMode::Free } else { OffsetMode::FixedZero };
        let config = FitConfig::new(delta, mode);
        check(config.validate())?;
        let result = check(scalaw::fit(&ds.0, &config))?;
        if let Some(o) = objective_out.as_mut() {
            *o = result.objective;
        }
        *slot = Box::into_raw(Box::new(ScalawLaw(result.law)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_frontier_derive(law: *const ScalawLaw, xi: f64, frontier_out: *mut *mut ScalawFrontier) -> ScalawStatus {
    guard(|| {
        let l = deref(law, "law")?;
        let slot = out(frontier_out, "frontier_out")?;
        let f = check(scalaw::derive_frontier(&l.0, xi))?;
        *slot = Box::into_raw(Box::new(ScalawFrontier(f)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_frontier_params(frontier: *const ScalawFrontier, params_out: *mut ScalawFrontierParams) -> ScalawStatus {
    guard(|| {
        let f = deref(frontier, "frontier")?.0;
        *out(params_out, "params_out")? = ScalawFrontierParams { xi: f.xi, g: f.g, a: f.a, b: f.b, gamma: f.gamma, f: f.f, e: f.e };
        Ok(())
    })
}

fn positive_budget(budget: f64) -> Result<(), ScalawStatus> {
    if budget.is_finite() && budget > 0.0 {
        Ok(())
    } else {
        set_error(format!("budget must be positive, got {budget}"));
        Err(ScalawStatus::InvalidArgument)
    }
}

unsafe fn frontier_query(
    frontier: *const ScalawFrontier,
    budget: f64,
    value_out: *mut f64,
    q: fn(&ComputeFrontier, f64) -> f64,
) -> ScalawStatus {
    guard(|| {
        let f = deref(frontier, "frontier")?;
        let slot = out(value_out, "value_out")?;
        positive_budget(budget)?;
        *slot = q(&f.0, budget);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_frontier_optimal_params(
    frontier: *const ScalawFrontier,
    budget: f64,
    params_out: *mut f64,
) -> ScalawStatus {
    frontier_query(frontier, budget, params_out, ComputeFrontier::optimal_params)
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_frontier_optimal_tokens(
    frontier: *const ScalawFrontier,
    budget: f64,
    tokens_out: *mut f64,
) -> ScalawStatus {
    frontier_query(frontier, budget, tokens_out, ComputeFrontier::optimal_tokens)
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_frontier_optimal_loss(frontier: *const ScalawFrontier, budget: f64, loss_out: *mut f64) -> ScalawStatus {
    frontier_query(frontier, budget, loss_out, ComputeFrontier::optimal_loss)
}

#[no_mangle]
pub unsafe extern "C" fn scalaw_frontier_free(frontier: *mut ScalawFrontier) {
    if !frontier.is_null() {
        drop(Box::from_raw(frontier));
    }
}
