//! C ABI for the `deadline-mdp` library.
//!
//! Specs and solutions are opaque handles created and destroyed by this
//! library. Every fallible function returns a [`DmStatus`]; on failure a
//! message is available from [`dm_last_error_message`] on the same thread.
//! Strings returned through out-parameters are owned by the caller and must
//! be released with [`dm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use deadline_mdp::sim::{run_sim, PolicyImpl, PolicyKind};
use deadline_mdp::{
    build_lp, dual_function, evaluate, extract_policy, parse_spec, solve_lp, Error, LpStatus, OccupationSolution,
    PolicyTable, PriceVector, ProblemSpec,
};

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidSpec = 3,
    SolverFailure = 4,
    InvalidArgument = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A parsed and validated problem instance.
pub struct DmSpec {
    spec: ProblemSpec,
}

/// An optimal LP solution together with its extracted policy.
pub struct DmSolution {
    spec: ProblemSpec,
    solution: OccupationSolution,
    policy: PolicyTable,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> DmStatus {
    match e {
        Error::Syntax { .. } | Error::InvalidSpec(_) | Error::Json(_) => DmStatus::InvalidSpec,
        Error::Solver(_) => DmStatus::SolverFailure,
        _ => DmStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (DmStatus, String)>) -> DmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DmStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside deadline-mdp");
            DmStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (DmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (DmStatus, String) {
    (DmStatus::NullPointer, "null pointer argument".into())
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, (DmStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (DmStatus::InvalidUtf8, e.to_string()))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

/// Message describing the last failure on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn dm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a JSON spec. On success `*out` receives a handle to free with
/// [`dm_spec_free`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dm_spec_parse(json: *const c_char, out: *mut *mut DmSpec) -> DmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let text = read_str(json)?;
        let spec = parse_spec(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(DmSpec { spec }));
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle from [`dm_spec_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dm_spec_free(spec: *mut DmSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Number of nodes, links and flows of a spec.
///
/// # Safety
/// `spec` must be a live handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn dm_spec_shape(
    spec: *const DmSpec,
    nodes: *mut usize,
    links: *mut usize,
    flows: *mut usize,
) -> DmStatus {
    guard(|| {
        let s = &spec.as_ref().ok_or_else(null)?.spec;
        if !nodes.is_null() {
            *nodes = s.num_nodes;
        }
        if !links.is_null() {
            *links = s.links.len();
        }
        if !flows.is_null() {
            *flows = s.flows.len();
        }
        Ok(())
    })
}

/// Solves the LP. On success `*out` receives a handle to free with
/// [`dm_solution_free`].
///
/// # Safety
/// `spec` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dm_solve(spec: *const DmSpec, out: *mut *mut DmSolution) -> DmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let s = &spec.as_ref().ok_or_else(null)?.spec;
        let solution = solve_lp(&build_lp(s).map_err(lib_err)?).map_err(lib_err)?;
        if solution.status != LpStatus::Optimal {
            return Err((DmStatus::SolverFailure, format!("LP is {:?}", solution.status)));
        }
        let policy = extract_policy(&solution, s).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(DmSolution {
            spec: s.clone(),
            solution,
            policy,
        }));
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle from [`dm_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dm_solution_free(sol: *mut DmSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Optimal weighted timely throughput.
///
/// # Safety
/// `sol` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dm_solution_objective(sol: *const DmSolution, out: *mut f64) -> DmStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        *out = s.solution.objective;
        Ok(())
    })
}

/// Copies the node prices into `out[0..len]`. `len` must equal the number
/// of nodes; otherwise `BufferTooSmall` is returned.
///
/// # Safety
/// `sol` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_solution_prices(sol: *const DmSolution, out: *mut f64, len: usize) -> DmStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let prices = &s.solution.prices.node;
        if len < prices.len() {
            return Err((
                DmStatus::BufferTooSmall,
                format!("need room for {} prices, got {len}", prices.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, prices.len()).copy_from_slice(prices);
        Ok(())
    })
}

/// Expected energy per slot at each node under the optimal policy.
///
/// # Safety
/// As for [`dm_solution_prices`].
#[no_mangle]
pub unsafe extern "C" fn dm_solution_node_power(sol: *const DmSolution, out: *mut f64, len: usize) -> DmStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let report = evaluate(&s.spec, &s.policy).map_err(lib_err)?;
        if len < report.node_power.len() {
            return Err((
                DmStatus::BufferTooSmall,
                format!("need room for {} values, got {len}", report.node_power.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, report.node_power.len()).copy_from_slice(&report.node_power);
        Ok(())
    })
}

/// The optimal policy as a JSON array of `{flow, node, ttg, actions}` rows.
///
/// # Safety
/// `sol` must be a live handle and `out` a valid pointer. Free the string
/// with [`dm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn dm_solution_policy_json(sol: *const DmSolution, out: *mut *mut c_char) -> DmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let s = sol.as_ref().ok_or_else(null)?;
        let json = serde_json::to_string(&s.policy.to_rows(&s.spec)).map_err(|e| lib_err(e.into()))?;
        *out = into_c_string(json);
        Ok(())
    })
}

/// Dual function value at the node prices `prices[0..len]`.
///
/// # Safety
/// `spec` must be a live handle, `prices` must point to `len` doubles and
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dm_dual_function(
    spec: *const DmSpec,
    prices: *const f64,
    len: usize,
    out: *mut f64,
) -> DmStatus {
    guard(|| {
        let s = &spec.as_ref().ok_or_else(null)?.spec;
        if prices.is_null() || out.is_null() {
            return Err(null());
        }
        let p = PriceVector::nodal(std::slice::from_raw_parts(prices, len).to_vec());
        *out = dual_function(s, &p).map_err(lib_err)?.value;
        Ok(())
    })
}

/// Simulates `policy` (`optimal`, `truncated-link`, `truncated-peak`,
/// `edf-sp` or `edf-bp`) for `horizon` slots and returns the metrics as
/// JSON.
///
/// # Safety
/// `spec` must be a live handle, `policy` a NUL-terminated string and `out`
/// valid. Free the string with [`dm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn dm_simulate(
    spec: *const DmSpec,
    policy: *const c_char,
    horizon: u64,
    seed: u64,
    out: *mut *mut c_char,
) -> DmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let s = &spec.as_ref().ok_or_else(null)?.spec;
        let kind: PolicyKind = read_str(policy)?.parse().map_err(lib_err)?;
        let p = PolicyImpl::for_spec(kind, s).map_err(lib_err)?;
        let m = run_sim(s, &p, horizon, seed).map_err(lib_err)?;
        let json = serde_json::to_string(&m).map_err(|e| lib_err(e.into()))?;
        *out = into_c_string(json);
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
