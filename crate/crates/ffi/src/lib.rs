//! C ABI over `ccmeasure`.
//!
//! Every fallible call returns a [`CcmStatus`]; on failure the message is
//! available from [`ccm_last_error`] on the same thread until the next
//! failing call. Handles are opaque and must be released with their `_free`
//! function. Arrays are passed as pointer plus length; matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ccmeasure::config::RunConfig;
use ccmeasure::lp::{
    pair_enumeration_oracle, solve_ccp_baseline_q, solve_sample_lp, BaselineSolution, LpSolution, LpStatus,
};
use ccmeasure::pipeline::run_solve;
use ccmeasure::problem::lookup;
use ccmeasure::sampling::{DecisionSampleSet, SampleOrigin, ScenarioSampleSet};
use ccmeasure::satisfaction::{build_matrix, std_normal_cdf};
use ccmeasure::validation::wilson_interval;
use ccmeasure::{Error, Problem};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CcmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Config = 4,
    Infeasible = 5,
    Numeric = 6,
    DegenerateSupport = 7,
    Io = 8,
    Panic = 9,
}

/// A registered optimization problem.
pub struct CcmProblem {
    inner: Problem,
}

/// Result of a sample-LP solve.
pub struct CcmLpSolution {
    inner: LpSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> CcmStatus {
    match err {
        Error::Domain(_) => CcmStatus::Domain,
        Error::Config(_) => CcmStatus::Config,
        Error::Infeasible(_) | Error::GmmInfeasible(_) => CcmStatus::Infeasible,
        Error::Numeric(_) => CcmStatus::Numeric,
        Error::DegenerateSupport { .. } => CcmStatus::DegenerateSupport,
        Error::Io(_) => CcmStatus::Io,
    }
}

struct Fail(CcmStatus, String);

impl From<Error> for Fail {
    fn from(err: Error) -> Self {
        Fail(status_of(&err), err.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(CcmStatus::NullArgument, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CcmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CcmStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CcmStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn write<T>(p: *mut T, value: T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    p.write(value);
    Ok(())
}

fn rows(flat: &[f64], dim: usize) -> Vec<Vec<f64>> {
    flat.chunks_exact(dim).map(<[f64]>::to_vec).collect()
}

fn check_len(got: usize, want: usize, name: &str) -> Result<(), Fail> {
    if got != want {
        return Err(Fail(CcmStatus::Domain, format!("{name} has length {got}, expected {want}")));
    }
    Ok(())
}

/// Message of the last failing call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ccm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ccm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Looks up a registered problem (`"toy1d"`, `"quadrotor"`).
///
/// # Safety
/// `id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccm_problem_new(id: *const c_char, out: *mut *mut CcmProblem) -> CcmStatus {
    guard(|| {
        let id = text(id, "id")?;
        let inner = lookup(id)?;
        write(out, Box::into_raw(Box::new(CcmProblem { inner })), "out")
    })
}

/// # Safety
/// `problem` must come from [`ccm_problem_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ccm_problem_free(problem: *mut CcmProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Replaces the risk level `alpha` of the problem.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccm_problem_set_alpha(problem: *mut CcmProblem, alpha: f64) -> CcmStatus {
    guard(|| {
        let p = problem.as_mut().ok_or_else(|| null("problem"))?;
        p.inner = p.inner.clone().with_alpha(alpha)?;
        Ok(())
    })
}

/// Decision, scenario and constraint dimensions and the risk level.
///
/// # Safety
/// `problem` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccm_problem_info(
    problem: *const CcmProblem,
    n: *mut usize,
    s: *mut usize,
    m: *mut usize,
    alpha: *mut f64,
) -> CcmStatus {
    guard(|| {
        let p = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        write(n, p.n(), "n")?;
        write(s, p.s(), "s")?;
        write(m, p.m(), "m")?;
        write(alpha, p.alpha(), "alpha")
    })
}

/// Copies the decision box into `lower` and `upper`, each of length `n`.
///
/// # Safety
/// `problem` must be a live handle; both arrays must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn ccm_problem_bounds(
    problem: *const CcmProblem,
    lower: *mut f64,
    upper: *mut f64,
    n: usize,
) -> CcmStatus {
    guard(|| {
        let p = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        check_len(n, p.n(), "bounds")?;
        slice_mut(lower, n, "lower")?.copy_from_slice(p.bounds().lower());
        slice_mut(upper, n, "upper")?.copy_from_slice(p.bounds().upper());
        Ok(())
    })
}

/// Cost `J(x)`.
///
/// # Safety
/// `problem` must be a live handle; `x` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn ccm_problem_cost(
    problem: *const CcmProblem,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> CcmStatus {
    guard(|| {
        let p = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        let c = p.eval_cost(slice(x, n, "x")?)?;
        write(out, c, "out")
    })
}

/// Constraint vector `h(x, delta)` written to `out` (length `m`).
///
/// # Safety
/// `problem` must be a live handle; arrays must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ccm_problem_constraint(
    problem: *const CcmProblem,
    x: *const f64,
    n: usize,
    delta: *const f64,
    s: usize,
    out: *mut f64,
    m: usize,
) -> CcmStatus {
    guard(|| {
        let p = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        check_len(m, p.m(), "out")?;
        let h = p.eval_constraint(slice(x, n, "x")?, slice(delta, s, "delta")?)?;
        slice_mut(out, m, "out")?.copy_from_slice(&h);
        Ok(())
    })
}

/// Empirical satisfaction rate of each decision over the scenarios with
/// margin `gamma`. `decisions` is `count_x * n`, `scenarios` is
/// `count_delta * s`, `q` receives `count_x` values.
///
/// # Safety
/// `problem` must be a live handle; arrays must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ccm_problem_satisfaction(
    problem: *const CcmProblem,
    decisions: *const f64,
    count_x: usize,
    scenarios: *const f64,
    count_delta: usize,
    gamma: f64,
    q: *mut f64,
) -> CcmStatus {
    guard(|| {
        let p = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        let xs = slice(decisions, count_x * p.n(), "decisions")?;
        let ds = slice(scenarios, count_delta * p.s(), "scenarios")?;
        let xs = DecisionSampleSet::from_rows(rows(xs, p.n()), SampleOrigin::Provided)?;
        let ds = ScenarioSampleSet::from_rows(rows(ds, p.s()))?;
        let sat = build_matrix(p, &xs, &ds, gamma)?;
        slice_mut(q, count_x, "q")?.copy_from_slice(sat.q());
        Ok(())
    })
}

fn lp_call(
    f: fn(&[f64], &[f64], f64) -> ccmeasure::Result<LpSolution>,
    costs: *const f64,
    q: *const f64,
    len: usize,
    alpha: f64,
    out: *mut *mut CcmLpSolution,
) -> CcmStatus {
    guard(|| unsafe {
        let inner = f(slice(costs, len, "costs")?, slice(q, len, "q")?, alpha)?;
        write(out, Box::into_raw(Box::new(CcmLpSolution { inner })), "out")
    })
}

/// Solves `min c'mu` subject to `sum mu = 1`, `q'mu >= 1 - alpha`, `mu >= 0`.
/// An infeasible program still yields a handle; see [`ccm_lp_is_optimal`].
///
/// # Safety
/// `costs` and `q` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccm_lp_solve(
    costs: *const f64,
    q: *const f64,
    len: usize,
    alpha: f64,
    out: *mut *mut CcmLpSolution,
) -> CcmStatus {
    lp_call(solve_sample_lp, costs, q, len, alpha, out)
}

/// Same program solved by enumerating vertex pairs; quadratic in `len`.
///
/// # Safety
/// As [`ccm_lp_solve`].
#[no_mangle]
pub unsafe extern "C" fn ccm_lp_solve_oracle(
    costs: *const f64,
    q: *const f64,
    len: usize,
    alpha: f64,
    out: *mut *mut CcmLpSolution,
) -> CcmStatus {
    lp_call(pair_enumeration_oracle, costs, q, len, alpha, out)
}

/// # Safety
/// `solution` must come from an LP solve and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ccm_lp_free(solution: *mut CcmLpSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// 1 when the program was feasible, 0 otherwise (also for a null handle).
///
/// # Safety
/// `solution` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ccm_lp_is_optimal(solution: *const CcmLpSolution) -> i32 {
    solution
        .as_ref()
        .is_some_and(|s| s.inner.status == LpStatus::Optimal) as i32
}

/// Optimal value; `Infeasible` if there is none.
///
/// # Safety
/// `solution` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccm_lp_objective(solution: *const CcmLpSolution, out: *mut f64) -> CcmStatus {
    guard(|| {
        let s = &solution.as_ref().ok_or_else(|| null("solution"))?.inner;
        let v = s
            .objective
            .ok_or_else(|| Fail(CcmStatus::Infeasible, "the program is infeasible".into()))?;
        write(out, v, "out")
    })
}

/// Number of atoms in the optimal measure (0 when infeasible).
///
/// # Safety
/// `solution` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ccm_lp_support_len(solution: *const CcmLpSolution) -> usize {
    solution
        .as_ref()
        .and_then(|s| s.inner.measure.as_ref())
        .map_or(0, |m| m.atoms().len())
}

/// Sample index and weight of atom `k`.
///
/// # Safety
/// `solution` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccm_lp_atom(
    solution: *const CcmLpSolution,
    k: usize,
    index: *mut usize,
    weight: *mut f64,
) -> CcmStatus {
    guard(|| {
        let s = &solution.as_ref().ok_or_else(|| null("solution"))?.inner;
        let atom = s
            .measure
            .as_ref()
            .and_then(|m| m.atoms().get(k))
            .ok_or_else(|| Fail(CcmStatus::Domain, format!("atom {k} does not exist")))?;
        write(index, atom.index, "index")?;
        write(weight, atom.weight, "weight")
    })
}

/// Best single sample with `q_i >= 1 - epsilon`. Returns `Infeasible` when
/// no sample qualifies.
///
/// # Safety
/// `costs` and `q` must hold `len` values; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccm_baseline_solve(
    costs: *const f64,
    q: *const f64,
    len: usize,
    epsilon: f64,
    index: *mut usize,
    objective: *mut f64,
) -> CcmStatus {
    guard(|| {
        match solve_ccp_baseline_q(slice(costs, len, "costs")?, slice(q, len, "q")?, epsilon)? {
            BaselineSolution::Optimal { index: i, objective: v } => {
                write(index, i, "index")?;
                write(objective, v, "objective")
            }
            BaselineSolution::Infeasible => Err(Fail(
                CcmStatus::Infeasible,
                format!("no sample reaches satisfaction {}", 1.0 - epsilon),
            )),
        }
    })
}

/// Runs a full solve from `key = value` configuration text (the same keys
/// as the command-line config file) and returns the report as JSON in
/// `out`, to be released with [`ccm_string_free`]. An infeasible run still
/// returns `Ok` with `"status": "infeasible"` in the report.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccm_solve_json(config: *const c_char, out: *mut *mut c_char) -> CcmStatus {
    guard(|| {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text(config, "config")?)?;
        let report = run_solve(&cfg)?;
        let json = serde_json::to_string(&report).map_err(Error::from)?;
        let c = CString::new(json).map_err(|_| Fail(CcmStatus::Numeric, "report contains NUL".into()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ccm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// 95% Wilson score interval for `k` successes in `n` trials.
///
/// # Safety
/// The out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccm_wilson_interval(k: u64, n: u64, low: *mut f64, high: *mut f64) -> CcmStatus {
    guard(|| {
        if n == 0 || k > n {
            return Err(Fail(CcmStatus::Domain, "need 0 <= k <= n and n > 0".into()));
        }
        let (lo, hi) = wilson_interval(k, n);
        write(low, lo, "low")?;
        write(high, hi, "high")
    })
}

/// Standard normal CDF.
#[no_mangle]
pub extern "C" fn ccm_std_normal_cdf(z: f64) -> f64 {
    std_normal_cdf(z)
}
