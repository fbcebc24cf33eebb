//! C interface to the mountain pass solver.
//!
//! Every call returns an [`MpaStatus`]; on failure the message is available
//! from [`mpa_last_error_message`] on the same thread. Handles are created by
//! `*_new`/`mpa_solve` and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mpa_core::config::{ProblemConfig, RunConfig};
use mpa_core::experiments::{initial_guess, Setup};
use mpa_core::mpa::{run_mpa, MpaConfig, RunStatus, StepRule};
use mpa_core::{Field, MpaError, VanishingPolicy};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidInput = 3,
    NumericOverflow = 4,
    NumericFailure = 5,
    SpectralGap = 6,
    DomainViolation = 7,
    DegenerateRay = 8,
    StepsizeUnderflow = 9,
    Config = 10,
    Io = 11,
    Panic = 12,
}

impl From<&MpaError> for MpaStatus {
    fn from(e: &MpaError) -> Self {
        match e {
            MpaError::InvalidArgument(_) => Self::InvalidArgument,
            MpaError::InvalidInput(_) => Self::InvalidInput,
            MpaError::NumericOverflow(_) => Self::NumericOverflow,
            MpaError::NumericFailure(_) => Self::NumericFailure,
            MpaError::SpectralGapViolation { .. } => Self::SpectralGap,
            MpaError::DomainViolation(_) => Self::DomainViolation,
            MpaError::DegenerateRay { .. } => Self::DegenerateRay,
            MpaError::StepsizeUnderflow { .. } => Self::StepsizeUnderflow,
            MpaError::Config(_) => Self::Config,
            MpaError::Io(_) => Self::Io,
        }
    }
}

/// Stepsize rule of the outer iteration.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpaStepRule {
    S = 0,
    Tilde = 1,
}

/// Outer iteration settings; fill with [`mpa_settings_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MpaSettings {
    pub eps_stop: f64,
    pub alpha: f64,
    pub s_init: f64,
    pub s_max: f64,
    pub s_min: f64,
    pub max_iters: usize,
    pub rule: MpaStepRule,
    pub tilde_grid: u32,
}

impl From<&MpaSettings> for MpaConfig {
    fn from(s: &MpaSettings) -> Self {
        MpaConfig {
            eps_stop: s.eps_stop,
            alpha: s.alpha,
            s_init: s.s_init,
            s_max: s.s_max,
            s_min: s.s_min,
            max_iters: s.max_iters,
            rule: match s.rule {
                MpaStepRule::S => StepRule::S,
                MpaStepRule::Tilde => StepRule::Tilde,
            },
            tilde_grid: s.tilde_grid,
        }
    }
}

/// A discretized problem with its cone family.
pub struct MpaProblem {
    config: RunConfig,
    setup: Setup,
}

/// Result of a solve.
pub struct MpaSolution {
    vertex_values: Vec<Vec<f64>>,
    energy: f64,
    grad_norm: f64,
    steps: usize,
    converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F>(f: F) -> MpaStatus
where
    F: FnOnce() -> Result<(), (MpaStatus, String)>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MpaStatus::Ok,
        Ok(Err((status, msg))) => {
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
            MpaStatus::Panic
        }
    }
}

fn lib_err(e: MpaError) -> (MpaStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(what: &str) -> (MpaStatus, String) {
    (MpaStatus::NullPointer, format!("{what} is null"))
}

fn build(config: RunConfig, out: *mut *mut MpaProblem) -> MpaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        config.validate().map_err(lib_err)?;
        let setup = Setup::build(&config).map_err(lib_err)?;
        let handle = Box::new(MpaProblem { config, setup });
        // SAFETY: `out` was checked to be non-null and points to writable storage per the API contract.
        unsafe { *out = Box::into_raw(handle) };
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn mpa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default settings: eps_stop 1e-4, alpha 0.5, s in [1e-12, 1e3] from 1,
/// 10000 iterations, rule S.
#[no_mangle]
pub extern "C" fn mpa_settings_default() -> MpaSettings {
    let d = MpaConfig::default();
    MpaSettings {
        eps_stop: d.eps_stop,
        alpha: d.alpha,
        s_init: d.s_init,
        s_max: d.s_max,
        s_min: d.s_min,
        max_iters: d.max_iters,
        rule: MpaStepRule::S,
        tilde_grid: d.tilde_grid,
    }
}

/// `−Δu + V u = |u|^{p−2}u` on an `n × n` mesh of the unit square.
///
/// # Safety
/// `out` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mpa_problem_indefinite_new(
    n: usize,
    potential: f64,
    exponent: f64,
    out: *mut *mut MpaProblem,
) -> MpaStatus {
    let mut config = RunConfig::indefinite(potential, n);
    config.problem = ProblemConfig::Indefinite { potential, exponent };
    build(config, out)
}

/// Two-component cubic system with self couplings `mu1`, `mu2` and cross
/// coupling `beta`. A nonzero `drop_vanishing` freezes components whose ray
/// coordinate reaches zero instead of failing.
///
/// # Safety
/// `out` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mpa_problem_system_new(
    n: usize,
    mu1: f64,
    mu2: f64,
    beta: f64,
    drop_vanishing: c_int,
    out: *mut *mut MpaProblem,
) -> MpaStatus {
    let mut config = RunConfig::system(mu1, mu2, beta, n);
    if let ProblemConfig::System { vanishing, .. } = &mut config.problem {
        *vanishing = if drop_vanishing != 0 {
            VanishingPolicy::Drop
        } else {
            VanishingPolicy::Error
        };
    }
    build(config, out)
}

/// Problem from config file text (the `mpa` command-line format).
///
/// # Safety
/// `text` must be null or a NUL-terminated string; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn mpa_problem_from_config(text: *const c_char, out: *mut *mut MpaProblem) -> MpaStatus {
    if text.is_null() {
        return guard(|| Err(null("text")));
    }
    // SAFETY: non-null and NUL-terminated per the contract.
    let text = unsafe { CStr::from_ptr(text) };
    let parsed = text
        .to_str()
        .map_err(|e| MpaError::Config(format!("config is not UTF-8: {e}")))
        .and_then(RunConfig::parse);
    match parsed {
        Ok(config) => build(config, out),
        Err(e) => guard(|| Err(lib_err(e))),
    }
}

/// # Safety
/// `problem` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mpa_problem_free(problem: *mut MpaProblem) {
    if !problem.is_null() {
        // SAFETY: created by Box::into_raw in `build`, freed once.
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Number of field components (1 or 2), 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpa_problem_components(problem: *const MpaProblem) -> usize {
    // SAFETY: null or live per the contract.
    unsafe { problem.as_ref() }.map_or(0, |p| p.setup.problem().components())
}

/// Mesh vertices per component, `(n + 1)²`, 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpa_problem_vertices(problem: *const MpaProblem) -> usize {
    // SAFETY: null or live per the contract.
    unsafe { problem.as_ref() }.map_or(0, |p| p.setup.space().mesh().vertices().len())
}

/// Dimension of the negative eigenspace (indefinite problems), -1 for
/// systems or a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpa_problem_negative_dim(problem: *const MpaProblem) -> c_int {
    // SAFETY: null or live per the contract.
    unsafe { problem.as_ref() }
        .and_then(|p| p.setup.negative_dim())
        .map_or(-1, |d| d as c_int)
}

/// Runs the mountain pass iteration. `settings` may be null for the
/// defaults. `u0` may be null for the configured seed; otherwise it holds
/// `components × vertices` values, component-major in vertex order, and
/// boundary entries are ignored. Reaching `max_iters` is not an error; check
/// [`mpa_solution_converged`].
///
/// # Safety
/// Pointers must be null or valid: `u0` for `u0_len` reads, `out` for one
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn mpa_solve(
    problem: *const MpaProblem,
    settings: *const MpaSettings,
    u0: *const f64,
    u0_len: usize,
    out: *mut *mut MpaSolution,
) -> MpaStatus {
    guard(|| {
        // SAFETY: null or live per the contract.
        let p = unsafe { problem.as_ref() }.ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut config = p.config.mpa.clone();
        // SAFETY: null or valid per the contract.
        if let Some(s) = unsafe { settings.as_ref() } {
            config = s.into();
        }
        config.validate().map_err(lib_err)?;
        let mesh = p.setup.space().mesh();
        let k = p.setup.problem().components();
        let nv = mesh.vertices().len();
        let start = if u0.is_null() {
            initial_guess(&p.config, &p.setup).map_err(lib_err)?
        } else {
            if u0_len != k * nv {
                return Err((
                    MpaStatus::InvalidArgument,
                    format!("u0 has {u0_len} values, expected {k} x {nv}"),
                ));
            }
            // SAFETY: `u0` is valid for `u0_len` reads per the contract.
            let values = unsafe { std::slice::from_raw_parts(u0, u0_len) };
            let comps = values
                .chunks(nv)
                .map(|c| (0..mesh.dofs()).map(|d| c[mesh.vertex_of_dof(d)]).collect())
                .collect();
            let f = Field::new(comps);
            if !f.is_finite() {
                return Err((MpaStatus::InvalidInput, "u0 has non-finite values".into()));
            }
            f
        };
        let (u, trace) = run_mpa(p.setup.problem(), p.setup.cone(), &start, &config).map_err(lib_err)?;
        let sol = MpaSolution {
            vertex_values: u.iter().map(|c| mesh.vertex_values(c)).collect(),
            energy: trace.final_energy,
            grad_norm: trace.final_grad_norm,
            steps: trace.steps(),
            converged: trace.status == RunStatus::Converged,
        };
        // SAFETY: `out` checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(sol)) };
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a handle from [`mpa_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mpa_solution_free(solution: *mut MpaSolution) {
    if !solution.is_null() {
        // SAFETY: created by Box::into_raw in `mpa_solve`, freed once.
        drop(unsafe { Box::from_raw(solution) });
    }
}

/// Energy at the final iterate, NaN for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpa_solution_energy(solution: *const MpaSolution) -> f64 {
    // SAFETY: null or live per the contract.
    unsafe { solution.as_ref() }.map_or(f64::NAN, |s| s.energy)
}

/// `‖∇E‖_H` at the final iterate, NaN for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpa_solution_grad_norm(solution: *const MpaSolution) -> f64 {
    // SAFETY: null or live per the contract.
    unsafe { solution.as_ref() }.map_or(f64::NAN, |s| s.grad_norm)
}

/// Number of outer steps taken.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpa_solution_steps(solution: *const MpaSolution) -> usize {
    // SAFETY: null or live per the contract.
    unsafe { solution.as_ref() }.map_or(0, |s| s.steps)
}

/// 1 if the run stopped at `eps_stop`, 0 otherwise.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpa_solution_converged(solution: *const MpaSolution) -> c_int {
    // SAFETY: null or live per the contract.
    unsafe { solution.as_ref() }.map_or(0, |s| c_int::from(s.converged))
}

/// Copies component `component` at every mesh vertex (vertex order, boundary
/// zeros included) into `buf`, which must hold `len >= vertices` values.
///
/// # Safety
/// `solution` must be null or a live handle; `buf` null or valid for `len`
/// writes.
#[no_mangle]
pub unsafe extern "C" fn mpa_solution_values(
    solution: *const MpaSolution,
    component: usize,
    buf: *mut f64,
    len: usize,
) -> MpaStatus {
    guard(|| {
        // SAFETY: null or live per the contract.
        let s = unsafe { solution.as_ref() }.ok_or_else(|| null("solution"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let values = s.vertex_values.get(component).ok_or_else(|| {
            (
                MpaStatus::InvalidArgument,
                format!("component {component} out of range ({} components)", s.vertex_values.len()),
            )
        })?;
        if len < values.len() {
            return Err((
                MpaStatus::InvalidArgument,
                format!("buffer holds {len} values, {} needed", values.len()),
            ));
        }
        // SAFETY: `buf` is valid for `len >= values.len()` writes.
        unsafe { ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len()) };
        Ok(())
    })
}
