//! C ABI over the `valgrad` library.
//!
//! Objects cross the boundary as opaque handles created by a `*_new`
//! function and released by the matching `*_free`. Every fallible call
//! returns a [`VgStatus`]; on failure the message is kept per thread and can
//! be copied out with [`vg_last_error_message`]. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use valgrad::analysis::{pontryagin_lander, StabilityPreset};
use valgrad::critics::{Critic, InputActivation, MlpCritic};
use valgrad::harness::{gradcheck, run_experiment, Algorithm, ExperimentConfig};
use valgrad::models::{DiscreteModel, LunarLander, ToyProblem};
use valgrad::numeric::{RealVec, SeededRng};
use valgrad::targets::ct_rollout;
use valgrad::Error;

/// Result code of every fallible call; success is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    /// A rollout or derivative hit a non-finite or singular quantity.
    Numeric = 4,
    Infeasible = 5,
    Unsupported = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VgAlgorithm {
    Vl = 0,
    Vgl = 1,
    VglOmega = 2,
    VglRg = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VgInputActivation {
    Sigmoid = 0,
    Identity = 1,
}

/// Aggregate of a Toy-problem experiment.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VgTableRow {
    pub trials: usize,
    pub successes: usize,
    /// Percent.
    pub success_rate: f64,
    pub iterations_mean: f64,
    pub iterations_sd: f64,
    pub reward_mean: f64,
    pub reward_sd: f64,
}

pub struct VgToyProblem(ToyProblem);

pub struct VgLander(LunarLander);

pub struct VgMlpCritic(MlpCritic);

pub struct VgConfig(ExperimentConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> VgStatus {
    match e {
        Error::Argument(_) | Error::OutOfEpisode { .. } | Error::Domain(_) | Error::Parse(_) => VgStatus::InvalidArgument,
        Error::Config(_) => VgStatus::Config,
        Error::OracleInfeasible(_) => VgStatus::Infeasible,
        Error::Unsupported(_) => VgStatus::Unsupported,
        Error::Io(_) => VgStatus::Io,
        _ => VgStatus::Numeric,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard<F>(f: F) -> VgStatus
where
    F: FnOnce() -> Result<(), (VgStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("panic: {msg}"));
            VgStatus::Panic
        }
    }
}

fn lib(e: Error) -> (VgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (VgStatus, String) {
    (VgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (VgStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (VgStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (VgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (VgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn boxed<T>(value: T, out: *mut *mut T) {
    // SAFETY: callers check `out` before building the value.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (truncated and
/// always NUL-terminated when `len > 0`). Returns the full message length
/// without the terminator, or 0 if there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn vg_toy_new(n: usize, k: f64, out: *mut *mut VgToyProblem) -> VgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        boxed(VgToyProblem(ToyProblem::new(n, k).map_err(lib)?), out);
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`vg_toy_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vg_toy_free(p: *mut VgToyProblem) {
    release(p);
}

/// One transition from scalar state `x` at time `t`.
///
/// # Safety
/// `p` must be a live handle; `x_next` and `reward` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_toy_step(
    p: *const VgToyProblem,
    t: usize,
    x: f64,
    a: f64,
    x_next: *mut f64,
    reward: *mut f64,
) -> VgStatus {
    guard(|| {
        let m = &deref(p, "problem")?.0;
        let xn = deref_mut(x_next, "x_next")?;
        let r = deref_mut(reward, "reward")?;
        let (y, rw) = m.step(t, &RealVec::scalar(x), a).map_err(lib)?;
        *xn = y[0];
        *r = rw;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn vg_lander_new(c: f64, out: *mut *mut VgLander) -> VgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        boxed(VgLander(LunarLander::new(c).map_err(lib)?), out);
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`vg_lander_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vg_lander_free(p: *mut VgLander) {
    release(p);
}

/// Total reward of the optimal trajectory from `(h, v, u)` at step `dt`.
///
/// # Safety
/// `p` must be a live handle; `reward` and `steps` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_lander_oracle(
    p: *const VgLander,
    h: f64,
    v: f64,
    u: f64,
    dt: f64,
    reward: *mut f64,
    steps: *mut usize,
) -> VgStatus {
    guard(|| {
        let m = &deref(p, "lander")?.0;
        let r = deref_mut(reward, "reward")?;
        let n = deref_mut(steps, "steps")?;
        let sol = pontryagin_lander(m, (h, v, u), dt).map_err(lib)?;
        *r = sol.total_reward;
        *n = sol.len();
        Ok(())
    })
}

/// Total reward of the critic's greedy policy from `x0 = (h, v, u)`.
///
/// # Safety
/// Handles must be live; `x0` must point to 3 readable values and `reward`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_lander_rollout(
    p: *const VgLander,
    critic: *const VgMlpCritic,
    x0: *const f64,
    dt: f64,
    reward: *mut f64,
) -> VgStatus {
    guard(|| {
        let m = &deref(p, "lander")?.0;
        let c = &deref(critic, "critic")?.0;
        let x0 = RealVec::from_slice(slice(x0, 3, "x0")?);
        let r = deref_mut(reward, "reward")?;
        *r = ct_rollout(m, c, &x0, dt).map_err(lib)?.total_reward();
        Ok(())
    })
}

/// Lander critic with weights drawn from `seed`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn vg_mlp_lander_new(input: VgInputActivation, seed: u64, out: *mut *mut VgMlpCritic) -> VgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let act = match input {
            VgInputActivation::Sigmoid => InputActivation::Sigmoid,
            VgInputActivation::Identity => InputActivation::Identity,
        };
        let mut c = MlpCritic::lander(act);
        c.randomize(&mut SeededRng::new(seed));
        boxed(VgMlpCritic(c), out);
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`vg_mlp_lander_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vg_mlp_free(p: *mut VgMlpCritic) {
    release(p);
}

/// Number of weights, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vg_mlp_num_weights(p: *const VgMlpCritic) -> usize {
    p.as_ref().map_or(0, |c| c.0.num_weights())
}

/// # Safety
/// `p` must be a live handle and `w` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn vg_mlp_get_weights(p: *const VgMlpCritic, w: *mut f64, len: usize) -> VgStatus {
    guard(|| {
        let c = &deref(p, "critic")?.0;
        if len != c.num_weights() {
            return Err((VgStatus::InvalidArgument, format!("expected {} weights, got {len}", c.num_weights())));
        }
        slice_mut(w, len, "w")?.copy_from_slice(c.weights().as_slice());
        Ok(())
    })
}

/// # Safety
/// `p` must be a live handle and `w` must point to `len` readable values.
#[no_mangle]
pub unsafe extern "C" fn vg_mlp_set_weights(p: *mut VgMlpCritic, w: *const f64, len: usize) -> VgStatus {
    guard(|| {
        let c = &mut deref_mut(p, "critic")?.0;
        let w = RealVec::from_slice(slice(w, len, "w")?);
        c.set_weights(&w).map_err(lib)
    })
}

/// Value and state gradient at `x` (3 values).
///
/// # Safety
/// `p` must be a live handle, `x` and `grad` must point to 3 values and
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_mlp_eval(p: *const VgMlpCritic, x: *const f64, value: *mut f64, grad: *mut f64) -> VgStatus {
    guard(|| {
        let c = &deref(p, "critic")?.0;
        let x = RealVec::from_slice(slice(x, 3, "x")?);
        let v = deref_mut(value, "value")?;
        let g = slice_mut(grad, 3, "grad")?;
        let b = c.eval(0, &x).map_err(lib)?;
        *v = b.value;
        g.copy_from_slice(b.grad.as_slice());
        Ok(())
    })
}

/// Defaults for experiment `id` (1 to 5).
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn vg_config_new(id: u8, out: *mut *mut VgConfig) -> VgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        boxed(VgConfig(ExperimentConfig::defaults(id).map_err(lib)?), out);
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`vg_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vg_config_free(p: *mut VgConfig) {
    release(p);
}

/// Set the learning algorithm and its `λ`.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vg_config_set_algorithm(p: *mut VgConfig, algorithm: VgAlgorithm, lambda: f64) -> VgStatus {
    guard(|| {
        let cfg = &mut deref_mut(p, "config")?.0;
        cfg.algorithm = match algorithm {
            VgAlgorithm::Vl => Algorithm::Vl,
            VgAlgorithm::Vgl => Algorithm::Vgl,
            VgAlgorithm::VglOmega => Algorithm::VglOmega,
            VgAlgorithm::VglRg => Algorithm::VglRg,
        };
        cfg.lambda = lambda;
        Ok(())
    })
}

/// Set step size, exploration noise, trial count and seed.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vg_config_set_run(p: *mut VgConfig, alpha: f64, epsilon: f64, trials: usize, seed: u64) -> VgStatus {
    guard(|| {
        let cfg = &mut deref_mut(p, "config")?.0;
        cfg.alpha = alpha;
        cfg.epsilon = epsilon;
        cfg.trials = trials;
        cfg.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vg_config_validate(p: *const VgConfig) -> VgStatus {
    guard(|| deref(p, "config")?.0.validate().map_err(lib))
}

/// Run a Toy-problem experiment (1, 2 or 4) and aggregate its trials.
///
/// # Safety
/// `p` must be a live handle and `row` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_run_toy(p: *const VgConfig, row: *mut VgTableRow) -> VgStatus {
    guard(|| {
        let cfg = &deref(p, "config")?.0;
        let out = deref_mut(row, "row")?;
        if !matches!(cfg.experiment, 1 | 2 | 4) {
            return Err((VgStatus::Config, format!("experiment {} is not a Toy-problem experiment", cfg.experiment)));
        }
        let (r, _) = run_experiment(cfg).map_err(lib)?;
        *out = VgTableRow {
            trials: r.trials,
            successes: r.successes,
            success_rate: r.success_rate,
            iterations_mean: r.iterations_mean,
            iterations_sd: r.iterations_sd,
            reward_mean: r.reward_mean,
            reward_sd: r.reward_sd,
        };
        Ok(())
    })
}

/// Derivative-check suite. `max_rel_err` receives the worst error over all
/// items.
///
/// # Safety
/// `all_pass` and `max_rel_err` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_gradcheck(seed: u64, instances: usize, all_pass: *mut bool, max_rel_err: *mut f64) -> VgStatus {
    guard(|| {
        let pass = deref_mut(all_pass, "all_pass")?;
        let err = deref_mut(max_rel_err, "max_rel_err")?;
        let report = gradcheck(seed, instances).map_err(lib)?;
        *pass = report.all_pass();
        *err = report.rows.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
        Ok(())
    })
}

/// Stability of the two-step weight dynamics for preset 0 (A) or 1 (B) at
/// `λ`, with the greedy weighting when `omega` is set.
///
/// # Safety
/// `stable` and `leading_real` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_stability(
    preset: u32,
    omega: bool,
    lambda: f64,
    stable: *mut bool,
    leading_real: *mut f64,
) -> VgStatus {
    guard(|| {
        let s = deref_mut(stable, "stable")?;
        let l = deref_mut(leading_real, "leading_real")?;
        let preset = match preset {
            0 => StabilityPreset::A,
            1 => StabilityPreset::B,
            _ => return Err((VgStatus::InvalidArgument, format!("preset must be 0 or 1, got {preset}"))),
        };
        if !(0.0..=1.0).contains(&lambda) {
            return Err((VgStatus::InvalidArgument, format!("lambda must be in [0, 1], got {lambda}")));
        }
        let sys = preset.system(Some(lambda));
        let m = if omega { &sys.m_omega } else { &sys.m_identity };
        *s = valgrad::analysis::is_stable(m);
        *l = valgrad::analysis::leading_real_part(m);
        Ok(())
    })
}
