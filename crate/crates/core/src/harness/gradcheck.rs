//! Every analytic derivative in the library compared against central
//! differences on random instances.

use std::fmt::Write as _;

use crate::critics::{AnalyticCritic, AnalyticForm, Critic, InputActivation, MlpCritic};
use crate::error::Result;
use crate::models::{ContinuousModel, DiscreteModel, LunarLander, Squash, ToyProblem};
use crate::numeric::{fd_gradient, fd_jacobian, max_rel_err, RealMat, RealVec, SeededRng, FD_STEP};
use crate::policy::{ct_policy, greedy_action};

pub const GRADCHECK_TOL: f64 = 1e-4;
/// Give up on an item after this many draws per requested instance.
const ATTEMPTS_PER_INSTANCE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub item: &'static str,
    pub instances: usize,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub seed: u64,
    pub rows: Vec<CheckRow>,
}

impl GradcheckReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("# gradcheck seed={} tol={GRADCHECK_TOL}\nitem\tinstances\tmax_rel_err\tpass\n", self.seed);
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{:.3e}\t{}", r.item, r.instances, r.max_rel_err, u8::from(r.pass));
        }
        out
    }
}

fn mat_err(a: &RealMat, b: &RealMat) -> f64 {
    max_rel_err(a.as_slice(), b.as_slice())
}

fn vec_err(a: &RealVec, b: &RealVec) -> f64 {
    max_rel_err(a.as_slice(), b.as_slice())
}

fn scalar_err(a: f64, b: f64) -> f64 {
    max_rel_err(&[a], &[b])
}

/// Run `draw` until `instances` of them produce a comparison. A draw returns
/// `Ok(None)` to skip an instance the derivative is not defined at.
fn item<F>(item: &'static str, instances: usize, rng: &mut SeededRng, mut draw: F) -> CheckRow
where
    F: FnMut(&mut SeededRng) -> Result<Option<f64>>,
{
    let mut done = 0;
    let mut worst = 0.0_f64;
    let mut broken = false;
    for _ in 0..instances * ATTEMPTS_PER_INSTANCE {
        if done == instances {
            break;
        }
        match draw(rng) {
            Ok(Some(e)) => {
                done += 1;
                worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
            }
            Ok(None) => {}
            Err(_) => broken = true,
        }
    }
    CheckRow { item, instances: done, max_rel_err: worst, pass: !broken && done == instances && worst <= GRADCHECK_TOL }
}

/// `G`, `∂V/∂w`, `∂G/∂w`, `∂G/∂x` of a critic against differences of `V` and `G`.
fn critic_err<C: Critic + Clone>(critic: &C, t: usize, x: &RealVec) -> Result<f64> {
    let b = critic.eval(t, x)?;
    let v_of_x = |p: &RealVec| critic.value(t, p).unwrap_or(f64::NAN);
    let g_of_x = |p: &RealVec| critic.eval(t, p).map_or_else(|_| RealVec::scalar(f64::NAN), |b| b.grad);
    let at_w = |w: &RealVec| {
        let mut c = critic.clone();
        c.set_weights(w).and_then(|_| c.eval(t, x))
    };
    let w = critic.weights();
    let v_of_w = |p: &RealVec| at_w(p).map_or(f64::NAN, |b| b.value);
    let g_of_w = |p: &RealVec| at_w(p).map_or_else(|_| RealVec::scalar(f64::NAN), |b| b.grad);
    let e = vec_err(&b.grad, &fd_gradient(v_of_x, x, FD_STEP)?)
        .max(mat_err(&b.dg_dx, &fd_jacobian(g_of_x, x, FD_STEP)?))
        .max(vec_err(&b.dv_dw, &fd_gradient(v_of_w, w, FD_STEP)?))
        .max(mat_err(&b.dg_dw, &fd_jacobian(g_of_w, w, FD_STEP)?));
    Ok(e)
}

fn random_toy(rng: &mut SeededRng) -> Result<ToyProblem> {
    let n = 1 + (rng.uniform(0.0, 3.0) as usize).min(2);
    Ok(ToyProblem::new(n, rng.uniform(0.0, 2.0))?.with_terminal_ripple(rng.uniform(-2.0, 2.0)))
}

fn random_analytic(rng: &mut SeededRng) -> Result<(AnalyticCritic, usize)> {
    let mut u = |lo: f64, hi: f64| rng.uniform(lo, hi);
    let pick = u(0.0, 5.0) as usize;
    let (form, steps) = match pick {
        0 => (AnalyticForm::OneStep { c1: u(0.0, 2.0) }, 1),
        1 => (AnalyticForm::TwoStep { c1: u(0.0, 2.0), c2: u(0.0, 2.0) }, 2),
        2 => {
            let mix = [[u(-2.0, 2.0), u(-2.0, 2.0)], [u(-2.0, 2.0), u(-2.0, 2.0)]];
            (AnalyticForm::TwoStepMixed { c1: u(0.0, 2.0), c2: u(0.0, 2.0), mix }, 2)
        }
        3 => (AnalyticForm::SharedWeight { c1: u(0.0, 2.0), c2: u(0.0, 2.0), c3: u(0.0, 10.0) }, 2),
        _ => (AnalyticForm::Linear { steps: 2 }, 2),
    };
    let w: RealVec = (0..form.num_weights()).map(|_| u(-5.0, 5.0)).collect();
    Ok((AnalyticCritic::new(form, w)?, steps))
}

fn random_lander_state(rng: &mut SeededRng) -> RealVec {
    RealVec::from_slice(&[rng.uniform(1.0, 100.0), rng.uniform(-10.0, 10.0), rng.uniform(1.0, 50.0)])
}

fn random_mlp(rng: &mut SeededRng) -> MlpCritic {
    let act = if rng.uniform(0.0, 1.0) < 0.5 { InputActivation::Sigmoid } else { InputActivation::Identity };
    let mut c = MlpCritic::lander(act);
    c.randomize(rng);
    c
}

fn toy_partials(rng: &mut SeededRng) -> Result<Option<f64>> {
    let m = random_toy(rng)?;
    let t = (rng.uniform(0.0, (m.n() + 1) as f64) as usize).min(m.n());
    let x = RealVec::scalar(rng.uniform(-5.0, 5.0));
    let a = rng.uniform(-5.0, 5.0);
    let step = |p: &RealVec| m.step(t, p, a).map_or_else(|_| RealVec::scalar(f64::NAN), |s| s.0);
    let rew_x = |p: &RealVec| m.step(t, p, a).map_or(f64::NAN, |s| s.1);
    let on_a = |p: &RealVec| m.step(t, &x, p[0]);
    let av = RealVec::scalar(a);
    let mut e = mat_err(&m.dfdx(t, &x, a), &fd_jacobian(step, &x, FD_STEP)?);
    e = e.max(vec_err(&m.dfda(t, &x, a), &fd_jacobian(|p| on_a(p).map_or_else(|_| RealVec::scalar(f64::NAN), |s| s.0), &av, FD_STEP)?.row(0)));
    e = e.max(vec_err(&m.drdx(t, &x, a), &fd_gradient(rew_x, &x, FD_STEP)?));
    e = e.max(scalar_err(m.drda(t, &x, a), fd_gradient(|p| on_a(p).map_or(f64::NAN, |s| s.1), &av, FD_STEP)?[0]));
    e = e.max(scalar_err(m.d2rda2(t, &x, a), fd_gradient(|p| m.drda(t, &x, p[0]), &av, FD_STEP)?[0]));
    e = e.max(mat_err(&m.d2rdx2(t, &x, a), &fd_jacobian(|p| m.drdx(t, p, a), &x, FD_STEP)?));
    e = e.max(vec_err(&m.d2rdxda(t, &x, a), &fd_jacobian(|p| m.drdx(t, &x, p[0]), &av, FD_STEP)?.row(0)));
    Ok(Some(e))
}

fn lander_partials(rng: &mut SeededRng) -> Result<Option<f64>> {
    let m = LunarLander::new(rng.uniform(0.005, 0.5))?;
    let x = random_lander_state(rng);
    let a = rng.uniform(0.0, 1.0);
    let av = RealVec::scalar(a);
    let mut e = mat_err(&m.dfbar_dx(&x, a), &fd_jacobian(|p| m.fbar(p, a), &x, FD_STEP)?);
    e = e.max(vec_err(&m.dfbar_da(&x), &fd_jacobian(|p| m.fbar(&x, p[0]), &av, FD_STEP)?.row(0)));
    e = e.max(vec_err(&m.drbar_linear_dx(&x, a), &fd_gradient(|p| m.rbar_linear(p, a), &x, FD_STEP)?));
    e = e.max(scalar_err(m.drbar_linear_da(&x), fd_gradient(|p| m.rbar_linear(&x, p[0]), &av, FD_STEP)?[0]));
    Ok(Some(e))
}

fn squash_derivatives(rng: &mut SeededRng) -> Result<Option<f64>> {
    let c = rng.uniform(0.01, 1.0);
    let g = if rng.uniform(0.0, 1.0) < 0.5 { Squash::Tanh { c } } else { Squash::Unit { c } };
    let z = RealVec::scalar(rng.uniform(-3.0, 3.0) * c);
    let mut e = scalar_err(g.derivative(z[0]), fd_gradient(|p| g.apply(p[0]), &z, FD_STEP)?[0]);
    let a = g.apply(z[0]);
    let (lo, hi) = g.range();
    if a - lo > 1e-3 && hi - a > 1e-3 {
        let av = RealVec::scalar(a);
        let slope = fd_gradient(|p| g.action_cost(p[0]).map_or(f64::NAN, |r| r.0), &av, FD_STEP * 1e-2)?[0];
        e = e.max(scalar_err(g.action_cost(a)?.1, slope));
    }
    Ok(Some(e))
}

fn analytic_bundle(rng: &mut SeededRng) -> Result<Option<f64>> {
    let (critic, steps) = random_analytic(rng)?;
    let t = (rng.uniform(0.0, (steps + 2) as f64) as usize).min(steps + 1);
    let x = RealVec::scalar(rng.uniform(-5.0, 5.0));
    critic_err(&critic, t, &x).map(Some)
}

fn mlp_bundle(rng: &mut SeededRng) -> Result<Option<f64>> {
    let critic = random_mlp(rng);
    let x = random_lander_state(rng);
    critic_err(&critic, 0, &x).map(Some)
}

/// Toy problem with a critic whose curvature makes the greedy step well defined.
fn toy_greedy_instance(rng: &mut SeededRng) -> Result<(ToyProblem, AnalyticCritic, usize, RealVec)> {
    let (critic, steps) = random_analytic(rng)?;
    let m = ToyProblem::new(steps, rng.uniform(0.05, 2.0))?;
    let t = (rng.uniform(0.0, steps as f64) as usize).min(steps - 1);
    Ok((m, critic, t, RealVec::scalar(rng.uniform(-5.0, 5.0))))
}

fn toy_policy_derivatives(rng: &mut SeededRng) -> Result<Option<f64>> {
    let (m, critic, t, x) = toy_greedy_instance(rng)?;
    let Ok(pe) = greedy_action(&m, &critic, t, &x) else { return Ok(None) };
    let (Some(dx), Some(dw)) = (pe.dpi_dx.clone(), pe.dpi_dw.clone()) else { return Ok(None) };
    if pe.saturated || !(pe.d2q_da2 < 0.0) {
        return Ok(None);
    }
    let a_of_x = |p: &RealVec| greedy_action(&m, &critic, t, p).map_or(f64::NAN, |e| e.action);
    let a_of_w = |w: &RealVec| {
        let mut c = critic.clone();
        c.set_weights(w).and_then(|_| greedy_action(&m, &c, t, &x)).map_or(f64::NAN, |e| e.action)
    };
    let e = vec_err(&dx, &fd_gradient(a_of_x, &x, FD_STEP)?).max(vec_err(&dw, &fd_gradient(a_of_w, critic.weights(), FD_STEP)?));
    Ok(Some(e))
}

/// `∂r/∂a = -(∂f/∂a)·G_{t+1}` at an unsaturated greedy action.
fn first_order_condition(rng: &mut SeededRng) -> Result<Option<f64>> {
    let (m, critic, t, x) = toy_greedy_instance(rng)?;
    let Ok(pe) = greedy_action(&m, &critic, t, &x) else { return Ok(None) };
    if pe.saturated || !(pe.d2q_da2 < 0.0) {
        return Ok(None);
    }
    let (xn, _) = m.step(t, &x, pe.action)?;
    let g = critic.eval(t + 1, &xn)?.grad;
    Ok(Some(scalar_err(m.drda(t, &x, pe.action), -m.dfda(t, &x, pe.action).dot(&g))))
}

/// `∂π/∂w = -(∂G/∂w)_{t+1}(∂f/∂a)ᵀ / (∂²Q/∂a²)` against differences of the greedy action.
fn weight_sensitivity(rng: &mut SeededRng) -> Result<Option<f64>> {
    let (m, critic, t, x) = toy_greedy_instance(rng)?;
    let Ok(pe) = greedy_action(&m, &critic, t, &x) else { return Ok(None) };
    if pe.saturated || !(pe.d2q_da2 < 0.0) {
        return Ok(None);
    }
    let (xn, _) = m.step(t, &x, pe.action)?;
    let next = critic.eval(t + 1, &xn)?;
    let formula = next.dg_dw.mul_vec(&m.dfda(t, &x, pe.action)).scaled(-1.0 / pe.d2q_da2);
    let a_of_w = |w: &RealVec| {
        let mut c = critic.clone();
        c.set_weights(w).and_then(|_| greedy_action(&m, &c, t, &x)).map_or(f64::NAN, |e| e.action)
    };
    Ok(Some(vec_err(&formula, &fd_gradient(a_of_w, critic.weights(), FD_STEP)?)))
}

fn ct_policy_derivatives(rng: &mut SeededRng) -> Result<Option<f64>> {
    let m = LunarLander::new(rng.uniform(0.05, 1.0))?;
    let critic = random_mlp(rng);
    let x = random_lander_state(rng);
    let pe = ct_policy(&m, &critic, &x)?;
    let a_of_x = |p: &RealVec| ct_policy(&m, &critic, p).map_or(f64::NAN, |e| e.action);
    let a_of_w = |w: &RealVec| {
        let mut c = critic.clone();
        c.set_weights(w).and_then(|_| ct_policy(&m, &c, &x)).map_or(f64::NAN, |e| e.action)
    };
    let e = vec_err(&pe.dpi_dx, &fd_gradient(a_of_x, &x, FD_STEP)?)
        .max(vec_err(&pe.dpi_dw, &fd_gradient(a_of_w, critic.weights(), FD_STEP)?));
    Ok(Some(e))
}

/// The whole suite with `instances` random draws per item.
pub fn gradcheck(seed: u64, instances: usize) -> Result<GradcheckReport> {
    type Draw = fn(&mut SeededRng) -> Result<Option<f64>>;
    let items: [(&'static str, Draw); 9] = [
        ("toy_model_partials", toy_partials),
        ("lander_model_partials", lander_partials),
        ("squash_derivatives", squash_derivatives),
        ("analytic_critic_bundle", analytic_bundle),
        ("mlp_critic_bundle", mlp_bundle),
        ("greedy_policy_derivatives", toy_policy_derivatives),
        ("greedy_first_order_condition", first_order_condition),
        ("greedy_weight_sensitivity", weight_sensitivity),
        ("ct_policy_derivatives", ct_policy_derivatives),
    ];
    let rows = items
        .iter()
        .enumerate()
        .map(|(i, (name, draw))| item(name, instances, &mut SeededRng::for_trial(seed, i as u64), draw))
        .collect();
    Ok(GradcheckReport { seed, rows })
}
