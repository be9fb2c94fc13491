//! Greedy and ε-greedy action selection on a critic, plus the policy
//! derivatives `∂π/∂x` and `∂π/∂w`.

use crate::critics::{Critic, CriticBundle};
use crate::error::{Error, Result};
use crate::models::{ActionBounds, ContinuousModel, DiscreteModel};
use crate::numeric::{rnd, RealVec, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    Greedy,
    /// Greedy plus zero-mean normal noise with the given standard deviation.
    EpsilonGreedy(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEval {
    pub action: f64,
    /// Noise added on top of the greedy choice (0 for the greedy policy).
    pub noise: f64,
    pub saturated: bool,
    /// The action has no effect on this step.
    pub action_free: bool,
    pub dq_da: f64,
    pub d2q_da2: f64,
    /// `None` when the maximiser is degenerate (`∂²Q/∂a² = 0`).
    pub dpi_dx: Option<RealVec>,
    pub dpi_dw: Option<RealVec>,
}

impl PolicyEval {
    pub fn greedy_action(&self) -> f64 {
        self.action - self.noise
    }
}

/// Greedy evaluation together with the step it implies: next state, reward
/// and critic bundle at the next state.
#[derive(Debug, Clone)]
pub struct Lookahead {
    pub policy: PolicyEval,
    pub next: RealVec,
    pub reward: f64,
    pub next_bundle: CriticBundle,
}

fn q_value<M, C>(model: &M, critic: &C, t: usize, x: &RealVec, a: f64) -> Result<f64>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    let (xn, r) = model.step(t, x, a)?;
    Ok(r + critic.value(t + 1, &xn)?)
}

/// `(∂Q/∂a, ∂²Q/∂a²)` at action `a` given the critic bundle at `f(x, a)`.
fn q_slopes<M: DiscreteModel + ?Sized>(model: &M, t: usize, x: &RealVec, a: f64, next: &CriticBundle) -> (f64, f64) {
    let fa = model.dfda(t, x, a);
    let dq = model.drda(t, x, a) + fa.dot(&next.grad);
    let d2q = model.d2rda2(t, x, a) + fa.dot(&next.dg_dx.mul_vec(&fa));
    (dq, d2q)
}

fn saturation_tol(model_slope: f64, critic_slope: f64) -> f64 {
    1e-9 * model_slope.abs().max(critic_slope.abs()).max(1.0)
}

fn closed_form<M, C>(model: &M, critic: &C, t: usize, x: &RealVec) -> Result<Option<f64>>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    let (Some(k), Some(sq)) = (model.quadratic_step(t), critic.step_quadratic(t + 1)) else {
        return Ok(None);
    };
    if x.len() != 1 {
        return Ok(None);
    }
    let x = x[0];
    let curv = k + sq.q;
    let bounds = model.action_bounds();
    if curv > 0.0 {
        return Ok(Some(bounds.clamp((sq.beta - 2.0 * sq.q * x) / (2.0 * curv))));
    }
    if curv == 0.0 && sq.beta - 2.0 * sq.q * x == 0.0 {
        // Q is flat in the action; every action is greedy, take zero.
        return Ok(Some(0.0));
    }
    match bounds {
        ActionBounds::Unbounded => Err(Error::Policy(format!(
            "Q is not concave in the action at step {t} (curvature {})",
            -2.0 * curv
        ))),
        ActionBounds::Unit => {
            let q = |a: f64| -k * a * a - sq.q * (x + a) * (x + a) + sq.beta * (x + a);
            Ok(Some(if q(1.0) > q(-1.0) { 1.0 } else { -1.0 }))
        }
    }
}

/// Maximise `Q(x, ·)` numerically: Newton from three seeds, golden section if
/// none of them lands on a local maximum. Ties go to the smallest action.
pub fn numeric_greedy_action<M, C>(model: &M, critic: &C, t: usize, x: &RealVec) -> Result<f64>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    let bounds = model.action_bounds();
    let (lo, hi) = match bounds {
        ActionBounds::Unit => (-1.0, 1.0),
        ActionBounds::Unbounded => (-10.0, 10.0),
    };
    let slopes = |a: f64| -> Result<(f64, f64)> {
        let (xn, _) = model.step(t, x, a)?;
        Ok(q_slopes(model, t, x, a, &critic.eval(t + 1, &xn)?))
    };

    let mut candidates = Vec::new();
    for seed in [lo, 0.0, hi] {
        let mut a = seed;
        for _ in 0..100 {
            let (dq, d2q) = slopes(a)?;
            if !(d2q < 0.0) {
                break;
            }
            let next = bounds.clamp(a - dq / d2q);
            let done = (next - a).abs() <= 1e-14 * (1.0 + a.abs());
            a = next;
            if done {
                let (dq, d2q) = slopes(a)?;
                if d2q < 0.0 && (dq.abs() <= 1e-10 * (1.0 + dq.abs()) || bounds.at_bound(a)) {
                    candidates.push(a);
                }
                break;
            }
        }
    }
    if bounds == ActionBounds::Unit {
        candidates.extend([-1.0, 1.0]);
    }
    if candidates.is_empty() {
        // golden-section search for the largest Q on [lo, hi]
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut qc, mut qd) = (q_value(model, critic, t, x, c)?, q_value(model, critic, t, x, d)?);
        for _ in 0..200 {
            if qc >= qd {
                b = d;
                d = c;
                qd = qc;
                c = b - phi * (b - a);
                qc = q_value(model, critic, t, x, c)?;
            } else {
                a = c;
                c = d;
                qc = qd;
                d = a + phi * (b - a);
                qd = q_value(model, critic, t, x, d)?;
            }
        }
        let best = 0.5 * (a + b);
        let (dq, d2q) = slopes(best)?;
        let interior = best > lo + 1e-9 && best < hi - 1e-9;
        if interior && !(dq.abs() < 1e-6 && d2q <= 0.0) {
            return Err(Error::Policy(format!("no maximiser of Q found at step {t}")));
        }
        if !interior && bounds == ActionBounds::Unbounded {
            return Err(Error::Policy(format!("Q appears unbounded above at step {t}")));
        }
        candidates.push(best);
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut best = (f64::NEG_INFINITY, 0.0);
    for a in candidates {
        let q = q_value(model, critic, t, x, a)?;
        if q > best.0 + 1e-12 * q.abs().max(1.0) {
            best = (q, a);
        }
    }
    Ok(best.1)
}

fn finish<M, C>(model: &M, critic: &C, t: usize, x: &RealVec, a: f64, noise: f64) -> Result<Lookahead>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    let (next, reward) = model.step(t, x, a)?;
    let nb = critic.eval(t + 1, &next)?;
    let fa = model.dfda(t, x, a);
    let critic_slope = fa.dot(&nb.grad);
    let model_slope = model.drda(t, x, a);
    let dq = model_slope + critic_slope;
    let d2q = model.d2rda2(t, x, a) + fa.dot(&nb.dg_dx.mul_vec(&fa));
    let saturated = model.action_bounds().at_bound(a) && dq.abs() > saturation_tol(model_slope, critic_slope);
    let (dpi_dx, dpi_dw) = if saturated {
        (Some(RealVec::zeros(x.len())), Some(RealVec::zeros(critic.num_weights())))
    } else if d2q < 0.0 {
        let cross = model.d2rdxda(t, x, a).add(&model.dfdx(t, x, a).mul_vec(&nb.dg_dx.mul_vec(&fa)));
        (Some(cross.scaled(-1.0 / d2q)), Some(nb.dg_dw.mul_vec(&fa).scaled(-1.0 / d2q)))
    } else {
        (None, None)
    };
    Ok(Lookahead {
        policy: PolicyEval { action: a, noise, saturated, action_free: false, dq_da: dq, d2q_da2: d2q, dpi_dx, dpi_dw },
        next,
        reward,
        next_bundle: nb,
    })
}

fn action_free_step<M, C>(model: &M, critic: &C, t: usize, x: &RealVec) -> Result<Lookahead>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    let (next, reward) = model.step(t, x, 0.0)?;
    let next_bundle = critic.eval(t + 1, &next)?;
    Ok(Lookahead {
        policy: PolicyEval {
            action: 0.0,
            noise: 0.0,
            saturated: false,
            action_free: true,
            dq_da: 0.0,
            d2q_da2: 0.0,
            dpi_dx: Some(RealVec::zeros(x.len())),
            dpi_dw: Some(RealVec::zeros(critic.num_weights())),
        },
        next,
        reward,
        next_bundle,
    })
}

/// Greedy action with its step and the critic at the successor state.
pub fn greedy_lookahead<M, C>(model: &M, critic: &C, t: usize, x: &RealVec) -> Result<Lookahead>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    if model.is_action_free(t) {
        return action_free_step(model, critic, t, x);
    }
    let a = match closed_form(model, critic, t, x)? {
        Some(a) => a,
        None => numeric_greedy_action(model, critic, t, x)?,
    };
    finish(model, critic, t, x, a, 0.0)
}

pub fn greedy_action<M, C>(model: &M, critic: &C, t: usize, x: &RealVec) -> Result<PolicyEval>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    Ok(greedy_lookahead(model, critic, t, x)?.policy)
}

/// ε-greedy lookahead. Policy derivatives are those of the greedy part; the
/// noise does not depend on `x` or `w`.
pub fn epsilon_greedy_lookahead<M, C>(
    model: &M,
    critic: &C,
    t: usize,
    x: &RealVec,
    eps: f64,
    rng: &mut SeededRng,
) -> Result<Lookahead>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    let greedy = greedy_lookahead(model, critic, t, x)?;
    if greedy.policy.action_free {
        return Ok(greedy);
    }
    let noise = rnd(eps, rng)?;
    if noise == 0.0 {
        return Ok(greedy);
    }
    let a = greedy.policy.action + noise;
    let bounds = model.action_bounds();
    if bounds == ActionBounds::Unbounded {
        let (next, reward) = model.step(t, x, a)?;
        let next_bundle = critic.eval(t + 1, &next)?;
        let mut policy = greedy.policy;
        policy.action = a;
        policy.noise = noise;
        return Ok(Lookahead { policy, next, reward, next_bundle });
    }
    let clipped = bounds.clamp(a);
    let mut out = finish(model, critic, t, x, clipped, clipped - greedy.policy.action)?;
    if !out.policy.saturated {
        out.policy.dpi_dx = greedy.policy.dpi_dx;
        out.policy.dpi_dw = greedy.policy.dpi_dw;
    }
    Ok(out)
}

pub fn epsilon_greedy<M, C>(model: &M, critic: &C, t: usize, x: &RealVec, eps: f64, rng: &mut SeededRng) -> Result<PolicyEval>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    Ok(epsilon_greedy_lookahead(model, critic, t, x, eps, rng)?.policy)
}

/// `∂π/∂x` from a greedy evaluation; `None` marks the undefined case.
pub fn dpi_dx(pe: &PolicyEval) -> Option<&RealVec> {
    pe.dpi_dx.as_ref()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtPolicyEval {
    pub action: f64,
    /// Argument of the squash, `∂r̄ᴸ/∂a + (∂f̄/∂a)·G`.
    pub pre: f64,
    /// Squash slope `g'(pre)`.
    pub slope: f64,
    pub dpi_dw: RealVec,
    pub dpi_dx: RealVec,
}

/// Continuous-time greedy policy `a = g(∂r̄ᴸ/∂a + (∂f̄/∂a)·G)` from a critic bundle at `x`.
pub fn ct_policy_from_bundle<M: ContinuousModel + ?Sized>(model: &M, x: &RealVec, b: &CriticBundle) -> CtPolicyEval {
    let fa = model.dfbar_da(x);
    let pre = model.drbar_linear_da(x) + fa.dot(&b.grad);
    let g = model.squash();
    let slope = g.derivative(pre);
    CtPolicyEval {
        action: g.apply(pre),
        pre,
        slope,
        dpi_dw: b.dg_dw.mul_vec(&fa).scaled(slope),
        dpi_dx: b.dg_dx.mul_vec(&fa).scaled(slope),
    }
}

pub fn ct_policy<M, C>(model: &M, critic: &C, x: &RealVec) -> Result<CtPolicyEval>
where
    M: ContinuousModel + ?Sized,
    C: Critic + ?Sized,
{
    Ok(ct_policy_from_bundle(model, x, &critic.eval(0, x)?))
}

/// A parametric policy `π(t, x, z)` for actor and policy-gradient learning.
pub trait Actor: Send + Sync {
    fn num_params(&self) -> usize;
    fn params(&self) -> &RealVec;
    fn set_params(&mut self, z: &RealVec) -> Result<()>;
    fn action(&self, t: usize, x: &RealVec) -> f64;
    fn dpi_dz(&self, t: usize, x: &RealVec) -> RealVec;
    fn dpi_dx(&self, t: usize, x: &RealVec) -> RealVec;
}

/// One-dimensional per-step polynomial policy `a_t = Σ_j z_{t,j} x^j` on
/// steps `0..steps`, and 0 afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialActor {
    steps: usize,
    degree: usize,
    params: RealVec,
}

impl PolynomialActor {
    pub fn new(steps: usize, degree: usize, params: RealVec) -> Result<Self> {
        if params.len() != steps * (degree + 1) {
            return Err(Error::Argument(format!(
                "polynomial actor needs {} parameters, got {}",
                steps * (degree + 1),
                params.len()
            )));
        }
        Ok(PolynomialActor { steps, degree, params })
    }

    fn coeffs(&self, t: usize) -> &[f64] {
        let k = self.degree + 1;
        &self.params.as_slice()[t * k..(t + 1) * k]
    }
}

impl Actor for PolynomialActor {
    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> &RealVec {
        &self.params
    }

    fn set_params(&mut self, z: &RealVec) -> Result<()> {
        crate::critics::check_len(z, self.params.len())?;
        self.params = z.clone();
        Ok(())
    }

    fn action(&self, t: usize, x: &RealVec) -> f64 {
        if t >= self.steps {
            return 0.0;
        }
        self.coeffs(t).iter().rev().fold(0.0, |acc, c| acc * x[0] + c)
    }

    fn dpi_dz(&self, t: usize, x: &RealVec) -> RealVec {
        let mut d = RealVec::zeros(self.params.len());
        if t < self.steps {
            let mut p = 1.0;
            for j in 0..=self.degree {
                d[t * (self.degree + 1) + j] = p;
                p *= x[0];
            }
        }
        d
    }

    fn dpi_dx(&self, t: usize, x: &RealVec) -> RealVec {
        if t >= self.steps {
            return RealVec::zeros(1);
        }
        let c = self.coeffs(t);
        let mut s = 0.0;
        let mut p = 1.0;
        for (j, cj) in c.iter().enumerate().skip(1) {
            s += j as f64 * cj * p;
            p *= x[0];
        }
        RealVec::scalar(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critics::{AnalyticCritic, MlpCritic, InputActivation};
    use crate::models::{LunarLander, ToyProblem};
    use crate::numeric::{fd_gradient, max_rel_err, FD_STEP};

    #[test]
    fn one_step_closed_form() {
        let m = ToyProblem::new(1, 0.0).unwrap();
        let c = AnalyticCritic::one_step(0.0, [2.0, 0.0]);
        let pe = greedy_action(&m, &c, 0, &RealVec::scalar(0.0)).unwrap();
        assert_eq!(pe.action, 1.0);
        assert!(!pe.saturated);
        assert_eq!(pe.dpi_dx.unwrap()[0], -1.0);
    }

    #[test]
    fn linear_critic_action_is_half_slope() {
        let m = ToyProblem::new(1, 1.0).unwrap();
        let c = AnalyticCritic::linear_one_step([3.0, -4.0]);
        let pe = greedy_action(&m, &c, 0, &RealVec::scalar(5.0)).unwrap();
        assert_eq!(pe.action, -2.0);
    }

    #[test]
    fn two_step_policy_and_derivative() {
        let (c1, c2, k) = (0.5, 1.0, 1.0);
        let m = ToyProblem::new(2, k).unwrap();
        let c = AnalyticCritic::two_step(c1, c2, [0.3, 0.0, -0.7, 0.0]);
        let x1 = 0.4;
        let pe = greedy_action(&m, &c, 1, &RealVec::scalar(x1)).unwrap();
        assert!((pe.action - (-0.7 - 2.0 * c2 * x1) / (2.0 * (c2 + k))).abs() < 1e-14);
        assert!((pe.dpi_dx.unwrap()[0] + c2 / (c2 + k)).abs() < 1e-14);
    }

    #[test]
    fn closed_form_agrees_with_numeric() {
        let mut rng = SeededRng::new(3);
        for _ in 0..50 {
            let k = rng.uniform(0.1, 3.0);
            let m = ToyProblem::new(2, k).unwrap();
            let w = [rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)];
            let c = AnalyticCritic::two_step(rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), w);
            for t in 0..2 {
                let x = RealVec::scalar(rng.uniform(-5.0, 5.0));
                let closed = greedy_action(&m, &c, t, &x).unwrap().action;
                let num = numeric_greedy_action(&m, &c, t, &x).unwrap();
                assert!((closed - num).abs() < 1e-8, "{closed} {num}");
            }
        }
    }

    #[test]
    fn bounded_actions_saturate() {
        let m = ToyProblem::new(1, 1.0).unwrap().bounded();
        let c = AnalyticCritic::linear_one_step([0.0, 10.0]);
        let pe = greedy_action(&m, &c, 0, &RealVec::scalar(0.0)).unwrap();
        assert_eq!(pe.action, 1.0);
        assert!(pe.saturated);
        assert_eq!(pe.dpi_dx.unwrap()[0], 0.0);
        assert_eq!(pe.dpi_dw.unwrap().max_abs(), 0.0);
        assert_eq!(numeric_greedy_action(&m, &c, 0, &RealVec::scalar(0.0)).unwrap(), 1.0);
    }

    #[test]
    fn convex_q_without_bounds_is_an_error() {
        let m = ToyProblem::new(1, 0.0).unwrap();
        let c = AnalyticCritic::linear_one_step([0.0, 1.0]);
        assert!(matches!(greedy_action(&m, &c, 0, &RealVec::scalar(0.0)), Err(Error::Policy(_))));
    }

    #[test]
    fn epsilon_zero_is_greedy_and_noise_is_reproducible() {
        let m = ToyProblem::new(1, 0.0).unwrap();
        let c = AnalyticCritic::one_step(0.0, [2.0, 0.0]);
        let x = RealVec::scalar(0.0);
        let mut rng = SeededRng::new(1);
        assert_eq!(epsilon_greedy(&m, &c, 0, &x, 0.0, &mut rng).unwrap(), greedy_action(&m, &c, 0, &x).unwrap());
        let a1 = epsilon_greedy(&m, &c, 0, &x, 1.0, &mut SeededRng::new(5)).unwrap();
        let a2 = epsilon_greedy(&m, &c, 0, &x, 1.0, &mut SeededRng::new(5)).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(a1.action, 1.0 + a1.noise);

        let mut rng = SeededRng::new(8);
        let n = 100_000;
        let mean = (0..n).map(|_| epsilon_greedy(&m, &c, 0, &x, 0.5, &mut rng).unwrap().action - 1.0).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn dpi_dw_matches_fd() {
        let m = ToyProblem::new(2, 1.0).unwrap();
        let mut rng = SeededRng::new(21);
        for _ in 0..20 {
            let w = RealVec::from_slice(&[rng.uniform(-10.0, 10.0), 0.3, rng.uniform(-10.0, 10.0), -1.0]);
            let c = AnalyticCritic::two_step(0.5, 1.0, [w[0], w[1], w[2], w[3]]);
            for t in 0..2 {
                let x = RealVec::scalar(rng.uniform(-3.0, 3.0));
                let pe = greedy_action(&m, &c, t, &x).unwrap();
                let fd = fd_gradient(
                    |p| {
                        let mut cc = c.clone();
                        cc.set_weights(p).unwrap();
                        greedy_action(&m, &cc, t, &x).unwrap().action
                    },
                    &w,
                    FD_STEP,
                )
                .unwrap();
                assert!(max_rel_err(pe.dpi_dw.as_ref().unwrap().as_slice(), fd.as_slice()) < 1e-5);
            }
        }
    }

    #[test]
    fn lander_policy_midpoint() {
        let m = LunarLander::new(0.01).unwrap();
        let mut b = CriticBundle::zeros(3, 0);
        b.grad = RealVec::from_slice(&[0.0, 2.0, 0.0]);
        let pe = ct_policy_from_bundle(&m, &RealVec::from_slice(&[10.0, 0.0, 5.0]), &b);
        assert_eq!(pe.pre, 0.0);
        assert_eq!(pe.action, 0.5);
    }

    #[test]
    fn lander_dpi_dw_matches_fd() {
        let m = LunarLander::new(1.0).unwrap();
        let mut net = MlpCritic::lander(InputActivation::Sigmoid);
        net.randomize(&mut SeededRng::new(4));
        let x = RealVec::from_slice(&[40.0, -3.0, 20.0]);
        let pe = ct_policy(&m, &net, &x).unwrap();
        let w = net.weights().clone();
        let fd = fd_gradient(
            |p| {
                let mut n = net.clone();
                n.set_weights(p).unwrap();
                ct_policy(&m, &n, &x).unwrap().action
            },
            &w,
            FD_STEP,
        )
        .unwrap();
        assert!(max_rel_err(pe.dpi_dw.as_slice(), fd.as_slice()) < 1e-4);
    }
}
