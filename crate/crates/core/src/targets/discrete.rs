use std::fmt::Write as _;

use crate::critics::{Critic, CriticBundle};
use crate::error::{Error, Result};
use crate::models::DiscreteModel;
use crate::numeric::{RealMat, RealVec, SeededRng};
use crate::policy::{epsilon_greedy_lookahead, greedy_lookahead, Actor, Lookahead, PolicyEval, PolicyKind};

/// Hard cap on discrete episode length.
pub const MAX_STEPS: usize = 10_000;

/// One cached transition.
#[derive(Debug, Clone)]
pub struct Step {
    pub t: usize,
    pub x: RealVec,
    pub action: f64,
    pub reward: f64,
    pub policy: PolicyEval,
    pub dfdx: RealMat,
    pub dfda: RealVec,
    pub drdx: RealVec,
    pub drda: f64,
}

/// A rollout with everything the learners need cached per step.
///
/// `bundles[i]` is the critic at the state of step `start + i`; the last entry
/// is at the terminal state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub start: usize,
    pub steps: Vec<Step>,
    pub terminal_state: RealVec,
    pub bundles: Vec<CriticBundle>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Time index of the terminal state.
    pub fn terminal_step(&self) -> usize {
        self.start + self.steps.len()
    }

    pub fn state(&self, i: usize) -> &RealVec {
        if i == self.steps.len() {
            &self.terminal_state
        } else {
            &self.steps[i].x
        }
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn actions(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.action).collect()
    }

    /// Critic values along the trajectory, terminal included.
    pub fn values(&self) -> Vec<f64> {
        self.bundles.iter().map(|b| b.value).collect()
    }

    /// Tab-separated dump: `t`, state, action, reward, `V`, `V'`, `G`, `G'`.
    pub fn to_tsv(&self, v_prime: Option<&[f64]>, g_prime: Option<&[RealVec]>) -> String {
        let n = self.terminal_state.len();
        let mut out = String::from("t");
        for i in 0..n {
            let _ = write!(out, "\tx{i}");
        }
        out.push_str("\ta\tr\tV\tV'");
        for i in 0..n {
            let _ = write!(out, "\tG{i}");
        }
        for i in 0..n {
            let _ = write!(out, "\tG'{i}");
        }
        out.push('\n');
        for i in 0..=self.steps.len() {
            let _ = write!(out, "{}", self.start + i);
            for v in self.state(i).iter() {
                let _ = write!(out, "\t{v}");
            }
            let (a, r) = self.steps.get(i).map_or((f64::NAN, f64::NAN), |s| (s.action, s.reward));
            let vp = v_prime.and_then(|v| v.get(i)).copied().unwrap_or(f64::NAN);
            let _ = write!(out, "\t{a}\t{r}\t{}\t{vp}", self.bundles[i].value);
            for v in self.bundles[i].grad.iter() {
                let _ = write!(out, "\t{v}");
            }
            for j in 0..n {
                let g = g_prime.and_then(|g| g.get(i)).map_or(f64::NAN, |g| g[j]);
                let _ = write!(out, "\t{g}");
            }
            out.push('\n');
        }
        out
    }
}

fn push_step<M: DiscreteModel + ?Sized>(model: &M, steps: &mut Vec<Step>, t: usize, x: RealVec, look: &Lookahead) {
    let a = look.policy.action;
    steps.push(Step {
        t,
        dfdx: model.dfdx(t, &x, a),
        dfda: model.dfda(t, &x, a),
        drdx: model.drdx(t, &x, a),
        drda: model.drda(t, &x, a),
        x,
        action: a,
        reward: look.reward,
        policy: look.policy.clone(),
    });
}

/// Roll out the greedy or ε-greedy policy on `critic` from `x0` at step `t0`.
pub fn rollout<M, C>(
    model: &M,
    critic: &C,
    kind: PolicyKind,
    t0: usize,
    x0: &RealVec,
    rng: &mut SeededRng,
) -> Result<Trajectory>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    if x0.len() != model.state_dim() {
        return Err(Error::Argument(format!("start state has {} components, model needs {}", x0.len(), model.state_dim())));
    }
    let mut steps = Vec::new();
    let mut bundles = vec![critic.eval(t0, x0)?];
    let mut x = x0.clone();
    let mut t = t0;
    while !model.is_terminal(t, &x) {
        if steps.len() >= MAX_STEPS {
            return Err(Error::Runaway { cap: MAX_STEPS });
        }
        let look = match kind {
            PolicyKind::Greedy => greedy_lookahead(model, critic, t, &x)?,
            PolicyKind::EpsilonGreedy(eps) => epsilon_greedy_lookahead(model, critic, t, &x, eps, rng)?,
        };
        let next = look.next.clone();
        push_step(model, &mut steps, t, x, &look);
        bundles.push(look.next_bundle);
        x = next;
        t += 1;
    }
    Ok(Trajectory { start: t0, steps, terminal_state: x, bundles })
}

/// Greedy rollout from step 0.
pub fn greedy_rollout<M, C>(model: &M, critic: &C, x0: &RealVec) -> Result<Trajectory>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    rollout(model, critic, PolicyKind::Greedy, 0, x0, &mut SeededRng::new(0))
}

/// Roll out a parametric actor. The critic is only evaluated (for `G` in the
/// actor update); `policy.dpi_dw` holds `∂π/∂z`.
pub fn rollout_actor<M, A, C>(model: &M, actor: &A, critic: &C, x0: &RealVec) -> Result<Trajectory>
where
    M: DiscreteModel + ?Sized,
    A: Actor + ?Sized,
    C: Critic + ?Sized,
{
    let mut steps = Vec::new();
    let mut bundles = vec![critic.eval(0, x0)?];
    let mut x = x0.clone();
    let mut t = 0;
    while !model.is_terminal(t, &x) {
        if steps.len() >= MAX_STEPS {
            return Err(Error::Runaway { cap: MAX_STEPS });
        }
        let free = model.is_action_free(t);
        let a = if free { 0.0 } else { actor.action(t, &x) };
        let (next, reward) = model.step(t, &x, a)?;
        let nb = critic.eval(t + 1, &next)?;
        let fa = model.dfda(t, &x, a);
        let policy = PolicyEval {
            action: a,
            noise: 0.0,
            saturated: false,
            action_free: free,
            dq_da: model.drda(t, &x, a) + fa.dot(&nb.grad),
            d2q_da2: model.d2rda2(t, &x, a) + fa.dot(&nb.dg_dx.mul_vec(&fa)),
            dpi_dx: Some(if free { RealVec::zeros(x.len()) } else { actor.dpi_dx(t, &x) }),
            dpi_dw: Some(if free { RealVec::zeros(actor.num_params()) } else { actor.dpi_dz(t, &x) }),
        };
        let look = Lookahead { policy, next: next.clone(), reward, next_bundle: nb };
        push_step(model, &mut steps, t, x, &look);
        bundles.push(look.next_bundle);
        x = next;
        t += 1;
    }
    Ok(Trajectory { start: 0, steps, terminal_state: x, bundles })
}

/// Per-step targets aligned with a trajectory: index `i` is step `start + i`,
/// the last entry is the terminal state.
#[derive(Debug, Clone)]
pub struct TargetsBundle {
    pub lambda: f64,
    pub v_prime: Vec<f64>,
    pub g_prime: Vec<RealVec>,
    /// One per transition (no terminal entry).
    pub omega: Option<Vec<RealMat>>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Argument(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(())
}

/// λ-return value targets: `V'_t = r_t + λV'_{t+1} + (1-λ)V_{t+1}`, `V'_F = 0`.
pub fn compute_targets_v(traj: &Trajectory, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let n = traj.len();
    let mut v = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let next_v = if i + 1 == n { 0.0 } else { traj.bundles[i + 1].value };
        v[i] = traj.steps[i].reward + lambda * v[i + 1] + (1.0 - lambda) * next_v;
    }
    Ok(v)
}

/// λ-return value-gradient targets, `G'_F = 0`.
///
/// Needs `∂π/∂x` on every step that is not the first when `λ > 0`. If it is
/// missing on the very first step of a trajectory that starts at step 0, that
/// entry is left as NaN since no update reads it.
pub fn compute_targets_g(traj: &Trajectory, lambda: f64) -> Result<Vec<RealVec>> {
    check_lambda(lambda)?;
    let n = traj.len();
    let dim = traj.terminal_state.len();
    let mut g = vec![RealVec::zeros(dim); n + 1];
    for i in (0..n).rev() {
        let s = &traj.steps[i];
        let g_next = if i + 1 == n { RealVec::zeros(dim) } else { traj.bundles[i + 1].grad.clone() };
        if lambda == 0.0 {
            g[i] = s.drdx.add(&s.dfdx.mul_vec(&g_next));
            continue;
        }
        let Some(px) = s.policy.dpi_dx.as_ref() else {
            if i == 0 && traj.start == 0 {
                g[i] = RealVec::from(vec![f64::NAN; dim]);
                continue;
            }
            return Err(Error::TargetsUndefined { step: s.t });
        };
        let mut h = g[i + 1].scaled(lambda);
        h.axpy(1.0 - lambda, &g_next);
        let mut out = s.drdx.add(&s.dfdx.mul_vec(&h));
        out.axpy(s.drda + s.dfda.dot(&h), px);
        g[i] = out;
    }
    Ok(g)
}

/// `Ω_t = -(∂f/∂a)ᵀ(∂²Q/∂a²)⁻¹(∂f/∂a)`, zero at saturated and action-free steps.
pub fn compute_omega(traj: &Trajectory) -> Result<Vec<RealMat>> {
    let dim = traj.terminal_state.len();
    traj.steps
        .iter()
        .map(|s| {
            if s.policy.saturated || s.policy.action_free || s.dfda.max_abs() == 0.0 {
                return Ok(RealMat::zeros(dim, dim));
            }
            let d2q = s.policy.d2q_da2;
            if !(d2q < 0.0) {
                return Err(Error::SingularCurvature { step: s.t });
            }
            Ok(RealMat::outer(&s.dfda, &s.dfda).scaled(-1.0 / d2q))
        })
        .collect()
}

impl TargetsBundle {
    pub fn compute(traj: &Trajectory, lambda: f64, with_omega: bool) -> Result<Self> {
        Ok(TargetsBundle {
            lambda,
            v_prime: compute_targets_v(traj, lambda)?,
            g_prime: compute_targets_g(traj, lambda)?,
            omega: if with_omega { Some(compute_omega(traj)?) } else { None },
        })
    }
}

/// Value-gradient of the total reward along a trajectory under its own
/// policy derivatives: `G'` at `λ = 1`, without the NaN escape.
pub fn return_gradients(traj: &Trajectory) -> Result<Vec<RealVec>> {
    let n = traj.len();
    let dim = traj.terminal_state.len();
    let mut g = vec![RealVec::zeros(dim); n + 1];
    for i in (0..n).rev() {
        let s = &traj.steps[i];
        let px = s.policy.dpi_dx.as_ref().ok_or(Error::TargetsUndefined { step: s.t })?;
        let mut out = s.drdx.add(&s.dfdx.mul_vec(&g[i + 1]));
        out.axpy(s.drda + s.dfda.dot(&g[i + 1]), px);
        g[i] = out;
    }
    Ok(g)
}
