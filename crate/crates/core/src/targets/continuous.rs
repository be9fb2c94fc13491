use crate::critics::{Critic, CriticBundle};
use crate::error::{Error, Result};
use crate::models::ContinuousModel;
use crate::numeric::RealVec;
use crate::policy::{ct_policy_from_bundle, CtPolicyEval};

/// Simulated time after which a continuous episode counts as runaway.
pub const MAX_TIME: f64 = 1_000.0;

/// One Euler step. `dt` is shorter than the grid step on a clipped final step.
#[derive(Debug, Clone)]
pub struct CtStep {
    pub x: RealVec,
    pub policy: CtPolicyEval,
    pub dt: f64,
    /// `r̄ dt`.
    pub reward: f64,
    pub bundle: CriticBundle,
}

#[derive(Debug, Clone)]
pub struct CtTrajectory {
    pub grid_dt: f64,
    pub steps: Vec<CtStep>,
    pub terminal: RealVec,
    /// Policy evaluated at the terminal state; fixes the final action of the boundary limit.
    pub terminal_pre: f64,
    pub impulse: f64,
    /// Fraction of the grid step used by the last step.
    pub clip_fraction: f64,
}

impl CtTrajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.steps.iter().map(|s| s.dt).sum()
    }

    /// Integrated reward plus terminal impulse.
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum::<f64>() + self.impulse
    }

    pub fn state(&self, i: usize) -> &RealVec {
        if i == self.steps.len() {
            &self.terminal
        } else {
            &self.steps[i].x
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

fn integrate<M, P>(model: &M, x0: &RealVec, dt: f64, max_time: f64, mut policy: P) -> Result<CtTrajectory>
where
    M: ContinuousModel + ?Sized,
    P: FnMut(&RealVec) -> Result<(CtPolicyEval, CriticBundle)>,
{
    check_dt(dt)?;
    if x0.len() != model.state_dim() {
        return Err(Error::Argument(format!("start state has {} components, model needs {}", x0.len(), model.state_dim())));
    }
    if model.is_terminal(x0) {
        return Err(Error::Argument("start state is already terminal".into()));
    }
    let cap = ((max_time / dt).ceil() as usize).max(1);
    let squash = model.squash();
    let mut steps = Vec::new();
    let mut x = x0.clone();
    loop {
        if steps.len() >= cap {
            return Err(Error::Runaway { cap });
        }
        let (pe, bundle) = policy(&x)?;
        let a = pe.action;
        let (tau, next) = match model.clip_step(&x, a, dt) {
            Some((tau, xc)) => (tau, xc),
            None => {
                let mut n = x.clone();
                n.axpy(dt, &model.fbar(&x, a));
                (1.0, n)
            }
        };
        let rate = model.rbar_linear(&x, a) + squash.action_cost_at_pre(pe.pre).0;
        let step_dt = tau * dt;
        steps.push(CtStep { x, reward: rate * step_dt, dt: step_dt, policy: pe, bundle });
        x = next;
        if !x.is_finite() {
            return Err(Error::Runaway { cap });
        }
        if model.is_terminal(&x) {
            let (pe, _) = policy(&x)?;
            return Ok(CtTrajectory {
                grid_dt: dt,
                steps,
                impulse: model.terminal_impulse(&x),
                terminal: x,
                terminal_pre: pe.pre,
                clip_fraction: tau,
            });
        }
    }
}

/// Euler rollout under a fixed policy returning `(action, pre-activation)`.
/// Critic bundles and policy derivatives are left at zero.
pub fn ct_simulate<M, P>(model: &M, x0: &RealVec, dt: f64, mut policy: P) -> Result<CtTrajectory>
where
    M: ContinuousModel + ?Sized,
    P: FnMut(&RealVec) -> (f64, f64),
{
    let n = model.state_dim();
    let squash = model.squash();
    integrate(model, x0, dt, MAX_TIME, |x| {
        let (action, pre) = policy(x);
        let pe = CtPolicyEval {
            action,
            pre,
            slope: squash.derivative(pre),
            dpi_dw: RealVec::zeros(0),
            dpi_dx: RealVec::zeros(n),
        };
        Ok((pe, CriticBundle::zeros(n, 0)))
    })
}

/// Euler rollout of the greedy policy on `critic`.
pub fn ct_rollout<M, C>(model: &M, critic: &C, x0: &RealVec, dt: f64) -> Result<CtTrajectory>
where
    M: ContinuousModel + ?Sized,
    C: Critic + ?Sized,
{
    ct_rollout_capped(model, critic, x0, dt, MAX_TIME)
}

pub fn ct_rollout_capped<M, C>(model: &M, critic: &C, x0: &RealVec, dt: f64, max_time: f64) -> Result<CtTrajectory>
where
    M: ContinuousModel + ?Sized,
    C: Critic + ?Sized,
{
    integrate(model, x0, dt, max_time, |x| {
        let b = critic.eval(0, x)?;
        Ok((ct_policy_from_bundle(model, x, &b), b))
    })
}

fn check_rate(lambda_bar: f64) -> Result<()> {
    if !(lambda_bar >= 0.0) || lambda_bar.is_nan() {
        return Err(Error::Argument(format!("trace rate must be non-negative, got {lambda_bar}")));
    }
    Ok(())
}

/// Value targets with per-step `λ = exp(-λ̄ dt)`; the terminal target is the impulse.
pub fn ct_targets_v(traj: &CtTrajectory, lambda_bar: f64) -> Result<Vec<f64>> {
    check_rate(lambda_bar)?;
    let n = traj.len();
    let mut v = vec![0.0; n + 1];
    v[n] = traj.impulse;
    for i in (0..n).rev() {
        let s = &traj.steps[i];
        let lambda = (-lambda_bar * s.dt).exp();
        let next_v = if i + 1 == n { traj.impulse } else { traj.steps[i + 1].bundle.value };
        v[i] = s.reward + lambda * v[i + 1] + (1.0 - lambda) * next_v;
    }
    Ok(v)
}

/// Value-gradient targets integrated backwards from the terminal boundary limit.
pub fn ct_targets_g<M>(model: &M, traj: &CtTrajectory, lambda_bar: f64) -> Result<Vec<RealVec>>
where
    M: ContinuousModel + ?Sized,
{
    check_rate(lambda_bar)?;
    let n = traj.len();
    let boundary = model.terminal_gradient(&traj.terminal, traj.terminal_pre)?;
    let mut g = vec![RealVec::zeros(boundary.len()); n + 1];
    g[n] = boundary;
    for i in (0..n).rev() {
        let s = &traj.steps[i];
        let lambda = (-lambda_bar * s.dt).exp();
        let h = if i + 1 == n {
            g[n].clone()
        } else {
            let mut h = g[i + 1].scaled(lambda);
            h.axpy(1.0 - lambda, &traj.steps[i + 1].bundle.grad);
            h
        };
        let a = s.policy.action;
        let fa = model.dfbar_da(&s.x);
        // The action-cost slope at the greedy action is minus the pre-activation.
        let ra = model.drbar_linear_da(&s.x) - s.policy.pre;
        let px = &s.policy.dpi_dx;
        let mut out = h.clone();
        out.axpy(s.dt, &model.drbar_linear_dx(&s.x, a));
        out.axpy(s.dt, &model.dfbar_dx(&s.x, a).mul_vec(&h));
        out.axpy(s.dt * (ra + fa.dot(&h)), px);
        g[i] = out;
    }
    Ok(g)
}
