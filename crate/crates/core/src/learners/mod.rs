//! Weight-update rules. Every function returns the change to apply (already
//! scaled by the learning rate), never the raw gradient.

mod continuous;
mod optim;

pub use continuous::{ct_vgl, ct_vgl_omega, ct_vgl_omega_scaled, ct_vl, omega_bar};
pub use optim::{rprop_apply, sgd_apply, RpropConfig, RpropState};

use crate::critics::Critic;
use crate::error::{Error, Result};
use crate::models::DiscreteModel;
use crate::numeric::{RealMat, RealVec, SeededRng, FD_STEP};
use crate::policy::Actor;
use crate::targets::{compute_targets_g, greedy_rollout, return_gradients, Trajectory};

/// A weight change with the squared error it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub dw: RealVec,
    /// Half the (weighted) sum of squared target errors, or `0` for updates
    /// that are not driven by one.
    pub error: f64,
}

impl Update {
    pub fn is_finite(&self) -> bool {
        self.dw.is_finite() && self.error.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaMode {
    Identity,
    /// The greedy-policy weighting that turns the update into gradient ascent
    /// on the total reward when `λ = 1`.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgBackend {
    /// Central differences over the weights, re-rolling the trajectory per probe.
    Numeric,
    /// Exact sensitivities; needs linear dynamics and a constant-curvature critic.
    Analytic,
}

fn check_alignment(traj: &Trajectory, n: usize, what: &str) -> Result<()> {
    if n != traj.len() + 1 {
        return Err(Error::Argument(format!("{what} has {n} entries for a trajectory of {} steps", traj.len())));
    }
    Ok(())
}

fn num_weights(traj: &Trajectory) -> usize {
    traj.bundles[0].dv_dw.len()
}

/// TD(λ): `Δw = α Σ_{t≥1} (∂V/∂w)_t (V'_t − V_t)`.
pub fn td_lambda(traj: &Trajectory, v_prime: &[f64], alpha: f64) -> Result<Update> {
    check_alignment(traj, v_prime.len(), "value targets")?;
    let mut dw = RealVec::zeros(num_weights(traj));
    let mut error = 0.0;
    for i in 0..traj.len() {
        if traj.start + i == 0 {
            continue;
        }
        let b = &traj.bundles[i];
        let d = v_prime[i] - b.value;
        dw.axpy(alpha * d, &b.dv_dw);
        error += 0.5 * d * d;
    }
    Ok(Update { dw, error })
}

/// TD(λ) in batch eligibility-trace form. Same result as [`td_lambda`].
pub fn td_lambda_traces(traj: &Trajectory, lambda: f64, alpha: f64) -> Result<Update> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Argument(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let n = traj.len();
    let mut dw = RealVec::zeros(num_weights(traj));
    let mut trace = RealVec::zeros(dw.len());
    let mut error = 0.0;
    for i in 0..n {
        if traj.start + i == 0 {
            continue;
        }
        let b = &traj.bundles[i];
        trace = trace.scaled(lambda);
        trace.axpy(1.0, &b.dv_dw);
        let next_v = if i + 1 == n { 0.0 } else { traj.bundles[i + 1].value };
        let delta = traj.steps[i].reward + next_v - b.value;
        dw.axpy(alpha * delta, &trace);
        error += 0.5 * delta * delta;
    }
    Ok(Update { dw, error })
}

/// Value-gradient learning.
///
/// With [`OmegaMode::Identity`]: `Δw = α Σ_{t≥1} (∂G/∂w)_t (G'_t − G_t)`.
/// With [`OmegaMode::Greedy`]: `Δw = α Σ_{t≥0} (∂G/∂w)_{t+1} Ω_t (G'_{t+1} − G_{t+1})`.
pub fn vgl(traj: &Trajectory, g_prime: &[RealVec], omega: Option<&[RealMat]>, mode: OmegaMode, alpha: f64) -> Result<Update> {
    check_alignment(traj, g_prime.len(), "gradient targets")?;
    let n = traj.len();
    let mut dw = RealVec::zeros(num_weights(traj));
    let mut error = 0.0;
    match mode {
        OmegaMode::Identity => {
            for i in 0..n {
                if traj.start + i == 0 {
                    continue;
                }
                let b = &traj.bundles[i];
                let d = g_prime[i].sub(&b.grad);
                dw.axpy(alpha, &b.dg_dw.mul_vec(&d));
                error += 0.5 * d.dot(&d);
            }
        }
        OmegaMode::Greedy => {
            let omega = omega.ok_or_else(|| Error::Argument("greedy weighting needs the omega matrices".into()))?;
            if omega.len() != n {
                return Err(Error::Argument(format!("{} omega matrices for {n} steps", omega.len())));
            }
            for (i, om) in omega.iter().enumerate() {
                let b = &traj.bundles[i + 1];
                let d = g_prime[i + 1].sub(&b.grad);
                let wd = om.mul_vec(&d);
                dw.axpy(alpha, &b.dg_dw.mul_vec(&wd));
                error += 0.5 * d.dot(&wd);
            }
        }
    }
    Ok(Update { dw, error })
}

/// `E = ½ Σ_{t≥1} |G_t − G'_t|²` along the greedy trajectory from `x0`.
pub fn gradient_error<M, C>(model: &M, critic: &C, x0: &RealVec, lambda: f64) -> Result<f64>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    let traj = greedy_rollout(model, critic, x0)?;
    let g = compute_targets_g(&traj, lambda)?;
    Ok(residual_error(&traj, &g))
}

fn residual_error(traj: &Trajectory, g: &[RealVec]) -> f64 {
    (1..traj.len())
        .map(|i| {
            let d = traj.bundles[i].grad.sub(&g[i]);
            0.5 * d.dot(&d)
        })
        .sum()
}

/// Residual-gradient VGL: `Δw = −α ∂E/∂w`, differentiating through the
/// targets and the trajectory's dependence on the weights.
pub fn vgl_rg<M, C>(model: &M, critic: &C, x0: &RealVec, lambda: f64, alpha: f64, backend: RgBackend) -> Result<Update>
where
    M: DiscreteModel + ?Sized,
    C: Critic + Clone,
{
    let (grad, error) = match backend {
        RgBackend::Numeric => {
            let w0 = critic.weights().clone();
            let mut probe = critic.clone();
            let mut grad = RealVec::zeros(w0.len());
            let mut w = w0.clone();
            for i in 0..w0.len() {
                let h = FD_STEP * w0[i].abs().max(1.0);
                w[i] = w0[i] + h;
                probe.set_weights(&w)?;
                let up = gradient_error(model, &probe, x0, lambda)?;
                w[i] = w0[i] - h;
                probe.set_weights(&w)?;
                let down = gradient_error(model, &probe, x0, lambda)?;
                w[i] = w0[i];
                grad[i] = (up - down) / (2.0 * h);
            }
            (grad, gradient_error(model, critic, x0, lambda)?)
        }
        RgBackend::Analytic => rg_sensitivities(model, critic, x0, lambda)?,
    };
    Ok(Update { dw: grad.scaled(-alpha), error })
}

/// Forward sensitivities of the trajectory and backward sensitivities of the
/// targets, both as total derivatives with respect to the weights.
fn rg_sensitivities<M, C>(model: &M, critic: &C, x0: &RealVec, lambda: f64) -> Result<(RealVec, f64)>
where
    M: DiscreteModel + ?Sized,
    C: Critic + ?Sized,
{
    if !model.has_linear_dynamics() || !critic.has_constant_curvature() {
        return Err(Error::Unsupported(
            "analytic residual gradients need linear dynamics and a constant-curvature critic".into(),
        ));
    }
    let traj = greedy_rollout(model, critic, x0)?;
    let g = compute_targets_g(&traj, lambda)?;
    let n = traj.len();
    let nx = x0.len();
    let nw = critic.num_weights();

    // dx_t/dw, rows indexed by weight.
    let mut sx = vec![RealMat::zeros(nw, nx)];
    let mut sa = Vec::with_capacity(n);
    for s in &traj.steps {
        let p = &s.policy;
        let da = if p.action_free || p.saturated {
            RealVec::zeros(nw)
        } else {
            let px = p.dpi_dx.as_ref().ok_or(Error::TargetsUndefined { step: s.t })?;
            let pw = p.dpi_dw.as_ref().ok_or(Error::TargetsUndefined { step: s.t })?;
            pw.add(&sx.last().unwrap().mul_vec(px))
        };
        let next = sx.last().unwrap().matmul(&s.dfdx).add(&RealMat::outer(&da, &s.dfda));
        sa.push(da);
        sx.push(next);
    }
    // Total derivative of the critic gradient; zero at the terminal state.
    let dg: Vec<RealMat> = (0..=n)
        .map(|i| {
            if i == n {
                RealMat::zeros(nw, nx)
            } else {
                let b = &traj.bundles[i];
                b.dg_dw.add(&sx[i].matmul(&b.dg_dx))
            }
        })
        .collect();

    let mut dgp = vec![RealMat::zeros(nw, nx); n + 1];
    for i in (0..n).rev() {
        let s = &traj.steps[i];
        let (x, a) = (&s.x, s.action);
        let d2rdxda = model.d2rdxda(s.t, x, a);
        let mut out = sx[i].matmul(&model.d2rdx2(s.t, x, a)).add(&RealMat::outer(&sa[i], &d2rdxda));
        if lambda == 0.0 {
            out = out.add(&dg[i + 1].matmul(&s.dfdx.transpose()));
        } else {
            let dh = dgp[i + 1].scaled(lambda).add(&dg[i + 1].scaled(1.0 - lambda));
            out = out.add(&dh.matmul(&s.dfdx.transpose()));
            if let Some(px) = s.policy.dpi_dx.as_ref() {
                let mut ddrda = sx[i].mul_vec(&d2rdxda);
                ddrda.axpy(model.d2rda2(s.t, x, a), &sa[i]);
                ddrda.axpy(1.0, &dh.mul_vec(&s.dfda));
                out = out.add(&RealMat::outer(&ddrda, px));
            }
        }
        dgp[i] = out;
    }

    let mut grad = RealVec::zeros(nw);
    for i in 1..n {
        let d = traj.bundles[i].grad.sub(&g[i]);
        grad.axpy(1.0, &dg[i].sub(&dgp[i]).mul_vec(&d));
    }
    Ok((grad, residual_error(&traj, &g)))
}

/// Policy-gradient learning by backpropagation through time along a
/// trajectory from [`crate::targets::rollout_actor`].
pub fn bptt(traj: &Trajectory, alpha: f64) -> Result<Update> {
    let rg = return_gradients(traj)?;
    actor_sum(traj, |i| &rg[i], alpha)
}

/// Actor update driven by the critic's value-gradient:
/// `Δz = α Σ_t (∂π/∂z)_t ((∂r/∂a)_t + (∂f/∂a)_t G_{t+1})`.
pub fn actor_update(traj: &Trajectory, alpha: f64) -> Result<Update> {
    actor_sum(traj, |i| &traj.bundles[i].grad, alpha)
}

fn actor_sum<'a, F>(traj: &'a Trajectory, g: F, alpha: f64) -> Result<Update>
where
    F: Fn(usize) -> &'a RealVec,
{
    let mut dz: Option<RealVec> = None;
    for (i, s) in traj.steps.iter().enumerate() {
        let pz = s.policy.dpi_dw.as_ref().ok_or(Error::TargetsUndefined { step: s.t })?;
        let acc = dz.get_or_insert_with(|| RealVec::zeros(pz.len()));
        if s.policy.action_free {
            continue;
        }
        acc.axpy(alpha * (s.drda + s.dfda.dot(g(i + 1))), pz);
    }
    Ok(Update { dw: dz.unwrap_or_else(|| RealVec::zeros(0)), error: 0.0 })
}

/// Mean stochastic-real-valued-unit actor update over `samples` draws of
/// uniform action noise in `[−ε, ε]`, one perturbed step at a time. Its
/// expectation is `ε²/3` times [`actor_update`] to first order.
#[allow(clippy::too_many_arguments)]
pub fn srv_monte_carlo<M, A, C>(
    model: &M,
    actor: &A,
    critic: &C,
    traj: &Trajectory,
    eps: f64,
    samples: usize,
    alpha: f64,
    rng: &mut SeededRng,
) -> Result<RealVec>
where
    M: DiscreteModel + ?Sized,
    A: Actor + ?Sized,
    C: Critic + ?Sized,
{
    if samples == 0 || !(eps > 0.0) {
        return Err(Error::Argument("SRV estimate needs samples > 0 and eps > 0".into()));
    }
    let mut mean = RealVec::zeros(actor.num_params());
    for (i, s) in traj.steps.iter().enumerate() {
        if s.policy.action_free {
            continue;
        }
        let pz = actor.dpi_dz(s.t, &s.x);
        let v_t = if traj.start + i == 0 { critic.value(s.t, &s.x)? } else { traj.bundles[i].value };
        let mut acc = 0.0;
        for _ in 0..samples {
            let noise = rng.uniform(-eps, eps);
            let (next, r) = model.step(s.t, &s.x, s.action + noise)?;
            let v_next = if model.is_terminal(s.t + 1, &next) { 0.0 } else { critic.value(s.t + 1, &next)? };
            acc += noise * (r + v_next - v_t);
        }
        mean.axpy(alpha * acc / samples as f64, &pz);
    }
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critics::{AnalyticCritic, AnalyticForm, ZeroCritic};
    use crate::models::ToyProblem;
    use crate::numeric::{fd_gradient, max_rel_err};
    use crate::policy::{PolicyKind, PolynomialActor};
    use crate::targets::{compute_omega, compute_targets_v, rollout, rollout_actor};

    fn two_step(c1: f64, c2: f64, w: [f64; 4]) -> AnalyticCritic {
        AnalyticCritic::two_step(c1, c2, w)
    }

    #[test]
    fn linear_critic_vl_fixed_point_and_update() {
        let m = ToyProblem::new(1, 1.0).unwrap();
        let x0 = RealVec::scalar(5.0);
        let c = AnalyticCritic::linear_one_step([-25.0, 0.0]);
        let traj = greedy_rollout(&m, &c, &x0).unwrap();
        let v = compute_targets_v(&traj, 0.5).unwrap();
        assert_eq!(td_lambda(&traj, &v, 0.1).unwrap().dw.as_slice(), &[0.0, 0.0]);

        let c = AnalyticCritic::linear_one_step([0.0, 0.0]);
        let traj = greedy_rollout(&m, &c, &x0).unwrap();
        let v = compute_targets_v(&traj, 0.0).unwrap();
        let u = td_lambda(&traj, &v, 0.01).unwrap();
        assert!(max_rel_err(u.dw.as_slice(), &[-0.25, -1.25]) < 1e-14);
    }

    #[test]
    fn traces_match_forward_view() {
        let m = ToyProblem::new(4, 0.6).unwrap();
        let mut rng = SeededRng::new(9);
        for _ in 0..100 {
            let w: RealVec = (0..8).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let c = AnalyticCritic::new(AnalyticForm::Linear { steps: 4 }, w).unwrap();
            let x0 = RealVec::scalar(rng.uniform(-5.0, 5.0));
            let traj = rollout(&m, &c, PolicyKind::EpsilonGreedy(0.5), 0, &x0, &mut rng).unwrap();
            for lambda in [0.0, 0.3, 1.0] {
                let v = compute_targets_v(&traj, lambda).unwrap();
                let a = td_lambda(&traj, &v, 0.1).unwrap().dw;
                let b = td_lambda_traces(&traj, lambda, 0.1).unwrap().dw;
                for j in 0..a.len() {
                    assert!((a[j] - b[j]).abs() <= 1e-12 * a[j].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn one_step_vgl_closed_form() {
        let m = ToyProblem::new(1, 0.0).unwrap();
        for (c1, w1) in [(0.0, 3.0), (10.0, -4.5), (2.0, 7.0)] {
            let c = AnalyticCritic::one_step(c1, [w1, 1.7]);
            let traj = greedy_rollout(&m, &c, &RealVec::scalar(0.0)).unwrap();
            let g = compute_targets_g(&traj, 1.0).unwrap();
            let u = vgl(&traj, &g, None, OmegaMode::Identity, 0.1).unwrap();
            assert!((u.dw[0] - (-0.1 * (2.0 * c1 + w1))).abs() < 1e-12);
            assert_eq!(u.dw[1], 0.0);
            let u = vgl(&traj, &g, None, OmegaMode::Identity, 1.0).unwrap();
            assert!((w1 + u.dw[0] + 2.0 * c1).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_weighting_is_gradient_of_total_reward() {
        let mut rng = SeededRng::new(4);
        for _ in 0..30 {
            let (c1, c2, k) = (rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), rng.uniform(0.0, 2.0));
            let m = ToyProblem::new(2, k).unwrap();
            let w = [rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)];
            let c = two_step(c1, c2, w);
            let x0 = RealVec::scalar(rng.uniform(-3.0, 3.0));
            let traj = greedy_rollout(&m, &c, &x0).unwrap();
            let g = compute_targets_g(&traj, 1.0).unwrap();
            let om = compute_omega(&traj).unwrap();
            let u = vgl(&traj, &g, Some(&om), OmegaMode::Greedy, 1.0).unwrap();
            let fd = fd_gradient(
                |p| {
                    let c = AnalyticCritic::new(AnalyticForm::TwoStep { c1, c2 }, p.clone()).unwrap();
                    greedy_rollout(&m, &c, &x0).unwrap().total_reward()
                },
                &RealVec::from_slice(&w),
                FD_STEP,
            )
            .unwrap();
            assert!(max_rel_err(u.dw.as_slice(), fd.as_slice()) < 1e-6);
        }
    }

    #[test]
    fn greedy_weighting_requires_omega() {
        let m = ToyProblem::new(1, 0.0).unwrap();
        let c = AnalyticCritic::one_step(0.0, [1.0, 0.0]);
        let traj = greedy_rollout(&m, &c, &RealVec::scalar(0.0)).unwrap();
        let g = compute_targets_g(&traj, 1.0).unwrap();
        assert!(matches!(vgl(&traj, &g, None, OmegaMode::Greedy, 1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn residual_gradient_backends_agree() {
        let mut rng = SeededRng::new(11);
        let m = ToyProblem::new(2, 1.0).unwrap();
        for _ in 0..20 {
            let w = [rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)];
            let c = two_step(0.5, 1.0, w);
            let x0 = RealVec::scalar(0.0);
            for lambda in [0.0, 0.4, 1.0] {
                let a = vgl_rg(&m, &c, &x0, lambda, 1.0, RgBackend::Analytic).unwrap();
                let n = vgl_rg(&m, &c, &x0, lambda, 1.0, RgBackend::Numeric).unwrap();
                assert!(max_rel_err(a.dw.as_slice(), n.dw.as_slice()) < 1e-6, "{:?} {:?}", a.dw, n.dw);
                assert_eq!(a.error, n.error);
            }
        }
    }

    #[test]
    fn residual_gradient_on_rippled_problem() {
        let m = ToyProblem::new(1, 0.0).unwrap().with_terminal_ripple(4.0);
        let x0 = RealVec::scalar(0.0);
        for w in [-7.0, 1.3, 6.0] {
            let c = AnalyticCritic::one_step(0.0, [w, 0.0]);
            let a = vgl_rg(&m, &c, &x0, 1.0, 1.0, RgBackend::Analytic).unwrap();
            let n = vgl_rg(&m, &c, &x0, 1.0, 1.0, RgBackend::Numeric).unwrap();
            assert!(max_rel_err(a.dw.as_slice(), n.dw.as_slice()) < 1e-6);
        }
    }

    #[test]
    fn residual_gradient_zero_at_optimum() {
        let m = ToyProblem::new(2, 1.0).unwrap();
        let c = two_step(0.5, 1.0, [0.0, 2.0, 0.0, -3.0]);
        let u = vgl_rg(&m, &c, &RealVec::scalar(0.0), 0.0, 0.1, RgBackend::Analytic).unwrap();
        assert_eq!(u.error, 0.0);
        assert!(u.dw.max_abs() == 0.0);
    }

    #[test]
    fn analytic_backend_rejects_general_critics() {
        let m = ToyProblem::new(1, 1.0).unwrap();
        let mut c = crate::critics::MlpCritic::new(2, vec![1.0], 1.0, crate::critics::InputActivation::Sigmoid).unwrap();
        c.randomize(&mut SeededRng::new(0));
        let r = vgl_rg(&m, &c, &RealVec::scalar(0.0), 0.0, 1.0, RgBackend::Analytic);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn bptt_matches_fd_and_hand_form() {
        let m = ToyProblem::new(1, 1.0).unwrap();
        let x0 = RealVec::scalar(2.0);
        let z = 0.7;
        let actor = PolynomialActor::new(1, 0, RealVec::scalar(z)).unwrap();
        let traj = rollout_actor(&m, &actor, &ZeroCritic::new(1), &x0).unwrap();
        let u = bptt(&traj, 0.1).unwrap();
        assert!((u.dw[0] - 0.1 * (-2.0 * z - 2.0 * (2.0 + z))).abs() < 1e-12);

        let m = ToyProblem::new(3, 0.4).unwrap();
        let mut rng = SeededRng::new(5);
        for _ in 0..20 {
            let p: RealVec = (0..9).map(|_| rng.uniform(-0.5, 0.5)).collect();
            let x0 = RealVec::scalar(rng.uniform(-2.0, 2.0));
            let actor = PolynomialActor::new(3, 2, p.clone()).unwrap();
            let traj = rollout_actor(&m, &actor, &ZeroCritic::new(1), &x0).unwrap();
            let u = bptt(&traj, 1.0).unwrap();
            let fd = fd_gradient(
                |z| {
                    let a = PolynomialActor::new(3, 2, z.clone()).unwrap();
                    rollout_actor(&m, &a, &ZeroCritic::new(1), &x0).unwrap().total_reward()
                },
                &p,
                FD_STEP,
            )
            .unwrap();
            assert!(max_rel_err(u.dw.as_slice(), fd.as_slice()) < 1e-5);
        }
    }

    #[test]
    fn optimal_actor_is_stationary() {
        // n = 2, k = 1: optimal a_t = -x/(n - t + k).
        let m = ToyProblem::new(2, 1.0).unwrap();
        let actor = PolynomialActor::new(2, 1, RealVec::from_slice(&[0.0, -1.0 / 3.0, 0.0, -0.5])).unwrap();
        let traj = rollout_actor(&m, &actor, &ZeroCritic::new(1), &RealVec::scalar(1.7)).unwrap();
        assert!(bptt(&traj, 1.0).unwrap().dw.max_abs() < 1e-12);
    }

    #[test]
    fn ideal_critic_actor_update_is_bptt() {
        let m = ToyProblem::new(2, 1.0).unwrap();
        let actor = PolynomialActor::new(2, 1, RealVec::from_slice(&[0.2, -0.1, -0.3, 0.4])).unwrap();
        let x0 = RealVec::scalar(1.5);
        let traj = rollout_actor(&m, &actor, &ZeroCritic::new(1), &x0).unwrap();
        let rg = return_gradients(&traj).unwrap();
        let mut ideal = traj.clone();
        for (b, g) in ideal.bundles.iter_mut().zip(&rg) {
            b.grad = g.clone();
        }
        let a = actor_update(&ideal, 0.3).unwrap().dw;
        let b = bptt(&traj, 0.3).unwrap().dw;
        for j in 0..a.len() {
            assert!((a[j] - b[j]).abs() < 1e-10);
        }
        // With G = 0 only the immediate reward slope remains.
        let z = actor_update(&traj, 1.0).unwrap().dw;
        let mut expect = RealVec::zeros(4);
        for s in &traj.steps {
            if !s.policy.action_free {
                expect.axpy(s.drda, s.policy.dpi_dw.as_ref().unwrap());
            }
        }
        assert!(max_rel_err(z.as_slice(), expect.as_slice()) < 1e-14);
    }

    #[test]
    fn srv_average_follows_actor_update() {
        let m = ToyProblem::new(2, 1.0).unwrap();
        let critic = two_step(0.5, 1.0, [0.3, 0.0, -0.2, 0.0]);
        let actor = PolynomialActor::new(2, 1, RealVec::from_slice(&[0.4, -0.2, -0.1, 0.3])).unwrap();
        let traj = rollout_actor(&m, &actor, &critic, &RealVec::scalar(1.0)).unwrap();
        let eps = 0.1;
        let mc = srv_monte_carlo(&m, &actor, &critic, &traj, eps, 200_000, 1.0, &mut SeededRng::new(1)).unwrap();
        let expect = actor_update(&traj, eps * eps / 3.0).unwrap().dw;
        let cos = mc.dot(&expect) / (mc.norm() * expect.norm());
        assert!(cos > 0.99, "cos {cos}");
        assert!((mc.norm() / expect.norm() - 1.0).abs() < 0.05);
    }
}
