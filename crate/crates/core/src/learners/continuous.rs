use super::Update;
use crate::error::{Error, Result};
use crate::models::ContinuousModel;
use crate::numeric::{RealMat, RealVec};
use crate::targets::CtTrajectory;

fn check_targets<T>(traj: &CtTrajectory, targets: &[T]) -> Result<()> {
    if targets.len() != traj.len() + 1 {
        return Err(Error::Argument(format!(
            "{} targets for a trajectory of {} steps",
            targets.len(),
            traj.len()
        )));
    }
    Ok(())
}

/// `g'(pre) (∂f̄/∂a)ᵀ(∂f̄/∂a)` at step `i`.
pub fn omega_bar<M: ContinuousModel + ?Sized>(model: &M, traj: &CtTrajectory, i: usize) -> RealMat {
    let s = &traj.steps[i];
    let fa = model.dfbar_da(&s.x);
    RealMat::outer(&fa, &fa).scaled(s.policy.slope)
}

/// Continuous-time greedy-weighted VGL. Each step pairs the critic at the
/// step's start with the target at its end, which makes the sum the exact
/// gradient of the Euler-discretised return when `λ̄ = 0`.
pub fn ct_vgl_omega<M>(model: &M, traj: &CtTrajectory, g_prime: &[RealVec], alpha: f64) -> Result<Update>
where
    M: ContinuousModel + ?Sized,
{
    check_targets(traj, g_prime)?;
    let mut dw: Option<RealVec> = None;
    let mut error = 0.0;
    for (i, s) in traj.steps.iter().enumerate() {
        let fa = model.dfbar_da(&s.x);
        let proj = fa.dot(&g_prime[i + 1]) - fa.dot(&s.bundle.grad);
        let acc = dw.get_or_insert_with(|| RealVec::zeros(s.bundle.dv_dw.len()));
        // ∂G/∂w · fa is exactly the weight-direction of the policy derivative.
        acc.axpy(alpha * s.policy.slope * proj * s.dt, &s.bundle.dg_dw.mul_vec(&fa));
        error += 0.5 * s.policy.slope * proj * proj * s.dt;
    }
    Ok(Update { dw: dw.unwrap_or_else(|| RealVec::zeros(0)), error })
}

/// Direction of [`ct_vgl_omega`] as `(d, s)` with `Δw = α e^s d`.
///
/// The squash slope can underflow to zero on saturated trajectories, which
/// leaves a sign-based optimiser without a direction even though the true
/// gradient is not zero. Carrying the scale as a logarithm keeps it.
pub fn ct_vgl_omega_scaled<M>(model: &M, traj: &CtTrajectory, g_prime: &[RealVec]) -> Result<(RealVec, f64)>
where
    M: ContinuousModel + ?Sized,
{
    check_targets(traj, g_prime)?;
    let g = model.squash();
    let logs: Vec<f64> = traj.steps.iter().map(|s| g.log_derivative(s.policy.pre)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut dw = RealVec::zeros(traj.steps.first().map_or(0, |s| s.bundle.dv_dw.len()));
    if !top.is_finite() {
        return Ok((dw, 0.0));
    }
    for (i, s) in traj.steps.iter().enumerate() {
        let fa = model.dfbar_da(&s.x);
        let proj = fa.dot(&g_prime[i + 1]) - fa.dot(&s.bundle.grad);
        dw.axpy((logs[i] - top).exp() * proj * s.dt, &s.bundle.dg_dw.mul_vec(&fa));
    }
    Ok((dw, top))
}

/// Continuous-time VGL with an identity weighting.
pub fn ct_vgl(traj: &CtTrajectory, g_prime: &[RealVec], alpha: f64) -> Result<Update> {
    check_targets(traj, g_prime)?;
    let mut dw: Option<RealVec> = None;
    let mut error = 0.0;
    for (i, s) in traj.steps.iter().enumerate() {
        let d = g_prime[i].sub(&s.bundle.grad);
        let acc = dw.get_or_insert_with(|| RealVec::zeros(s.bundle.dv_dw.len()));
        acc.axpy(alpha * s.dt, &s.bundle.dg_dw.mul_vec(&d));
        error += 0.5 * d.dot(&d) * s.dt;
    }
    Ok(Update { dw: dw.unwrap_or_else(|| RealVec::zeros(0)), error })
}

/// Continuous-time value learning.
pub fn ct_vl(traj: &CtTrajectory, v_prime: &[f64], alpha: f64) -> Result<Update> {
    check_targets(traj, v_prime)?;
    let mut dw: Option<RealVec> = None;
    let mut error = 0.0;
    for (i, s) in traj.steps.iter().enumerate() {
        let d = v_prime[i] - s.bundle.value;
        let acc = dw.get_or_insert_with(|| RealVec::zeros(s.bundle.dv_dw.len()));
        acc.axpy(alpha * d * s.dt, &s.bundle.dv_dw);
        error += 0.5 * d * d * s.dt;
    }
    Ok(Update { dw: dw.unwrap_or_else(|| RealVec::zeros(0)), error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critics::{Critic, InputActivation, MlpCritic};
    use crate::models::LunarLander;
    use crate::numeric::{fd_gradient, SeededRng};
    use crate::targets::{ct_rollout, ct_targets_g, ct_targets_v};

    fn critic(seed: u64) -> MlpCritic {
        let mut c = MlpCritic::lander(InputActivation::Sigmoid);
        c.randomize(&mut SeededRng::new(seed));
        c
    }

    #[test]
    fn omega_update_is_return_gradient() {
        // A soft squash keeps the gradient away from zero for random critics.
        let m = LunarLander::new(1.0).unwrap();
        let dt = 1e-2;
        let x0 = RealVec::from_slice(&[5.0, -1.0, 4.0]);
        for seed in 0..3 {
            let c = critic(seed);
            let traj = ct_rollout(&m, &c, &x0, dt).unwrap();
            let g = ct_targets_g(&m, &traj, 0.0).unwrap();
            let u = ct_vgl_omega(&m, &traj, &g, 1.0).unwrap();
            let fd = fd_gradient(
                |w| {
                    let mut p = c.clone();
                    p.set_weights(w).unwrap();
                    ct_rollout(&m, &p, &x0, dt).map_or(f64::NAN, |t| t.total_reward())
                },
                c.weights(),
                1e-6,
            )
            .unwrap();
            let scale = fd.max_abs();
            assert!(scale > 1e-6);
            let err = u.dw.sub(&fd).max_abs() / scale;
            assert!(err < 1e-2, "seed {seed}: err {err}");
        }
    }

    #[test]
    fn scaled_direction_matches_plain_update() {
        let m = LunarLander::new(0.5).unwrap();
        let c = critic(4);
        let x0 = RealVec::from_slice(&[5.0, -1.0, 4.0]);
        let traj = ct_rollout(&m, &c, &x0, 0.05).unwrap();
        let g = ct_targets_g(&m, &traj, 0.0).unwrap();
        let u = ct_vgl_omega(&m, &traj, &g, 1.0).unwrap();
        let (d, s) = ct_vgl_omega_scaled(&m, &traj, &g).unwrap();
        let back = d.scaled(s.exp());
        assert!(back.sub(&u.dw).max_abs() <= 1e-10 * u.dw.max_abs().max(1.0));
    }

    #[test]
    fn omega_bar_is_rank_one_psd() {
        let m = LunarLander::new(0.5).unwrap();
        let c = critic(7);
        let traj = ct_rollout(&m, &c, &RealVec::from_slice(&[3.0, 0.0, 2.0]), 0.05).unwrap();
        for i in 0..traj.len() {
            let om = omega_bar(&m, &traj, i);
            for j in 0..3 {
                assert!(om[(j, j)] >= 0.0);
            }
            assert_eq!(om[(0, 0)], 0.0);
            assert!((om[(1, 1)] * om[(2, 2)] - om[(1, 2)] * om[(2, 1)]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_error_gives_zero_update() {
        let m = LunarLander::new(0.5).unwrap();
        let c = critic(2);
        let traj = ct_rollout(&m, &c, &RealVec::from_slice(&[3.0, 0.0, 2.0]), 0.05).unwrap();
        let mut g: Vec<RealVec> = traj.steps.iter().map(|s| s.bundle.grad.clone()).collect();
        g.push(g.last().unwrap().clone());
        assert_eq!(ct_vgl(&traj, &g, 1.0).unwrap().dw.max_abs(), 0.0);
        let mut v: Vec<f64> = traj.steps.iter().map(|s| s.bundle.value).collect();
        v.push(0.0);
        assert_eq!(ct_vl(&traj, &v, 1.0).unwrap().dw.max_abs(), 0.0);
        let v = ct_targets_v(&traj, 0.0).unwrap();
        assert!(ct_vl(&traj, &v, 1.0).unwrap().dw.is_finite());
    }
}
