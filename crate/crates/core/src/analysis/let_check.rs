use crate::error::Result;
use crate::models::DiscreteModel;
use crate::numeric::RealVec;
use crate::targets::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct LetStep {
    pub t: usize,
    pub action: f64,
    pub saturated: bool,
    /// `∂R/∂a_t` with every other action held fixed. One-sided (inward) at a bound.
    pub slope: f64,
    /// `|∂R/∂a_t|` for free actions; for saturated ones, how far the slope
    /// points back into the interior (0 when it pushes against the bound).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LetReport {
    pub steps: Vec<LetStep>,
}

impl LetReport {
    pub fn max_residual(&self) -> f64 {
        self.steps.iter().map(|s| s.residual).fold(0.0, f64::max)
    }
}

/// Total reward of a fixed action sequence from the trajectory's start.
pub fn replay<M: DiscreteModel + ?Sized>(model: &M, start: usize, x0: &RealVec, actions: &[f64]) -> Result<f64> {
    let mut x = x0.clone();
    let mut total = 0.0;
    for (i, a) in actions.iter().enumerate() {
        let (xn, r) = model.step(start + i, &x, *a)?;
        total += r;
        x = xn;
    }
    Ok(total)
}

/// Check that every action of `traj` is locally extremal for the total reward.
pub fn let_check<M: DiscreteModel + ?Sized>(traj: &Trajectory, model: &M) -> Result<LetReport> {
    let x0 = traj.state(0).clone();
    let actions = traj.actions();
    let bounds = model.action_bounds();
    let mut steps = Vec::new();
    for (i, s) in traj.steps.iter().enumerate() {
        if model.is_action_free(s.t) {
            continue;
        }
        let a = actions[i];
        let h = 1e-5 * a.abs().max(1.0);
        let eval = |v: f64| {
            let mut seq = actions.clone();
            seq[i] = v;
            replay(model, traj.start, &x0, &seq)
        };
        let saturated = bounds.at_bound(a);
        let (slope, residual) = if saturated {
            let inward = -a.signum();
            let slope = (eval(a + inward * h)? - eval(a)?) / (inward * h);
            // at the upper bound extremality needs ∂R/∂a ≥ 0, at the lower ≤ 0
            (slope, (-slope * a.signum()).max(0.0))
        } else {
            let slope = (eval(a + h)? - eval(a - h)?) / (2.0 * h);
            (slope, slope.abs())
        };
        steps.push(LetStep { t: s.t, action: a, saturated, slope, residual });
    }
    Ok(LetReport { steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critics::AnalyticCritic;
    use crate::models::ToyProblem;
    use crate::targets::greedy_rollout;

    #[test]
    fn optimal_actions_are_extremal() {
        let m = ToyProblem::new(2, 1.0).unwrap();
        // from x0 = 3 the optimal actions are (-1, -1); this critic reproduces them
        let c = AnalyticCritic::two_step(0.5, 1.0, [0.0, 0.0, 0.0, 0.0]);
        let traj = greedy_rollout(&m, &c, &RealVec::scalar(3.0)).unwrap();
        assert_eq!(traj.actions()[..2], [-1.0, -1.0]);
        let r = let_check(&traj, &m).unwrap();
        assert_eq!(r.steps.len(), 2);
        assert!(r.max_residual() < 1e-6, "{r:?}");
    }

    #[test]
    fn perturbed_action_has_predicted_sign() {
        let m = ToyProblem::new(2, 1.0).unwrap();
        let c = AnalyticCritic::two_step(1.0, 1.0, [0.5, 0.0, 0.0, 0.0]);
        let traj = greedy_rollout(&m, &c, &RealVec::scalar(3.0)).unwrap();
        let r = let_check(&traj, &m).unwrap();
        // R(a0, a1) = -a0² - a1² - (3 + a0 + a1)²
        let a = traj.actions();
        let expect = -2.0 * a[0] - 2.0 * (3.0 + a[0] + a[1]);
        assert!((r.steps[0].slope - expect).abs() < 1e-6);
        assert!(r.steps[0].residual > 0.1);
    }

    #[test]
    fn saturated_against_bound_is_fine() {
        let m = ToyProblem::new(1, 0.0).unwrap().bounded();
        let c = AnalyticCritic::one_step(0.0, [0.0, 0.0]);
        // greedy from x0 = 5 wants a = -5, saturates at -1, and R keeps rising towards -5
        let traj = greedy_rollout(&m, &c, &RealVec::scalar(5.0)).unwrap();
        let r = let_check(&traj, &m).unwrap();
        assert!(r.steps[0].saturated);
        assert!(r.steps[0].slope < 0.0);
        assert_eq!(r.max_residual(), 0.0);
    }
}
