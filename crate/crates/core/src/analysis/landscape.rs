use crate::critics::AnalyticCritic;
use crate::error::Result;
use crate::learners::{gradient_error, vgl, vgl_rg, OmegaMode, RgBackend};
use crate::models::ToyProblem;
use crate::numeric::RealVec;
use crate::targets::{compute_omega, compute_targets_g, greedy_rollout};

/// Amplitude of the cosine ripple in the final reward.
pub const RIPPLE: f64 = 4.0;
pub const SCAN_RANGE: (f64, f64) = (-30.0, 30.0);

/// One-step problem with final reward `-x² + 4 cos x` and critic
/// `V = -x² + w x` at step 1, so the greedy step is `x1 = w / 2` from 0.
#[derive(Debug, Clone)]
pub struct RippleProblem {
    model: ToyProblem,
}

impl Default for RippleProblem {
    fn default() -> Self {
        RippleProblem { model: ToyProblem::new(1, 0.0).expect("valid").with_terminal_ripple(RIPPLE) }
    }
}

impl RippleProblem {
    pub fn model(&self) -> &ToyProblem {
        &self.model
    }

    pub fn critic(&self, w: f64) -> AnalyticCritic {
        AnalyticCritic::one_step(0.0, [w, 0.0])
    }

    fn x0() -> RealVec {
        RealVec::scalar(0.0)
    }

    /// Squared value-gradient error `E(w)`.
    pub fn error(&self, w: f64) -> Result<f64> {
        gradient_error(&self.model, &self.critic(w), &Self::x0(), 1.0)
    }

    /// `dE/dw`, differentiated through the targets and the trajectory.
    pub fn error_slope(&self, w: f64) -> Result<f64> {
        let u = vgl_rg(&self.model, &self.critic(w), &Self::x0(), 1.0, 1.0, RgBackend::Analytic)?;
        Ok(-u.dw[0])
    }

    /// Total reward of the greedy policy.
    pub fn total_reward(&self, w: f64) -> Result<f64> {
        Ok(greedy_rollout(&self.model, &self.critic(w), &Self::x0())?.total_reward())
    }

    /// `dR/dw` from the greedy-weighted VGL(1) update.
    pub fn reward_slope(&self, w: f64) -> Result<f64> {
        let traj = greedy_rollout(&self.model, &self.critic(w), &Self::x0())?;
        let g = compute_targets_g(&traj, 1.0)?;
        let om = compute_omega(&traj)?;
        Ok(vgl(&traj, &g, Some(&om), OmegaMode::Greedy, 1.0)?.dw[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgLandscape {
    pub error_stationary: Vec<f64>,
    pub reward_stationary: Vec<f64>,
}

/// Roots of `f` on `[lo, hi]`: sign changes on a uniform grid, refined by bisection.
pub fn scan_roots<F>(mut f: F, lo: f64, hi: f64, cells: usize) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let h = (hi - lo) / cells as f64;
    let mut roots = Vec::new();
    let mut a = lo;
    let mut fa = f(a)?;
    for i in 1..=cells {
        let b = lo + i as f64 * h;
        let fb = f(b)?;
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..100 {
                let m = 0.5 * (l + r);
                let fm = f(m)?;
                if fm == 0.0 {
                    l = m;
                    r = m;
                    break;
                }
                if fl * fm < 0.0 {
                    r = m;
                } else {
                    l = m;
                    fl = fm;
                }
            }
            roots.push(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    if fa == 0.0 {
        roots.push(hi);
    }
    Ok(roots)
}

pub fn rg_landscape() -> Result<RgLandscape> {
    let p = RippleProblem::default();
    let (lo, hi) = SCAN_RANGE;
    Ok(RgLandscape {
        error_stationary: scan_roots(|w| p.error_slope(w), lo, hi, 6000)?,
        reward_stationary: scan_roots(|w| p.reward_slope(w), lo, hi, 6000)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descent {
    pub w: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Follow `w ← w + α s(w)` until the step falls below `tol`.
pub fn follow<F>(mut slope: F, w0: f64, alpha: f64, tol: f64, max_iter: usize) -> Result<Descent>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut w = w0;
    for it in 1..=max_iter {
        let step = alpha * slope(w)?;
        w += step;
        if step.abs() < tol {
            return Ok(Descent { w, iterations: it, converged: true });
        }
    }
    Ok(Descent { w, iterations: max_iter, converged: false })
}

pub fn descend_error(w0: f64) -> Result<Descent> {
    let p = RippleProblem::default();
    follow(|w| p.error_slope(w).map(|s| -s), w0, 0.1, 1e-13, 100_000)
}

pub fn ascend_reward(w0: f64) -> Result<Descent> {
    let p = RippleProblem::default();
    follow(|w| p.reward_slope(w), w0, 0.5, 1e-13, 100_000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;
    use std::f64::consts::PI;

    fn residual(w: f64) -> f64 {
        w + RIPPLE * (w / 2.0).sin()
    }

    #[test]
    fn first_principles_match_closed_forms() {
        let p = RippleProblem::default();
        let mut rng = SeededRng::new(11);
        for _ in 0..50 {
            let w = rng.uniform(-30.0, 30.0);
            assert!((p.error(w).unwrap() - 0.5 * residual(w).powi(2)).abs() < 1e-10);
            let r = -w * w / 4.0 + 4.0 * (w / 2.0).cos();
            assert!((p.total_reward(w).unwrap() - r).abs() < 1e-10);
            assert!((p.reward_slope(w).unwrap() + 0.5 * residual(w)).abs() < 1e-10);
            let de = residual(w) * (1.0 + 2.0 * (w / 2.0).cos());
            assert!((p.error_slope(w).unwrap() - de).abs() < 1e-9 * de.abs().max(1.0));
        }
    }

    #[test]
    fn stationary_sets() {
        let l = rg_landscape().unwrap();
        assert_eq!(l.reward_stationary.len(), 1);
        assert!(l.reward_stationary[0].abs() < 1e-9);
        assert!(l.error_stationary.len() > 10);
        for w in &l.reward_stationary {
            assert!(residual(*w).abs() < 1e-8);
        }
        assert!(l.error_stationary.iter().any(|w| (w - 8.0 * PI / 3.0).abs() < 1e-8));
    }

    #[test]
    fn descent_finds_spurious_minimum() {
        let d = descend_error(6.0).unwrap();
        assert!(d.converged);
        assert!((d.w - 8.0 * PI / 3.0).abs() < 1e-6);
        let e = RippleProblem::default().error(d.w).unwrap();
        assert!((e - 12.07).abs() < 0.01, "{e}");
    }

    #[test]
    fn ascent_finds_unique_maximum() {
        let d = ascend_reward(6.0).unwrap();
        assert!(d.converged && d.w.abs() < 1e-6);
    }
}
