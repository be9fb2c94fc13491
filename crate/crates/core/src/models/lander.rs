use super::{ContinuousModel, Squash};
use crate::error::{Error, Result};
use crate::numeric::{RealMat, RealVec};

const H: usize = 0;
const V: usize = 1;
const U: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalKind {
    Ground,
    OutOfFuel,
}

/// One-dimensional lunar lander. State `(h, v, u)`: height, velocity (up is
/// positive) and fuel. The action is an upward acceleration in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LunarLander {
    pub k_g: f64,
    pub k_f: f64,
    c: f64,
}

impl LunarLander {
    pub const GRAVITY: f64 = 0.2;
    pub const FUEL_PENALTY: f64 = 2.0;

    pub fn new(c: f64) -> Result<Self> {
        Self::with_constants(Self::GRAVITY, Self::FUEL_PENALTY, c)
    }

    pub fn with_constants(k_g: f64, k_f: f64, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Argument(format!("squash scale must be positive, got {c}")));
        }
        if !(k_g > 0.0 && k_g < 1.0) {
            return Err(Error::Argument(format!("gravity must lie in (0, 1), got {k_g}")));
        }
        Ok(LunarLander { k_g, k_f, c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn terminal_kind(&self, x: &RealVec) -> Option<TerminalKind> {
        if x[H] <= 0.0 {
            Some(TerminalKind::Ground)
        } else if x[U] <= 0.0 {
            Some(TerminalKind::OutOfFuel)
        } else {
            None
        }
    }

    /// Total reward rate `-k_f a + r̄ᶜ(a)` written through the pre-activation.
    pub fn reward_rate_at_pre(&self, pre: f64) -> f64 {
        let a = self.squash().apply(pre);
        -self.k_f * a + self.squash().action_cost_at_pre(pre).0
    }
}

impl ContinuousModel for LunarLander {
    fn state_dim(&self) -> usize {
        3
    }

    fn squash(&self) -> Squash {
        Squash::Unit { c: self.c }
    }

    fn fbar(&self, x: &RealVec, a: f64) -> RealVec {
        RealVec::from_slice(&[x[V], a - self.k_g, -a])
    }

    fn dfbar_dx(&self, _x: &RealVec, _a: f64) -> RealMat {
        let mut m = RealMat::zeros(3, 3);
        m[(V, H)] = 1.0;
        m
    }

    fn dfbar_da(&self, _x: &RealVec) -> RealVec {
        RealVec::from_slice(&[0.0, 1.0, -1.0])
    }

    fn rbar_linear(&self, _x: &RealVec, a: f64) -> f64 {
        -self.k_f * a
    }

    fn drbar_linear_dx(&self, _x: &RealVec, _a: f64) -> RealVec {
        RealVec::zeros(3)
    }

    fn drbar_linear_da(&self, _x: &RealVec) -> f64 {
        -self.k_f
    }

    fn is_terminal(&self, x: &RealVec) -> bool {
        self.terminal_kind(x).is_some()
    }

    fn terminal_impulse(&self, x: &RealVec) -> f64 {
        -x[V] * x[V] - 2.0 * self.k_g * x[H]
    }

    fn clip_step(&self, x: &RealVec, a: f64, dt: f64) -> Option<(f64, RealVec)> {
        let hn = x[H] + dt * x[V];
        let un = x[U] - dt * a;
        if hn > 0.0 && un > 0.0 {
            return None;
        }
        let tau_h = if hn <= 0.0 { x[H] / (-x[V] * dt) } else { f64::INFINITY };
        let tau_u = if un <= 0.0 { x[U] / (a * dt) } else { f64::INFINITY };
        let tau = tau_h.min(tau_u).clamp(0.0, 1.0);
        let s = tau * dt;
        let mut xn = RealVec::from_slice(&[x[H] + s * x[V], x[V] + s * (a - self.k_g), x[U] - s * a]);
        if tau_h <= tau_u {
            xn[H] = 0.0;
        } else {
            xn[U] = 0.0;
        }
        Some((tau, xn))
    }

    fn terminal_gradient(&self, x: &RealVec, pre: f64) -> Result<RealVec> {
        let g = self.squash();
        let a = g.apply(pre);
        let (rc, _) = g.action_cost_at_pre(pre);
        let v = x[V];
        match self.terminal_kind(x) {
            Some(TerminalKind::Ground) => {
                if v >= 0.0 {
                    return Err(Error::BoundarySingularity(format!(
                        "ground reached with non-negative velocity {v}"
                    )));
                }
                Ok(RealVec::from_slice(&[(self.k_f * a - rc) / v + 2.0 * (a - self.k_g), -2.0 * v, 0.0]))
            }
            Some(TerminalKind::OutOfFuel) => {
                // Fuel runs out after Δt ≈ u/a. Moving u shifts that instant,
                // trading running reward r̄(a) for the impulse's drift.
                if !(a > 0.0) {
                    return Err(Error::BoundarySingularity("fuel exhausted with zero thrust".into()));
                }
                let rbar = -self.k_f * a + rc;
                Ok(RealVec::from_slice(&[-2.0 * self.k_g, -2.0 * v, (rbar - 2.0 * a * v) / a]))
            }
            None => Err(Error::Argument("terminal gradient requested at a non-terminal state".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dynamics_examples() {
        let m = LunarLander::new(0.01).unwrap();
        let x = RealVec::from_slice(&[10.0, 0.0, 5.0]);
        assert_eq!(m.fbar(&x, 0.2).as_slice(), &[0.0, 0.0, -0.2]);
        let y = RealVec::from_slice(&[3.0, -1.5, 2.0]);
        let f = m.fbar(&y, 1.0);
        assert_eq!(f[0], -1.5);
        assert!((f[1] - 0.8).abs() < 1e-15);
        assert_eq!(f[2], -1.0);
        let d = m.dfbar_dx(&y, 0.3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d[(i, j)], if (i, j) == (1, 0) { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn impulse_examples() {
        let m = LunarLander::new(1.0).unwrap();
        assert_eq!(m.terminal_impulse(&RealVec::from_slice(&[0.0, 0.0, 3.0])), 0.0);
        assert_eq!(m.terminal_impulse(&RealVec::from_slice(&[0.0, -2.0, 3.0])), -4.0);
        assert!((m.terminal_impulse(&RealVec::from_slice(&[5.0, -1.0, 0.0])) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn total_reward_slope_at_midpoint() {
        let m = LunarLander::new(0.01).unwrap();
        let (_, drc) = m.squash().action_cost(0.5).unwrap();
        assert_eq!(m.drbar_linear_da(&RealVec::zeros(3)) + drc, -2.0);
    }

    #[test]
    fn ground_boundary_example() {
        let m = LunarLander::new(0.01).unwrap();
        let x = RealVec::from_slice(&[0.0, -1.0, 4.0]);
        // pre = -k_f - 2 v_F = 0, so a_F = 0.5 and r̄ᶜ = 0.
        let g = m.terminal_gradient(&x, -2.0 - 2.0 * x[1]).unwrap();
        assert!((g[0] + 0.4).abs() < 1e-12);
        assert_eq!(g[1], 2.0);
        assert_eq!(g[2], 0.0);
        let stopped = RealVec::from_slice(&[0.0, 0.0, 4.0]);
        assert!(matches!(m.terminal_gradient(&stopped, 0.0), Err(Error::BoundarySingularity(_))));
    }

    #[test]
    fn clipping_lands_exactly() {
        let m = LunarLander::new(1.0).unwrap();
        let x = RealVec::from_slice(&[0.5, -2.0, 10.0]);
        let (tau, xn) = m.clip_step(&x, 0.5, 1.0).unwrap();
        assert!((tau - 0.25).abs() < 1e-15);
        assert_eq!(xn[0], 0.0);
        assert!((xn[1] - (-2.0 + 0.25 * 0.3)).abs() < 1e-15);
        let fuel = RealVec::from_slice(&[50.0, -1.0, 0.1]);
        let (tau, xn) = m.clip_step(&fuel, 0.5, 1.0).unwrap();
        assert!((tau - 0.2).abs() < 1e-15);
        assert_eq!(xn[2], 0.0);
        assert!(m.clip_step(&RealVec::from_slice(&[50.0, -1.0, 10.0]), 0.5, 1.0).is_none());
    }
}
