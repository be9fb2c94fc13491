//! Problem definitions: known, smooth, deterministic dynamics `f` and reward `r`
//! with all the first partials the learners need.

mod lander;
mod squash;
mod toy;

pub use lander::{LunarLander, TerminalKind};
pub use squash::Squash;
pub use toy::ToyProblem;

use crate::error::Result;
use crate::numeric::{RealMat, RealVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionBounds {
    Unbounded,
    /// Actions constrained to `[-1, 1]`.
    Unit,
}

impl ActionBounds {
    pub fn clamp(self, a: f64) -> f64 {
        match self {
            ActionBounds::Unbounded => a,
            ActionBounds::Unit => a.clamp(-1.0, 1.0),
        }
    }

    pub fn at_bound(self, a: f64) -> bool {
        matches!(self, ActionBounds::Unit) && a.abs() == 1.0
    }
}

/// A discrete-time episodic model with step-indexed dynamics.
///
/// Partials use the row convention of [`crate::numeric`]: `dfdx(i, j)` is
/// `∂f^j/∂x^i`. `dfda` is assumed independent of `x` and `f` linear in `a`,
/// which holds for every model in this crate.
pub trait DiscreteModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn action_bounds(&self) -> ActionBounds;

    /// `true` once a trajectory that is at `x` on step `t` has terminated.
    fn is_terminal(&self, t: usize, x: &RealVec) -> bool;

    /// `true` when neither `f` nor `r` depend on the action at step `t`.
    fn is_action_free(&self, _t: usize) -> bool {
        false
    }

    fn step(&self, t: usize, x: &RealVec, a: f64) -> Result<(RealVec, f64)>;

    fn dfdx(&self, t: usize, x: &RealVec, a: f64) -> RealMat;
    fn dfda(&self, t: usize, x: &RealVec, a: f64) -> RealVec;
    fn drdx(&self, t: usize, x: &RealVec, a: f64) -> RealVec;
    fn drda(&self, t: usize, x: &RealVec, a: f64) -> f64;

    fn d2rda2(&self, t: usize, x: &RealVec, a: f64) -> f64;
    fn d2rdxda(&self, t: usize, x: &RealVec, a: f64) -> RealVec;
    fn d2rdx2(&self, t: usize, x: &RealVec, a: f64) -> RealMat;

    /// `Some(k)` when step `t` has the shape `f = x + a`, `r = -k a²` in one
    /// dimension, which admits a closed-form greedy action for critics that are
    /// quadratic in state.
    fn quadratic_step(&self, _t: usize) -> Option<f64> {
        None
    }

    /// Whether `dfdx`, `dfda`, `d2rda2` and `d2rdxda` are constant in `(x, a)`.
    fn has_linear_dynamics(&self) -> bool {
        false
    }
}

/// A continuous-time model `dx/dt = f̄(x, a)` with reward rate
/// `r̄ = r̄ᴸ(x, a) + r̄ᶜ(a)`, linear in `a` apart from the action cost.
pub trait ContinuousModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn squash(&self) -> Squash;

    fn fbar(&self, x: &RealVec, a: f64) -> RealVec;
    fn dfbar_dx(&self, x: &RealVec, a: f64) -> RealMat;
    fn dfbar_da(&self, x: &RealVec) -> RealVec;

    fn rbar_linear(&self, x: &RealVec, a: f64) -> f64;
    fn drbar_linear_dx(&self, x: &RealVec, a: f64) -> RealVec;
    fn drbar_linear_da(&self, x: &RealVec) -> f64;

    fn is_terminal(&self, x: &RealVec) -> bool;

    fn terminal_impulse(&self, x: &RealVec) -> f64;

    /// Fraction `τ ∈ (0, 1]` of an Euler step of length `dt` after which the
    /// terminal surface is reached, with the state clipped exactly onto it.
    fn clip_step(&self, x: &RealVec, a: f64, dt: f64) -> Option<(f64, RealVec)>;

    /// One-sided limit of `∂R^π/∂x` as the trajectory reaches the terminal
    /// state `x`, given the pre-squash activation `pre` of the final action.
    fn terminal_gradient(&self, x: &RealVec, pre: f64) -> Result<RealVec>;
}
