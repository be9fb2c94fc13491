use super::{ActionBounds, DiscreteModel};
use crate::error::{Error, Result};
use crate::numeric::{RealMat, RealVec};

/// The n-step Toy Problem with parameter `k`: a point on a line must reach the
/// origin in `n` moves, paying `k a²` per move and `x²` at the end.
///
/// Steps `0..n` move (`x + a`, reward `-k a²`); step `n` is action-free and pays
/// `-x²`; the episode terminates at `t = n + 1`. `terminal_ripple` adds
/// `A cos x` to the final reward, which gives the residual-gradient trap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyProblem {
    n: usize,
    k: f64,
    bounds: ActionBounds,
    terminal_ripple: f64,
}

impl ToyProblem {
    pub fn new(n: usize, k: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("toy problem needs n >= 1".into()));
        }
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::Argument(format!("toy problem needs finite k >= 0, got {k}")));
        }
        Ok(ToyProblem { n, k, bounds: ActionBounds::Unbounded, terminal_ripple: 0.0 })
    }

    /// Same problem with actions constrained to `[-1, 1]`.
    pub fn bounded(mut self) -> Self {
        self.bounds = ActionBounds::Unit;
        self
    }

    pub fn with_terminal_ripple(mut self, amplitude: f64) -> Self {
        self.terminal_ripple = amplitude;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn terminal_step(&self) -> usize {
        self.n + 1
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t > self.n {
            Err(Error::OutOfEpisode { t, terminal: self.n + 1 })
        } else {
            Ok(())
        }
    }

    pub fn toy_step(&self, t: usize, x: f64, a: f64) -> Result<(f64, f64)> {
        self.check_step(t)?;
        if t < self.n {
            Ok((x + a, -self.k * a * a))
        } else {
            Ok((x, -x * x + self.terminal_ripple * x.cos()))
        }
    }

    fn closed_form_ok(&self) -> Result<()> {
        if self.terminal_ripple != 0.0 || self.bounds != ActionBounds::Unbounded {
            return Err(Error::Unsupported(
                "closed-form optimum holds only for the unbounded, ripple-free problem".into(),
            ));
        }
        Ok(())
    }

    /// Optimal action `-x / (n - t + k)` for `t < n`.
    pub fn optimal_action(&self, t: usize, x: f64) -> Result<f64> {
        self.closed_form_ok()?;
        if t >= self.n {
            return Err(Error::OutOfEpisode { t, terminal: self.n });
        }
        Ok(-x / ((self.n - t) as f64 + self.k))
    }

    /// Optimal value: `-k x² / (n - t + k)` for `t < n`, the final reward `-x²`
    /// at `t = n`, and 0 at the terminal step.
    pub fn optimal_value(&self, t: usize, x: f64) -> Result<f64> {
        self.closed_form_ok()?;
        if t > self.n + 1 {
            return Err(Error::OutOfEpisode { t, terminal: self.n + 1 });
        }
        if t == self.n + 1 {
            return Ok(0.0);
        }
        if t == self.n {
            return Ok(-x * x);
        }
        Ok(-self.k * x * x / ((self.n - t) as f64 + self.k))
    }

    /// Total reward of an action sequence `a_0..a_{n-1}` from `x0`.
    pub fn total_reward(&self, x0: f64, actions: &[f64]) -> Result<f64> {
        if actions.len() != self.n {
            return Err(Error::Argument(format!("expected {} actions, got {}", self.n, actions.len())));
        }
        let mut x = x0;
        let mut total = 0.0;
        for (t, a) in actions.iter().enumerate() {
            let (xn, r) = self.toy_step(t, x, *a)?;
            total += r;
            x = xn;
        }
        Ok(total + self.toy_step(self.n, x, 0.0)?.1)
    }
}

impl DiscreteModel for ToyProblem {
    fn state_dim(&self) -> usize {
        1
    }

    fn action_bounds(&self) -> ActionBounds {
        self.bounds
    }

    fn is_terminal(&self, t: usize, _x: &RealVec) -> bool {
        t > self.n
    }

    fn is_action_free(&self, t: usize) -> bool {
        t >= self.n
    }

    fn step(&self, t: usize, x: &RealVec, a: f64) -> Result<(RealVec, f64)> {
        let (xn, r) = self.toy_step(t, x[0], a)?;
        Ok((RealVec::scalar(xn), r))
    }

    fn dfdx(&self, _t: usize, _x: &RealVec, _a: f64) -> RealMat {
        RealMat::identity(1)
    }

    fn dfda(&self, t: usize, _x: &RealVec, _a: f64) -> RealVec {
        RealVec::scalar(if t < self.n { 1.0 } else { 0.0 })
    }

    fn drdx(&self, t: usize, x: &RealVec, _a: f64) -> RealVec {
        if t < self.n {
            RealVec::scalar(0.0)
        } else {
            RealVec::scalar(-2.0 * x[0] - self.terminal_ripple * x[0].sin())
        }
    }

    fn drda(&self, t: usize, _x: &RealVec, a: f64) -> f64 {
        if t < self.n {
            -2.0 * self.k * a
        } else {
            0.0
        }
    }

    fn d2rda2(&self, t: usize, _x: &RealVec, _a: f64) -> f64 {
        if t < self.n {
            -2.0 * self.k
        } else {
            0.0
        }
    }

    fn d2rdxda(&self, _t: usize, _x: &RealVec, _a: f64) -> RealVec {
        RealVec::scalar(0.0)
    }

    fn d2rdx2(&self, t: usize, x: &RealVec, _a: f64) -> RealMat {
        let v = if t < self.n { 0.0 } else { -2.0 - self.terminal_ripple * x[0].cos() };
        RealMat::diag(&[v])
    }

    fn quadratic_step(&self, t: usize) -> Option<f64> {
        (t < self.n).then_some(self.k)
    }

    fn has_linear_dynamics(&self) -> bool {
        true
    }
}
