//! Value-function approximators. Every critic returns the full derivative
//! bundle analytically; nothing in here uses finite differences.

mod analytic;
mod mlp;

pub use analytic::{AnalyticCritic, AnalyticForm, StepQuadratic};
pub use mlp::{InputActivation, MlpCritic};

use crate::error::Result;
use crate::numeric::{RealMat, RealVec};

/// Everything a learner needs from the critic at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticBundle {
    pub value: f64,
    /// `∂V/∂x`.
    pub grad: RealVec,
    pub dv_dw: RealVec,
    /// `n_w × n_x`; element `(i, j)` is `∂G^j/∂w^i`.
    pub dg_dw: RealMat,
    /// `n_x × n_x`.
    pub dg_dx: RealMat,
}

impl CriticBundle {
    pub fn zeros(state_dim: usize, num_weights: usize) -> Self {
        CriticBundle {
            value: 0.0,
            grad: RealVec::zeros(state_dim),
            dv_dw: RealVec::zeros(num_weights),
            dg_dw: RealMat::zeros(num_weights, state_dim),
            dg_dx: RealMat::zeros(state_dim, state_dim),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.is_finite()
            && self.dv_dw.is_finite()
            && self.dg_dw.is_finite()
            && self.dg_dx.is_finite()
    }
}

pub trait Critic: Send + Sync {
    fn state_dim(&self) -> usize;

    fn num_weights(&self) -> usize;

    fn weights(&self) -> &RealVec;

    fn set_weights(&mut self, w: &RealVec) -> Result<()>;

    /// Evaluate at `x` on step `t`. Critics that are not time-indexed ignore `t`.
    fn eval(&self, t: usize, x: &RealVec) -> Result<CriticBundle>;

    fn value(&self, t: usize, x: &RealVec) -> Result<f64> {
        Ok(self.eval(t, x)?.value)
    }

    /// Per-step quadratic form `V_t(x) = -q x² + β(w) x + γ(w)` when the critic
    /// has one on step `t` (one-dimensional state only).
    fn step_quadratic(&self, _t: usize) -> Option<StepQuadratic> {
        None
    }

    /// Whether `∂G/∂x` is independent of both state and weights.
    fn has_constant_curvature(&self) -> bool {
        false
    }
}

/// `V ≡ 0`, with no weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCritic {
    dim: usize,
    weights: RealVec,
}

impl ZeroCritic {
    pub fn new(dim: usize) -> Self {
        ZeroCritic { dim, weights: RealVec::zeros(0) }
    }
}

impl Critic for ZeroCritic {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn num_weights(&self) -> usize {
        0
    }

    fn weights(&self) -> &RealVec {
        &self.weights
    }

    fn set_weights(&mut self, w: &RealVec) -> Result<()> {
        check_len(w, 0)
    }

    fn eval(&self, _t: usize, x: &RealVec) -> Result<CriticBundle> {
        check_len(x, self.dim)?;
        Ok(CriticBundle::zeros(self.dim, 0))
    }

    fn step_quadratic(&self, _t: usize) -> Option<StepQuadratic> {
        (self.dim == 1).then(|| StepQuadratic::zero(0))
    }

    fn has_constant_curvature(&self) -> bool {
        true
    }
}

pub(crate) fn check_len(v: &RealVec, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(crate::Error::Argument(format!("expected length {n}, got {}", v.len())));
    }
    Ok(())
}
