use super::Update;
use crate::error::{Error, Result};
use crate::numeric::RealVec;

pub fn sgd_apply(w: &RealVec, u: &Update) -> Result<RealVec> {
    if w.len() != u.dw.len() {
        return Err(Error::Argument(format!("update has {} components, weights {}", u.dw.len(), w.len())));
    }
    Ok(w.add(&u.dw))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpropConfig {
    pub increase: f64,
    pub decrease: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for RpropConfig {
    fn default() -> Self {
        RpropConfig { increase: 1.2, decrease: 0.5, initial_step: 0.1, max_step: 50.0, min_step: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpropState {
    pub config: RpropConfig,
    pub steps: Vec<f64>,
    prev: Vec<f64>,
}

impl RpropState {
    pub fn new(n: usize, config: RpropConfig) -> Self {
        RpropState { config, steps: vec![config.initial_step; n], prev: vec![0.0; n] }
    }
}

/// One RPROP step along an ascent direction (e.g. an accumulated weight
/// update). After a sign change the step shrinks and that component is left
/// alone for the iteration.
pub fn rprop_apply(w: &RealVec, direction: &RealVec, state: &mut RpropState) -> Result<RealVec> {
    if w.len() != direction.len() || w.len() != state.steps.len() {
        return Err(Error::Argument("RPROP dimensions do not match".into()));
    }
    let c = state.config;
    let mut out = w.clone();
    for i in 0..w.len() {
        let g = direction[i];
        let s = state.prev[i] * g;
        if s > 0.0 {
            state.steps[i] = (state.steps[i] * c.increase).min(c.max_step);
        } else if s < 0.0 {
            state.steps[i] = (state.steps[i] * c.decrease).max(c.min_step);
            state.prev[i] = 0.0;
            continue;
        }
        if g != 0.0 {
            out[i] += g.signum() * state.steps[i];
        }
        state.prev[i] = g;
    }
    Ok(out)
}
