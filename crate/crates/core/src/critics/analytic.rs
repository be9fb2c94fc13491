use super::{check_len, Critic, CriticBundle};
use crate::error::{Error, Result};
use crate::numeric::{RealMat, RealVec};

/// `V_t(x) = -q x² + β x + γ` with `β`, `γ` linear in the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StepQuadratic {
    pub q: f64,
    pub beta: f64,
    pub gamma: f64,
    pub dbeta_dw: RealVec,
    pub dgamma_dw: RealVec,
}

impl StepQuadratic {
    pub fn zero(num_weights: usize) -> Self {
        StepQuadratic {
            q: 0.0,
            beta: 0.0,
            gamma: 0.0,
            dbeta_dw: RealVec::zeros(num_weights),
            dgamma_dw: RealVec::zeros(num_weights),
        }
    }

    pub fn bundle(&self, x: f64) -> CriticBundle {
        let n = self.dbeta_dw.len();
        let mut dv_dw = self.dbeta_dw.scaled(x);
        dv_dw.axpy(1.0, &self.dgamma_dw);
        let mut dg_dw = RealMat::zeros(n, 1);
        dg_dw.set_column(0, &self.dbeta_dw);
        CriticBundle {
            value: -self.q * x * x + self.beta * x + self.gamma,
            grad: RealVec::scalar(-2.0 * self.q * x + self.beta),
            dv_dw,
            dg_dw,
            dg_dx: RealMat::diag(&[-2.0 * self.q]),
        }
    }
}

/// The hand-designed, time-indexed critics of the Toy Problem experiments.
/// Every form is zero on steps it does not mention.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticForm {
    /// Step 1: `-(x - c1)² + w1 x + w2`.
    OneStep { c1: f64 },
    /// Step 1: `-c1 x² + w1 x + w2`; step 2: `-c2 x² + w3 x + w4`.
    TwoStep { c1: f64, c2: f64 },
    /// [`AnalyticForm::TwoStep`] with `(w1, w3) = F (p1, p2)`; weights `(p1, p2, w2, w4)`.
    TwoStepMixed { c1: f64, c2: f64, mix: [[f64; 2]; 2] },
    /// Step 1: `-c1 x² + w1 x`; step 2: `-c2 x² + (w1 - c3) x`.
    SharedWeight { c1: f64, c2: f64, c3: f64 },
    /// Steps `1..=steps`: `w_{2t-1} + w_{2t} x`.
    Linear { steps: usize },
}

impl AnalyticForm {
    pub fn num_weights(&self) -> usize {
        match self {
            AnalyticForm::OneStep { .. } => 2,
            AnalyticForm::TwoStep { .. } | AnalyticForm::TwoStepMixed { .. } => 4,
            AnalyticForm::SharedWeight { .. } => 1,
            AnalyticForm::Linear { steps } => 2 * steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticCritic {
    form: AnalyticForm,
    weights: RealVec,
}

impl AnalyticCritic {
    pub fn new(form: AnalyticForm, weights: RealVec) -> Result<Self> {
        check_len(&weights, form.num_weights())?;
        if let AnalyticForm::Linear { steps: 0 } = form {
            return Err(Error::Argument("linear critic needs at least one step".into()));
        }
        weights.validate("critic weights")?;
        Ok(AnalyticCritic { form, weights })
    }

    pub fn one_step(c1: f64, w: [f64; 2]) -> Self {
        AnalyticCritic { form: AnalyticForm::OneStep { c1 }, weights: RealVec::from_slice(&w) }
    }

    pub fn two_step(c1: f64, c2: f64, w: [f64; 4]) -> Self {
        AnalyticCritic { form: AnalyticForm::TwoStep { c1, c2 }, weights: RealVec::from_slice(&w) }
    }

    pub fn shared_weight(c1: f64, c2: f64, c3: f64, w1: f64) -> Self {
        AnalyticCritic { form: AnalyticForm::SharedWeight { c1, c2, c3 }, weights: RealVec::scalar(w1) }
    }

    /// One-step linear critic `V_1 = w1 + w2 x`.
    pub fn linear_one_step(w: [f64; 2]) -> Self {
        AnalyticCritic { form: AnalyticForm::Linear { steps: 1 }, weights: RealVec::from_slice(&w) }
    }

    pub fn form(&self) -> &AnalyticForm {
        &self.form
    }

    /// Weights that the two-step critics feed into the step-1 and step-2 slopes.
    pub fn slope_weights(&self) -> Option<(f64, f64)> {
        let w = &self.weights;
        match &self.form {
            AnalyticForm::TwoStep { .. } => Some((w[0], w[2])),
            AnalyticForm::TwoStepMixed { mix, .. } => {
                Some((mix[0][0] * w[0] + mix[0][1] * w[1], mix[1][0] * w[0] + mix[1][1] * w[1]))
            }
            _ => None,
        }
    }

    fn form_at(&self, t: usize) -> StepQuadratic {
        let n = self.form.num_weights();
        let w = &self.weights;
        let unit = |i: usize| RealVec::basis(n, i);
        match &self.form {
            AnalyticForm::OneStep { c1 } if t == 1 => StepQuadratic {
                q: 1.0,
                beta: 2.0 * c1 + w[0],
                gamma: w[1] - c1 * c1,
                dbeta_dw: unit(0),
                dgamma_dw: unit(1),
            },
            AnalyticForm::TwoStep { c1, c2 } if t == 1 || t == 2 => {
                let (q, b, g) = if t == 1 { (*c1, 0, 1) } else { (*c2, 2, 3) };
                StepQuadratic { q, beta: w[b], gamma: w[g], dbeta_dw: unit(b), dgamma_dw: unit(g) }
            }
            AnalyticForm::TwoStepMixed { c1, c2, mix } if t == 1 || t == 2 => {
                let (q, row, g) = if t == 1 { (*c1, 0, 2) } else { (*c2, 1, 3) };
                let dbeta = RealVec::from_slice(&[mix[row][0], mix[row][1], 0.0, 0.0]);
                StepQuadratic { q, beta: dbeta.dot(w), gamma: w[g], dbeta_dw: dbeta, dgamma_dw: unit(g) }
            }
            AnalyticForm::SharedWeight { c1, c2, c3 } if t == 1 || t == 2 => StepQuadratic {
                q: if t == 1 { *c1 } else { *c2 },
                beta: if t == 1 { w[0] } else { w[0] - c3 },
                gamma: 0.0,
                dbeta_dw: unit(0),
                dgamma_dw: RealVec::zeros(1),
            },
            AnalyticForm::Linear { steps } if t >= 1 && t <= *steps => {
                let g = 2 * (t - 1);
                StepQuadratic { q: 0.0, beta: w[g + 1], gamma: w[g], dbeta_dw: unit(g + 1), dgamma_dw: unit(g) }
            }
            _ => StepQuadratic::zero(n),
        }
    }
}

impl Critic for AnalyticCritic {
    fn state_dim(&self) -> usize {
        1
    }

    fn num_weights(&self) -> usize {
        self.weights.len()
    }

    fn weights(&self) -> &RealVec {
        &self.weights
    }

    fn set_weights(&mut self, w: &RealVec) -> Result<()> {
        check_len(w, self.weights.len())?;
        self.weights = w.clone();
        Ok(())
    }

    fn eval(&self, t: usize, x: &RealVec) -> Result<CriticBundle> {
        check_len(x, 1)?;
        Ok(self.form_at(t).bundle(x[0]))
    }

    fn value(&self, t: usize, x: &RealVec) -> Result<f64> {
        check_len(x, 1)?;
        let f = self.form_at(t);
        Ok(-f.q * x[0] * x[0] + f.beta * x[0] + f.gamma)
    }

    fn step_quadratic(&self, t: usize) -> Option<StepQuadratic> {
        Some(self.form_at(t))
    }

    fn has_constant_curvature(&self) -> bool {
        true
    }
}
