//! Trials on the Toy Problem (experiments 1, 2 and 4).
//!
//! The reference update goes through the general learners. Long runs use two
//! faster paths that the tests pin to it: a closed-form value-learning step
//! for the quadratic critics, and for greedy value-gradient runs the affine
//! map `Δw = α(M w + m)` read off the reference update.

use crate::analysis::let_check;
use crate::critics::{AnalyticCritic, AnalyticForm, Critic};
use crate::error::{Error, Result};
use crate::learners::{td_lambda, vgl, vgl_rg, OmegaMode, RgBackend, Update};
use crate::models::{DiscreteModel, ToyProblem};
use crate::numeric::{rnd, RealMat, RealVec, SeededRng};
use crate::policy::PolicyKind;
use crate::targets::{compute_omega, compute_targets_g, compute_targets_v, greedy_rollout, rollout};

use super::config::{Algorithm, ExperimentConfig};

/// Weights beyond this magnitude count as overflow.
pub const OVERFLOW: f64 = 1e100;
/// Largest update, in every component, at which a deterministic run is
/// declared stuck away from the optimum.
pub const STALL: f64 = 1e-15;
pub const INIT_RANGE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    Overflow,
    IterationCap,
    Stalled,
    TargetsUndefined,
    Error,
}

impl FailureReason {
    pub fn tag(self) -> &'static str {
        match self {
            FailureReason::Overflow => "overflow",
            FailureReason::IterationCap => "iteration-cap",
            FailureReason::Stalled => "stalled",
            FailureReason::TargetsUndefined => "targets-undefined",
            FailureReason::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub success: bool,
    pub iterations: usize,
    pub failure: Option<FailureReason>,
    pub weights: Vec<f64>,
    /// Total reward of the greedy policy at the final weights.
    pub reward: f64,
    /// Largest extremality residual of the final greedy trajectory (successful trials).
    pub let_residual: Option<f64>,
}

/// Problem, critic and stopping rule for one Toy configuration.
#[derive(Debug, Clone)]
pub struct ToySetup {
    pub model: ToyProblem,
    pub critic: AnalyticCritic,
    /// Weight indices that affect the trajectory, and their optimum.
    pub tracked: Vec<(usize, f64)>,
}

pub fn x0() -> RealVec {
    RealVec::scalar(0.0)
}

impl ToySetup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let model = ToyProblem::new(cfg.n, cfg.k)?;
        let (form, tracked) = match cfg.experiment {
            1 => (AnalyticForm::OneStep { c1: cfg.c1 }, vec![(0, -2.0 * cfg.c1)]),
            2 => (AnalyticForm::TwoStep { c1: cfg.c1, c2: cfg.c2 }, vec![(0, 0.0), (2, 0.0)]),
            4 => (AnalyticForm::SharedWeight { c1: cfg.c1, c2: cfg.c2, c3: cfg.c3 }, vec![]),
            e => return Err(Error::Config(format!("experiment {e} is not a Toy trial experiment"))),
        };
        let critic = AnalyticCritic::new(form.clone(), RealVec::zeros(form.num_weights()))?;
        Ok(ToySetup { model, critic, tracked })
    }

    pub fn num_weights(&self) -> usize {
        self.critic.num_weights()
    }

    fn with_weights(&self, w: &RealVec) -> Result<AnalyticCritic> {
        let mut c = self.critic.clone();
        c.set_weights(w)?;
        Ok(c)
    }

    /// One update through the general learners.
    pub fn reference_update(&self, cfg: &ExperimentConfig, w: &RealVec, rng: &mut SeededRng) -> Result<Update> {
        let critic = self.with_weights(w)?;
        let m = &self.model;
        let kind = if cfg.epsilon > 0.0 { PolicyKind::EpsilonGreedy(cfg.epsilon) } else { PolicyKind::Greedy };
        if cfg.algorithm == Algorithm::VglRg {
            let backend = if m.has_linear_dynamics() && critic.has_constant_curvature() {
                RgBackend::Analytic
            } else {
                RgBackend::Numeric
            };
            return vgl_rg(m, &critic, &x0(), cfg.lambda, cfg.alpha, backend);
        }
        let traj = rollout(m, &critic, kind, 0, &x0(), rng)?;
        match cfg.algorithm {
            Algorithm::Vl => td_lambda(&traj, &compute_targets_v(&traj, cfg.lambda)?, cfg.alpha),
            Algorithm::Vgl => vgl(&traj, &compute_targets_g(&traj, cfg.lambda)?, None, OmegaMode::Identity, cfg.alpha),
            Algorithm::VglOmega => {
                let g = compute_targets_g(&traj, cfg.lambda)?;
                let om = compute_omega(&traj)?;
                vgl(&traj, &g, Some(&om), OmegaMode::Greedy, cfg.alpha)
            }
            Algorithm::VglRg => unreachable!(),
        }
    }

    fn reached(&self, w: &[f64], tol: f64) -> bool {
        !self.tracked.is_empty() && self.tracked.iter().all(|&(i, opt)| (w[i] - opt).abs() < tol)
    }

    /// Greedy total reward and, optionally, the extremality residual at `w`.
    fn evaluate(&self, w: &[f64], with_let: bool) -> (f64, Option<f64>) {
        let Ok(c) = self.with_weights(&RealVec::from_slice(w)) else {
            return (f64::NAN, None);
        };
        match greedy_rollout(&self.model, &c, &x0()) {
            Ok(traj) => {
                let res = if with_let { let_check(&traj, &self.model).ok().map(|r| r.max_residual()) } else { None };
                (traj.total_reward(), res)
            }
            Err(_) => (f64::NAN, None),
        }
    }
}

/// Closed-form value-learning step for the one- and two-step quadratic critics.
#[derive(Debug, Clone, Copy)]
pub enum VlKernel {
    /// `V1 = -(x - c1)² + w1 x + w2`; weights `(w1, w2)`.
    OneStep { c1: f64, k: f64 },
    /// `V1 = -c1 x² + s1 x + o1`, `V2 = -c2 x² + s2 x + o2` with `s = F p`;
    /// weights `(p1, p2, o1, o2)`.
    TwoStep { c1: f64, c2: f64, k: f64, lambda: f64, mix: [[f64; 2]; 2] },
}

impl VlKernel {
    pub fn for_form(form: &AnalyticForm, k: f64, lambda: f64) -> Option<VlKernel> {
        match *form {
            AnalyticForm::OneStep { c1 } => Some(VlKernel::OneStep { c1, k }),
            AnalyticForm::TwoStep { c1, c2 } => {
                Some(VlKernel::TwoStep { c1, c2, k, lambda, mix: [[1.0, 0.0], [0.0, 1.0]] })
            }
            AnalyticForm::TwoStepMixed { c1, c2, mix } => Some(VlKernel::TwoStep { c1, c2, k, lambda, mix }),
            _ => None,
        }
    }

    /// Map the critic's weight layout to the kernel's and back.
    fn layout(form: &AnalyticForm) -> [usize; 4] {
        match form {
            // (w1, w2, w3, w4) -> (p1 = w1, p2 = w3, o1 = w2, o2 = w4)
            AnalyticForm::TwoStep { .. } => [0, 2, 1, 3],
            _ => [0, 1, 2, 3],
        }
    }

    /// Weight change for one ε-greedy episode from `x0 = 0`, in kernel layout.
    pub fn delta(&self, w: &[f64], eps: f64, alpha: f64, rng: &mut SeededRng, out: &mut [f64]) -> Result<()> {
        match *self {
            VlKernel::OneStep { c1, k } => {
                let a = (2.0 * c1 + w[0]) / (2.0 * (1.0 + k)) + rnd(eps, rng)?;
                let x1 = a;
                let v = -(x1 - c1) * (x1 - c1) + w[0] * x1 + w[1];
                let d = -x1 * x1 - v;
                out[0] = alpha * d * x1;
                out[1] = alpha * d;
            }
            VlKernel::TwoStep { c1, c2, k, lambda, mix } => {
                let s1 = mix[0][0] * w[0] + mix[0][1] * w[1];
                let s2 = mix[1][0] * w[0] + mix[1][1] * w[1];
                let a0 = s1 / (2.0 * (c1 + k)) + rnd(eps, rng)?;
                let x1 = a0;
                let a1 = (s2 - 2.0 * c2 * x1) / (2.0 * (c2 + k)) + rnd(eps, rng)?;
                let x2 = x1 + a1;
                let v1 = -c1 * x1 * x1 + s1 * x1 + w[2];
                let v2 = -c2 * x2 * x2 + s2 * x2 + w[3];
                let t2 = -x2 * x2;
                let t1 = -k * a1 * a1 + lambda * t2 + (1.0 - lambda) * v2;
                let (d1, d2) = (alpha * (t1 - v1), alpha * (t2 - v2));
                out[0] = d1 * mix[0][0] * x1 + d2 * mix[1][0] * x2;
                out[1] = d1 * mix[0][1] * x1 + d2 * mix[1][1] * x2;
                out[2] = d1;
                out[3] = d2;
            }
        }
        Ok(())
    }
}

/// Run a VL kernel over critic-layout weights `w` (in place) until `stop`.
/// Returns the iteration count and the failure reason, if any.
pub fn run_vl_kernel<S>(
    kernel: &VlKernel,
    form: &AnalyticForm,
    w: &mut [f64],
    cfg: &ExperimentConfig,
    rng: &mut SeededRng,
    mut stop: S,
) -> Result<(usize, Option<FailureReason>)>
where
    S: FnMut(&[f64]) -> bool,
{
    let n = w.len();
    let map = VlKernel::layout(form);
    let mut kw = vec![0.0; n];
    for i in 0..n {
        kw[i] = w[map[i]];
    }
    let mut dw = vec![0.0; n];
    let mut cw = vec![0.0; n];
    let deterministic = cfg.epsilon == 0.0;
    for it in 1..=cfg.max_iterations {
        kernel.delta(&kw, cfg.epsilon, cfg.alpha, rng, &mut dw)?;
        let mut biggest = 0.0f64;
        for i in 0..n {
            kw[i] += dw[i];
            biggest = biggest.max(dw[i].abs());
        }
        if !kw.iter().all(|v| v.abs() <= OVERFLOW) {
            write_back(&kw, &map, w);
            return Ok((it, Some(FailureReason::Overflow)));
        }
        for i in 0..n {
            cw[map[i]] = kw[i];
        }
        if stop(&cw) {
            w.copy_from_slice(&cw);
            return Ok((it, None));
        }
        if deterministic && biggest < STALL {
            w.copy_from_slice(&cw);
            return Ok((it, Some(FailureReason::Stalled)));
        }
    }
    write_back(&kw, &map, w);
    Ok((cfg.max_iterations, Some(FailureReason::IterationCap)))
}

fn write_back(kw: &[f64], map: &[usize; 4], w: &mut [f64]) {
    for i in 0..kw.len() {
        w[map[i]] = kw[i];
    }
}

/// `Δw = α(M w + m)` for a deterministic update that is affine in the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineUpdate {
    pub m: RealMat,
    pub offset: RealVec,
    pub alpha: f64,
}

impl AffineUpdate {
    /// Read the map off the reference update by probing the origin and the
    /// unit vectors, then confirm it at `check`.
    pub fn probe(setup: &ToySetup, cfg: &ExperimentConfig, check: &RealVec) -> Result<Option<AffineUpdate>> {
        if cfg.epsilon != 0.0 {
            return Ok(None);
        }
        let unit = ExperimentConfig { alpha: 1.0, ..cfg.clone() };
        let mut rng = SeededRng::new(0);
        let n = setup.num_weights();
        let offset = setup.reference_update(&unit, &RealVec::zeros(n), &mut rng)?.dw;
        let mut m = RealMat::zeros(n, n);
        for j in 0..n {
            let u = setup.reference_update(&unit, &RealVec::basis(n, j), &mut rng)?.dw;
            m.set_column(j, &u.sub(&offset));
        }
        let a = AffineUpdate { m, offset, alpha: cfg.alpha };
        let want = setup.reference_update(&unit, check, &mut rng)?.dw;
        let got = a.m.mul_vec(check).add(&a.offset);
        let scale = want.max_abs().max(1.0);
        Ok((want.sub(&got).max_abs() <= 1e-9 * scale).then_some(a))
    }

    pub fn delta(&self, w: &[f64], out: &mut [f64]) {
        let n = w.len();
        let m = self.m.as_slice();
        for i in 0..n {
            let mut s = self.offset[i];
            for j in 0..n {
                s += m[i * n + j] * w[j];
            }
            out[i] = self.alpha * s;
        }
    }
}

enum Stepper {
    Vl(VlKernel),
    Affine(AffineUpdate),
    Reference,
}

/// Per-configuration state shared by every trial.
pub struct ToyRunner {
    pub cfg: ExperimentConfig,
    pub setup: ToySetup,
    stepper: Stepper,
}

impl ToyRunner {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let setup = ToySetup::new(cfg)?;
        let form = setup.critic.form().clone();
        let stepper = if cfg.algorithm == Algorithm::Vl {
            VlKernel::for_form(&form, cfg.k, cfg.lambda).map_or(Stepper::Reference, Stepper::Vl)
        } else {
            let n = setup.num_weights();
            let check: RealVec = (0..n).map(|i| 1.5 - 0.7 * i as f64).collect();
            match AffineUpdate::probe(&setup, cfg, &check) {
                Ok(Some(a)) => Stepper::Affine(a),
                _ => Stepper::Reference,
            }
        };
        Ok(ToyRunner { cfg: cfg.clone(), setup, stepper })
    }

    /// Whether trials use the reference learners directly.
    pub fn uses_reference(&self) -> bool {
        matches!(self.stepper, Stepper::Reference)
    }

    pub fn force_reference(&mut self) {
        self.stepper = Stepper::Reference;
    }

    pub fn initial_weights(&self, rng: &mut SeededRng) -> Vec<f64> {
        (0..self.setup.num_weights()).map(|_| rng.uniform(-INIT_RANGE, INIT_RANGE)).collect()
    }

    pub fn trial(&self, index: u64) -> TrialResult {
        let mut rng = SeededRng::for_trial(self.cfg.seed, index);
        let mut w = self.initial_weights(&mut rng);
        self.trial_from(&mut w, &mut rng)
    }

    /// Run one trial from `w` (updated in place).
    pub fn trial_from(&self, w: &mut [f64], rng: &mut SeededRng) -> TrialResult {
        let cfg = &self.cfg;
        let exp4 = cfg.experiment == 4;
        let threshold = cfg.tolerance * cfg.alpha;
        let outcome = match &self.stepper {
            Stepper::Vl(k) => {
                let form = self.setup.critic.form().clone();
                run_vl_kernel(k, &form, w, cfg, rng, |cw| self.setup.reached(cw, cfg.tolerance))
            }
            Stepper::Affine(a) => Ok(self.run_affine(a, w, exp4, threshold)),
            Stepper::Reference => self.run_reference(w, rng, exp4, threshold),
        };
        let (iterations, failure) = match outcome {
            Ok(o) => o,
            Err(Error::TargetsUndefined { .. }) => (0, Some(FailureReason::TargetsUndefined)),
            Err(_) => (0, Some(FailureReason::Error)),
        };
        let success = failure.is_none();
        let finite = w.iter().all(|v| v.is_finite());
        let (reward, let_residual) =
            if finite { self.setup.evaluate(w, success && !exp4) } else { (f64::NAN, None) };
        TrialResult { success, iterations, failure, weights: w.to_vec(), reward, let_residual }
    }

    fn run_affine(&self, a: &AffineUpdate, w: &mut [f64], exp4: bool, threshold: f64) -> (usize, Option<FailureReason>) {
        let cfg = &self.cfg;
        let mut dw = vec![0.0; w.len()];
        for it in 1..=cfg.max_iterations {
            a.delta(w, &mut dw);
            let mut biggest = 0.0f64;
            for i in 0..w.len() {
                w[i] += dw[i];
                biggest = biggest.max(dw[i].abs());
            }
            if !w.iter().all(|v| v.abs() <= OVERFLOW) {
                return (it, Some(FailureReason::Overflow));
            }
            if exp4 {
                if dw[0].abs() < threshold {
                    return (it, None);
                }
            } else if self.setup.reached(w, cfg.tolerance) {
                return (it, None);
            } else if biggest < STALL {
                return (it, Some(FailureReason::Stalled));
            }
        }
        (cfg.max_iterations, Some(FailureReason::IterationCap))
    }

    fn run_reference(
        &self,
        w: &mut [f64],
        rng: &mut SeededRng,
        exp4: bool,
        threshold: f64,
    ) -> Result<(usize, Option<FailureReason>)> {
        let cfg = &self.cfg;
        for it in 1..=cfg.max_iterations {
            let u = self.setup.reference_update(cfg, &RealVec::from_slice(w), rng)?;
            for i in 0..w.len() {
                w[i] += u.dw[i];
            }
            if !w.iter().all(|v| v.abs() <= OVERFLOW) {
                return Ok((it, Some(FailureReason::Overflow)));
            }
            if exp4 {
                if u.dw[0].abs() < threshold {
                    return Ok((it, None));
                }
            } else if self.setup.reached(w, cfg.tolerance) {
                return Ok((it, None));
            } else if cfg.epsilon == 0.0 && u.dw.max_abs() < STALL {
                return Ok((it, Some(FailureReason::Stalled)));
            }
        }
        Ok((cfg.max_iterations, Some(FailureReason::IterationCap)))
    }
}

/// Run every trial of a Toy configuration, spread over the available cores.
/// Results are ordered by trial index and do not depend on the thread count.
pub fn run_toy_trials(runner: &ToyRunner) -> Vec<TrialResult> {
    let trials = runner.cfg.trials;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(trials).max(1);
    if threads == 1 {
        return (0..trials as u64).map(|i| runner.trial(i)).collect();
    }
    let mut out: Vec<Option<TrialResult>> = vec![None; trials];
    std::thread::scope(|s| {
        let chunks: Vec<_> = out
            .chunks_mut(trials.div_ceil(threads))
            .enumerate()
            .map(|(c, chunk)| {
                let base = c * trials.div_ceil(threads);
                s.spawn(move || {
                    for (j, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(runner.trial((base + j) as u64));
                    }
                })
            })
            .collect();
        for h in chunks {
            h.join().expect("trial thread panicked");
        }
    });
    out.into_iter().map(|r| r.expect("every trial ran")).collect()
}
