use std::fmt::Write as _;

use crate::analysis::pontryagin_lander;
use crate::critics::{Critic, MlpCritic};
use crate::error::Result;
use crate::learners::{ct_vgl, ct_vgl_omega_scaled, ct_vl, rprop_apply, RpropConfig, RpropState};
use crate::models::LunarLander;
use crate::numeric::{RealVec, SeededRng};
use crate::targets::{ct_rollout, ct_targets_g, ct_targets_v, CtTrajectory};

use super::config::{Algorithm, ExperimentConfig};

/// Relative gap to the oracle that counts as solved.
pub const ORACLE_GAP: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Exp5Run {
    pub trial: usize,
    /// Total reward over all starts, before each iteration's update and once more at the end.
    pub curve: Vec<f64>,
    /// Rollouts that failed (and so contributed nothing) over the whole run.
    pub failed_rollouts: usize,
    pub final_weights: RealVec,
    pub trajectories: Vec<Option<CtTrajectory>>,
}

impl Exp5Run {
    pub fn final_reward(&self) -> f64 {
        *self.curve.last().unwrap_or(&f64::NAN)
    }

    pub fn best_reward(&self) -> f64 {
        self.curve.iter().copied().filter(|r| r.is_finite()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// First iteration whose reward is within [`ORACLE_GAP`] of `oracle`.
    pub fn first_within(&self, oracle: f64) -> Option<usize> {
        self.curve.iter().position(|r| within(*r, oracle))
    }

    pub fn trajectories_tsv(&self) -> String {
        let mut out = String::from("start\tt\th\tv\tu\ta\n");
        for (s, traj) in self.trajectories.iter().enumerate() {
            let Some(traj) = traj else { continue };
            let mut t = 0.0;
            for (i, step) in traj.steps.iter().enumerate() {
                let x = &step.x;
                let _ = writeln!(out, "{s}\t{t}\t{}\t{}\t{}\t{}", x[0], x[1], x[2], step.policy.action);
                t += traj.steps[i].dt;
            }
            let x = &traj.terminal;
            let _ = writeln!(out, "{s}\t{t}\t{}\t{}\t{}\t", x[0], x[1], x[2]);
        }
        out
    }
}

pub fn within(r: f64, oracle: f64) -> bool {
    r.is_finite() && (r - oracle).abs() <= ORACLE_GAP * oracle.abs()
}

#[derive(Debug, Clone)]
pub struct Exp5Report {
    /// Oracle total reward summed over the starts; `None` if any start was infeasible.
    pub oracle: Option<f64>,
    pub runs: Vec<Exp5Run>,
}

impl Exp5Report {
    pub fn solved(&self) -> usize {
        match self.oracle {
            Some(o) => self.runs.iter().filter(|r| r.first_within(o).is_some()).count(),
            None => 0,
        }
    }

    pub fn summary_tsv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = format!("# {}\n# oracle_reward={}\n", cfg.echo(), self.oracle.map_or(f64::NAN, |o| o));
        out += "trial\tfinal_reward\tbest_reward\tfirst_within_5pct\tfailed_rollouts\n";
        for r in &self.runs {
            let first = self.oracle.and_then(|o| r.first_within(o)).map_or("-".to_string(), |i| i.to_string());
            let _ = writeln!(out, "{}\t{}\t{}\t{first}\t{}", r.trial, r.final_reward(), r.best_reward(), r.failed_rollouts);
        }
        out
    }

    pub fn curves_tsv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = format!("# {}\niteration", cfg.echo());
        for r in &self.runs {
            let _ = write!(out, "\ttrial{}", r.trial);
        }
        out += "\toracle\n";
        let len = self.runs.iter().map(|r| r.curve.len()).max().unwrap_or(0);
        for i in 0..len {
            let _ = write!(out, "{i}");
            for r in &self.runs {
                let _ = write!(out, "\t{}", r.curve.get(i).copied().unwrap_or(f64::NAN));
            }
            let _ = writeln!(out, "\t{}", self.oracle.unwrap_or(f64::NAN));
        }
        out
    }
}

fn start_vec(s: (f64, f64, f64)) -> RealVec {
    RealVec::from_slice(&[s.0, s.1, s.2])
}

pub fn lander_oracle(cfg: &ExperimentConfig) -> Result<Option<f64>> {
    let model = LunarLander::new(cfg.c)?;
    let mut total = 0.0;
    for s in cfg.starts.states() {
        match pontryagin_lander(&model, s, cfg.dt) {
            Ok(sol) => total += sol.total_reward,
            Err(_) => return Ok(None),
        }
    }
    Ok(Some(total))
}

/// Update direction as `(d, s)` with the update equal to `e^s d`.
fn update(model: &LunarLander, traj: &CtTrajectory, cfg: &ExperimentConfig) -> Result<(RealVec, f64)> {
    match cfg.algorithm {
        Algorithm::Vl => Ok((ct_vl(traj, &ct_targets_v(traj, cfg.lambda)?, 1.0)?.dw, 0.0)),
        Algorithm::Vgl => Ok((ct_vgl(traj, &ct_targets_g(model, traj, cfg.lambda)?, 1.0)?.dw, 0.0)),
        _ => ct_vgl_omega_scaled(model, traj, &ct_targets_g(model, traj, cfg.lambda)?),
    }
}

/// Sum of `e^s d` terms, up to a common positive factor.
fn combine(parts: &[(RealVec, f64)], n: usize) -> RealVec {
    let top = parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mut dir = RealVec::zeros(n);
    for (d, s) in parts {
        dir.axpy((s - top).exp(), d);
    }
    dir
}

/// Roll out every start, returning the summed reward and the accumulated
/// update. Only the update's direction matters to RPROP, so it is returned
/// up to a positive factor.
fn sweep(
    model: &LunarLander,
    critic: &MlpCritic,
    starts: &[RealVec],
    cfg: &ExperimentConfig,
    keep: bool,
) -> (f64, RealVec, usize, Vec<Option<CtTrajectory>>) {
    let mut total = 0.0;
    let mut parts = Vec::with_capacity(starts.len());
    let mut failed = 0;
    let mut kept = Vec::new();
    for x0 in starts {
        let traj = match ct_rollout(model, critic, x0, cfg.dt) {
            Ok(t) => t,
            Err(_) => {
                failed += 1;
                total = f64::NAN;
                if keep {
                    kept.push(None);
                }
                continue;
            }
        };
        total += traj.total_reward();
        match update(model, &traj, cfg) {
            Ok(u) if u.0.is_finite() && u.1.is_finite() => parts.push(u),
            _ => failed += 1,
        }
        if keep {
            kept.push(Some(traj));
        }
    }
    (total, combine(&parts, critic.num_weights()), failed, kept)
}

pub fn run_lander_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Exp5Run> {
    let model = LunarLander::new(cfg.c)?;
    let mut critic = MlpCritic::lander(cfg.input_activation);
    critic.randomize(&mut SeededRng::for_trial(cfg.seed, trial as u64));
    let starts: Vec<RealVec> = cfg.starts.states().into_iter().map(start_vec).collect();
    let mut rprop = RpropState::new(critic.num_weights(), RpropConfig::default());
    let mut curve = Vec::with_capacity(cfg.max_iterations + 1);
    let mut failed_rollouts = 0;
    for _ in 0..cfg.max_iterations {
        let (total, dir, failed, _) = sweep(&model, &critic, &starts, cfg, false);
        curve.push(total);
        failed_rollouts += failed;
        if failed == starts.len() {
            // nothing to learn from; the weights would never move again
            break;
        }
        let w = rprop_apply(critic.weights(), &dir, &mut rprop)?;
        critic.set_weights(&w)?;
    }
    let (total, _, failed, trajectories) = sweep(&model, &critic, &starts, cfg, true);
    curve.push(total);
    failed_rollouts += failed;
    Ok(Exp5Run { trial, curve, failed_rollouts, final_weights: critic.weights().clone(), trajectories })
}

pub fn run_exp5(cfg: &ExperimentConfig) -> Result<Exp5Report> {
    cfg.validate()?;
    let oracle = lander_oracle(cfg)?;
    let trials = cfg.trials;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(trials).max(1);
    let mut runs: Vec<Option<Result<Exp5Run>>> = (0..trials).map(|_| None).collect();
    std::thread::scope(|s| {
        let per = trials.div_ceil(threads);
        for (c, chunk) in runs.chunks_mut(per).enumerate() {
            s.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(run_lander_trial(cfg, c * per + j));
                }
            });
        }
    });
    let runs = runs.into_iter().map(|r| r.expect("every trial ran")).collect::<Result<Vec<_>>>()?;
    Ok(Exp5Report { oracle, runs })
}
