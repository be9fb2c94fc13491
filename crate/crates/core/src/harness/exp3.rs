use std::fmt::Write as _;

use crate::analysis::{is_stable, leading_real_part, simulate_linear, LinearOutcome, StabilityPreset};
use crate::critics::AnalyticForm;
use crate::error::Result;
use crate::numeric::{RealVec, SeededRng};

use super::config::ExperimentConfig;
use super::toy::{run_vl_kernel, FailureReason, VlKernel, INIT_RANGE};

/// Weight norm treated as divergence.
pub const BLOWUP: f64 = 1e12;
pub const LINEAR_ALPHA: f64 = 1e-3;
pub const LINEAR_STEPS: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub preset: StabilityPreset,
    /// `true` for the greedy-weighted update.
    pub omega: bool,
    pub lambda: f64,
    pub stable: bool,
    pub leading_real: f64,
    pub simulated: LinearOutcome,
}

impl LinearRow {
    pub fn algorithm(&self) -> String {
        format!("{}({})", if self.omega { "VGLOmega" } else { "VGL" }, self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRow {
    pub preset: StabilityPreset,
    pub lambda: f64,
    pub seeds: usize,
    pub blowups: usize,
    /// Iterations to blow-up (or the cap) per seed.
    pub iterations: Vec<usize>,
}

impl EmpiricalRow {
    pub fn majority(&self) -> bool {
        2 * self.blowups > self.seeds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exp3Report {
    pub linear: Vec<LinearRow>,
    pub empirical: Vec<EmpiricalRow>,
}

pub fn linear_rows(preset: StabilityPreset) -> Vec<LinearRow> {
    let mut out = Vec::new();
    for lambda in [0.0, 1.0] {
        let sys = preset.system(Some(lambda));
        for (omega, m) in [(false, &sys.m_identity), (true, &sys.m_omega)] {
            let run = simulate_linear(m, &RealVec::from_slice(&[1.0, 1.0]), LINEAR_ALPHA, LINEAR_STEPS);
            out.push(LinearRow {
                preset,
                omega,
                lambda,
                stable: is_stable(m),
                leading_real: leading_real_part(m),
                simulated: run.outcome,
            });
        }
    }
    out
}

/// VL(λ) with ε-greedy exploration on the preset's two-step problem, one
/// run per seed; counts runs whose weights leave `[-BLOWUP, BLOWUP]`.
pub fn empirical_vl(preset: StabilityPreset, lambda: f64, cfg: &ExperimentConfig) -> Result<EmpiricalRow> {
    let (_, c1, c2, k, f) = preset.parameters();
    let mix = [[f[(0, 0)], f[(0, 1)]], [f[(1, 0)], f[(1, 1)]]];
    let form = AnalyticForm::TwoStepMixed { c1, c2, mix };
    let kernel = VlKernel::TwoStep { c1, c2, k, lambda, mix };
    let run_cfg = ExperimentConfig { lambda, ..cfg.clone() };
    let mut blowups = 0;
    let mut iterations = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let mut rng = SeededRng::for_trial(cfg.seed, trial as u64);
        let mut w: Vec<f64> = (0..4).map(|_| rng.uniform(-INIT_RANGE, INIT_RANGE)).collect();
        let (it, failure) = run_vl_kernel(&kernel, &form, &mut w, &run_cfg, &mut rng, |cw| {
            cw.iter().map(|v| v * v).sum::<f64>().sqrt() > BLOWUP
        })?;
        // the stop predicate is the blow-up; overflow counts as one too
        if failure.is_none() || failure == Some(FailureReason::Overflow) {
            blowups += 1;
        }
        iterations.push(it);
    }
    Ok(EmpiricalRow { preset, lambda, seeds: cfg.trials, blowups, iterations })
}

/// Stability of both presets plus the empirical value-learning checks:
/// VL(0) on preset A and VL(1) on preset B.
pub fn run_exp3(cfg: &ExperimentConfig) -> Result<Exp3Report> {
    let mut linear = linear_rows(StabilityPreset::A);
    linear.extend(linear_rows(StabilityPreset::B));
    let empirical = vec![empirical_vl(StabilityPreset::A, 0.0, cfg)?, empirical_vl(StabilityPreset::B, 1.0, cfg)?];
    Ok(Exp3Report { linear, empirical })
}

impl Exp3Report {
    /// Whether an algorithm was unstable on any preset.
    pub fn diverges(&self, omega: bool, lambda: f64) -> bool {
        self.linear.iter().any(|r| r.omega == omega && r.lambda == lambda && !r.stable)
    }

    pub fn find(&self, preset: StabilityPreset, omega: bool, lambda: f64) -> Option<&LinearRow> {
        self.linear.iter().find(|r| r.preset == preset && r.omega == omega && r.lambda == lambda)
    }

    /// The expected divergence pattern: only the greedy-weighted λ = 1
    /// update survives, the iteration agrees with the eigenvalue test, and
    /// value learning blows up on most seeds.
    pub fn matches_expected(&self) -> bool {
        let pattern = !self.diverges(true, 1.0) && self.diverges(true, 0.0) && self.diverges(false, 0.0) && self.diverges(false, 1.0);
        let agree = self.linear.iter().all(|r| {
            let expect = if r.stable { LinearOutcome::Converged } else { LinearOutcome::Diverged };
            r.simulated == expect
        });
        pattern && agree && self.empirical.iter().all(|e| e.majority())
    }

    pub fn to_tsv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = format!("# {}\n", cfg.echo());
        out += "preset\talgorithm\tlambda\tstable\tleading_real\tsimulated\n";
        for r in &self.linear {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{:?}",
                r.preset.name(),
                r.algorithm(),
                r.lambda,
                u8::from(r.stable),
                r.leading_real,
                r.simulated
            );
        }
        out += "# empirical value learning\npreset\talgorithm\tseeds\tblowups\tmedian_iterations\n";
        for e in &self.empirical {
            let mut its = e.iterations.clone();
            its.sort_unstable();
            let _ = writeln!(out, "{}\tVL({})\t{}\t{}\t{}", e.preset.name(), e.lambda, e.seeds, e.blowups, its[its.len() / 2]);
        }
        out
    }
}

/// Stability report for one preset.
pub fn stability_report(preset: StabilityPreset) -> String {
    let (lambda, c1, c2, k, f) = preset.parameters();
    let mut out = format!(
        "# preset={} lambda={lambda} c1={c1} c2={c2} k={k} F=[[{}, {}], [{}, {}]]\n",
        preset.name(),
        f[(0, 0)],
        f[(0, 1)],
        f[(1, 0)],
        f[(1, 1)]
    );
    out += "algorithm\tlambda\tparameters\tstable\tleading_real\n";
    for r in linear_rows(preset) {
        let _ = writeln!(
            out,
            "{}\t{}\tc1={c1},c2={c2},k={k}\t{}\t{}",
            if r.omega { "VGLOmega" } else { "VGL" },
            r.lambda,
            u8::from(r.stable),
            r.leading_real
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_table() {
        let mut linear = linear_rows(StabilityPreset::A);
        linear.extend(linear_rows(StabilityPreset::B));
        let r = Exp3Report { linear, empirical: vec![] };
        assert!(!r.diverges(true, 1.0));
        assert!(!r.find(StabilityPreset::A, false, 0.0).unwrap().stable);
        assert!(!r.find(StabilityPreset::A, true, 0.0).unwrap().stable);
        assert!(!r.find(StabilityPreset::B, false, 1.0).unwrap().stable);
        for row in &r.linear {
            let expect = if row.stable { LinearOutcome::Converged } else { LinearOutcome::Diverged };
            assert_eq!(row.simulated, expect, "{row:?}");
        }
    }
}
