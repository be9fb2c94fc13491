//! Experiment drivers, output formats and the derivative-check suite behind
//! the command-line tool.

mod config;
mod exp3;
mod exp5;
mod gradcheck;
mod report;
mod toy;

pub use config::{Algorithm, ExperimentConfig, LanderStarts};
pub use exp3::{
    empirical_vl, linear_rows, run_exp3, stability_report, EmpiricalRow, Exp3Report, LinearRow, BLOWUP, LINEAR_ALPHA,
    LINEAR_STEPS,
};
pub use exp5::{lander_oracle, run_exp5, run_lander_trial, within, Exp5Report, Exp5Run, ORACLE_GAP};
pub use gradcheck::{gradcheck, CheckRow, GradcheckReport, GRADCHECK_TOL};
pub use report::{mean_sd, trials_tsv, TableRow};
pub use toy::{
    run_toy_trials, run_vl_kernel, AffineUpdate, FailureReason, ToyRunner, ToySetup, TrialResult, VlKernel,
    INIT_RANGE, OVERFLOW, STALL,
};

use crate::error::Result;

/// Run a Toy-problem experiment (1, 2 or 4) and aggregate it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(TableRow, Vec<TrialResult>)> {
    let runner = ToyRunner::new(cfg)?;
    let results = run_toy_trials(&runner);
    Ok((TableRow::from_trials(cfg, &results), results))
}
