//! Rollouts and the backward recursions that turn them into learning targets.

mod continuous;
mod discrete;

pub use continuous::{
    ct_rollout, ct_rollout_capped, ct_simulate, ct_targets_g, ct_targets_v, CtStep, CtTrajectory, MAX_TIME,
};
pub use discrete::{
    compute_omega, compute_targets_g, compute_targets_v, greedy_rollout, return_gradients, rollout, rollout_actor,
    Step, TargetsBundle, Trajectory, MAX_STEPS,
};
