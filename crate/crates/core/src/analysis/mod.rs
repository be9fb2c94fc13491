//! Independent checks: divergence analysis of the two-step linear system,
//! the residual-gradient counterexample, an optimal-control oracle for the
//! lander and a local-extremality test for trajectories.

mod landscape;
mod let_check;
mod pontryagin;
mod stability;

pub use landscape::{
    ascend_reward, descend_error, follow, rg_landscape, scan_roots, Descent, RgLandscape, RippleProblem, RIPPLE,
    SCAN_RANGE,
};
pub use let_check::{let_check, replay, LetReport, LetStep};
pub use pontryagin::{pontryagin_lander, PontryaginSolution, SHOOT_BRACKET, SHOOT_ITERATIONS};
pub use stability::{
    build_stability, curvature_matrix, is_stable, leading_real_part, simulate_linear, LinearOutcome, LinearRun,
    StabilityPreset, StabilitySystem,
};
