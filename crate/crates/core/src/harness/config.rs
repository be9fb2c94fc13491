use std::fmt;
use std::str::FromStr;

use crate::critics::InputActivation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Vl,
    Vgl,
    VglOmega,
    VglRg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Vl, Algorithm::Vgl, Algorithm::VglOmega, Algorithm::VglRg];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Vl => "VL",
            Algorithm::Vgl => "VGL",
            Algorithm::VglOmega => "VGLOmega",
            Algorithm::VglRg => "VGLRG",
        }
    }

    pub fn is_value_gradient(self) -> bool {
        self != Algorithm::Vl
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vl" | "td" => Ok(Algorithm::Vl),
            "vgl" => Ok(Algorithm::Vgl),
            "vglomega" | "vgl-omega" | "vglo" | "omega" => Ok(Algorithm::VglOmega),
            "vglrg" | "vgl-rg" | "rg" => Ok(Algorithm::VglRg),
            _ => Err(Error::Config(format!("unknown algorithm '{s}' (expected vl, vgl, vglomega or vglrg)"))),
        }
    }
}

/// Which start states the lander experiment trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LanderStarts {
    Single,
    Grid,
}

impl LanderStarts {
    pub fn states(self) -> Vec<(f64, f64, f64)> {
        match self {
            LanderStarts::Single => vec![(100.0, 0.0, 50.0)],
            LanderStarts::Grid => {
                let mut out = Vec::with_capacity(50);
                for i in 1..=10 {
                    for j in 0..5 {
                        out.push((10.0 * i as f64, -10.0 + 2.5 * j as f64, 50.0));
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: u8,
    pub algorithm: Algorithm,
    /// `λ` for the Toy experiments, `λ̄` for the lander.
    pub lambda: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub k: f64,
    pub n: usize,
    /// Squash sharpness of the lander's action cost.
    pub c: f64,
    pub dt: f64,
    pub trials: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub starts: LanderStarts,
    /// Input-layer activation of the lander critic.
    pub input_activation: InputActivation,
}

impl ExperimentConfig {
    /// Defaults for experiment `id`.
    pub fn defaults(id: u8) -> Result<Self> {
        let base = ExperimentConfig {
            experiment: id,
            algorithm: Algorithm::Vgl,
            lambda: 0.0,
            alpha: 0.01,
            epsilon: 0.0,
            c1: 0.0,
            c2: 0.0,
            c3: 0.0,
            k: 0.0,
            n: 1,
            c: 0.01,
            dt: 0.1,
            trials: 1000,
            seed: 1,
            max_iterations: 10_000_000,
            tolerance: 1e-7,
            starts: LanderStarts::Single,
            input_activation: InputActivation::Sigmoid,
        };
        Ok(match id {
            1 => base,
            2 => ExperimentConfig { c1: 0.5, c2: 1.0, k: 1.0, n: 2, ..base },
            3 => ExperimentConfig { c1: 0.01, c2: 0.01, k: 0.01, n: 2, epsilon: 0.1, trials: 20, algorithm: Algorithm::Vl, ..base },
            4 => ExperimentConfig { c1: 2.0, c2: 0.1, c3: 10.0, k: 2.0, n: 2, algorithm: Algorithm::VglOmega, ..base },
            5 => ExperimentConfig {
                algorithm: Algorithm::VglOmega,
                trials: 10,
                max_iterations: 1000,
                n: 0,
                ..base
            },
            _ => return Err(Error::Config(format!("experiment must be 1 to 5, got {id}"))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=5).contains(&self.experiment) {
            return bad(format!("experiment must be 1 to 5, got {}", self.experiment));
        }
        if self.trials == 0 {
            return bad("trial count must be at least 1".into());
        }
        if self.max_iterations == 0 {
            return bad("iteration cap must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.alpha));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("exploration noise must be >= 0, got {}", self.epsilon));
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive".into());
        }
        if self.experiment == 5 {
            if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
                return bad(format!("continuous-time lambda must be >= 0, got {}", self.lambda));
            }
            if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.c > 0.0 && self.c.is_finite()) {
                return bad("time step and squash scale must be positive".into());
            }
            if self.algorithm == Algorithm::VglRg {
                return bad("residual gradients are not available in continuous time".into());
            }
            return Ok(());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return bad(format!("k must be >= 0, got {}", self.k));
        }
        match self.experiment {
            1 => {
                if self.n != 1 {
                    return bad("experiment 1 is the one-step problem (n = 1)".into());
                }
            }
            2 | 3 => {
                if self.n != 2 {
                    return bad("experiments 2 and 3 use the two-step problem (n = 2)".into());
                }
                if self.c1 + self.k <= 0.0 || self.c2 + self.k <= 0.0 {
                    return bad("need c1 + k > 0 and c2 + k > 0".into());
                }
            }
            4 => {
                if self.n != 2 {
                    return bad("experiment 4 uses the two-step problem (n = 2)".into());
                }
                if self.c1 + self.k <= 0.0 || self.c2 + self.k <= 0.0 {
                    return bad("need c1 + k > 0 and c2 + k > 0".into());
                }
                if self.algorithm == Algorithm::Vl {
                    return bad("experiment 4 compares value-gradient algorithms only".into());
                }
            }
            _ => {}
        }
        if self.algorithm.is_value_gradient() && self.epsilon != 0.0 {
            return bad("value-gradient runs use the greedy policy (epsilon = 0)".into());
        }
        Ok(())
    }

    /// Single-line `key=value` echo for output headers.
    pub fn echo(&self) -> String {
        let mut s = format!(
            "exp={} algo={} lambda={} alpha={} epsilon={} seed={} trials={}",
            self.experiment, self.algorithm, self.lambda, self.alpha, self.epsilon, self.seed, self.trials
        );
        if self.experiment == 5 {
            s += &format!(
                " c={} dt={} iterations={} starts={:?} input={}",
                self.c,
                self.dt,
                self.max_iterations,
                self.starts,
                self.input_activation.name()
            );
        } else {
            s += &format!(
                " c1={} c2={} c3={} k={} n={} max_iterations={} tolerance={}",
                self.c1, self.c2, self.c3, self.k, self.n, self.max_iterations, self.tolerance
            );
        }
        s
    }
}
