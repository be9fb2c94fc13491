use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("time step {t} is outside the episode (terminal step {terminal})")]
    OutOfEpisode { t: usize, terminal: usize },

    #[error("finite-difference oracle failed: {0}")]
    Oracle(String),

    #[error("greedy policy failed: {0}")]
    Policy(String),

    #[error("target value-gradient undefined: dpi/dx does not exist at step {step}")]
    TargetsUndefined { step: usize },

    #[error("d2Q/da2 vanishes at unsaturated step {step}")]
    SingularCurvature { step: usize },

    #[error("trajectory did not terminate within {cap} steps")]
    Runaway { cap: usize },

    #[error("terminal boundary gradient is singular: {0}")]
    BoundarySingularity(String),

    #[error("value outside the function's domain: {0}")]
    Domain(String),

    #[error("optimal-trajectory oracle infeasible: {0}")]
    OracleInfeasible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
