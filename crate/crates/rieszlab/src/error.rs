use thiserror::Error;

/// Crate-wide error type. Variants split into two classes: invalid inputs
/// (bad parameters, malformed files, budget violations) and numerical
/// degeneracies discovered during a computation (truncation ties, zero
/// separations, mass-free balls). The CLI maps the first class to exit
/// code 1 and the second to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty radius grid")]
    EmptyGrid,

    #[error("atom budget exceeded: requested {requested}, cap {cap}")]
    AtomCapExceeded { requested: u64, cap: u64 },

    #[error("exact triple sum over {atoms} atoms exceeds cap {cap}; use the montecarlo mode")]
    ExactCapExceeded { atoms: usize, cap: usize },

    #[error("kernel evaluated at zero separation")]
    ZeroSeparation,

    #[error("coincident points in a triple quantity")]
    CoincidentPoints,

    #[error(
        "truncation tie: a separation of {distance} lies within 4 ulp of eps = {eps}; \
         nudge eps and rerun"
    )]
    TruncationTie { distance: f64, eps: f64 },

    #[error("ball carries no mass: {0}")]
    EmptyBall(String),

    #[error(
        "treecode accuracy contract violated: deviation {deviation} exceeds {bound} \
         at opening angle {theta_mac}"
    )]
    AccuracyContract {
        deviation: f64,
        bound: f64,
        theta_mac: f64,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code the CLI uses for this error: 1 for input or
    /// configuration problems, 2 for numerical degeneracies.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidMeasure(_)
            | Error::InvalidParameter(_)
            | Error::EmptyGrid
            | Error::AtomCapExceeded { .. }
            | Error::ExactCapExceeded { .. }
            | Error::Io(_)
            | Error::Parse(_) => 1,
            Error::ZeroSeparation
            | Error::CoincidentPoints
            | Error::TruncationTie { .. }
            | Error::EmptyBall(_)
            | Error::AccuracyContract { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
