use thiserror::Error;

/// Errors raised by grid construction, symbol assembly and the semigroup drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("invalid Levy quadruple: {0}")]
    InvalidQuadruple(String),

    #[error("symbol check failed at mode {mode:?} of member {member}: {reason}")]
    Symbol {
        member: usize,
        mode: [i64; 2],
        reason: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e}")]
    ImaginaryResidue { residue: f64, tolerance: f64 },

    #[error("monotonicity violated at level {level}: pointwise decrease {decrease:e}")]
    Monotonicity { level: usize, decrease: f64 },

    #[error("Poisson series needs {needed} terms, budget is {budget}")]
    SeriesBudget { needed: usize, budget: usize },

    #[error("time step {dt:e} exceeds the RK4 stability bound {bound:e}")]
    Unstable { dt: f64, bound: f64 },

    #[error("argmax field not recorded at level {0}")]
    LevelNotRecorded(usize),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
