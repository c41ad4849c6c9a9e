use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measurement arc selects no boundary edge")]
    EmptySigma,

    #[error("triangle {index} is inverted or degenerate (signed area {area:e})")]
    InvertedTriangle { index: usize, area: f64 },

    #[error("linear system is singular or ill-conditioned: {0}")]
    Conditioning(String),

    #[error("mismatched harmonic fields: {0}")]
    Mismatch(String),

    #[error("degenerate Westervelt equation: margin {margin:e} at node {node}")]
    Degenerate { margin: f64, node: usize },

    #[error("fixed-point iteration did not converge in {iterations} sweeps (last residual {last:e})")]
    NonConvergence { iterations: usize, history: Vec<f64>, last: f64 },

    #[error("reference state bound violated: |{what}| = {value:e} < {threshold:e} at node {node}, time index {time}")]
    ReferenceBound {
        what: &'static str,
        value: f64,
        threshold: f64,
        node: usize,
        time: usize,
    },

    #[error("conjugate gradient stagnated after {iterations} iterations (relative residual {last:e})")]
    CgStagnation { iterations: usize, history: Vec<f64>, last: f64 },

    #[error("reconstruction diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("root bracketing failed for angular order {order} on [{lo}, {hi}]")]
    RootBracketing { order: usize, lo: f64, hi: f64 },

    #[error("resonant configuration: {0}")]
    Resonance(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: &'static str, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage { stage, source: Box::new(other) },
        }
    }
}
