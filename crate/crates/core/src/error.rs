use thiserror::Error;

use crate::tensor3::CoeffTensor3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("evaluation error at byte {offset}: {message}")]
    Eval { offset: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("operator is not separable: {0}; use cp_decompose instead")]
    NotSeparable(String),

    #[error("system is not Laplace-like eligible: {0}")]
    NotLaplaceLike(String),

    #[error("ill-conditioned matrix ({what}): condition estimate {condition:.3e}")]
    IllConditioned { what: String, condition: f64 },

    #[error("singular matrix ({what}): zero pivot at column {pivot}")]
    Singular { what: String, pivot: usize },

    #[error("singular Laplace-like operator: eigenvalue sum {sum:.3e} below threshold {threshold:.3e}")]
    SingularLaplaceLike { sum: f64, threshold: f64 },

    #[error(
        "QR iteration did not converge for {n}x{n} matrix (norm {norm:.3e}) in active block ending at row {block_end}"
    )]
    SchurNonConvergence { n: usize, norm: f64, block_end: usize },

    #[error("GMRES did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<CoeffTensor3>,
    },

    #[error("system size {size} exceeds the configured cap {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("breakdown: {0}")]
    Breakdown(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            got,
        }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
