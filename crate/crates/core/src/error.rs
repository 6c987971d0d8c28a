use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("step size too large: h*max|detuning| = {resolution:.3} (must be < {limit}); {hint}")]
    StepSize {
        resolution: f64,
        limit: f64,
        hint: String,
    },

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Accuracy { achieved: f64, requested: f64 },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("eigensolver failed{}: {message}", .index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    Numeric {
        index: Option<usize>,
        message: String,
    },

    #[error("coupling regime: {0}")]
    Regime(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with stage tags peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for problems with the user's configuration, as opposed to numeric
    /// or validation failures during a run.
    pub fn is_config(&self) -> bool {
        matches!(
            self.root(),
            Error::Config(_) | Error::Parameter(_) | Error::Json(_)
        )
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.into().at(stage))
    }
}
