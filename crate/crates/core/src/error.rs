use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sample {index}: non-finite {what}")]
    NonFiniteSample { index: usize, what: &'static str },

    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: String,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate subspace: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("design is not poised for a degree-{degree} mean ({points} points, {basis} basis functions)")]
    NotPoised {
        degree: usize,
        points: usize,
        basis: usize,
    },

    #[error("covariance matrix is not positive definite; try a diagonal jitter of at least {suggested_jitter:e}")]
    Conditioning { suggested_jitter: f64 },

    #[error("coefficient overflow: |log a| reached {magnitude:.3} (limit {limit}); input norm {input_norm:.3}")]
    CoefficientOverflow {
        magnitude: f64,
        limit: f64,
        input_norm: f64,
    },

    #[error("linear solver breakdown: {0}")]
    Solver(String),

    #[error("model evaluation failed at x = {point:?}: {source}")]
    Model {
        point: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures caused by bad configuration or unreadable inputs,
    /// as opposed to numerical breakdowns.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}
