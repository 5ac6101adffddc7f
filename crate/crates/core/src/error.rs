use thiserror::Error;

/// Errors raised by every stage of the library.
///
/// The variants are grouped so the CLI can map them onto exit codes:
/// configuration problems, data problems and numeric degeneracy.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlenError {
    /// A caller supplied an argument outside the documented range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input data lies outside the domain an operation is defined on
    /// (values outside `[0, 1]`, non-stationary coefficients, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A coefficient or matrix became numerically degenerate.
    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    /// No index survived the positivity filter of the entropy estimator.
    #[error("entropy estimate degenerate: no index with positive densities (n = {n}, h = {h})")]
    EstimationDegenerate { n: usize, h: f64 },

    /// A Nadaraya-Watson row had a zero normaliser.
    #[error("isolated point {index}: zero kernel normaliser at bandwidth {h}")]
    IsolatedPoint { index: usize, h: f64 },

    /// Every bandwidth on a selection grid was disqualified.
    #[error("bandwidth selection failed: {0}")]
    Selection(String),

    /// Residual variance was zero so the BIC logarithm is undefined.
    #[error("degenerate fit: zero residual variance for lag order {m}")]
    DegenerateFit { m: usize },

    /// An error from a single column of a matrix, with its coordinates.
    #[error("column {column}{}: {source}", lag.map(|m| format!(", lag {m}")).unwrap_or_default())]
    Column {
        column: usize,
        lag: Option<usize>,
        #[source]
        source: Box<RlenError>,
    },

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Run configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    /// A pipeline stage failed; wraps the underlying error.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<RlenError>,
    },
}

impl RlenError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        RlenError::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        RlenError::Domain(msg.into())
    }

    pub(crate) fn in_column(self, column: usize, lag: Option<usize>) -> Self {
        RlenError::Column {
            column,
            lag,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        RlenError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping column and stage wrappers.
    pub fn root(&self) -> &RlenError {
        match self {
            RlenError::Column { source, .. } | RlenError::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 configuration, 3 data, 4 numeric degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            RlenError::Argument(_) | RlenError::Config(_) => 2,
            RlenError::Domain(_) | RlenError::Parse { .. } | RlenError::Io(_) => 3,
            RlenError::NumericDegeneracy(_)
            | RlenError::EstimationDegenerate { .. }
            | RlenError::IsolatedPoint { .. }
            | RlenError::Selection(_)
            | RlenError::DegenerateFit { .. } => 4,
            RlenError::Column { .. } | RlenError::Stage { .. } => unreachable!(),
        }
    }
}

impl From<std::io::Error> for RlenError {
    fn from(e: std::io::Error) -> Self {
        RlenError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, RlenError>;
