use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("objective undefined: sum of level counts times rates is zero")]
    UndefinedObjective,

    #[error("estimator undefined: denominator sum of level counts times rates is zero")]
    UndefinedEstimator,

    #[error("level {level} is infeasible: no blanket rate up to {cap} reaches rate 1")]
    InfeasibleLevel { level: usize, cap: f64 },

    #[error("no positive rate satisfies the privacy constraint for level {level} at m = {m}")]
    NoFeasibleRate { level: usize, m: f64 },

    #[error("unsupported worst-case witness: {0}")]
    UnsupportedWitness(String),

    #[error("segment {0} has no users")]
    EmptySegment(usize),

    #[error("set size {set_size} exceeds domain size {domain_size}")]
    SetSizeExceedsDomain { set_size: usize, domain_size: usize },

    #[error("invalid segmentation fractions: {0}")]
    BadFractions(String),

    #[error("{path}:{line}: {reason}")]
    MalformedLine { path: PathBuf, line: usize, reason: String },

    #[error("dataset has {available} users, {requested} requested")]
    InsufficientUsers { requested: usize, available: usize },

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Whether the failure means the requested privacy target cannot be met.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::InfeasibleLevel { .. } | Error::NoFeasibleRate { .. })
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Csv(_) | Error::MalformedLine { .. } | Error::InsufficientUsers { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
