use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape disagreement inside a computation graph or between an input and
    /// the network that consumes it.
    #[error("dimension error at {node}: {detail}")]
    Dimension { node: String, detail: String },

    /// A caller violated a documented precondition.
    #[error("contract violated: {0}")]
    Contract(String),

    /// A graph handle does not belong to the graph it was used with.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// NaN or infinity produced or supplied where finite values are required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("insufficient history: need at least {needed} values, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    /// Optimisation diverged.
    #[error("training error at epoch {epoch}, parameter {parameter}: {detail}")]
    Training {
        epoch: usize,
        parameter: String,
        detail: String,
    },

    #[error("configuration error at `{key}`: {detail}")]
    Config { key: String, detail: String },

    /// A metric whose denominator vanishes on the supplied data.
    #[error("metric {0} is undefined for this input (zero denominator)")]
    UndefinedMetric(&'static str),

    #[error("degenerate sequence: {0}")]
    DegenerateSequence(String),

    #[error("sample too small: effective length {got} is below the asymptotic threshold {min}; supply a longer sequence")]
    SmallSample { got: usize, min: usize },

    #[error("parse error at line {line}: {detail}")]
    Parse { line: u64, detail: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Persisted model does not match the expected schema.
    #[error("schema error in field `{field}`: {detail}")]
    Schema { field: String, detail: String },

    #[error("incompatible format version {found} (supported: {supported})")]
    Incompatible { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(node: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Dimension {
            node: node.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            detail: detail.into(),
        }
    }
}
