use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Not enough observations for the requested quantity.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An argument lies outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// The annotation protocol cannot be applied to an item.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Variance ratio at zero accuracy has a zero denominator.
    #[error("variance ratio is infinite at zero accuracy")]
    InfiniteRatio,

    /// Sample-size planning needs a strictly positive accuracy.
    #[error("cannot plan a complementary sample size at zero accuracy")]
    Unplannable,

    #[error("degenerate curvature: {0}")]
    DegenerateCurvature(String),

    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),

    /// A line of an input file failed to parse or validate.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }

    /// True for errors caused by too few observations rather than bad input.
    pub fn is_insufficient_data(&self) -> bool {
        matches!(self, Error::InsufficientData(_))
    }
}
