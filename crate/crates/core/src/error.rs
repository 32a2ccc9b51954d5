use thiserror::Error;

/// Errors produced by registration, volume and file operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular transform (det = {det:e})")]
    SingularTransform { det: f64 },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index:?} out of bounds for size {size:?}")]
    IndexOutOfBounds { index: [usize; 3], size: [usize; 3] },

    #[error("numerical collapse: {0}")]
    NumericalCollapse(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyInput(_) => "EmptyInput",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::SingularTransform { .. } => "SingularTransform",
            Error::DegenerateConfiguration(_) => "DegenerateConfiguration",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::IndexOutOfBounds { .. } => "IndexOutOfBounds",
            Error::NumericalCollapse(_) => "NumericalCollapse",
            Error::Parse { .. } => "ParseError",
            Error::InvalidData(_) => "InvalidData",
            Error::Io(_) => "Io",
        }
    }

    /// True for failures of the numerical methods themselves, as opposed to
    /// bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateConfiguration(_) | Error::NumericalCollapse(_) | Error::SingularTransform { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
