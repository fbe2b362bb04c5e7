use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is rank deficient (relative singular value {0:.3e})")]
    RankDeficient(f64),

    #[error("matrix is not diagonal (relative off-diagonal mass {0:.3e})")]
    NotDiagonal(f64),

    #[error("every signal in the class is zero")]
    ZeroSignalClass,

    #[error("every row of the collaboration matrix is zero")]
    AllRowsDead,

    #[error("target deactivation {target} is not reachable (achievable range [{low}, {high}])")]
    Unachievable { target: f64, low: f64, high: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable identifier used in the CLI's machine-readable error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::NotSymmetric(_) => "not_symmetric",
            Error::RankDeficient(_) => "rank_deficient",
            Error::NotDiagonal(_) => "not_diagonal",
            Error::ZeroSignalClass => "zero_signal_class",
            Error::AllRowsDead => "all_rows_dead",
            Error::Unachievable { .. } => "unachievable",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
