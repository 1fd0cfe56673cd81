use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no signals")]
    NoSignals,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("atom {atom} is not unit-norm (norm {norm})")]
    NotNormalized { atom: usize, norm: f64 },
    #[error("over-complete beyond sample count: {atoms} atoms requested from {signals} usable signals")]
    OverComplete { atoms: usize, signals: usize },
    #[error("covariance undefined: need at least 2 signals, got {0}")]
    CovarianceUndefined(usize),
    #[error("conditioning block not PD")]
    NotPositiveDefinite,
    #[error("remaining set empty: k={k} leaves no atoms out of {size}")]
    RemainingSetEmpty { k: usize, size: usize },
    #[error("degenerate kernel: no atom carries appearance information")]
    DegenerateKernel,
    #[error("signal {0} is unlabeled")]
    Unlabeled(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NotPositiveDefinite | Error::DegenerateKernel | Error::Io(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
