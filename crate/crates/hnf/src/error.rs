use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] hnf_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    /// Row and column are 1-based positions in the source file.
    #[error("{}: row {row}{}: {message}", path.display(), column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        row: usize,
        column: Option<usize>,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Certification(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().to_path_buf(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 config, 3 data, 4 solver or certification,
    /// 5 resource.
    pub fn exit_code(&self) -> i32 {
        use hnf_core::Error as C;
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Format { .. } | Error::Parse { .. } => 3,
            Error::Certification(_) => 4,
            Error::Core(e) => match e {
                C::Config(_) | C::Parameter(_) | C::Precondition(_) => 2,
                C::Data(_) | C::Dimension(_) | C::State(_) => 3,
                C::Resource { .. } => 5,
                C::Solver { .. } | C::Numerical(_) | C::NotInvertible(_) | C::NotPositiveDefinite => 4,
            },
        }
    }
}
