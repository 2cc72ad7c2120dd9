use std::path::{Path, PathBuf};

/// Failures of the command-line layer, each mapped to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] galgo_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use galgo_core::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Core(e) => match e {
                E::InsufficientViable { .. } | E::SingularFit | E::ZeroVariance => 3,
                _ => 2,
            },
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Prefixes a data error with the file it came from.
    pub fn in_file(self, path: impl AsRef<Path>) -> Self {
        match self {
            CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.as_ref().display())),
            CliError::Core(e) => CliError::Data(format!("{}: {e}", path.as_ref().display())),
            other => other,
        }
    }
}

pub(crate) fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
