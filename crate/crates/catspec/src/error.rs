use std::path::{Path, PathBuf};

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] catspec_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 3 for numerical failures, 2 for everything the user can fix in the
    /// inputs (including unreadable or unwritable files).
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(catspec_core::Error::PeakAtGridEdge).exit_code(), 2);
        assert_eq!(CliError::Core(catspec_core::Error::ZeroResponse).exit_code(), 3);
        assert_eq!(
            CliError::Core(catspec_core::Error::FitNoConvergence { best_chi2: 1.0 }).exit_code(),
            3
        );
        assert_eq!(
            CliError::Core(catspec_core::Error::EigenNoConvergence { iterations: 3 }).exit_code(),
            3
        );
        let io = CliError::io(Path::new("a"), std::io::Error::other("boom"));
        assert_eq!(io.exit_code(), 2);
    }
}
