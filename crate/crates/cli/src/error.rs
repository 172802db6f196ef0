use std::fmt;
use std::path::PathBuf;

/// One configuration violation, with its location when known.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub section: String,
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(
                f,
                "line {line}: [{}] {}: {}",
                self.section, self.key, self.message
            ),
            None => write!(f, "[{}] {}: {}", self.section, self.key, self.message),
        }
    }
}

/// Operational failures, mapped onto process exit codes:
/// 2 for configuration, 3 for solver/IO trouble, 4 for verification failure.
#[derive(Debug)]
pub enum CliError {
    Config(Vec<Violation>),
    Solver(bch_core::Error),
    Io(std::io::Error),
    Verification(String),
    OutputLocked(PathBuf),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) | CliError::OutputLocked(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(violations) => {
                writeln!(f, "invalid configuration ({} problem(s)):", violations.len())?;
                for v in violations {
                    writeln!(f, "  {v}")?;
                }
                Ok(())
            }
            CliError::Solver(e) => write!(f, "solver failure: {e}"),
            CliError::Io(e) => write!(f, "io failure: {e}"),
            CliError::Verification(msg) => write!(f, "verification failed: {msg}"),
            CliError::OutputLocked(p) => {
                write!(f, "output directory is locked by another run: {}", p.display())
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<bch_core::Error> for CliError {
    fn from(e: bch_core::Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
