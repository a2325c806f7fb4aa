use std::fmt;

use delay_noether::conditions::ConditionsError;
use delay_noether::problem_file::FileError;
use delay_noether::solver::SolverError;
use delay_noether::verify::VerifyError;

/// Exit status for malformed input: unreadable files, syntax errors,
/// failed validation, missing sections.
pub const EXIT_INPUT: i32 = 3;
/// Exit status for failures while computing on valid input.
pub const EXIT_COMPUTE: i32 = 4;
/// Exit status for bad command-line usage.
pub const EXIT_USAGE: i32 = 64;

/// A failure reported on stderr as `error: <category>: <detail>`.
#[derive(Debug)]
pub struct CliError {
    pub category: &'static str,
    pub detail: String,
    pub code: i32,
}

impl CliError {
    pub fn input(category: &'static str, detail: impl Into<String>) -> Self {
        CliError { category, detail: detail.into(), code: EXIT_INPUT }
    }

    pub fn compute(category: &'static str, detail: impl Into<String>) -> Self {
        CliError { category, detail: detail.into(), code: EXIT_COMPUTE }
    }

    pub fn io(path: &std::path::Path, err: impl fmt::Display) -> Self {
        CliError::input("io", format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // one line, whatever the detail contains
        let detail = self.detail.replace('\n', " ");
        write!(f, "error: {}: {}", self.category, detail)
    }
}

impl From<FileError> for CliError {
    fn from(e: FileError) -> Self {
        CliError::input(e.kind.category(), e.to_string())
    }
}

impl From<ConditionsError> for CliError {
    fn from(e: ConditionsError) -> Self {
        match e {
            ConditionsError::Invalid(_) => CliError::input("invalid", e.to_string()),
            ConditionsError::Derivative(_) => CliError::compute("derivative", e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Invalid(_) | SolverError::Grid(_) => CliError::input("invalid", e.to_string()),
            _ => CliError::compute("solver", e.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        CliError::compute("verify", e.to_string())
    }
}
