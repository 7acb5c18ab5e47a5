//! Running the verifier: report types, output parsing, a scripted mock and
//! the external subprocess runner.

mod external;
mod mock;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

pub use external::{program_available, ExternalBackend};
pub use mock::{mock_directive_lines, MockBackend};
pub use output::{parse_verifier_output, ParsedOutput, ToolOutputUnrecognized};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
/// How far past its timeout a call may run before it must have returned.
pub const KILL_GRACE: Duration = Duration::from_secs(2);

pub const ENV_VERIFIER_CMD: &str = "VERIGRADE_VERIFIER_CMD";
pub const ENV_TIMEOUT_SECS: &str = "VERIGRADE_TIMEOUT_SECS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VerifyStatus {
    Pass,
    Fail,
    Timeout,
    ToolError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Position {
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub position: Option<Position>,
    pub message: String,
}

/// Why the verifier could not produce a verdict. Messages never include paths.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum ToolErrorKind {
    #[error("verifier not available")]
    BinaryMissing,
    #[error("verifier crashed")]
    Crashed { detail: String },
    #[error("verifier output not recognized")]
    OutputUnrecognized,
    #[error("verifier could not be started")]
    Io { detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub status: VerifyStatus,
    pub verified_count: u64,
    pub error_count: u64,
    pub diagnostics: Vec<Diagnostic>,
    pub duration: Duration,
    pub tool_error: Option<ToolErrorKind>,
}

impl VerificationReport {
    /// Pass exactly when there are no errors; otherwise Fail.
    pub fn from_counts(verified: u64, errors: u64, diagnostics: Vec<Diagnostic>, duration: Duration) -> Self {
        VerificationReport {
            status: if errors == 0 { VerifyStatus::Pass } else { VerifyStatus::Fail },
            verified_count: verified,
            error_count: errors,
            diagnostics,
            duration,
            tool_error: None,
        }
    }

    pub fn timeout(duration: Duration) -> Self {
        VerificationReport {
            status: VerifyStatus::Timeout,
            verified_count: 0,
            error_count: 0,
            diagnostics: Vec::new(),
            duration,
            tool_error: None,
        }
    }

    pub fn tool_error(kind: ToolErrorKind, duration: Duration) -> Self {
        VerificationReport {
            status: VerifyStatus::ToolError,
            verified_count: 0,
            error_count: 0,
            diagnostics: Vec::new(),
            duration,
            tool_error: Some(kind),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == VerifyStatus::Pass
    }

    /// Short student-facing summary.
    pub fn summary(&self) -> String {
        match self.status {
            VerifyStatus::Pass | VerifyStatus::Fail => {
                format!("{} verified, {} errors", self.verified_count, self.error_count)
            }
            VerifyStatus::Timeout => "verification timed out".to_owned(),
            VerifyStatus::ToolError => match &self.tool_error {
                Some(k) => k.to_string(),
                None => "verifier error".to_owned(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExitStatus {
    Code(i32),
    Killed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub exit_status: ExitStatus,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub duration: Duration,
    pub timed_out: bool,
}

impl RunReport {
    pub fn succeeded(&self) -> bool {
        !self.timed_out && self.exit_status == ExitStatus::Code(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("program failed to compile")]
    CompileFailed { diagnostics: Vec<Diagnostic> },
    #[error("{0}")]
    ToolError(ToolErrorKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendKind {
    #[default]
    External,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendConfig {
    pub backend: BackendKind,
    pub verifier_program: PathBuf,
    /// Arguments for verification; `{file}` is replaced by the source path.
    pub verify_args: Vec<String>,
    /// Arguments for compile-and-run; `{file}` is replaced by the source path.
    pub run_args: Vec<String>,
    pub timeout: Duration,
    /// Address-space limit for the child, in bytes.
    pub max_memory: Option<u64>,
    /// Where per-call scratch directories are created; the system temp dir when unset.
    pub work_root: Option<PathBuf>,
    /// Directory for mock run outputs referenced by name.
    pub mock_stdout_dir: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            backend: BackendKind::External,
            verifier_program: PathBuf::from("dafny"),
            verify_args: vec!["verify".into(), "{file}".into()],
            run_args: vec!["run".into(), "--no-verify".into(), "{file}".into()],
            timeout: DEFAULT_TIMEOUT,
            max_memory: None,
            work_root: None,
            mock_stdout_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("timeout must be positive")]
    ZeroTimeout,
    #[error("{var} is not a positive integer: {value}")]
    BadEnv { var: &'static str, value: String },
}

impl BackendConfig {
    pub fn mock() -> Self {
        BackendConfig { backend: BackendKind::Mock, ..Default::default() }
    }

    /// Apply `VERIGRADE_VERIFIER_CMD` and `VERIGRADE_TIMEOUT_SECS` on top of `self`.
    pub fn with_env(mut self) -> Result<Self, ConfigError> {
        if let Ok(cmd) = std::env::var(ENV_VERIFIER_CMD) {
            if !cmd.is_empty() {
                self.verifier_program = PathBuf::from(cmd);
            }
        }
        if let Ok(value) = std::env::var(ENV_TIMEOUT_SECS) {
            match value.trim().parse::<u64>() {
                Ok(s) if s > 0 => self.timeout = Duration::from_secs(s),
                _ => return Err(ConfigError::BadEnv { var: ENV_TIMEOUT_SECS, value }),
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.timeout.is_zero() {
            return Err(ConfigError::ZeroTimeout);
        }
        Ok(())
    }

    pub fn build(&self) -> Box<dyn Backend> {
        match self.backend {
            BackendKind::External => Box::new(ExternalBackend::new(self.clone())),
            BackendKind::Mock => Box::new(MockBackend::new(self.timeout, self.mock_stdout_dir.clone())),
        }
    }
}

/// A verifier. Implementations must be safe to call from many threads.
pub trait Backend: Send + Sync {
    fn verify(&self, source: &str, timeout: Duration) -> VerificationReport;
    fn run(&self, source: &str, timeout: Duration) -> Result<RunReport, RunError>;
    /// Timeout applied when the caller has no more specific one.
    fn default_timeout(&self) -> Duration;
}

impl fmt::Debug for dyn Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Backend")
    }
}

/// Verify `source` with the backend described by `cfg`.
pub fn verify(source: &str, cfg: &BackendConfig) -> VerificationReport {
    cfg.build().verify(source, cfg.timeout)
}

/// Compile and run `source` with the backend described by `cfg`.
pub fn run_program(source: &str, cfg: &BackendConfig) -> Result<RunReport, RunError> {
    cfg.build().run(source, cfg.timeout)
}
