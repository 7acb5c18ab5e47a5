//! Deterministic backend scripted by comments in the program text.
//!
//! Directives (one per line, anywhere in the source):
//!
//! - `// MOCK-VERIFY: verified=N errors=M` (or `timeout`, `tool-error`, `unrecognized`)
//! - `// MOCK-VERIFY-IF "needle": <outcome>` applies when `needle` occurs in
//!   the source outside directive lines; the first matching one wins and
//!   takes precedence over unconditional `MOCK-VERIFY` lines.
//! - `// MOCK-RUN-STDOUT: <base64>` or `// MOCK-RUN-STDOUT-REF: <file name>`
//!   (a relative path inside the configured stdout directory)
//! - `// MOCK-RUN: exit=N` (or `timeout`, `compile-error`)
//!
//! Without directives, verification passes with zero goals and runs print nothing.

use std::path::{Component, Path, PathBuf};
use std::time::Duration;

use base64::Engine;

use super::{
    Backend, Diagnostic, ExitStatus, RunError, RunReport, ToolErrorKind, VerificationReport,
};

const PREFIX: &str = "// MOCK-";

#[derive(Debug, Clone)]
pub struct MockBackend {
    timeout: Duration,
    stdout_dir: Option<PathBuf>,
}

impl MockBackend {
    pub fn new(timeout: Duration, stdout_dir: Option<PathBuf>) -> Self {
        MockBackend { timeout, stdout_dir }
    }
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend::new(super::DEFAULT_TIMEOUT, None)
    }
}

/// Lines of `source` that are mock directives, in order.
pub fn mock_directive_lines(source: &str) -> Vec<&str> {
    source.lines().filter(|l| l.trim_start().starts_with(PREFIX)).collect()
}

fn without_directives(source: &str) -> String {
    source
        .split_inclusive('\n')
        .filter(|l| !l.trim_start().starts_with(PREFIX))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum VerifyOutcome {
    Counts { verified: u64, errors: u64 },
    Timeout,
    ToolError,
    Unrecognized,
}

fn parse_verify_outcome(text: &str) -> Option<VerifyOutcome> {
    match text.trim() {
        "timeout" => return Some(VerifyOutcome::Timeout),
        "tool-error" => return Some(VerifyOutcome::ToolError),
        "unrecognized" => return Some(VerifyOutcome::Unrecognized),
        _ => {}
    }
    let (mut verified, mut errors) = (0, 0);
    for part in text.split_whitespace() {
        let (key, value) = part.split_once('=')?;
        let value: u64 = value.parse().ok()?;
        match key {
            "verified" => verified = value,
            "errors" => errors = value,
            _ => return None,
        }
    }
    Some(VerifyOutcome::Counts { verified, errors })
}

/// `"needle": rest` → (needle, rest)
fn split_conditional(text: &str) -> Option<(&str, &str)> {
    let text = text.trim_start().strip_prefix('"')?;
    let close = text.find("\":")?;
    Some((&text[..close], &text[close + 2..]))
}

fn directive<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let rest = line.trim_start().strip_prefix(PREFIX)?.strip_prefix(name)?;
    rest.strip_prefix(':').or_else(|| rest.strip_prefix(' '))
}

impl MockBackend {
    fn verify_outcome(&self, source: &str) -> Result<VerifyOutcome, String> {
        let body = without_directives(source);
        let mut unconditional = None;
        for line in mock_directive_lines(source) {
            if let Some(rest) = directive(line, "VERIFY-IF") {
                let (needle, outcome) = split_conditional(rest).ok_or_else(|| format!("bad directive: {line}"))?;
                let outcome = parse_verify_outcome(outcome).ok_or_else(|| format!("bad directive: {line}"))?;
                if body.contains(needle) {
                    return Ok(outcome);
                }
            } else if let Some(rest) = directive(line, "VERIFY") {
                unconditional = Some(parse_verify_outcome(rest).ok_or_else(|| format!("bad directive: {line}"))?);
            }
        }
        Ok(unconditional.unwrap_or(VerifyOutcome::Counts { verified: 0, errors: 0 }))
    }

    fn read_ref(&self, name: &str) -> Result<Vec<u8>, String> {
        let name = name.trim();
        let dir = self.stdout_dir.as_deref().ok_or("no mock stdout directory configured")?;
        let path = Path::new(name);
        if name.is_empty() || !path.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(format!("bad stdout reference `{name}`"));
        }
        std::fs::read(dir.join(name)).map_err(|e| format!("stdout reference `{name}`: {e}"))
    }
}

impl Backend for MockBackend {
    fn verify(&self, source: &str, timeout: Duration) -> VerificationReport {
        match self.verify_outcome(source) {
            Ok(VerifyOutcome::Counts { verified, errors }) => {
                let diagnostics = (0..errors.min(100))
                    .map(|i| Diagnostic { position: None, message: format!("Error: mock error {}", i + 1) })
                    .collect();
                VerificationReport::from_counts(verified, errors, diagnostics, Duration::ZERO)
            }
            Ok(VerifyOutcome::Timeout) => VerificationReport::timeout(timeout),
            Ok(VerifyOutcome::ToolError) => VerificationReport::tool_error(
                ToolErrorKind::Crashed { detail: "scripted failure".into() },
                Duration::ZERO,
            ),
            Ok(VerifyOutcome::Unrecognized) => {
                VerificationReport::tool_error(ToolErrorKind::OutputUnrecognized, Duration::ZERO)
            }
            Err(detail) => VerificationReport::tool_error(ToolErrorKind::Crashed { detail }, Duration::ZERO),
        }
    }

    fn run(&self, source: &str, timeout: Duration) -> Result<RunReport, RunError> {
        let bad = |detail: String| RunError::ToolError(ToolErrorKind::Crashed { detail });
        let mut stdout = Vec::new();
        let mut exit = ExitStatus::Code(0);
        let mut timed_out = false;
        for line in mock_directive_lines(source) {
            if let Some(rest) = directive(line, "RUN-STDOUT-REF") {
                stdout = self.read_ref(rest).map_err(bad)?;
            } else if let Some(rest) = directive(line, "RUN-STDOUT") {
                stdout = base64::engine::general_purpose::STANDARD
                    .decode(rest.trim())
                    .map_err(|e| bad(format!("bad base64 in mock directive: {e}")))?;
            } else if let Some(rest) = directive(line, "RUN") {
                match rest.trim() {
                    "timeout" => {
                        timed_out = true;
                        exit = ExitStatus::Killed;
                    }
                    "compile-error" => {
                        return Err(RunError::CompileFailed {
                            diagnostics: vec![Diagnostic { position: None, message: "Error: mock compile error".into() }],
                        })
                    }
                    other => {
                        let code = other
                            .strip_prefix("exit=")
                            .and_then(|c| c.parse().ok())
                            .ok_or_else(|| bad(format!("bad directive: {line}")))?;
                        exit = ExitStatus::Code(code);
                    }
                }
            }
        }
        let duration = if timed_out { timeout } else { Duration::ZERO };
        Ok(RunReport { exit_status: exit, stdout, stderr: Vec::new(), duration, timed_out })
    }

    fn default_timeout(&self) -> Duration {
        self.timeout
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::VerifyStatus;

    fn verify(src: &str) -> VerificationReport {
        MockBackend::default().verify(src, Duration::from_secs(7))
    }

    #[test]
    fn unconditional_counts() {
        let r = verify("// MOCK-VERIFY: verified=3 errors=0\nmethod m() {}");
        assert_eq!((r.status, r.verified_count, r.error_count), (VerifyStatus::Pass, 3, 0));
        let r = verify("// MOCK-VERIFY: verified=0 errors=2");
        assert_eq!((r.status, r.error_count, r.diagnostics.len()), (VerifyStatus::Fail, 2, 2));
    }

    #[test]
    fn default_is_empty_pass() {
        let r = verify("method m() {}");
        assert_eq!((r.status, r.verified_count), (VerifyStatus::Pass, 0));
    }

    #[test]
    fn conditional_matches_program_text_only() {
        let src = "// MOCK-VERIFY: verified=0 errors=1\n// MOCK-VERIFY-IF \"a != b\": verified=1 errors=0\nt := a [x] b;\n";
        assert_eq!(verify(src).status, VerifyStatus::Fail);
        let src = src.replace("[x]", "!=");
        assert_eq!(verify(&src).verified_count, 1);
    }

    #[test]
    fn timeout_reports_configured_duration() {
        let r = verify("// MOCK-VERIFY: timeout");
        assert_eq!((r.status, r.duration), (VerifyStatus::Timeout, Duration::from_secs(7)));
    }

    #[test]
    fn malformed_directive_is_tool_error() {
        assert_eq!(verify("// MOCK-VERIFY: verified=lots").status, VerifyStatus::ToolError);
        assert_eq!(verify("// MOCK-VERIFY: unrecognized").tool_error, Some(ToolErrorKind::OutputUnrecognized));
    }

    #[test]
    fn run_directives() {
        let b = MockBackend::default();
        let r = b.run("// MOCK-RUN-STDOUT: aGkK\n", Duration::from_secs(1)).unwrap();
        assert_eq!(r.stdout, b"hi\n");
        assert!(r.succeeded());
        let r = b.run("// MOCK-RUN: exit=3\n", Duration::from_secs(1)).unwrap();
        assert_eq!(r.exit_status, ExitStatus::Code(3));
        let r = b.run("// MOCK-RUN: timeout\n", Duration::from_secs(1)).unwrap();
        assert!(r.timed_out);
        assert!(matches!(b.run("// MOCK-RUN: compile-error", Duration::from_secs(1)), Err(RunError::CompileFailed { .. })));
    }

    #[test]
    fn stdout_reference() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("song.txt"), "la\n").unwrap();
        let b = MockBackend::new(Duration::from_secs(1), Some(dir.path().to_owned()));
        let r = b.run("// MOCK-RUN-STDOUT-REF: song.txt", Duration::from_secs(1)).unwrap();
        assert_eq!(r.stdout, b"la\n");
        assert!(b.run("// MOCK-RUN-STDOUT-REF: ../etc/passwd", Duration::from_secs(1)).is_err());
    }
}
