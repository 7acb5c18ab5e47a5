//! The attempt pipeline: splice the answer into the template, check it as
//! the exercise's policy demands, and turn the evidence into a verdict with
//! short feedback.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{Backend, RunError, RunReport, VerificationReport, VerifyStatus};
use crate::bank::{check_char_limit, CheckMode, Exercise};
use crate::oracle::{check_spec, OracleError, OracleVerdict};

/// Upper bound on feedback length, in characters.
pub const FEEDBACK_MAX: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptVerdict {
    pub completed: bool,
    pub feedback: String,
    pub verified_count: u64,
    pub error_count: u64,
}

/// Everything observed about one attempt.
#[derive(Debug, Clone, Copy)]
pub struct AttemptEvidence<'a> {
    /// The student's answer (what the character limit applies to).
    pub submission: &'a str,
    pub verification: Option<&'a VerificationReport>,
    pub run: Option<&'a Result<RunReport, RunError>>,
    pub oracle: Option<&'a Result<OracleVerdict, OracleError>>,
}

impl<'a> AttemptEvidence<'a> {
    pub fn new(submission: &'a str) -> Self {
        AttemptEvidence { submission, verification: None, run: None, oracle: None }
    }
}

fn truncate(mut text: String) -> String {
    if let Some((at, _)) = text.char_indices().nth(FEEDBACK_MAX) {
        text.truncate(at);
    }
    text
}

fn eol(bytes: &[u8], normalize: bool) -> std::borrow::Cow<'_, [u8]> {
    if normalize && bytes.windows(2).any(|w| w == b"\r\n") {
        let mut out = Vec::with_capacity(bytes.len());
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] == b'\r' && bytes.get(i + 1) == Some(&b'\n') {
                i += 1;
                continue;
            }
            out.push(bytes[i]);
            i += 1;
        }
        out.into()
    } else {
        bytes.into()
    }
}

/// Decide completion and feedback from the evidence, per the exercise policy.
/// Feedback never quotes expected output or reference text.
pub fn judge(exercise: &Exercise, evidence: &AttemptEvidence<'_>) -> AttemptVerdict {
    let policy = &exercise.check;
    let mut parts: Vec<String> = Vec::new();
    let mut completed = true;
    let (mut verified, mut errors) = (0, 0);

    match policy.mode {
        CheckMode::VerifyOnly | CheckMode::VerifyAndRun => {
            match evidence.verification {
                Some(report) => {
                    verified = report.verified_count;
                    errors = report.error_count;
                    parts.push(report.summary());
                    completed &= report.passed();
                    if let Some(min) = policy.required_verified_min {
                        if report.passed() && report.verified_count < min {
                            completed = false;
                            parts.push(format!("at least {min} verified required"));
                        }
                    }
                }
                None => {
                    completed = false;
                    parts.push("not verified".into());
                }
            }
            if policy.mode == CheckMode::VerifyAndRun && evidence.verification.is_some_and(|r| r.passed()) {
                match evidence.run {
                    Some(Ok(run)) if run.timed_out => {
                        completed = false;
                        parts.push("program timed out".into());
                    }
                    Some(Ok(run)) if !run.succeeded() => {
                        completed = false;
                        parts.push(match run.exit_status {
                            crate::backend::ExitStatus::Code(c) => format!("program exited with status {c}"),
                            crate::backend::ExitStatus::Killed => "program was killed".into(),
                        });
                    }
                    Some(Ok(run)) => {
                        let expected = exercise.expected_stdout.as_deref().unwrap_or_default();
                        if eol(&run.stdout, policy.normalize_eol) != eol(expected, policy.normalize_eol) {
                            completed = false;
                            parts.push("output mismatch".into());
                        }
                    }
                    Some(Err(RunError::CompileFailed { .. })) => {
                        completed = false;
                        parts.push("program failed to compile".into());
                    }
                    Some(Err(RunError::ToolError(kind))) => {
                        completed = false;
                        parts.push(kind.to_string());
                    }
                    None => {
                        completed = false;
                        parts.push("program not run".into());
                    }
                }
            }
            if let Some(limit) = exercise.char_limit {
                let outcome = check_char_limit(evidence.submission, limit);
                if !outcome.passed {
                    completed = false;
                    parts.push(format!(
                        "answer has {} characters; it must be shorter than {}",
                        outcome.count, outcome.limit
                    ));
                }
            }
        }
        CheckMode::OracleSpec => match evidence.oracle {
            Some(Ok(v)) => {
                verified = v.consistency_report.verified_count + v.capture_report.verified_count;
                errors = v.consistency_report.error_count + v.capture_report.error_count;
                completed = v.accepted(policy.oracle_directions);
                parts.push(format!("{verified} verified, {errors} errors"));
                use crate::oracle::OracleDirections::*;
                let wants_consistency = matches!(policy.oracle_directions, Both | Consistency);
                let wants_capture = matches!(policy.oracle_directions, Both | Capture);
                let explain = |r: &VerificationReport, otherwise: &str| match r.status {
                    VerifyStatus::Timeout | VerifyStatus::ToolError => r.summary(),
                    _ => otherwise.to_owned(),
                };
                if wants_consistency && !v.consistent {
                    parts.push(explain(&v.consistency_report, "specification is not met by a correct implementation"));
                }
                if wants_capture && !v.captures {
                    parts.push(explain(&v.capture_report, "specification is too weak"));
                }
            }
            Some(Err(e)) => {
                completed = false;
                parts.push(e.to_string());
            }
            None => {
                completed = false;
                parts.push("specification not checked".into());
            }
        },
    }
    parts.dedup();
    AttemptVerdict { completed, feedback: truncate(parts.join("; ")), verified_count: verified, error_count: errors }
}

/// Hex SHA-256 of an answer.
pub fn submission_hash(answer: &str) -> String {
    let digest = Sha256::digest(answer.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Splice, check and judge one answer. Never consults anything but `exercise` and `backend`.
pub fn run_attempt(exercise: &Exercise, answer: &str, backend: &dyn Backend) -> AttemptVerdict {
    let source = exercise.template.splice(answer);
    let timeout = exercise.check.timeout.unwrap_or_else(|| backend.default_timeout());
    let mut evidence = AttemptEvidence::new(answer);
    match exercise.check.mode {
        CheckMode::VerifyOnly => {
            let report = backend.verify(&source, timeout);
            judge(exercise, &AttemptEvidence { verification: Some(&report), ..evidence })
        }
        CheckMode::VerifyAndRun => {
            let report = backend.verify(&source, timeout);
            let run = report.passed().then(|| backend.run(&source, timeout));
            evidence.verification = Some(&report);
            evidence.run = run.as_ref();
            judge(exercise, &evidence)
        }
        CheckMode::OracleSpec => {
            let oracle = match &exercise.hidden_oracle {
                Some(asset) => check_spec(&source, asset, backend, timeout),
                None => Err(OracleError::UnsupportedConstruct { what: "exercise has no reference".into() }),
            };
            judge(exercise, &AttemptEvidence { oracle: Some(&oracle), ..evidence })
        }
    }
}
