//! The administration verbs, as plain functions over core operations.

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;
use verigrade_core::attempt::{run_attempt, AttemptVerdict};
use verigrade_core::backend::Backend;
use verigrade_core::bank::{load_bank, Bank};
use verigrade_core::oracle::self_check;
use verigrade_core::progress::{
    export_grades, read_events, GradeExport, GradeScheme, ManualScores, ProgressError, ProgressState,
};
use verigrade_core::syntax::{emit, parse_unit, SkippedClause};
use verigrade_core::testmode::{to_test_mode, transform_report, TransformOptions, TransformReport};

#[derive(Debug, Error)]
pub enum AdminError {
    #[error("{0}")]
    Bank(String),
    #[error("unknown exercise `{0}`")]
    UnknownExercise(String),
    #[error("parse error at line {line}, column {column}")]
    Parse { line: usize, column: usize },
    #[error(transparent)]
    Progress(#[from] ProgressError),
    #[error(transparent)]
    Grade(#[from] verigrade_core::progress::GradeError),
}

/// Outcome of `bank validate`.
#[derive(Debug, Default)]
pub struct BankReport {
    pub exercises: usize,
    /// One line per problem, each naming the offending file(s).
    pub problems: Vec<String>,
}

impl BankReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Load the bank and, when a backend is given, self-check every reference.
pub fn validate_bank(dir: &Path, self_check_with: Option<&dyn Backend>) -> BankReport {
    let bank = match load_bank(dir) {
        Ok(bank) => bank,
        Err(errors) => {
            return BankReport { exercises: 0, problems: errors.iter().map(ToString::to_string).collect() };
        }
    };
    let mut report = BankReport { exercises: bank.len(), problems: Vec::new() };
    if let Some(backend) = self_check_with {
        for ex in bank.iter() {
            let Some(asset) = &ex.hidden_oracle else { continue };
            let timeout = ex.check.timeout.unwrap_or_else(|| backend.default_timeout());
            let path = ex.source_path.display();
            match self_check(asset, backend, timeout) {
                Ok(v) if v.consistent && v.captures => {}
                Ok(v) => report.problems.push(format!(
                    "{path}: reference fails its own check (consistency: {}, capture: {})",
                    v.consistency_report.summary(),
                    v.capture_report.summary()
                )),
                Err(e) => report.problems.push(format!("{path}: reference cannot be checked: {e}")),
            }
        }
    }
    report
}

pub fn open_bank(dir: &Path) -> Result<Bank, AdminError> {
    load_bank(dir).map_err(|errors| AdminError::Bank(errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")))
}

/// A local attempt, exactly as the service would judge it (nothing is recorded).
pub fn check_answer(bank: &Bank, exercise: &str, answer: &str, backend: &dyn Backend) -> Result<AttemptVerdict, AdminError> {
    let ex = bank.get(exercise).ok_or_else(|| AdminError::UnknownExercise(exercise.to_owned()))?;
    Ok(run_attempt(ex, answer, backend))
}

#[derive(Debug)]
pub struct TestModeOutput {
    pub text: String,
    pub report: TransformReport,
    pub skipped: Vec<SkippedClause>,
}

pub fn test_mode(source: &str, opts: &TransformOptions) -> Result<TestModeOutput, AdminError> {
    let unit = parse_unit(source).map_err(|e| {
        let before = &source[..e.offset().min(source.len())];
        AdminError::Parse {
            line: before.matches('\n').count() + 1,
            column: before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1,
        }
    })?;
    let out = to_test_mode(&unit, opts);
    Ok(TestModeOutput { text: emit(&out), report: transform_report(&unit, &out), skipped: out.test_mode_skips })
}

/// Rebuild progress from the log without opening it for writing, so this is
/// safe while the service runs. When `students` is `None` the cohort is every
/// student that appears in the log.
pub fn progress_from_log(log: &Path, bank: &Bank, students: Option<Vec<String>>) -> Result<ProgressState, AdminError> {
    let events = read_events(log)?;
    let students = students.unwrap_or_else(|| events.iter().map(|e| e.student.clone()).collect::<BTreeSet<_>>().into_iter().collect());
    let mut state = ProgressState::new(students, bank.ids());
    for event in &events {
        // Events for students or exercises outside the cohort/bank are not graded.
        let _ = state.record_attempt(event);
    }
    Ok(state)
}

pub fn grades(
    bank: &Bank,
    state: &ProgressState,
    scheme: &GradeScheme,
    manual: &ManualScores,
) -> Result<GradeExport, AdminError> {
    Ok(export_grades(state.students(), scheme, state, &bank.groups(), manual)?)
}
