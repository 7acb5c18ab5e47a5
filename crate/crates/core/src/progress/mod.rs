//! Attempt history and what is derived from it: sticky completion,
//! per-question statistics, lecture picks and weighted grades.
//!
//! The event log is the source of truth; [`ProgressState`] is a pure fold
//! over it, so replaying the log always reproduces the live state.

mod grading;
mod log;
mod stats;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grading::{
    compute_grade, export_grades, Aggregation, GradeBreakdown, GradeComponent, GradeError, GradeExport,
    GradeScheme, ManualScores,
};
pub use log::{read_events, EventLog, ProgressStore};
pub use stats::{completion_histogram, lecture_picks, question_stats, PickBand, QuestionStats};

/// One graded attempt, as stored in the log (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub student: String,
    pub exercise: String,
    /// UTC seconds since the Unix epoch.
    pub ts: u64,
    pub completed: bool,
    pub verified: u64,
    pub errors: u64,
    /// Hex SHA-256 of the submitted answer.
    pub hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CompletionRecord {
    pub student: String,
    pub exercise: String,
    pub completed: bool,
    pub first_completed_at: Option<u64>,
    pub attempt_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgressError {
    #[error("unknown exercise `{0}`")]
    UnknownExercise(String),
    #[error("unknown student `{0}`")]
    UnknownStudent(String),
    #[error("timestamp {got} is earlier than the last logged timestamp {last}")]
    NonMonotonicTimestamp { last: u64, got: u64 },
    #[error("event log is corrupt at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("invalid pick band: {0}")]
    InvalidBand(String),
    #[error("event log i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for ProgressError {
    fn from(e: std::io::Error) -> Self {
        ProgressError::Io(e.to_string())
    }
}

/// Completion state of a cohort on a set of exercises.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProgressState {
    students: BTreeSet<String>,
    exercises: BTreeSet<String>,
    records: BTreeMap<(String, String), CompletionRecord>,
    seen: HashSet<ProgressEvent>,
}

impl ProgressState {
    pub fn new<S, E>(students: impl IntoIterator<Item = S>, exercises: impl IntoIterator<Item = E>) -> Self
    where
        S: Into<String>,
        E: Into<String>,
    {
        ProgressState {
            students: students.into_iter().map(Into::into).collect(),
            exercises: exercises.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn students(&self) -> &BTreeSet<String> {
        &self.students
    }

    pub fn exercises(&self) -> &BTreeSet<String> {
        &self.exercises
    }

    pub fn check(&self, student: &str, exercise: &str) -> Result<(), ProgressError> {
        if !self.exercises.contains(exercise) {
            return Err(ProgressError::UnknownExercise(exercise.to_owned()));
        }
        if !self.students.contains(student) {
            return Err(ProgressError::UnknownStudent(student.to_owned()));
        }
        Ok(())
    }

    /// Apply one attempt. Completion is never unset; replaying an identical
    /// event changes nothing.
    pub fn record_attempt(&mut self, event: &ProgressEvent) -> Result<CompletionRecord, ProgressError> {
        self.check(&event.student, &event.exercise)?;
        let key = (event.student.clone(), event.exercise.clone());
        let fresh = self.seen.insert(event.clone());
        let record = self.records.entry(key).or_insert_with(|| CompletionRecord {
            student: event.student.clone(),
            exercise: event.exercise.clone(),
            ..Default::default()
        });
        if fresh {
            record.attempt_count += 1;
            if event.completed && !record.completed {
                record.completed = true;
                record.first_completed_at = Some(event.ts);
            }
        }
        Ok(record.clone())
    }

    pub fn record(&self, student: &str, exercise: &str) -> CompletionRecord {
        self.records.get(&(student.to_owned(), exercise.to_owned())).cloned().unwrap_or_else(|| CompletionRecord {
            student: student.to_owned(),
            exercise: exercise.to_owned(),
            ..Default::default()
        })
    }

    pub fn completed(&self, student: &str, exercise: &str) -> bool {
        self.records.get(&(student.to_owned(), exercise.to_owned())).is_some_and(|r| r.completed)
    }

    /// Exercises the student has completed.
    pub fn completed_by(&self, student: &str) -> BTreeSet<String> {
        self.records
            .values()
            .filter(|r| r.completed && r.student == student)
            .map(|r| r.exercise.clone())
            .collect()
    }

    pub fn attempts(&self, student: &str, exercise: &str) -> u32 {
        self.records.get(&(student.to_owned(), exercise.to_owned())).map_or(0, |r| r.attempt_count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ev(student: &str, exercise: &str, ts: u64, completed: bool) -> ProgressEvent {
        ProgressEvent {
            student: student.into(),
            exercise: exercise.into(),
            ts,
            completed,
            verified: u64::from(completed),
            errors: u64::from(!completed),
            hash: format!("h{ts}"),
        }
    }

    fn state() -> ProgressState {
        ProgressState::new(["s1", "s2"], ["fptp", "sum"])
    }

    #[test]
    fn first_failing_attempt() {
        let mut st = state();
        let r = st.record_attempt(&ev("s1", "fptp", 1, false)).unwrap();
        assert_eq!((r.completed, r.attempt_count), (false, 1));
    }

    #[test]
    fn completion_is_sticky() {
        let mut st = state();
        st.record_attempt(&ev("s1", "fptp", 1, true)).unwrap();
        let r = st.record_attempt(&ev("s1", "fptp", 2, false)).unwrap();
        assert!(r.completed);
        assert_eq!((r.first_completed_at, r.attempt_count), (Some(1), 2));
    }

    #[test]
    fn duplicate_event_is_idempotent() {
        let mut st = state();
        let e = ev("s1", "fptp", 5, false);
        st.record_attempt(&e).unwrap();
        let r = st.record_attempt(&e).unwrap();
        assert_eq!(r.attempt_count, 1);
    }

    #[test]
    fn unknown_ids_rejected() {
        let mut st = state();
        assert_eq!(st.record_attempt(&ev("s1", "nope", 1, true)), Err(ProgressError::UnknownExercise("nope".into())));
        assert_eq!(st.record_attempt(&ev("zz", "fptp", 1, true)), Err(ProgressError::UnknownStudent("zz".into())));
    }

    #[test]
    fn event_json_field_names() {
        let json = serde_json::to_string(&ev("s1", "fptp", 7, true)).unwrap();
        assert_eq!(
            json,
            r#"{"student":"s1","exercise":"fptp","ts":7,"completed":true,"verified":1,"errors":0,"hash":"h7"}"#
        );
    }
}
