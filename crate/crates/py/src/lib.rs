//! Python bindings: load a bank, judge answers, rewrite programs into test
//! mode, and compute progress statistics and grades.

use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::time::Duration;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use verigrade_core::attempt::{run_attempt, submission_hash, AttemptVerdict};
use verigrade_core::backend::{parse_verifier_output, Backend, BackendConfig, MockBackend};
use verigrade_core::bank::{self, load_bank, Template};
use verigrade_core::progress::{
    export_grades, lecture_picks as pick, question_stats, GradeScheme, ManualScores, PickBand, ProgressEvent,
    ProgressState,
};
use verigrade_core::syntax::{emit, parse_unit};
use verigrade_core::testmode::{to_test_mode as rewrite, transform_report, TransformOptions};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// The response to one attempt.
#[pyclass(frozen, get_all, skip_from_py_object, module = "verigrade")]
#[derive(Clone)]
pub struct Verdict {
    completed: bool,
    feedback: String,
    verified_count: u64,
    error_count: u64,
}

#[pymethods]
impl Verdict {
    fn __repr__(&self) -> String {
        format!("Verdict(completed={}, feedback={:?})", if self.completed { "True" } else { "False" }, self.feedback)
    }
}

impl From<AttemptVerdict> for Verdict {
    fn from(v: AttemptVerdict) -> Self {
        Verdict { completed: v.completed, feedback: v.feedback, verified_count: v.verified_count, error_count: v.error_count }
    }
}

/// Public description of one exercise (hidden assets are not exposed).
#[pyclass(frozen, get_all, skip_from_py_object, module = "verigrade")]
#[derive(Clone)]
pub struct ExerciseInfo {
    id: String,
    title: String,
    week: u8,
    weight_group: String,
    template_text: String,
    char_limit: Option<usize>,
}

/// A loaded exercise bank.
#[pyclass(frozen, module = "verigrade")]
pub struct Bank {
    inner: bank::Bank,
    dir: PathBuf,
}

#[pymethods]
impl Bank {
    /// Load every `.exercise` file under `dir`; raises ValueError listing all problems.
    #[new]
    fn new(dir: PathBuf) -> PyResult<Self> {
        let inner = load_bank(&dir)
            .map_err(|errors| value_error(errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")))?;
        Ok(Bank { inner, dir })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.ids().map(str::to_owned).collect()
    }

    /// Exercise ids by weight group.
    fn groups(&self) -> BTreeMap<String, Vec<String>> {
        self.inner.groups()
    }

    fn exercise(&self, id: &str) -> PyResult<ExerciseInfo> {
        let ex = self.inner.get(id).ok_or_else(|| PyKeyError::new_err(id.to_owned()))?;
        Ok(ExerciseInfo {
            id: ex.id.clone(),
            title: ex.title.clone(),
            week: ex.week,
            weight_group: ex.weight_group.clone(),
            template_text: ex.template.text().to_owned(),
            char_limit: ex.char_limit.map(NonZeroUsize::get),
        })
    }

    /// Judge `answer` against exercise `id`. With `mock=True` (the default) the
    /// scripted backend is used and referenced outputs are read from the bank
    /// directory; otherwise the external verifier is configured from the
    /// environment.
    #[pyo3(signature = (id, answer, mock = true, timeout_secs = 30))]
    fn attempt(&self, py: Python<'_>, id: &str, answer: &str, mock: bool, timeout_secs: u64) -> PyResult<Verdict> {
        let ex = self.inner.get(id).ok_or_else(|| PyKeyError::new_err(id.to_owned()))?;
        let timeout = Duration::from_secs(timeout_secs);
        let backend: Box<dyn Backend> = if mock {
            Box::new(MockBackend::new(timeout, Some(self.dir.clone())))
        } else {
            BackendConfig { timeout, ..Default::default() }.with_env().map_err(value_error)?.build()
        };
        let verdict = py.detach(|| run_attempt(ex, answer, backend.as_ref()));
        Ok(verdict.into())
    }

    /// Grade CSV for every student in `progress` under the scheme in `scheme_toml`.
    /// `manual_csv` holds `student_id,group,score` rows. Returns `(csv, warnings)`.
    #[pyo3(signature = (progress, scheme_toml = None, manual_csv = None))]
    fn export_grades(
        &self,
        progress: &Progress,
        scheme_toml: Option<&str>,
        manual_csv: Option<&str>,
    ) -> PyResult<(String, Vec<String>)> {
        let scheme = match scheme_toml {
            Some(text) => GradeScheme::from_toml(text).map_err(value_error)?,
            None => GradeScheme::course_default(),
        };
        let manual = match manual_csv {
            Some(text) => ManualScores::from_csv(text).map_err(value_error)?,
            None => ManualScores::default(),
        };
        let state = &progress.state;
        let export =
            export_grades(state.students(), &scheme, state, &self.inner.groups(), &manual).map_err(value_error)?;
        Ok((export.csv, export.warnings))
    }
}

/// In-memory progress for a cohort.
#[pyclass(module = "verigrade")]
pub struct Progress {
    state: ProgressState,
    ts: u64,
}

#[pymethods]
impl Progress {
    #[new]
    fn new(students: Vec<String>, exercises: Vec<String>) -> Self {
        Progress { state: ProgressState::new(students, exercises), ts: 0 }
    }

    /// Record one attempt; returns whether the exercise is now completed.
    #[pyo3(signature = (student, exercise, completed, answer = ""))]
    fn record(&mut self, student: &str, exercise: &str, completed: bool, answer: &str) -> PyResult<bool> {
        self.ts += 1;
        let event = ProgressEvent {
            student: student.to_owned(),
            exercise: exercise.to_owned(),
            ts: self.ts,
            completed,
            verified: u64::from(completed),
            errors: u64::from(!completed),
            hash: submission_hash(answer),
        };
        Ok(self.state.record_attempt(&event).map_err(value_error)?.completed)
    }

    fn completed(&self, student: &str, exercise: &str) -> bool {
        self.state.completed(student, exercise)
    }

    fn attempts(&self, student: &str, exercise: &str) -> u32 {
        self.state.attempts(student, exercise)
    }

    /// Fraction of the cohort that has completed `exercise`.
    fn completion_fraction(&self, exercise: &str) -> PyResult<f64> {
        Ok(question_stats(&self.state, exercise).map_err(value_error)?.completion_fraction)
    }

    /// Exercises worth discussing in lecture: completion inside the band.
    #[pyo3(signature = (low = None, high = None, mastered = None))]
    fn lecture_picks(&self, low: Option<f64>, high: Option<f64>, mastered: Option<f64>) -> PyResult<Vec<String>> {
        let d = PickBand::default();
        let band = PickBand::new(low.unwrap_or(d.low()), high.unwrap_or(d.high()), mastered.unwrap_or(d.mastered()))
            .map_err(value_error)?;
        let stats = self
            .state
            .exercises()
            .iter()
            .map(|e| question_stats(&self.state, e))
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_error)?;
        Ok(pick(&stats, &band))
    }
}

/// Replace the template placeholder with `answer`.
#[pyfunction]
fn splice(template: &str, answer: &str) -> PyResult<String> {
    Ok(Template::new(template).map_err(value_error)?.splice(answer))
}

/// `(passed, count, limit)`: an answer passes when it has fewer than `limit` characters.
#[pyfunction]
fn check_char_limit(answer: &str, limit: usize) -> PyResult<(bool, usize, usize)> {
    let limit = NonZeroUsize::new(limit).ok_or_else(|| value_error("limit must be positive"))?;
    let o = bank::check_char_limit(answer, limit);
    Ok((o.passed, o.count, o.limit))
}

/// Parse and re-emit a program; the result equals the input for any program that parses.
#[pyfunction]
fn round_trip(source: &str) -> PyResult<String> {
    Ok(emit(&parse_unit(source).map_err(value_error)?))
}

/// Rewrite specifications into run-time `expect` checks. Returns the new
/// source and a dict of converted clause counts.
#[pyfunction]
#[pyo3(signature = (source, asserts = true, assumes = true, requires = true, ensures = true, invariants = true))]
fn to_test_mode(
    source: &str,
    asserts: bool,
    assumes: bool,
    requires: bool,
    ensures: bool,
    invariants: bool,
) -> PyResult<(String, BTreeMap<&'static str, usize>)> {
    let unit = parse_unit(source).map_err(value_error)?;
    let out = rewrite(&unit, &TransformOptions { asserts, assumes, requires, ensures, invariants });
    let r = transform_report(&unit, &out);
    let counts = BTreeMap::from([
        ("asserts", r.asserts),
        ("assumes", r.assumes),
        ("requires", r.requires),
        ("ensures", r.ensures),
        ("invariants", r.invariants),
    ]);
    Ok((emit(&out), counts))
}

/// `(verified, errors)` from raw verifier output; ValueError if unrecognized.
#[pyfunction]
fn parse_verifier_summary(raw: &[u8]) -> PyResult<(u64, u64)> {
    let p = parse_verifier_output(raw).map_err(|_| value_error("unrecognized verifier output"))?;
    Ok((p.verified, p.errors))
}

#[pymodule]
fn verigrade(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Bank>()?;
    m.add_class::<ExerciseInfo>()?;
    m.add_class::<Verdict>()?;
    m.add_class::<Progress>()?;
    m.add_function(wrap_pyfunction!(splice, m)?)?;
    m.add_function(wrap_pyfunction!(check_char_limit, m)?)?;
    m.add_function(wrap_pyfunction!(round_trip, m)?)?;
    m.add_function(wrap_pyfunction!(to_test_mode, m)?)?;
    m.add_function(wrap_pyfunction!(parse_verifier_summary, m)?)?;
    Ok(())
}
