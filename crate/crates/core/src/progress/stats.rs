use std::collections::BTreeMap;

use serde::Serialize;

use super::{ProgressError, ProgressState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionStats {
    pub exercise: String,
    pub completed_count: usize,
    pub cohort_size: usize,
    /// `completed_count / cohort_size`, or 0 for an empty cohort.
    pub completion_fraction: f64,
    /// Number of students per attempt count (students with no attempts under 0).
    pub attempts_histogram: BTreeMap<u32, usize>,
}

pub fn question_stats(state: &ProgressState, exercise: &str) -> Result<QuestionStats, ProgressError> {
    if !state.exercises().contains(exercise) {
        return Err(ProgressError::UnknownExercise(exercise.to_owned()));
    }
    let cohort_size = state.students().len();
    let mut completed_count = 0;
    let mut attempts_histogram = BTreeMap::new();
    for s in state.students() {
        let record = state.record(s, exercise);
        completed_count += usize::from(record.completed);
        *attempts_histogram.entry(record.attempt_count).or_insert(0) += 1;
    }
    let completion_fraction = if cohort_size == 0 { 0.0 } else { completed_count as f64 / cohort_size as f64 };
    Ok(QuestionStats { exercise: exercise.to_owned(), completed_count, cohort_size, completion_fraction, attempts_histogram })
}

/// Number of students per count of completed exercises, indexed by that count.
pub fn completion_histogram(state: &ProgressState) -> Vec<usize> {
    let mut out = vec![0; state.exercises().len() + 1];
    for s in state.students() {
        out[state.completed_by(s).len()] += 1;
    }
    out
}

/// Completion-fraction band selecting questions worth discussing in class:
/// solved by a vanguard, not yet by most.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PickBand {
    low: f64,
    high: f64,
    mastered: f64,
}

impl Default for PickBand {
    fn default() -> Self {
        PickBand { low: 0.10, high: 0.25, mastered: 0.80 }
    }
}

impl PickBand {
    /// Requires `0 <= low < high <= mastered <= 1`.
    pub fn new(low: f64, high: f64, mastered: f64) -> Result<Self, ProgressError> {
        if !(0.0 <= low && low < high && high <= mastered && mastered <= 1.0) {
            return Err(ProgressError::InvalidBand(format!(
                "need 0 <= low < high <= mastered <= 1, got low={low} high={high} mastered={mastered}"
            )));
        }
        Ok(PickBand { low, high, mastered })
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn mastered(&self) -> f64 {
        self.mastered
    }

    pub fn contains(&self, fraction: f64) -> bool {
        fraction >= self.low && fraction <= self.high && fraction < self.mastered
    }
}

/// Exercise ids whose completion fraction lies in the band, ascending by
/// fraction, ties broken by id. Questions nobody could have attempted (empty
/// cohort) are never picked.
pub fn lecture_picks(stats: &[QuestionStats], band: &PickBand) -> Vec<String> {
    let mut picked: Vec<&QuestionStats> =
        stats.iter().filter(|s| s.cohort_size > 0 && band.contains(s.completion_fraction)).collect();
    picked.sort_by(|a, b| a.completion_fraction.total_cmp(&b.completion_fraction).then_with(|| a.exercise.cmp(&b.exercise)));
    picked.into_iter().map(|s| s.exercise.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::progress::tests::ev;

    fn stat(id: &str, done: usize, of: usize) -> QuestionStats {
        QuestionStats {
            exercise: id.into(),
            completed_count: done,
            cohort_size: of,
            completion_fraction: done as f64 / of as f64,
            attempts_histogram: BTreeMap::new(),
        }
    }

    #[test]
    fn fractions() {
        let students: Vec<String> = (0..100).map(|i| format!("s{i}")).collect();
        let mut st = ProgressState::new(students.clone(), ["q"]);
        for s in &students[..15] {
            st.record_attempt(&ev(s, "q", 1, true)).unwrap();
        }
        let q = question_stats(&st, "q").unwrap();
        assert_eq!((q.completed_count, q.cohort_size, q.completion_fraction), (15, 100, 0.15));
        assert_eq!(q.attempts_histogram, BTreeMap::from([(0, 85), (1, 15)]));
        assert!(question_stats(&st, "nope").is_err());
    }

    #[test]
    fn empty_cohort_is_zero() {
        let st = ProgressState::new(Vec::<String>::new(), ["q"]);
        let q = question_stats(&st, "q").unwrap();
        assert_eq!((q.completion_fraction, q.cohort_size), (0.0, 0));
    }

    #[test]
    fn picks_band() {
        let stats = [stat("a", 15, 100), stat("b", 95, 100), stat("c", 2, 100)];
        assert_eq!(lecture_picks(&stats, &PickBand::default()), vec!["a"]);
        let halves = [stat("a", 50, 100), stat("b", 50, 100)];
        assert!(lecture_picks(&halves, &PickBand::default()).is_empty());
    }

    #[test]
    fn picks_tie_break_by_id() {
        let stats = [stat("z", 15, 100), stat("m", 15, 100), stat("k", 20, 100)];
        assert_eq!(lecture_picks(&stats, &PickBand::default()), vec!["m", "z", "k"]);
    }

    #[test]
    fn mastered_never_picked() {
        let band = PickBand::new(0.0, 1.0, 1.0).unwrap();
        assert!(lecture_picks(&[stat("a", 100, 100)], &band).is_empty());
        assert_eq!(lecture_picks(&[stat("a", 99, 100)], &band), vec!["a"]);
    }

    #[test]
    fn band_validation() {
        assert!(PickBand::new(0.25, 0.10, 0.8).is_err());
        assert!(PickBand::new(0.1, 0.9, 0.8).is_err());
        assert!(PickBand::new(-0.1, 0.2, 0.8).is_err());
        assert!(PickBand::new(0.1, 0.2, 1.1).is_err());
        assert!(PickBand::new(0.1, 0.25, 0.8).is_ok());
    }
}
