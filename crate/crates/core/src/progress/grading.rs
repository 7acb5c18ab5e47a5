use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ProgressState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aggregation {
    /// Weight split equally over the group's questions.
    PerQuestionEqualSplit,
    /// Full weight only when every question in the group is completed.
    AllOrNothing,
    /// Weight times an instructor-entered score fraction.
    ManualScore,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradeComponent {
    pub group: String,
    /// Percent of the final grade.
    pub weight: f64,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GradeError {
    #[error("invalid grade scheme: {0}")]
    InvalidScheme(String),
    #[error("missing manual score for student `{student}` in `{group}`")]
    MissingManualScore { student: String, group: String },
    #[error("group `{0}` has no questions")]
    EmptyGroup(String),
    #[error("invalid manual score: {0}")]
    InvalidManualScore(String),
}

/// Validated list of components whose weights sum to exactly 100.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradeScheme {
    components: Vec<GradeComponent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeFile {
    component: Vec<ComponentEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentEntry {
    group: String,
    weight: toml::Value,
    aggregation: Aggregation,
}

impl GradeScheme {
    pub fn new(components: Vec<GradeComponent>) -> Result<Self, GradeError> {
        if components.is_empty() {
            return Err(GradeError::InvalidScheme("no components".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &components {
            if !c.weight.is_finite() || c.weight < 0.0 {
                return Err(GradeError::InvalidScheme(format!("weight of `{}` must be a non-negative number", c.group)));
            }
            if !seen.insert(c.group.as_str()) {
                return Err(GradeError::InvalidScheme(format!("group `{}` listed twice", c.group)));
            }
        }
        // Summed in component order, the same order grades are summed in, so
        // a perfect record totals exactly 100.
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if sum != 100.0 {
            return Err(GradeError::InvalidScheme(format!("weights sum to {sum}, not 100")));
        }
        Ok(GradeScheme { components })
    }

    /// Parse `[[component]]` tables with `group`, `weight`, `aggregation`.
    pub fn from_toml(text: &str) -> Result<Self, GradeError> {
        let file: SchemeFile = toml::from_str(text).map_err(|e| GradeError::InvalidScheme(e.to_string()))?;
        let components = file
            .component
            .into_iter()
            .map(|c| {
                let weight = match c.weight {
                    toml::Value::Integer(i) => i as f64,
                    toml::Value::Float(f) => f,
                    other => return Err(GradeError::InvalidScheme(format!("weight `{other}` is not a number"))),
                };
                Ok(GradeComponent { group: c.group, weight, aggregation: c.aggregation })
            })
            .collect::<Result<_, _>>()?;
        GradeScheme::new(components)
    }

    /// Weekly questions 20%; assignments 10/15/15/20; essay 20% scored by hand.
    pub fn course_default() -> Self {
        let c = |group: &str, weight: f64, aggregation| GradeComponent { group: group.into(), weight, aggregation };
        GradeScheme::new(vec![
            c("weekly", 20.0, Aggregation::PerQuestionEqualSplit),
            c("a1", 10.0, Aggregation::PerQuestionEqualSplit),
            c("a2", 15.0, Aggregation::PerQuestionEqualSplit),
            c("a3", 15.0, Aggregation::PerQuestionEqualSplit),
            c("a4", 20.0, Aggregation::PerQuestionEqualSplit),
            c("essay", 20.0, Aggregation::ManualScore),
        ])
        .expect("default scheme is valid")
    }

    pub fn components(&self) -> &[GradeComponent] {
        &self.components
    }
}

/// Instructor-entered score fractions in `0..=1`, per student and group.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ManualScores {
    scores: BTreeMap<(String, String), f64>,
}

impl ManualScores {
    pub fn insert(&mut self, student: &str, group: &str, fraction: f64) -> Result<(), GradeError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(GradeError::InvalidManualScore(format!("{student}/{group}: {fraction} not in 0..=1")));
        }
        self.scores.insert((student.to_owned(), group.to_owned()), fraction);
        Ok(())
    }

    pub fn get(&self, student: &str, group: &str) -> Option<f64> {
        self.scores.get(&(student.to_owned(), group.to_owned())).copied()
    }

    /// Read `student_id,group,score` rows (header required).
    pub fn from_csv(text: &str) -> Result<Self, GradeError> {
        let mut out = ManualScores::default();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for row in reader.records() {
            let row = row.map_err(|e| GradeError::InvalidManualScore(e.to_string()))?;
            let (Some(student), Some(group), Some(score)) = (row.get(0), row.get(1), row.get(2)) else {
                return Err(GradeError::InvalidManualScore("expected student_id,group,score".into()));
            };
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| GradeError::InvalidManualScore(format!("bad score `{score}`")))?;
            out.insert(student.trim(), group.trim(), score)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradeBreakdown {
    pub student: String,
    /// Earned percent per component, in scheme order.
    pub components: Vec<(String, f64)>,
    pub total: f64,
}

fn component_earned(
    student: &str,
    component: &GradeComponent,
    state: &ProgressState,
    groups: &BTreeMap<String, Vec<String>>,
    manual: &ManualScores,
) -> Result<f64, GradeError> {
    let questions = || {
        groups
            .get(&component.group)
            .filter(|q| !q.is_empty())
            .ok_or_else(|| GradeError::EmptyGroup(component.group.clone()))
    };
    match component.aggregation {
        Aggregation::PerQuestionEqualSplit => {
            let qs = questions()?;
            let done = qs.iter().filter(|q| state.completed(student, q)).count();
            Ok(component.weight * (done as f64 / qs.len() as f64))
        }
        Aggregation::AllOrNothing => {
            let qs = questions()?;
            Ok(if qs.iter().all(|q| state.completed(student, q)) { component.weight } else { 0.0 })
        }
        Aggregation::ManualScore => manual
            .get(student, &component.group)
            .map(|f| component.weight * f)
            .ok_or_else(|| GradeError::MissingManualScore { student: student.to_owned(), group: component.group.clone() }),
    }
}

/// Weighted grade for one student. `groups` maps weight groups to their exercise ids.
pub fn compute_grade(
    student: &str,
    scheme: &GradeScheme,
    state: &ProgressState,
    groups: &BTreeMap<String, Vec<String>>,
    manual: &ManualScores,
) -> Result<GradeBreakdown, GradeError> {
    let mut components = Vec::with_capacity(scheme.components.len());
    for c in &scheme.components {
        components.push((c.group.clone(), component_earned(student, c, state, groups, manual)?));
    }
    let total = components.iter().map(|(_, e)| e).sum();
    Ok(GradeBreakdown { student: student.to_owned(), components, total })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradeExport {
    pub csv: String,
    pub warnings: Vec<String>,
}

/// CSV with one row per student (sorted), earned percent per component and
/// the total, one decimal place. Missing manual scores leave an empty cell,
/// add a warning, and count as zero in the total.
pub fn export_grades<'a>(
    students: impl IntoIterator<Item = &'a String>,
    scheme: &GradeScheme,
    state: &ProgressState,
    groups: &BTreeMap<String, Vec<String>>,
    manual: &ManualScores,
) -> Result<GradeExport, GradeError> {
    let mut students: Vec<&String> = students.into_iter().collect();
    students.sort();
    students.dedup();

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["student_id".to_owned()];
    header.extend(scheme.components.iter().map(|c| c.group.clone()));
    header.push("total".into());
    let csv_err = |e: csv::Error| GradeError::InvalidScheme(e.to_string());
    writer.write_record(&header).map_err(csv_err)?;

    let mut warnings = Vec::new();
    for student in students {
        let mut row = vec![student.clone()];
        let mut total = 0.0;
        for c in &scheme.components {
            match component_earned(student, c, state, groups, manual) {
                Ok(earned) => {
                    total += earned;
                    row.push(format!("{earned:.1}"));
                }
                Err(e @ GradeError::MissingManualScore { .. }) => {
                    warnings.push(e.to_string());
                    row.push(String::new());
                }
                Err(e) => return Err(e),
            }
        }
        row.push(format!("{total:.1}"));
        writer.write_record(&row).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| GradeError::InvalidScheme(e.to_string()))?;
    Ok(GradeExport { csv: String::from_utf8(bytes).expect("csv of utf-8 fields"), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::progress::tests::ev;

    fn groups() -> BTreeMap<String, Vec<String>> {
        let mut g = BTreeMap::new();
        g.insert("weekly".into(), (1..=8).map(|i| format!("w{i}")).collect());
        g.insert("a1".into(), vec!["a1-p1".into(), "a1-p2".into()]);
        g.insert("a2".into(), vec!["a2-p1".into()]);
        g.insert("a3".into(), vec!["a3-p1".into(), "a3-p2".into(), "a3-p3".into()]);
        g.insert("a4".into(), vec!["a4-p1".into()]);
        g
    }

    fn state_with(done: &[&str]) -> ProgressState {
        let all: Vec<String> = groups().into_values().flatten().collect();
        let mut st = ProgressState::new(["s"], all);
        for (i, q) in done.iter().enumerate() {
            st.record_attempt(&ev("s", q, i as u64, true)).unwrap();
        }
        st
    }

    fn all_in(groups_: &[&str]) -> Vec<String> {
        let g = groups();
        groups_.iter().flat_map(|k| g[*k].clone()).collect()
    }

    fn manual(essay: Option<f64>) -> ManualScores {
        let mut m = ManualScores::default();
        if let Some(f) = essay {
            m.insert("s", "essay", f).unwrap();
        }
        m
    }

    #[test]
    fn weekly_plus_first_assignment_is_thirty() {
        let done = all_in(&["weekly", "a1"]);
        let st = state_with(&done.iter().map(String::as_str).collect::<Vec<_>>());
        let g = compute_grade("s", &GradeScheme::course_default(), &st, &groups(), &manual(Some(0.0))).unwrap();
        assert_eq!(g.total, 30.0);
    }

    #[test]
    fn everything_but_essay_is_eighty() {
        let done = all_in(&["weekly", "a1", "a2", "a3", "a4"]);
        let st = state_with(&done.iter().map(String::as_str).collect::<Vec<_>>());
        let g = compute_grade("s", &GradeScheme::course_default(), &st, &groups(), &manual(Some(0.0))).unwrap();
        assert_eq!(g.total, 80.0);
        let g = compute_grade("s", &GradeScheme::course_default(), &st, &groups(), &manual(Some(1.0))).unwrap();
        assert_eq!(g.total, 100.0);
    }

    #[test]
    fn no_activity_is_zero() {
        let scheme = GradeScheme::new(vec![GradeComponent {
            group: "weekly".into(),
            weight: 100.0,
            aggregation: Aggregation::PerQuestionEqualSplit,
        }])
        .unwrap();
        let g = compute_grade("s", &scheme, &state_with(&[]), &groups(), &ManualScores::default()).unwrap();
        assert_eq!(g.total, 0.0);
    }

    #[test]
    fn partial_split_and_all_or_nothing() {
        let st = state_with(&["w1", "w2", "a3-p1"]);
        let g = compute_grade("s", &GradeScheme::course_default(), &st, &groups(), &manual(Some(0.5))).unwrap();
        assert_eq!(g.components[0], ("weekly".to_owned(), 5.0));
        assert_eq!(g.components[5], ("essay".to_owned(), 10.0));
        let strict = GradeScheme::new(vec![
            GradeComponent { group: "a3".into(), weight: 50.0, aggregation: Aggregation::AllOrNothing },
            GradeComponent { group: "weekly".into(), weight: 50.0, aggregation: Aggregation::AllOrNothing },
        ])
        .unwrap();
        assert_eq!(compute_grade("s", &strict, &st, &groups(), &ManualScores::default()).unwrap().total, 0.0);
    }

    #[test]
    fn missing_manual_score() {
        let err = compute_grade("s", &GradeScheme::course_default(), &state_with(&[]), &groups(), &manual(None));
        assert!(matches!(err, Err(GradeError::MissingManualScore { .. })));
    }

    #[test]
    fn scheme_validation_and_toml() {
        let c = |w| GradeComponent { group: "g".into(), weight: w, aggregation: Aggregation::ManualScore };
        assert!(GradeScheme::new(vec![c(99.0)]).is_err());
        assert!(GradeScheme::new(vec![c(-1.0)]).is_err());
        let toml = "[[component]]\ngroup = \"weekly\"\nweight = 60\naggregation = \"PerQuestionEqualSplit\"\n\n[[component]]\ngroup = \"essay\"\nweight = 40.0\naggregation = \"ManualScore\"\n";
        let s = GradeScheme::from_toml(toml).unwrap();
        assert_eq!(s.components().len(), 2);
        assert!(GradeScheme::from_toml("[[component]]\ngroup = \"x\"\nweight = 100\naggregation = \"Vibes\"\n").is_err());
    }

    #[test]
    fn export_layout() {
        let all: Vec<String> = groups().into_values().flatten().collect();
        let mut st = ProgressState::new(["s2", "s1"], all);
        st.record_attempt(&ev("s1", "w1", 1, true)).unwrap();
        let mut m = ManualScores::default();
        m.insert("s1", "essay", 1.0).unwrap();
        let students: Vec<String> = vec!["s2".into(), "s1".into()];
        let out = export_grades(&students, &GradeScheme::course_default(), &st, &groups(), &m).unwrap();
        assert_eq!(
            out.csv,
            "student_id,weekly,a1,a2,a3,a4,essay,total\ns1,2.5,0.0,0.0,0.0,0.0,20.0,22.5\ns2,0.0,0.0,0.0,0.0,0.0,,0.0\n"
        );
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("s2"));
        let empty = export_grades(&Vec::<String>::new(), &GradeScheme::course_default(), &st, &groups(), &m).unwrap();
        assert_eq!(empty.csv, "student_id,weekly,a1,a2,a3,a4,essay,total\n");
    }

    #[test]
    fn manual_csv() {
        let m = ManualScores::from_csv("student_id,group,score\ns1,essay,0.75\n").unwrap();
        assert_eq!(m.get("s1", "essay"), Some(0.75));
        assert!(ManualScores::from_csv("student_id,group,score\ns1,essay,7\n").is_err());
    }
}
