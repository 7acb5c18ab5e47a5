//! Exercise definitions: templates with a single `[???]` placeholder, check
//! policies, hidden assets, and the on-disk bank format.
//!
//! A bank is a directory tree of `<id>.exercise` files. Each file starts with
//! a front-matter block delimited by `---` lines holding `key: value` pairs;
//! everything after the closing delimiter is the template, byte for byte.
//! Hidden assets live next to the exercise file as `<id>.oracle.dfy` and
//! `<id>.out`.

use std::collections::BTreeMap;
use std::fmt;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::oracle::{OracleAsset, OracleDirections};

pub const PLACEHOLDER: &str = "[???]";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaceholderInfo {
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template has no `[???]` placeholder")]
    NoPlaceholder,
    #[error("template has {} placeholders (at bytes {offsets:?}); exactly one is allowed", offsets.len())]
    MultiplePlaceholders { offsets: Vec<usize> },
}

pub fn validate_template(text: &str) -> Result<PlaceholderInfo, TemplateError> {
    let offsets: Vec<usize> = text.match_indices(PLACEHOLDER).map(|(i, _)| i).collect();
    match offsets.as_slice() {
        [] => Err(TemplateError::NoPlaceholder),
        [offset] => Ok(PlaceholderInfo { offset: *offset }),
        _ => Err(TemplateError::MultiplePlaceholders { offsets }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    text: String,
    placeholder_offset: usize,
}

impl Template {
    pub fn new(text: impl Into<String>) -> Result<Self, TemplateError> {
        let text = text.into();
        let info = validate_template(&text)?;
        Ok(Template { text, placeholder_offset: info.offset })
    }

    /// Template for whole-file submissions: the answer is the program.
    pub fn whole_file() -> Self {
        Template { text: PLACEHOLDER.to_owned(), placeholder_offset: 0 }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn placeholder_offset(&self) -> usize {
        self.placeholder_offset
    }

    pub fn splice(&self, answer: &str) -> String {
        splice(self, answer)
    }
}

/// Replace the placeholder with `answer`, verbatim.
pub fn splice(template: &Template, answer: &str) -> String {
    let at = template.placeholder_offset;
    let mut out = String::with_capacity(template.text.len() - PLACEHOLDER.len() + answer.len());
    out.push_str(&template.text[..at]);
    out.push_str(answer);
    out.push_str(&template.text[at + PLACEHOLDER.len()..]);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharLimitOutcome {
    pub passed: bool,
    pub count: usize,
    pub limit: usize,
}

/// Passes when the submission is strictly shorter than `limit` Unicode scalar
/// values. CRLF counts as one character; whitespace and comments count.
pub fn check_char_limit(submission: &str, limit: NonZeroUsize) -> CharLimitOutcome {
    let count = submission.chars().count() - submission.matches("\r\n").count();
    CharLimitOutcome { passed: count < limit.get(), count, limit: limit.get() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExerciseKind {
    Mastery,
    AssignmentPart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckMode {
    VerifyOnly,
    VerifyAndRun,
    OracleSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckPolicy {
    pub mode: CheckMode,
    pub required_verified_min: Option<u64>,
    pub notes: String,
    /// Compare program output after turning CRLF into LF.
    pub normalize_eol: bool,
    /// Per-exercise verifier timeout; the backend default applies when unset.
    pub timeout: Option<Duration>,
    pub oracle_directions: OracleDirections,
}

impl CheckPolicy {
    pub fn new(mode: CheckMode) -> Self {
        CheckPolicy {
            mode,
            required_verified_min: None,
            notes: String::new(),
            normalize_eol: false,
            timeout: None,
            oracle_directions: OracleDirections::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exercise {
    pub id: String,
    pub title: String,
    pub week: u8,
    pub kind: ExerciseKind,
    pub check: CheckPolicy,
    pub template: Template,
    pub hidden_oracle: Option<OracleAsset>,
    pub expected_stdout: Option<Vec<u8>>,
    pub char_limit: Option<NonZeroUsize>,
    pub weight_group: String,
    pub source_path: PathBuf,
}

impl Exercise {
    /// Check the cross-field invariants that do not depend on the filesystem.
    pub fn validate(&self) -> Result<(), String> {
        if !(1..=12).contains(&self.week) {
            return Err(format!("week {} outside 1..12", self.week));
        }
        if self.char_limit.is_some() && self.check.mode != CheckMode::VerifyAndRun {
            return Err("char_limit requires mode VerifyAndRun".into());
        }
        if self.check.mode == CheckMode::VerifyAndRun && self.expected_stdout.is_none() {
            return Err("VerifyAndRun requires expected stdout".into());
        }
        if self.check.mode == CheckMode::OracleSpec && self.hidden_oracle.is_none() {
            return Err("OracleSpec requires a hidden oracle".into());
        }
        if self.weight_group.is_empty() {
            return Err("weight_group must not be empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BankErrorKind {
    #[error("malformed front matter: {0}")]
    MalformedFrontMatter(String),
    #[error("duplicate id `{id}` (also defined in {})", first.display())]
    DuplicateId { id: String, first: PathBuf },
    #[error("missing asset {}", asset.display())]
    MissingAsset { asset: PathBuf },
    #[error("invalid template: {0}")]
    TemplateInvalid(TemplateError),
    #[error("invalid asset {}: {reason}", asset.display())]
    InvalidAsset { asset: PathBuf, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankError {
    pub path: PathBuf,
    pub kind: BankErrorKind,
}

impl fmt::Display for BankError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.kind)
    }
}

impl std::error::Error for BankError {}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bank {
    exercises: BTreeMap<String, Exercise>,
}

impl Bank {
    pub fn from_exercises(exercises: impl IntoIterator<Item = Exercise>) -> Self {
        Bank { exercises: exercises.into_iter().map(|e| (e.id.clone(), e)).collect() }
    }

    pub fn get(&self, id: &str) -> Option<&Exercise> {
        self.exercises.get(id)
    }

    /// Exercises ordered by id.
    pub fn iter(&self) -> impl Iterator<Item = &Exercise> {
        self.exercises.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.exercises.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.exercises.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exercises.is_empty()
    }

    /// Exercise ids per weight group.
    pub fn groups(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for e in self.iter() {
            out.entry(e.weight_group.clone()).or_default().push(e.id.clone());
        }
        out
    }
}

/// Load every `*.exercise` file under `root`. Returns all problems found, not just the first.
pub fn load_bank(root: &Path) -> Result<Bank, Vec<BankError>> {
    let mut files = Vec::new();
    let mut errors = Vec::new();
    collect_exercise_files(root, &mut files, &mut errors);
    files.sort();

    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut exercises = Vec::new();
    for path in files {
        match load_exercise(&path) {
            Ok(ex) => {
                if let Some(first) = seen.get(&ex.id) {
                    errors.push(BankError {
                        path: path.clone(),
                        kind: BankErrorKind::DuplicateId { id: ex.id.clone(), first: first.clone() },
                    });
                    continue;
                }
                seen.insert(ex.id.clone(), path);
                exercises.push(ex);
            }
            Err(mut errs) => errors.append(&mut errs),
        }
    }
    if errors.is_empty() {
        Ok(Bank::from_exercises(exercises))
    } else {
        Err(errors)
    }
}

fn collect_exercise_files(dir: &Path, files: &mut Vec<PathBuf>, errors: &mut Vec<BankError>) {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => {
            errors.push(BankError { path: dir.to_owned(), kind: BankErrorKind::Io(e.to_string()) });
            return;
        }
    };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            collect_exercise_files(&path, files, errors);
        } else if path.extension().is_some_and(|x| x == "exercise") {
            files.push(path);
        }
    }
}

/// Parse one exercise file and resolve its sibling assets.
pub fn load_exercise(path: &Path) -> Result<Exercise, Vec<BankError>> {
    let err = |kind| vec![BankError { path: path.to_owned(), kind }];
    let raw = std::fs::read_to_string(path).map_err(|e| err(BankErrorKind::Io(e.to_string())))?;
    let (fields, template_text) = split_front_matter(&raw).map_err(|m| err(BankErrorKind::MalformedFrontMatter(m)))?;

    let mut errors = Vec::new();
    let meta = match FrontMatter::from_fields(fields) {
        Ok(m) => Some(m),
        Err(m) => {
            errors.push(BankError { path: path.to_owned(), kind: BankErrorKind::MalformedFrontMatter(m) });
            None
        }
    };
    let template = match Template::new(template_text) {
        Ok(t) => Some(t),
        Err(e) => {
            errors.push(BankError { path: path.to_owned(), kind: BankErrorKind::TemplateInvalid(e) });
            None
        }
    };
    let (Some(meta), Some(template)) = (meta, template) else {
        return Err(errors);
    };

    let dir = path.parent().unwrap_or(Path::new("."));
    let oracle_path = dir.join(format!("{}.oracle.dfy", meta.id));
    let out_path = dir.join(format!("{}.out", meta.id));

    let expected_stdout = match std::fs::read(&out_path) {
        Ok(bytes) => Some(bytes),
        Err(_) if meta.mode == CheckMode::VerifyAndRun => {
            errors.push(BankError { path: path.to_owned(), kind: BankErrorKind::MissingAsset { asset: out_path } });
            None
        }
        Err(_) => None,
    };

    let mut hidden_oracle = None;
    if meta.mode == CheckMode::OracleSpec {
        match std::fs::read_to_string(&oracle_path) {
            Ok(src) => match OracleAsset::from_source(&src, meta.oracle_target.as_deref()) {
                Ok(asset) => hidden_oracle = Some(asset),
                Err(e) => errors.push(BankError {
                    path: path.to_owned(),
                    kind: BankErrorKind::InvalidAsset { asset: oracle_path, reason: e.to_string() },
                }),
            },
            Err(_) => errors.push(BankError {
                path: path.to_owned(),
                kind: BankErrorKind::MissingAsset { asset: oracle_path },
            }),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let weight_group = meta.weight_group.unwrap_or_else(|| match meta.kind {
        ExerciseKind::Mastery => "weekly".to_owned(),
        ExerciseKind::AssignmentPart => "assignments".to_owned(),
    });
    let exercise = Exercise {
        id: meta.id,
        title: meta.title,
        week: meta.week,
        kind: meta.kind,
        check: CheckPolicy {
            mode: meta.mode,
            required_verified_min: meta.verified_min,
            notes: meta.notes,
            normalize_eol: meta.normalize_eol,
            timeout: meta.timeout,
            oracle_directions: meta.oracle_directions,
        },
        template,
        hidden_oracle,
        expected_stdout,
        char_limit: meta.char_limit,
        weight_group,
        source_path: path.to_owned(),
    };
    exercise.validate().map_err(|m| err(BankErrorKind::MalformedFrontMatter(m)))?;
    Ok(exercise)
}

fn is_delimiter(line: &str) -> bool {
    line.trim_end_matches(['\n', '\r']) == "---"
}

/// Split `---`-delimited front matter from the template body.
fn split_front_matter(raw: &str) -> Result<(Vec<(String, String)>, &str), String> {
    let mut lines = raw.split_inclusive('\n');
    match lines.next() {
        Some(first) if is_delimiter(first) => {}
        _ => return Err("file must start with a `---` line".into()),
    }
    let mut consumed = raw.split_inclusive('\n').next().map_or(0, str::len);
    let mut fields = Vec::new();
    for line in lines {
        consumed += line.len();
        if is_delimiter(line) {
            return Ok((fields, &raw[consumed..]));
        }
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once(':') else {
            return Err(format!("expected `key: value`, got `{trimmed}`"));
        };
        fields.push((key.trim().to_owned(), value.trim().to_owned()));
    }
    Err("missing closing `---` line".into())
}

#[derive(Debug)]
struct FrontMatter {
    id: String,
    title: String,
    week: u8,
    kind: ExerciseKind,
    mode: CheckMode,
    char_limit: Option<NonZeroUsize>,
    weight_group: Option<String>,
    verified_min: Option<u64>,
    normalize_eol: bool,
    timeout: Option<Duration>,
    oracle_target: Option<String>,
    oracle_directions: OracleDirections,
    notes: String,
}

fn squash(value: &str) -> String {
    value.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase()
}

impl FrontMatter {
    fn from_fields(fields: Vec<(String, String)>) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for (k, v) in fields {
            if map.insert(k.clone(), v).is_some() {
                return Err(format!("key `{k}` given twice"));
            }
        }
        let mut take = |k: &str| map.remove(k);

        let id = take("id").ok_or("missing `id`")?;
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(format!("id `{id}` must be a non-empty slug"));
        }
        let title = take("title").ok_or("missing `title`")?;
        let week: u8 = take("week")
            .ok_or("missing `week`")?
            .parse()
            .map_err(|_| "week must be an integer".to_owned())?;
        if !(1..=12).contains(&week) {
            return Err(format!("week {week} outside 1..12"));
        }
        let kind = match squash(&take("kind").ok_or("missing `kind`")?).as_str() {
            "mastery" => ExerciseKind::Mastery,
            "assignmentpart" | "assignment" => ExerciseKind::AssignmentPart,
            other => return Err(format!("unknown kind `{other}`")),
        };
        let mode = match squash(&take("mode").ok_or("missing `mode`")?).as_str() {
            "verifyonly" => CheckMode::VerifyOnly,
            "verifyandrun" => CheckMode::VerifyAndRun,
            "oraclespec" => CheckMode::OracleSpec,
            other => return Err(format!("unknown mode `{other}`")),
        };
        let char_limit = take("char_limit")
            .map(|v| v.parse::<NonZeroUsize>().map_err(|_| "char_limit must be a positive integer".to_owned()))
            .transpose()?;
        let weight_group = take("weight_group");
        let verified_min = take("verified_min")
            .map(|v| v.parse::<u64>().map_err(|_| "verified_min must be a non-negative integer".to_owned()))
            .transpose()?;
        let normalize_eol = match take("normalize_eol").as_deref() {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => return Err(format!("normalize_eol must be true or false, got `{other}`")),
        };
        let timeout = take("timeout_secs")
            .map(|v| match v.parse::<u64>() {
                Ok(s) if s > 0 => Ok(Duration::from_secs(s)),
                _ => Err("timeout_secs must be a positive integer".to_owned()),
            })
            .transpose()?;
        let oracle_target = take("oracle_target");
        let oracle_directions = match take("oracle_check").map(|v| squash(&v)).as_deref() {
            None | Some("both") => OracleDirections::Both,
            Some("consistency") => OracleDirections::Consistency,
            Some("capture") => OracleDirections::Capture,
            Some(other) => return Err(format!("unknown oracle_check `{other}`")),
        };
        let notes = take("notes").unwrap_or_default();

        if let Some(k) = map.keys().next() {
            return Err(format!("unknown key `{k}`"));
        }
        Ok(FrontMatter {
            id,
            title,
            week,
            kind,
            mode,
            char_limit,
            weight_group,
            verified_min,
            normalize_eol,
            timeout,
            oracle_target,
            oracle_directions,
            notes,
        })
    }
}
