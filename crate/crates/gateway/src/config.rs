//! `verigrade.toml`: service settings and the token → user table.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;
use verigrade_core::backend::{BackendConfig, BackendKind};
use verigrade_core::progress::PickBand;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_ANSWER_BYTES: usize = 64 * 1024;
pub const DEFAULT_WORKERS: usize = 4;
/// Slack on top of the verifier timeout for a whole attempt request.
pub const REQUEST_SLACK: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Student,
    Instructor,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEntry {
    pub token: String,
    pub id: String,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    External,
    Mock,
}

/// The file as written. Relative paths are resolved against the file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub port: Option<u16>,
    pub bank_dir: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
    pub current_week: Option<u8>,
    pub verifier_cmd: Option<PathBuf>,
    pub timeout_secs: Option<u64>,
    pub workers: Option<usize>,
    pub band_low: Option<f64>,
    pub band_high: Option<f64>,
    pub mastered: Option<f64>,
    pub backend: Option<BackendChoice>,
    pub mock_stdout_dir: Option<PathBuf>,
    pub max_answer_bytes: Option<usize>,
    pub max_memory_mb: Option<u64>,
    #[serde(default)]
    pub users: Vec<UserEntry>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        let mut file = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut file.bank_dir, &mut file.log_path, &mut file.mock_stdout_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(file)
    }
}

#[derive(Debug, Clone)]
pub struct User {
    pub id: String,
    pub role: Role,
}

/// Everything the service needs, validated.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub port: u16,
    pub bank_dir: PathBuf,
    pub log_path: PathBuf,
    pub current_week: u8,
    pub backend: BackendConfig,
    pub workers: usize,
    pub band: PickBand,
    pub max_answer_bytes: usize,
    pub users: HashMap<String, User>,
}

impl ServiceConfig {
    pub fn from_file(file: ConfigFile) -> Result<Self, ConfigError> {
        let invalid = |m: &str| ConfigError::Invalid(m.to_owned());
        let bank_dir = file.bank_dir.clone().ok_or_else(|| invalid("bank_dir is required"))?;
        let log_path = file.log_path.clone().ok_or_else(|| invalid("log_path is required"))?;
        let current_week = file.current_week.unwrap_or(1);
        if !(1..=12).contains(&current_week) {
            return Err(invalid("current_week must be within 1..12"));
        }
        let workers = file.workers.unwrap_or(DEFAULT_WORKERS);
        if workers == 0 {
            return Err(invalid("workers must be positive"));
        }
        let max_answer_bytes = file.max_answer_bytes.unwrap_or(DEFAULT_MAX_ANSWER_BYTES);
        if max_answer_bytes == 0 {
            return Err(invalid("max_answer_bytes must be positive"));
        }
        let defaults = PickBand::default();
        let band = PickBand::new(
            file.band_low.unwrap_or(defaults.low()),
            file.band_high.unwrap_or(defaults.high()),
            file.mastered.unwrap_or(defaults.mastered()),
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let backend = backend_config(&file, &bank_dir)?;

        let mut users = HashMap::new();
        let mut ids = std::collections::HashSet::new();
        for u in file.users {
            if u.token.is_empty() || u.id.is_empty() {
                return Err(invalid("user token and id must not be empty"));
            }
            if !ids.insert(u.id.clone()) {
                return Err(ConfigError::Invalid(format!("user id `{}` listed twice", u.id)));
            }
            if users.insert(u.token, User { id: u.id, role: u.role }).is_some() {
                return Err(invalid("user tokens must be unique"));
            }
        }
        Ok(ServiceConfig {
            port: file.port.unwrap_or(DEFAULT_PORT),
            bank_dir,
            log_path,
            current_week,
            backend,
            workers,
            band,
            max_answer_bytes,
            users,
        })
    }

    /// Student ids, sorted.
    pub fn students(&self) -> Vec<String> {
        let mut v: Vec<String> =
            self.users.values().filter(|u| u.role == Role::Student).map(|u| u.id.clone()).collect();
        v.sort();
        v
    }

    /// Upper bound on one attempt request, queueing included.
    pub fn request_deadline(&self) -> Duration {
        self.backend.timeout + REQUEST_SLACK
    }
}

/// Backend settings from the file, then `VERIGRADE_VERIFIER_CMD` / `VERIGRADE_TIMEOUT_SECS`.
/// The mock backend reads referenced outputs from the bank directory unless told otherwise.
pub fn backend_config(file: &ConfigFile, bank_dir: &Path) -> Result<BackendConfig, ConfigError> {
    let mut cfg = BackendConfig::default();
    if file.backend == Some(BackendChoice::Mock) {
        cfg.backend = BackendKind::Mock;
        cfg.mock_stdout_dir = Some(file.mock_stdout_dir.clone().unwrap_or_else(|| bank_dir.to_owned()));
    }
    if let Some(cmd) = &file.verifier_cmd {
        cfg.verifier_program = cmd.clone();
    }
    if let Some(secs) = file.timeout_secs {
        cfg.timeout = Duration::from_secs(secs);
    }
    cfg.max_memory = file.max_memory_mb.map(|mb| mb * 1024 * 1024);
    let cfg = cfg.with_env().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
port = 0
bank_dir = "bank"
log_path = "state/progress.jsonl"
current_week = 3
timeout_secs = 12
backend = "mock"

[[users]]
token = "t-alice"
id = "alice"
role = "student"

[[users]]
token = "t-prof"
id = "prof"
role = "instructor"
"#;

    #[test]
    fn sample_parses() {
        let file = ConfigFile::parse(SAMPLE).unwrap();
        let cfg = ServiceConfig::from_file(file).unwrap();
        assert_eq!(cfg.current_week, 3);
        assert_eq!(cfg.backend.backend, BackendKind::Mock);
        assert_eq!(cfg.backend.mock_stdout_dir.as_deref(), Some(Path::new("bank")));
        assert_eq!(cfg.students(), vec!["alice".to_owned()]);
        assert_eq!(cfg.max_answer_bytes, DEFAULT_MAX_ANSWER_BYTES);
        assert_eq!(cfg.users["t-prof"].role, Role::Instructor);
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verigrade.toml");
        std::fs::write(&path, SAMPLE).unwrap();
        let file = ConfigFile::load(&path).unwrap();
        assert_eq!(file.bank_dir.unwrap(), dir.path().join("bank"));
        assert_eq!(file.log_path.unwrap(), dir.path().join("state/progress.jsonl"));
    }

    #[test]
    fn bad_values_are_rejected() {
        for extra in ["current_week = 13", "workers = 0", "band_low = 0.5\nband_high = 0.4", "colour = \"blue\""] {
            let text = format!("bank_dir = \"b\"\nlog_path = \"l\"\n{extra}\n");
            let parsed = ConfigFile::parse(&text).and_then(ServiceConfig::from_file);
            assert!(parsed.is_err(), "{extra}");
        }
        let dup = format!("{SAMPLE}\n[[users]]\ntoken = \"t-alice\"\nid = \"alice2\"\nrole = \"student\"\n");
        assert!(ConfigFile::parse(&dup).and_then(ServiceConfig::from_file).is_err());
    }
}
