//! Shared helpers: a temporary deployment (bank copy, config, log) and a small HTTP client.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use verigrade_core::backend::Backend;
use verigrade_core::bank::load_bank;
use verigrade_gateway::config::{ConfigFile, ServiceConfig};
use verigrade_gateway::server::{router, AppState};

pub const STUDENTS: &[(&str, &str)] = &[("t-alice", "alice"), ("t-bob", "bob"), ("t-carol", "carol")];
pub const INSTRUCTOR_TOKEN: &str = "t-prof";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// A deployment directory holding a copy of the fixture bank and a config file.
pub struct Deployment {
    pub dir: tempfile::TempDir,
}

impl Deployment {
    pub fn new(current_week: u8, extra: &str) -> Self {
        Self::with_students(current_week, extra, STUDENTS)
    }

    pub fn with_students(current_week: u8, extra: &str, students: &[(&str, &str)]) -> Self {
        let dir = tempfile::tempdir().unwrap();
        copy_dir(&fixtures().join("bank"), &dir.path().join("bank"));
        let mut config = format!(
            "port = 0\nbank_dir = \"bank\"\nlog_path = \"state/progress.jsonl\"\ncurrent_week = {current_week}\nbackend = \"mock\"\ntimeout_secs = 10\n{extra}\n"
        );
        for (token, id) in students {
            config.push_str(&format!("\n[[users]]\ntoken = \"{token}\"\nid = \"{id}\"\nrole = \"student\"\n"));
        }
        config.push_str(&format!("\n[[users]]\ntoken = \"{INSTRUCTOR_TOKEN}\"\nid = \"prof\"\nrole = \"instructor\"\n"));
        std::fs::write(dir.path().join("verigrade.toml"), config).unwrap();
        Deployment { dir }
    }

    pub fn config_path(&self) -> PathBuf {
        self.dir.path().join("verigrade.toml")
    }

    pub fn bank_dir(&self) -> PathBuf {
        self.dir.path().join("bank")
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir.path().join("state/progress.jsonl")
    }

    pub fn service_config(&self) -> ServiceConfig {
        ServiceConfig::from_file(ConfigFile::load(&self.config_path()).unwrap()).unwrap()
    }

    /// Start the service in-process with the configured backend.
    pub fn start(&self) -> Server {
        let state = AppState::open(self.service_config()).unwrap();
        Server::start(state)
    }

    /// Start the service in-process with a caller-supplied backend.
    pub fn start_with(&self, backend: Arc<dyn Backend>) -> Server {
        let config = self.service_config();
        let bank = load_bank(&config.bank_dir).unwrap();
        Server::start(AppState::with_parts(config, bank, backend).unwrap())
    }

    /// Every line of a hidden asset that does not also appear in some public template.
    pub fn secrets(&self) -> Vec<String> {
        secret_lines(&self.bank_dir())
    }
}

fn files(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files(&path, out);
        } else {
            out.push(path);
        }
    }
}

pub fn secret_lines(bank: &Path) -> Vec<String> {
    let mut all = Vec::new();
    files(bank, &mut all);
    let public: String = all
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "exercise"))
        .map(|p| std::fs::read_to_string(p).unwrap())
        .collect();
    let mut secrets = Vec::new();
    for path in all.iter().filter(|p| {
        let name = p.to_string_lossy();
        name.ends_with(".oracle.dfy") || name.ends_with(".out")
    }) {
        let text = std::fs::read_to_string(path).unwrap();
        for line in text.lines().map(str::trim).filter(|l| l.len() >= 6) {
            if !public.contains(line) {
                secrets.push(line.to_owned());
            }
        }
    }
    secrets.sort();
    secrets.dedup();
    assert!(!secrets.is_empty());
    secrets
}

/// The service running on a background runtime; stops when dropped.
pub struct Server {
    pub base: String,
    pub state: Arc<AppState>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Server {
    fn start(state: AppState) -> Self {
        let state = Arc::new(state);
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (shutdown, stop) = tokio::sync::oneshot::channel::<()>();
        let app = router(state.clone());
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = stop.await;
                    })
                    .await
                    .unwrap();
            });
        });
        let addr = addr_rx.recv_timeout(Duration::from_secs(10)).unwrap();
        Server { base: format!("http://{addr}"), state, shutdown: Some(shutdown), thread: Some(thread) }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into()
}

fn finish(result: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, String) {
    let mut response = result.unwrap();
    let status = response.status().as_u16();
    let body = response.body_mut().read_to_string().unwrap_or_default();
    (status, body)
}

pub fn get(base: &str, path: &str, token: Option<&str>) -> (u16, String) {
    let mut req = agent().get(format!("{base}{path}"));
    if let Some(t) = token {
        req = req.header("Authorization", format!("Bearer {t}"));
    }
    finish(req.call())
}

pub fn post(base: &str, path: &str, token: Option<&str>, body: &str) -> (u16, String) {
    let mut req = agent().post(format!("{base}{path}")).content_type("application/json");
    if let Some(t) = token {
        req = req.header("Authorization", format!("Bearer {t}"));
    }
    finish(req.send(body))
}

pub fn answer_body(answer: &str) -> String {
    serde_json::json!({ "answer": answer }).to_string()
}

pub fn json(body: &str) -> serde_json::Value {
    serde_json::from_str(body).unwrap_or_else(|e| panic!("not JSON ({e}): {body}"))
}
