use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock, RwLockReadGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use super::{CompletionRecord, ProgressError, ProgressEvent, ProgressState};

/// Append-only JSONL file of [`ProgressEvent`]s. Each append is flushed to
/// disk before it returns.
#[derive(Debug)]
pub struct EventLog {
    file: File,
    path: PathBuf,
    last_ts: u64,
}

/// Parse a log's bytes. Returns the events and the length of the valid prefix;
/// an unterminated final line (a torn write) is not part of that prefix.
fn parse_log(bytes: &[u8]) -> Result<(Vec<ProgressEvent>, usize), ProgressError> {
    let mut events: Vec<ProgressEvent> = Vec::new();
    let mut good = 0;
    let mut line_no = 0;
    while good < bytes.len() {
        let Some(nl) = bytes[good..].iter().position(|&b| b == b'\n') else { break };
        line_no += 1;
        let line = &bytes[good..good + nl];
        good += nl + 1;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let event: ProgressEvent = serde_json::from_slice(line)
            .map_err(|e| ProgressError::CorruptLog { line: line_no, reason: e.to_string() })?;
        if let Some(prev) = events.last() {
            if event.ts < prev.ts {
                return Err(ProgressError::CorruptLog {
                    line: line_no,
                    reason: format!("timestamp {} after {}", event.ts, prev.ts),
                });
            }
        }
        events.push(event);
    }
    Ok((events, good))
}

/// Read every complete event in the log at `path` without modifying it.
pub fn read_events(path: &Path) -> Result<Vec<ProgressEvent>, ProgressError> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(parse_log(&bytes)?.0),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

impl EventLog {
    /// Open or create the log and return the events already in it. A torn
    /// final line is cut off so later appends start on a clean line.
    pub fn open(path: &Path) -> Result<(Self, Vec<ProgressEvent>), ProgressError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let (events, good) = parse_log(&bytes)?;
        if good < bytes.len() {
            file.set_len(good as u64)?;
            file.sync_all()?;
        }
        let last_ts = events.last().map_or(0, |e| e.ts);
        Ok((EventLog { file, path: path.to_owned(), last_ts }, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_ts(&self) -> u64 {
        self.last_ts
    }

    pub fn append(&mut self, event: &ProgressEvent) -> Result<(), ProgressError> {
        if event.ts < self.last_ts {
            return Err(ProgressError::NonMonotonicTimestamp { last: self.last_ts, got: event.ts });
        }
        let mut line = serde_json::to_vec(event).map_err(|e| ProgressError::Io(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.last_ts = event.ts;
        Ok(())
    }
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// The log plus the state derived from it. Writes are serialized through the
/// log; reads see a consistent snapshot.
#[derive(Debug)]
pub struct ProgressStore {
    log: Mutex<EventLog>,
    state: RwLock<ProgressState>,
    ignored_on_replay: usize,
}

impl ProgressStore {
    /// Open the log at `path` and rebuild state. Logged events for students or
    /// exercises no longer known are counted and left out of the state.
    pub fn open<S, E>(
        path: &Path,
        students: impl IntoIterator<Item = S>,
        exercises: impl IntoIterator<Item = E>,
    ) -> Result<Self, ProgressError>
    where
        S: Into<String>,
        E: Into<String>,
    {
        let (log, events) = EventLog::open(path)?;
        let mut state = ProgressState::new(students, exercises);
        let mut ignored = 0;
        for event in &events {
            if state.record_attempt(event).is_err() {
                ignored += 1;
            }
        }
        Ok(ProgressStore { log: Mutex::new(log), state: RwLock::new(state), ignored_on_replay: ignored })
    }

    pub fn ignored_on_replay(&self) -> usize {
        self.ignored_on_replay
    }

    /// Durably log an attempt stamped with the current time, then apply it.
    pub fn record(
        &self,
        student: &str,
        exercise: &str,
        completed: bool,
        verified: u64,
        errors: u64,
        hash: &str,
    ) -> Result<CompletionRecord, ProgressError> {
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        let event = ProgressEvent {
            student: student.to_owned(),
            exercise: exercise.to_owned(),
            ts: now_secs().max(log.last_ts()),
            completed,
            verified,
            errors,
            hash: hash.to_owned(),
        };
        self.append_locked(&mut log, &event)
    }

    /// Durably log a caller-built event, then apply it.
    pub fn append_event(&self, event: &ProgressEvent) -> Result<CompletionRecord, ProgressError> {
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        self.append_locked(&mut log, event)
    }

    fn append_locked(&self, log: &mut EventLog, event: &ProgressEvent) -> Result<CompletionRecord, ProgressError> {
        self.state().check(&event.student, &event.exercise)?;
        log.append(event)?;
        let mut state = self.state.write().unwrap_or_else(|e| e.into_inner());
        state.record_attempt(event)
    }

    pub fn state(&self) -> RwLockReadGuard<'_, ProgressState> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn snapshot(&self) -> ProgressState {
        self.state().clone()
    }
}
