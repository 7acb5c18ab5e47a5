//! Runs a real verifier binary in a scratch directory, in its own process
//! group, so that a timeout can kill the whole tree.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::{
    parse_verifier_output, Backend, BackendConfig, ExitStatus, RunError, RunReport, ToolErrorKind,
    VerificationReport,
};

const POLL: Duration = Duration::from_millis(10);
/// Output beyond this many bytes per stream is discarded.
const OUTPUT_CAP: usize = 16 << 20;
const SOURCE_NAME: &str = "program.dfy";

#[derive(Debug, Clone)]
pub struct ExternalBackend {
    cfg: BackendConfig,
}

struct Finished {
    status: ExitStatus,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
    duration: Duration,
    timed_out: bool,
}

enum SpawnFailure {
    Missing,
    Io(String),
}

impl ExternalBackend {
    pub fn new(cfg: BackendConfig) -> Self {
        ExternalBackend { cfg }
    }

    fn execute(&self, args: &[String], source: &str, timeout: Duration) -> Result<Finished, SpawnFailure> {
        let io = |e: std::io::Error| SpawnFailure::Io(e.to_string());
        let scratch = match &self.cfg.work_root {
            Some(root) => tempfile::Builder::new().prefix("verigrade-").tempdir_in(root),
            None => tempfile::Builder::new().prefix("verigrade-").tempdir(),
        }
        .map_err(io)?;
        let file = scratch.path().join(SOURCE_NAME);
        std::fs::write(&file, source).map_err(io)?;

        let mut cmd = Command::new(&self.cfg.verifier_program);
        cmd.args(args.iter().map(|a| a.replace("{file}", &file.to_string_lossy())))
            .current_dir(scratch.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0);
        if let Some(limit) = self.cfg.max_memory {
            // SAFETY: setrlimit is async-signal-safe and touches no parent state.
            unsafe {
                cmd.pre_exec(move || {
                    let lim = libc::rlimit { rlim_cur: limit as libc::rlim_t, rlim_max: limit as libc::rlim_t };
                    if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                        return Err(std::io::Error::last_os_error());
                    }
                    Ok(())
                });
            }
        }

        let start = Instant::now();
        let mut child = cmd.spawn().map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => SpawnFailure::Missing,
            _ => SpawnFailure::Io(e.to_string()),
        })?;
        let out_reader = spawn_reader(child.stdout.take());
        let err_reader = spawn_reader(child.stderr.take());
        let (status, timed_out) = wait_with_deadline(&mut child, start + timeout);
        // Kill stragglers that inherited the pipes, then drain.
        kill_group(&child);
        let stdout = out_reader.join().unwrap_or_default();
        let stderr = err_reader.join().unwrap_or_default();
        let duration = start.elapsed();
        drop(scratch);
        Ok(Finished { status, stdout, stderr, duration, timed_out })
    }
}

fn spawn_reader(stream: Option<impl Read + Send + 'static>) -> JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut out = Vec::new();
        let Some(mut stream) = stream else { return out };
        let mut buf = [0u8; 8192];
        loop {
            match stream.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = OUTPUT_CAP.saturating_sub(out.len());
                    out.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        out
    })
}

fn wait_with_deadline(child: &mut Child, deadline: Instant) -> (ExitStatus, bool) {
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return (status.code().map_or(ExitStatus::Killed, ExitStatus::Code), false),
            Ok(None) if Instant::now() >= deadline => {
                kill_group(child);
                let _ = child.wait();
                return (ExitStatus::Killed, true);
            }
            Ok(None) => thread::sleep(POLL),
            Err(_) => {
                kill_group(child);
                let _ = child.wait();
                return (ExitStatus::Killed, false);
            }
        }
    }
}

fn kill_group(child: &Child) {
    // The child leads its own group (pgid == pid), so this reaches descendants too.
    if let Ok(pid) = i32::try_from(child.id()) {
        // SAFETY: plain syscall; a stale group id yields ESRCH, which is ignored.
        unsafe {
            libc::killpg(pid, libc::SIGKILL);
        }
    }
}

/// `dafny run` prints a verifier status line before the program's own output.
fn strip_verifier_banner(stdout: &[u8]) -> &[u8] {
    let rest = stdout.strip_prefix(b"\n").unwrap_or(stdout);
    if rest.starts_with(b"Dafny program verifier") {
        match rest.iter().position(|&b| b == b'\n') {
            Some(nl) => &rest[nl + 1..],
            None => &[],
        }
    } else {
        stdout
    }
}

fn tool_error(failure: SpawnFailure) -> ToolErrorKind {
    match failure {
        SpawnFailure::Missing => ToolErrorKind::BinaryMissing,
        SpawnFailure::Io(detail) => ToolErrorKind::Io { detail },
    }
}

fn combined(f: &Finished) -> Vec<u8> {
    let mut all = f.stdout.clone();
    all.push(b'\n');
    all.extend_from_slice(&f.stderr);
    all
}

impl Backend for ExternalBackend {
    fn verify(&self, source: &str, timeout: Duration) -> VerificationReport {
        let start = Instant::now();
        let f = match self.execute(&self.cfg.verify_args, source, timeout) {
            Ok(f) => f,
            Err(e) => return VerificationReport::tool_error(tool_error(e), start.elapsed()),
        };
        if f.timed_out {
            return VerificationReport::timeout(f.duration);
        }
        match parse_verifier_output(&combined(&f)) {
            Ok(p) if p.timeouts > 0 && p.errors == p.timeouts => VerificationReport::timeout(f.duration),
            Ok(p) => VerificationReport::from_counts(p.verified, p.errors, p.diagnostics, f.duration),
            Err(_) => {
                let kind = match f.status {
                    ExitStatus::Killed => ToolErrorKind::Crashed { detail: "terminated by signal".into() },
                    ExitStatus::Code(_) => ToolErrorKind::OutputUnrecognized,
                };
                VerificationReport::tool_error(kind, f.duration)
            }
        }
    }

    fn run(&self, source: &str, timeout: Duration) -> Result<RunReport, RunError> {
        let f = self.execute(&self.cfg.run_args, source, timeout).map_err(|e| RunError::ToolError(tool_error(e)))?;
        if !f.timed_out && f.status != ExitStatus::Code(0) {
            if let Ok(p) = parse_verifier_output(&combined(&f)) {
                if p.errors > 0 {
                    return Err(RunError::CompileFailed { diagnostics: p.diagnostics });
                }
            }
        }
        Ok(RunReport {
            exit_status: f.status,
            stdout: strip_verifier_banner(&f.stdout).to_vec(),
            stderr: f.stderr,
            duration: f.duration,
            timed_out: f.timed_out,
        })
    }

    fn default_timeout(&self) -> Duration {
        self.cfg.timeout
    }
}

/// True when `program` can be found (absolute path or on `PATH`).
pub fn program_available(program: &Path) -> bool {
    if program.components().count() > 1 {
        return program.is_file();
    }
    std::env::var_os("PATH")
        .map(|paths| std::env::split_paths(&paths).any(|dir| dir.join(program).is_file()))
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banner_stripping() {
        assert_eq!(strip_verifier_banner(b"\nDafny program verifier did not attempt verification\nhi\n"), b"hi\n");
        assert_eq!(strip_verifier_banner(b"hi\n"), b"hi\n");
        assert_eq!(strip_verifier_banner(b""), b"");
    }

    #[test]
    fn missing_binary_is_tool_error() {
        let cfg = BackendConfig { verifier_program: "/nonexistent/verifier-xyz".into(), ..Default::default() };
        let r = ExternalBackend::new(cfg).verify("method m() {}", Duration::from_secs(1));
        assert_eq!(r.tool_error, Some(ToolErrorKind::BinaryMissing));
    }

    #[test]
    fn availability_lookup() {
        assert!(program_available(Path::new("sh")));
        assert!(!program_available(Path::new("/nonexistent/verifier-xyz")));
    }
}
