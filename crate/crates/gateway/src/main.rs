use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use verigrade_core::backend::{Backend, BackendKind};
use verigrade_core::progress::{GradeScheme, ManualScores};
use verigrade_core::testmode::TransformOptions;
use verigrade_gateway::admin;
use verigrade_gateway::config::{backend_config, BackendChoice, ConfigFile, ServiceConfig};
use verigrade_gateway::server::{serve, AppState};

/// Automated assessment of Dafny exercises.
#[derive(Parser)]
#[command(name = "verigrade", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        /// Service configuration (users, limits, backend).
        #[arg(long, default_value = "verigrade.toml")]
        config: PathBuf,
        /// Exercise bank directory (overrides `bank_dir`).
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Progress log (overrides `log_path`).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Port to listen on; 0 picks a free one (overrides `port`).
        #[arg(long)]
        port: Option<u16>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Exercise bank administration.
    Bank {
        #[command(subcommand)]
        command: BankCommand,
    },
    /// Judge a local answer file against an exercise and print the response.
    Check {
        /// The answer: the placeholder fill, or the whole file for assignments.
        file: PathBuf,
        #[arg(long)]
        exercise: String,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Rewrite static specifications into runtime checks.
    Testmode {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        no_asserts: bool,
        #[arg(long)]
        no_assumes: bool,
        #[arg(long)]
        no_requires: bool,
        #[arg(long)]
        no_ensures: bool,
        #[arg(long)]
        no_invariants: bool,
    },
    /// Grade administration.
    Grades {
        #[command(subcommand)]
        command: GradesCommand,
    },
}

#[derive(Subcommand)]
enum BankCommand {
    /// Load every exercise and report problems.
    Validate {
        dir: PathBuf,
        /// Also check every hidden reference against itself with the verifier.
        #[arg(long)]
        self_check: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Subcommand)]
enum GradesCommand {
    /// Write a CSV of weighted grades computed from the progress log.
    Export {
        /// Grade scheme (`[[component]]` tables).
        #[arg(long)]
        scheme: PathBuf,
        /// Instructor scores, `student_id,group,score` with scores in 0..1.
        #[arg(long)]
        manual: Option<PathBuf>,
        /// Where to write the CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Supplies the cohort, bank and log unless given separately.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct BackendArgs {
    /// Verifier backend (overrides `backend`).
    #[arg(long, value_enum)]
    backend: Option<BackendFlag>,
    /// Verifier executable (overrides `verifier_cmd`).
    #[arg(long)]
    verifier_cmd: Option<PathBuf>,
    /// Per-call verifier timeout (overrides `timeout_secs`).
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// Directory holding outputs referenced by mock directives.
    #[arg(long)]
    mock_stdout_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendFlag {
    External,
    Mock,
}

impl BackendArgs {
    fn apply(&self, file: &mut ConfigFile) {
        if let Some(b) = self.backend {
            file.backend = Some(match b {
                BackendFlag::External => BackendChoice::External,
                BackendFlag::Mock => BackendChoice::Mock,
            });
        }
        if let Some(cmd) = &self.verifier_cmd {
            file.verifier_cmd = Some(cmd.clone());
        }
        if let Some(t) = self.timeout_secs {
            file.timeout_secs = Some(t);
        }
        if let Some(d) = &self.mock_stdout_dir {
            file.mock_stdout_dir = Some(d.clone());
        }
    }
}

/// Failures that map to distinct exit codes.
enum Failure {
    /// The thing checked was wrong (exit 1).
    Rejected(anyhow::Error),
    /// The invocation was wrong (exit 2).
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Rejected(e)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn optional_config(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    match path {
        Some(p) => ConfigFile::load(p).map_err(usage),
        None => Ok(ConfigFile::default()),
    }
}

fn build_backend(file: &ConfigFile, bank: &Path) -> Result<Box<dyn Backend>, Failure> {
    let cfg = backend_config(file, bank).map_err(usage)?;
    if cfg.backend == BackendKind::External && !verigrade_core::backend::program_available(&cfg.verifier_program) {
        return Err(usage(anyhow!(
            "verifier `{}` not found; install it, pass --verifier-cmd, or use --backend mock",
            cfg.verifier_program.display()
        )));
    }
    Ok(cfg.build())
}

fn bank_dir(flag: Option<PathBuf>, file: &ConfigFile) -> Result<PathBuf, Failure> {
    flag.or_else(|| file.bank_dir.clone()).ok_or_else(|| usage(anyhow!("no bank directory: pass --bank or --config")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Serve { config, bank, log, port, backend } => {
            let mut file = ConfigFile::load(&config).map_err(usage)?;
            file.bank_dir = bank.or(file.bank_dir);
            file.log_path = log.or(file.log_path);
            file.port = port.or(file.port);
            backend.apply(&mut file);
            let cfg = ServiceConfig::from_file(file).map_err(usage)?;
            let state = Arc::new(AppState::open(cfg).context("cannot start")?);
            if state.store.ignored_on_replay() > 0 {
                eprintln!("note: {} logged attempts name unknown students or exercises", state.store.ignored_on_replay());
            }
            let runtime = tokio::runtime::Runtime::new().context("cannot start runtime")?;
            runtime
                .block_on(serve(state, |addr| {
                    println!("listening on http://{addr}");
                    let _ = std::io::stdout().flush();
                }))
                .context("service failed")?;
            Ok(())
        }
        Command::Bank { command: BankCommand::Validate { dir, self_check, config, backend } } => {
            let backend = if self_check {
                let mut file = optional_config(config.as_deref())?;
                backend.apply(&mut file);
                Some(build_backend(&file, &dir)?)
            } else {
                None
            };
            let report = admin::validate_bank(&dir, backend.as_deref());
            for problem in &report.problems {
                eprintln!("{problem}");
            }
            if report.ok() {
                println!("{} exercises OK", report.exercises);
                Ok(())
            } else {
                Err(Failure::Rejected(anyhow!("{} problem(s) found", report.problems.len())))
            }
        }
        Command::Check { file: answer_path, exercise, bank, config, backend } => {
            let mut file = optional_config(config.as_deref())?;
            backend.apply(&mut file);
            let dir = bank_dir(bank, &file)?;
            let answer = std::fs::read_to_string(&answer_path)
                .with_context(|| format!("cannot read {}", answer_path.display()))
                .map_err(usage)?;
            let bank = admin::open_bank(&dir).map_err(|e| usage(anyhow!(e)))?;
            let backend = build_backend(&file, &dir)?;
            let verdict = admin::check_answer(&bank, &exercise, &answer, backend.as_ref()).map_err(|e| usage(anyhow!(e)))?;
            println!("{}", serde_json::to_string_pretty(&verdict).context("cannot encode response")?);
            if verdict.completed {
                Ok(())
            } else {
                Err(Failure::Rejected(anyhow!("not completed: {}", verdict.feedback)))
            }
        }
        Command::Testmode { input, output, no_asserts, no_assumes, no_requires, no_ensures, no_invariants } => {
            let source =
                std::fs::read_to_string(&input).with_context(|| format!("cannot read {}", input.display())).map_err(usage)?;
            let opts = TransformOptions {
                asserts: !no_asserts,
                assumes: !no_assumes,
                requires: !no_requires,
                ensures: !no_ensures,
                invariants: !no_invariants,
            };
            let out = admin::test_mode(&source, &opts).map_err(|e| anyhow!("{}: {e}", input.display()))?;
            std::fs::write(&output, &out.text).with_context(|| format!("cannot write {}", output.display()))?;
            let r = out.report;
            eprintln!(
                "converted {} (asserts {}, assumes {}, requires {}, ensures {}, invariants {}); skipped {}",
                r.converted(),
                r.asserts,
                r.assumes,
                r.requires,
                r.ensures,
                r.invariants,
                out.skipped.len()
            );
            for s in &out.skipped {
                eprintln!("  skipped {} `{}` in {}: {}", s.kind.keyword(), s.expr, s.decl, s.reason);
            }
            Ok(())
        }
        Command::Grades { command: GradesCommand::Export { scheme, manual, out, config, bank, log } } => {
            let file = optional_config(config.as_deref())?;
            let dir = bank_dir(bank, &file)?;
            let log = log.or(file.log_path.clone()).ok_or_else(|| usage(anyhow!("no progress log: pass --log or --config")))?;
            let scheme_text =
                std::fs::read_to_string(&scheme).with_context(|| format!("cannot read {}", scheme.display())).map_err(usage)?;
            let scheme = GradeScheme::from_toml(&scheme_text).map_err(|e| Failure::Rejected(anyhow!(e)))?;
            let manual = match manual {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("cannot read {}", path.display()))
                        .map_err(usage)?;
                    ManualScores::from_csv(&text).map_err(|e| Failure::Rejected(anyhow!(e)))?
                }
                None => ManualScores::default(),
            };
            let students = if config.is_some() {
                let cfg = ServiceConfig::from_file(file).map_err(usage)?;
                Some(cfg.students())
            } else {
                None
            };
            let bank = admin::open_bank(&dir).map_err(|e| usage(anyhow!(e)))?;
            let state = admin::progress_from_log(&log, &bank, students).map_err(|e| Failure::Rejected(anyhow!(e)))?;
            let export = admin::grades(&bank, &state, &scheme, &manual).map_err(|e| Failure::Rejected(anyhow!(e)))?;
            for w in &export.warnings {
                eprintln!("warning: {w}");
            }
            match out {
                Some(path) => std::fs::write(&path, &export.csv).with_context(|| format!("cannot write {}", path.display()))?,
                None => print!("{}", export.csv),
            }
            Ok(())
        }
    }
}
