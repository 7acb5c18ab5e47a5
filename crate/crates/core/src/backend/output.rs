use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::{Diagnostic, Position};

/// The verifier's closing summary, e.g.
/// `Dafny program verifier finished with 3 verified, 0 errors`, optionally
/// followed by `, N inconclusive`, `, N time outs`, `, N out of resource`.
static SUMMARY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^Dafny program verifier finished with (\d+) verified, (\d+) errors?(?:, (\d+) inconclusive)?(?:, (\d+) time outs?)?(?:, (\d+) out of resource)?(?:, (\d+) out of memory)?",
    )
    .unwrap()
});

/// Resolution, type or parse failures end with this instead of a summary.
static FRONT_END_ERRORS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d+) (?:resolution/type|parse) errors? detected in ").unwrap());

/// `file(line,col): message`
static POSITIONED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^.*?\((\d+),(\d+)\): (.+)$").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedOutput {
    pub verified: u64,
    /// Errors, counting inconclusive, timed-out and out-of-resource goals as failures.
    pub errors: u64,
    pub timeouts: u64,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("verifier output has no summary line")]
pub struct ToolOutputUnrecognized;

fn num(m: Option<regex::Match<'_>>) -> u64 {
    m.and_then(|m| m.as_str().parse().ok()).unwrap_or(0)
}

/// Extract counts and diagnostics from raw verifier output. When several
/// summary lines appear, the last wins. Never panics.
pub fn parse_verifier_output(raw: &[u8]) -> Result<ParsedOutput, ToolOutputUnrecognized> {
    let text = String::from_utf8_lossy(raw);
    let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();

    let mut found = None;
    for (i, line) in lines.iter().enumerate().rev() {
        let line = line.trim();
        if let Some(c) = SUMMARY.captures(line) {
            let (inconclusive, timeouts, oor, oom) = (num(c.get(3)), num(c.get(4)), num(c.get(5)), num(c.get(6)));
            found = Some((i, num(c.get(1)), num(c.get(2)) + inconclusive + timeouts + oor + oom, timeouts));
            break;
        }
        if let Some(c) = FRONT_END_ERRORS.captures(line) {
            found = Some((i, 0, num(c.get(1)).max(1), 0));
            break;
        }
    }
    let (at, verified, errors, timeouts) = found.ok_or(ToolOutputUnrecognized)?;

    let diagnostics = lines[..at].iter().filter_map(|l| diagnostic(l.trim())).collect();
    Ok(ParsedOutput { verified, errors, timeouts, diagnostics })
}

fn diagnostic(line: &str) -> Option<Diagnostic> {
    if let Some(c) = POSITIONED.captures(line) {
        let position = match (c[1].parse(), c[2].parse()) {
            (Ok(line), Ok(column)) => Some(Position { line, column }),
            _ => None,
        };
        return Some(Diagnostic { position, message: c[3].to_owned() });
    }
    let lower = line.to_ascii_lowercase();
    if lower.starts_with("error") || lower.starts_with("warning") {
        return Some(Diagnostic { position: None, message: line.to_owned() });
    }
    None
}
