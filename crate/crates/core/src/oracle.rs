//! Checking a student's specification against a hidden reference.
//!
//! Two harnesses are generated and handed to the verifier:
//!
//! - *consistency*: the reference implementation, with its own pre- and
//!   postconditions swapped for the student's. If it verifies, the student's
//!   specification admits the reference behaviour.
//! - *capture*: a body-less routine carrying the student's specification,
//!   called from a method that asserts the reference postconditions under the
//!   reference preconditions. If it verifies, the student's specification is
//!   at least as strong as the reference.
//!
//! Errors and feedback produced here never contain reference text.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::backend::{mock_directive_lines, Backend, VerificationReport};
use crate::syntax::{
    emit, emit_decl, extract_spec, normalize_ws, parse_unit, tokenize, ClauseKind, Decl, DeclKind,
    ExprSpan, Param, ParseError, ProgramUnit, Returns, SpecClause, SpecClauses, TokenKind,
};

pub const CONSISTENCY_HEADER: &str = "// verigrade: consistency harness\n";
pub const CAPTURE_HEADER: &str = "// verigrade: capture harness\n";
/// Name given to the student's routine inside the capture harness.
pub const STUDENT_ROUTINE: &str = "Stu__";
pub const CAPTURE_METHOD: &str = "Capture__";

/// Which harnesses an exercise requires to pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum OracleDirections {
    #[default]
    Both,
    Consistency,
    Capture,
}

/// Parameter and result shape of a routine, compared modulo whitespace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub kind: DeclKind,
    pub type_params: Option<String>,
    pub params: Vec<Param>,
    pub returns: Returns,
}

impl Signature {
    pub fn of(decl: &Decl) -> Option<Self> {
        let r = decl.routine()?;
        Some(Signature {
            kind: decl.kind,
            type_params: r.type_params.as_deref().map(normalize_ws),
            params: r.params.iter().map(normalized_param).collect(),
            returns: match &r.returns {
                Returns::Nothing => Returns::Nothing,
                Returns::Named(ps) => Returns::Named(ps.iter().map(normalized_param).collect()),
                Returns::Type(t) => Returns::Type(normalize_ws(t)),
            },
        })
    }
}

fn normalized_param(p: &Param) -> Param {
    Param { name: p.name.clone(), ty: normalize_ws(&p.ty), ghost: p.ghost }
}

/// Problems with an author-supplied reference file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleAssetError {
    #[error("reference does not parse: {0}")]
    Parse(ParseError),
    #[error("reference declares no method or function")]
    NoRoutine,
    #[error("reference has no routine named `{0}`")]
    TargetNotFound(String),
    #[error("reference routine `{0}` has no body")]
    NoBody(String),
}

/// Problems with a student submission; safe to show to the student.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("could not parse submission (line {line}, column {column})")]
    Parse { line: usize, column: usize },
    #[error("declaration `{name}` not found")]
    MissingTarget { name: String },
    #[error("signature must not change")]
    SignatureMismatch,
    #[error("unsupported construct: {what}")]
    UnsupportedConstruct { what: String },
}

/// A hidden reference: one routine with specification and implementation,
/// plus any supporting declarations in the same file.
#[derive(Clone, PartialEq, Eq)]
pub struct OracleAsset {
    pub target_name: String,
    pub oracle_spec: SpecClauses,
    pub oracle_impl: Decl,
    pub signature: Signature,
    unit: ProgramUnit,
    source: String,
}

impl fmt::Debug for OracleAsset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Keep reference text out of logs.
        f.debug_struct("OracleAsset").field("target_name", &self.target_name).finish_non_exhaustive()
    }
}

impl OracleAsset {
    /// Parse a reference file. The target is `target` if given, else the first routine.
    pub fn from_source(source: &str, target: Option<&str>) -> Result<Self, OracleAssetError> {
        let unit = parse_unit(source).map_err(OracleAssetError::Parse)?;
        let decl = match target {
            Some(name) => unit
                .routines()
                .find(|(d, _)| d.name.as_deref() == Some(name))
                .map(|(d, _)| d)
                .ok_or_else(|| OracleAssetError::TargetNotFound(name.to_owned()))?,
            None => unit.routines().next().map(|(d, _)| d).ok_or(OracleAssetError::NoRoutine)?,
        };
        let name = decl.name.clone().unwrap_or_default();
        if decl.routine().and_then(|r| r.body.as_ref()).is_none() {
            return Err(OracleAssetError::NoBody(name));
        }
        Ok(OracleAsset {
            target_name: name,
            oracle_spec: extract_spec(decl),
            oracle_impl: decl.clone(),
            signature: Signature::of(decl).expect("routine"),
            unit,
            source: source.to_owned(),
        })
    }

    /// The complete reference file.
    pub fn source(&self) -> &str {
        &self.source
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleVerdict {
    pub consistent: bool,
    pub captures: bool,
    pub consistency_report: VerificationReport,
    pub capture_report: VerificationReport,
}

impl OracleVerdict {
    pub fn accepted(&self, directions: OracleDirections) -> bool {
        match directions {
            OracleDirections::Both => self.consistent && self.captures,
            OracleDirections::Consistency => self.consistent,
            OracleDirections::Capture => self.captures,
        }
    }
}

fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Find the student's version of the target routine and check its shape.
pub fn student_target(source: &str, asset: &OracleAsset) -> Result<Decl, OracleError> {
    let unit = parse_unit(source).map_err(|e| {
        let (line, column) = line_col(source, e.offset());
        OracleError::Parse { line, column }
    })?;
    let decl = unit
        .routines()
        .find(|(d, _)| d.name.as_deref() == Some(asset.target_name.as_str()))
        .map(|(d, _)| d.clone())
        .ok_or_else(|| OracleError::MissingTarget { name: asset.target_name.clone() })?;
    if Signature::of(&decl).as_ref() != Some(&asset.signature) {
        return Err(OracleError::SignatureMismatch);
    }
    Ok(decl)
}

fn frames_text(spec: &SpecClauses) -> Vec<(ClauseKind, String)> {
    let mut v: Vec<_> = spec.modifies_reads.iter().map(|f| (f.kind, normalize_ws(&f.expr.text))).collect();
    v.sort_by(|a, b| (a.0.keyword(), &a.1).cmp(&(b.0.keyword(), &b.1)));
    v
}

fn check_frames(student: &SpecClauses, asset: &OracleAsset) -> Result<(), OracleError> {
    if frames_text(student) != frames_text(&asset.oracle_spec) {
        return Err(OracleError::UnsupportedConstruct {
            what: "modifies and reads clauses must match the exercise exactly".into(),
        });
    }
    Ok(())
}

fn clause_indent(asset: &OracleAsset) -> String {
    asset
        .oracle_impl
        .routine()
        .and_then(|r| r.clauses.first())
        .map(|c| c.leading.clone())
        .filter(|l| l.contains('\n') && l.trim().is_empty())
        .unwrap_or_else(|| "\n  ".to_owned())
}

/// Reference implementation checked against the student's requires/ensures.
pub fn build_consistency_harness(student: &Decl, asset: &OracleAsset) -> Result<String, OracleError> {
    if Signature::of(student).as_ref() != Some(&asset.signature) {
        return Err(OracleError::SignatureMismatch);
    }
    let spec = extract_spec(student);
    check_frames(&spec, asset)?;
    let indent = clause_indent(asset);

    let mut unit = asset.unit.clone();
    let target = unit
        .decls
        .iter_mut()
        .find(|d| d.name.as_deref() == Some(asset.target_name.as_str()) && d.routine().is_some())
        .expect("target present in reference unit");
    let routine = target.routine_mut().expect("routine");
    let kept: Vec<SpecClause> = routine
        .clauses
        .iter()
        .filter(|c| matches!(c.kind, ClauseKind::Decreases | ClauseKind::Modifies | ClauseKind::Reads))
        .map(|c| SpecClause { leading: indent.clone(), ..c.clone() })
        .collect();
    let mut clauses = Vec::new();
    clauses.extend(spec.requires.iter().map(|e| SpecClause::synthesized(ClauseKind::Requires, e.clone(), &indent)));
    clauses.extend(spec.ensures.iter().map(|e| SpecClause::synthesized(ClauseKind::Ensures, e.clone(), &indent)));
    clauses.extend(kept);
    routine.clauses = clauses;
    ensure_body_on_new_line(routine);

    Ok(format!("{CONSISTENCY_HEADER}{}", emit(&unit)))
}

fn ensure_body_on_new_line(routine: &mut crate::syntax::Routine) {
    use crate::syntax::RoutineBody;
    let leading = match routine.body.as_mut() {
        Some(RoutineBody::Block(b)) => &mut b.leading,
        Some(RoutineBody::Expr(e)) => &mut e.leading,
        None => return,
    };
    if !routine.clauses.is_empty() && !leading.contains('\n') {
        *leading = "\n".to_owned();
    }
}

/// Replace whole-identifier occurrences of `from` by `to`.
fn rename(expr: &str, from: &str, to: &str) -> String {
    let Ok(stream) = tokenize(expr) else {
        return expr.to_owned();
    };
    let mut out = String::with_capacity(expr.len());
    let mut at = 0;
    for tok in &stream.tokens {
        if tok.kind == TokenKind::Ident && tok.text(expr) == from {
            out.push_str(&expr[at..tok.span.start]);
            out.push_str(to);
            at = tok.span.end;
        }
    }
    out.push_str(&expr[at..]);
    out
}

fn param_list(params: &[Param]) -> String {
    params
        .iter()
        .map(|p| format!("{}{}: {}", if p.ghost { "ghost " } else { "" }, p.name, p.ty))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Student specification on a body-less routine, plus a method asserting the
/// reference postconditions of calls to it.
pub fn build_capture_harness(student: &Decl, asset: &OracleAsset) -> Result<String, OracleError> {
    let sig = Signature::of(student).ok_or(OracleError::SignatureMismatch)?;
    if sig != asset.signature {
        return Err(OracleError::SignatureMismatch);
    }
    let spec = extract_spec(student);
    check_frames(&spec, asset)?;
    let target = asset.target_name.as_str();
    let ren = |e: &ExprSpan| rename(&e.text, target, STUDENT_ROUTINE);
    let tparams = sig.type_params.clone().unwrap_or_default();
    let params = param_list(&sig.params);
    let args = sig.params.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(", ");

    let mut out = String::from(CAPTURE_HEADER);
    for decl in &asset.unit.decls {
        if decl.name.as_deref() == Some(target) && decl.routine().is_some() {
            continue;
        }
        out.push_str(&decl.leading);
        emit_decl(decl, &mut out);
    }
    out.push_str("\n\n");

    let keyword = match sig.kind {
        DeclKind::Method => "method",
        DeclKind::Predicate => "predicate",
        _ => "function",
    };
    out.push_str(&format!("{keyword} {STUDENT_ROUTINE}{tparams}({params})"));
    match &sig.returns {
        Returns::Nothing => {}
        Returns::Named(rs) if sig.kind == DeclKind::Method => out.push_str(&format!(" returns ({})", param_list(rs))),
        Returns::Named(rs) => out.push_str(&format!(": ({})", param_list(rs))),
        Returns::Type(t) => out.push_str(&format!(": {t}")),
    }
    for e in &spec.requires {
        out.push_str(&format!("\n  requires {}", ren(e)));
    }
    for f in &spec.modifies_reads {
        out.push_str(&format!("\n  {} {}", f.kind.keyword(), f.expr.text));
    }
    for e in &spec.ensures {
        out.push_str(&format!("\n  ensures {}", ren(e)));
    }
    out.push_str("\n\n");

    out.push_str(&format!("method {CAPTURE_METHOD}{tparams}({params})"));
    for e in &asset.oracle_spec.requires {
        out.push_str(&format!("\n  requires {}", ren(e)));
    }
    for e in asset.oracle_spec.modifies() {
        out.push_str(&format!("\n  modifies {}", e.text));
    }
    out.push_str("\n{\n");
    let call = format!("{STUDENT_ROUTINE}({args})");
    match &sig.returns {
        Returns::Named(rs) if sig.kind == DeclKind::Method => {
            let names = rs.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(", ");
            out.push_str(&format!("  var {names} := {call};\n"));
        }
        Returns::Nothing if sig.kind == DeclKind::Method => out.push_str(&format!("  {call};\n")),
        Returns::Named(rs) if rs.len() == 1 => out.push_str(&format!("  var {} := {call};\n", rs[0].name)),
        _ => {}
    }
    for e in &asset.oracle_spec.ensures {
        out.push_str(&format!("  assert {};\n", ren(e)));
    }
    out.push_str("}\n");
    Ok(out)
}

fn with_directives(student_source: &str, harness: String) -> String {
    let mut out = String::new();
    for line in mock_directive_lines(student_source) {
        out.push_str(line.trim_start());
        out.push('\n');
    }
    out.push_str(&harness);
    out
}

/// Build both harnesses for `student_source` and verify them.
pub fn check_spec(
    student_source: &str,
    asset: &OracleAsset,
    backend: &dyn Backend,
    timeout: std::time::Duration,
) -> Result<OracleVerdict, OracleError> {
    let decl = student_target(student_source, asset)?;
    let consistency = with_directives(student_source, build_consistency_harness(&decl, asset)?);
    let capture = with_directives(student_source, build_capture_harness(&decl, asset)?);
    let consistency_report = backend.verify(&consistency, timeout);
    let capture_report = backend.verify(&capture, timeout);
    Ok(OracleVerdict {
        consistent: consistency_report.passed(),
        captures: capture_report.passed(),
        consistency_report,
        capture_report,
    })
}

/// Check the reference against itself; both directions must pass on a sound reference.
pub fn self_check(asset: &OracleAsset, backend: &dyn Backend, timeout: std::time::Duration) -> Result<OracleVerdict, OracleError> {
    check_spec(&asset.source, asset, backend, timeout)
}
