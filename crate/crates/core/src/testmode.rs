//! Rewrite a verified program into one that checks its specification at
//! run time: assertions, assumptions, pre- and postconditions and loop
//! invariants become `expect` statements.
//!
//! Everything not rewritten is emitted byte for byte. Clauses that cannot be
//! turned into run-time checks stay where they are and are recorded in
//! [`ProgramUnit::test_mode_skips`].

use std::collections::BTreeSet;

use serde::Serialize;

use crate::syntax::{
    tokenize, Block, ClauseKind, Decl, ElseTarget, ExprSpan, ProgramUnit, Returns, Routine, RoutineBody,
    SkipReason, SkippedClause, SpecClause, Stmt, StmtKind, TokenKind,
};

/// Suffix of the variables holding parameter values on entry, used for `old(p)`.
pub const OLD_SUFFIX: &str = "__old";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransformOptions {
    pub asserts: bool,
    pub assumes: bool,
    pub requires: bool,
    pub ensures: bool,
    pub invariants: bool,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions { asserts: true, assumes: true, requires: true, ensures: true, invariants: true }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TransformReport {
    pub asserts: usize,
    pub assumes: usize,
    pub requires: usize,
    pub ensures: usize,
    pub invariants: usize,
    pub skipped: usize,
}

impl TransformReport {
    pub fn converted(&self) -> usize {
        self.asserts + self.assumes + self.requires + self.ensures + self.invariants
    }
}

/// Produce the test-mode version of `unit`. Idempotent.
pub fn to_test_mode(unit: &ProgramUnit, opts: &TransformOptions) -> ProgramUnit {
    let mut out = unit.clone();
    out.test_mode_skips.clear();
    for decl in &mut out.decls {
        let mut skips = Vec::new();
        transform_decl(decl, opts, &mut skips);
        out.test_mode_skips.extend(skips);
    }
    out
}

/// Count what a rewrite converted, by comparing the program before and after.
pub fn transform_report(before: &ProgramUnit, after: &ProgramUnit) -> TransformReport {
    let b = Counts::of(before);
    let a = Counts::of(after);
    TransformReport {
        asserts: b.asserts.saturating_sub(a.asserts),
        assumes: b.assumes.saturating_sub(a.assumes),
        requires: b.requires.saturating_sub(a.requires),
        ensures: b.ensures.saturating_sub(a.ensures),
        invariants: b.invariants.saturating_sub(a.invariants),
        skipped: after.test_mode_skips.len(),
    }
}

#[derive(Default)]
struct Counts {
    asserts: usize,
    assumes: usize,
    requires: usize,
    ensures: usize,
    invariants: usize,
}

impl Counts {
    fn of(unit: &ProgramUnit) -> Self {
        let mut c = Counts::default();
        for (_, r) in unit.routines() {
            for clause in &r.clauses {
                match clause.kind {
                    ClauseKind::Requires => c.requires += 1,
                    ClauseKind::Ensures => c.ensures += 1,
                    _ => {}
                }
            }
            if let Some(RoutineBody::Block(b)) = &r.body {
                c.block(b);
            }
        }
        c
    }

    fn block(&mut self, b: &Block) {
        for s in &b.stmts {
            match &s.kind {
                StmtKind::Assert { .. } => self.asserts += 1,
                StmtKind::Assume { .. } => self.assumes += 1,
                StmtKind::While(w) => {
                    self.invariants += w.clauses.iter().filter(|c| c.kind == ClauseKind::Invariant).count();
                }
                _ => {}
            }
            for child in s.blocks() {
                self.block(child);
            }
        }
    }
}

fn skip(decl: &str, clause: &SpecClause, reason: SkipReason) -> SkippedClause {
    SkippedClause {
        decl: decl.to_owned(),
        kind: clause.kind,
        expr: clause.expr.text.clone(),
        span: clause.span.clone(),
        reason,
    }
}

fn transform_decl(decl: &mut Decl, opts: &TransformOptions, skips: &mut Vec<SkippedClause>) {
    let name = decl.name.clone().unwrap_or_default();
    let function_like = decl.kind.is_function_like();
    let Some(routine) = decl.routine_mut() else { return };

    let body = match routine.body.as_mut() {
        Some(RoutineBody::Block(_)) if !function_like => true,
        _ => false,
    };
    if !body {
        for clause in &routine.clauses {
            let reason = match clause.kind {
                ClauseKind::Requires if opts.requires => {
                    if function_like { SkipReason::FunctionRequires } else { SkipReason::NoBody }
                }
                ClauseKind::Ensures if opts.ensures => {
                    if function_like { SkipReason::FunctionEnsures } else { SkipReason::NoBody }
                }
                _ => continue,
            };
            skips.push(skip(&name, clause, reason));
        }
        return;
    }
    transform_method(&name, routine, opts, skips);
}

fn transform_method(name: &str, routine: &mut Routine, opts: &TransformOptions, skips: &mut Vec<SkippedClause>) {
    let in_params: Vec<String> = routine.params.iter().map(|p| p.name.clone()).collect();
    let outs: Vec<String> = match &routine.returns {
        Returns::Named(ps) => ps.iter().map(|p| p.name.clone()).collect(),
        _ => Vec::new(),
    };

    let mut pre = Vec::new();
    let mut post = Vec::new();
    let mut snapshots = BTreeSet::new();
    let mut kept = Vec::new();
    let mut carried = String::new();
    for clause in std::mem::take(&mut routine.clauses) {
        let convert = match clause.kind {
            ClauseKind::Requires if opts.requires => {
                pre.push(clause.expr.clone());
                true
            }
            ClauseKind::Ensures if opts.ensures => match rewrite_old(&clause.expr.text, &in_params) {
                Some((text, used)) => {
                    snapshots.extend(used);
                    post.push(ExprSpan::synthesized(text));
                    true
                }
                None => {
                    skips.push(skip(name, &clause, SkipReason::UnsupportedOld));
                    false
                }
            },
            _ => false,
        };
        if convert {
            carry(&mut carried, &clause.leading);
        } else {
            let mut clause = clause;
            clause.leading = take_carried(&mut carried, clause.leading);
            kept.push(clause);
        }
    }
    routine.clauses = kept;

    let Some(RoutineBody::Block(block)) = routine.body.as_mut() else { return };
    block.leading = take_carried(&mut carried, std::mem::take(&mut block.leading));
    if routine.clauses.is_empty() && block.leading.contains('\n') && block.leading.trim().is_empty() {
        // The clauses are gone; keep the brace where a clause-free signature would have it.
        block.leading = " ".to_owned();
    }

    rewrite_block(block, opts, &post, &outs);
    if !post.is_empty() && !matches!(block.stmts.last().map(|s| &s.kind), Some(StmtKind::Return { .. })) {
        let lead = append_leading(block);
        for e in &post {
            block.stmts.push(Stmt::expect(e.clone(), lead.clone()));
        }
    }
    if !pre.is_empty() || !snapshots.is_empty() {
        let lead = insert_leading(block, 0);
        let mut head: Vec<Stmt> = pre.into_iter().map(|e| Stmt::expect(e, lead.clone())).collect();
        for p in &snapshots {
            head.push(synthetic(format!("var {p}{OLD_SUFFIX} := {p};"), lead.clone()));
        }
        block.stmts.splice(0..0, head);
    }
}

fn synthetic(text: String, leading: String) -> Stmt {
    Stmt { leading, span: None, kind: StmtKind::Assign { text } }
}

/// Remember trivia of a removed clause if it holds comments.
fn carry(carried: &mut String, leading: &str) {
    if leading.trim().is_empty() {
        return;
    }
    let trimmed = leading.trim_end_matches([' ', '\t']);
    carried.push_str(trimmed.strip_suffix('\n').unwrap_or(trimmed));
}

fn take_carried(carried: &mut String, leading: String) -> String {
    if carried.is_empty() {
        leading
    } else {
        let mut out = std::mem::take(carried);
        if !leading.starts_with('\n') && leading.trim().is_empty() {
            out.push('\n');
        }
        out.push_str(&leading);
        out
    }
}

/// Replace `old(p)` for bare in-parameters `p` by `p__old`. `None` when some
/// other `old(...)` form is present.
fn rewrite_old(expr: &str, params: &[String]) -> Option<(String, Vec<String>)> {
    let Ok(stream) = tokenize(expr) else { return Some((expr.to_owned(), Vec::new())) };
    let toks = &stream.tokens;
    let mut out = String::new();
    let mut used = Vec::new();
    let mut at = 0;
    let mut i = 0;
    while i < toks.len() {
        if toks[i].kind == TokenKind::Ident
            && toks[i].text(expr) == "old"
            && toks.get(i + 1).map(|t| t.kind) == Some(TokenKind::LParen)
        {
            let inner = toks.get(i + 2)?;
            let close = toks.get(i + 3)?;
            let name = inner.text(expr);
            if inner.kind != TokenKind::Ident || close.kind != TokenKind::RParen || !params.iter().any(|p| p == name) {
                return None;
            }
            out.push_str(&expr[at..toks[i].span.start]);
            out.push_str(name);
            out.push_str(OLD_SUFFIX);
            at = close.span.end;
            used.push(name.to_owned());
            i += 4;
            continue;
        }
        i += 1;
    }
    out.push_str(&expr[at..]);
    Some((out, used))
}

/// Leading trivia for a statement inserted before `stmts[index]`.
fn insert_leading(block: &Block, index: usize) -> String {
    match block.stmts.get(index) {
        Some(s) => line_leading(&s.leading),
        None => append_leading(block),
    }
}

/// Leading trivia for a statement appended at the end of `block`.
fn append_leading(block: &Block) -> String {
    if let Some(last) = block.stmts.last() {
        return line_leading(&last.leading);
    }
    match block.closing.rfind('\n') {
        Some(nl) => format!("\n{}  ", &block.closing[nl + 1..]),
        None => " ".to_owned(),
    }
}

/// A newline plus the anchor's indentation, or a single space for inline code.
fn line_leading(anchor: &str) -> String {
    match anchor.rfind('\n') {
        Some(nl) => format!("\n{}", &anchor[nl + 1..]),
        None => " ".to_owned(),
    }
}

fn rewrite_block(block: &mut Block, opts: &TransformOptions, post: &[ExprSpan], outs: &[String]) {
    let mut i = 0;
    while i < block.stmts.len() {
        let lead = line_leading(&block.stmts[i].leading);
        let stmt = &mut block.stmts[i];
        match &mut stmt.kind {
            StmtKind::Assert { expr, .. } if opts.asserts => {
                *stmt = Stmt { leading: stmt.leading.clone(), ..Stmt::expect(expr.clone(), "") };
            }
            StmtKind::Assume { expr, .. } if opts.assumes => {
                *stmt = Stmt { leading: stmt.leading.clone(), ..Stmt::expect(expr.clone(), "") };
            }
            StmtKind::Return { value, .. } if !post.is_empty() => {
                let mut replacement = Vec::new();
                let mut first_leading = Some(stmt.leading.clone());
                let mut next_lead = || first_leading.take().unwrap_or_else(|| lead.clone());
                if let Some(v) = value.take() {
                    replacement.push(synthetic(format!("{} := {};", outs.join(", "), v.text), next_lead()));
                }
                for e in post {
                    replacement.push(Stmt::expect(e.clone(), next_lead()));
                }
                let leading = next_lead();
                replacement.push(Stmt { leading, span: None, kind: StmtKind::Return { value: None, text: "return;".into() } });
                let n = replacement.len();
                block.stmts.splice(i..=i, replacement);
                i += n;
                continue;
            }
            StmtKind::If(s) => {
                rewrite_block(&mut s.then_block, opts, post, outs);
                let mut branch = s.else_branch.as_mut();
                while let Some(b) = branch {
                    match &mut b.target {
                        ElseTarget::Block(blk) => {
                            rewrite_block(blk, opts, post, outs);
                            branch = None;
                        }
                        ElseTarget::If(inner) => match &mut inner.kind {
                            StmtKind::If(s2) => {
                                rewrite_block(&mut s2.then_block, opts, post, outs);
                                branch = s2.else_branch.as_mut();
                            }
                            _ => branch = None,
                        },
                    }
                }
            }
            StmtKind::While(w) => {
                rewrite_block(&mut w.body, opts, post, outs);
                if opts.invariants {
                    let mut invariants = Vec::new();
                    let mut carried = String::new();
                    let mut kept = Vec::new();
                    for clause in std::mem::take(&mut w.clauses) {
                        if clause.kind == ClauseKind::Invariant {
                            carry(&mut carried, &clause.leading);
                            invariants.push(clause.expr);
                        } else {
                            let mut clause = clause;
                            clause.leading = take_carried(&mut carried, clause.leading);
                            kept.push(clause);
                        }
                    }
                    w.clauses = kept;
                    w.body.leading = take_carried(&mut carried, std::mem::take(&mut w.body.leading));
                    if w.clauses.is_empty() && w.body.leading.contains('\n') && w.body.leading.trim().is_empty() {
                        w.body.leading = " ".to_owned();
                    }
                    if !invariants.is_empty() {
                        let body_lead = append_leading(&w.body);
                        for e in &invariants {
                            w.body.stmts.push(Stmt::expect(e.clone(), body_lead.clone()));
                        }
                        let before: Vec<Stmt> = invariants.iter().map(|e| Stmt::expect(e.clone(), lead.clone())).collect();
                        // The loop keeps its own leading trivia; checks go above it.
                        let loop_leading = std::mem::replace(&mut stmt.leading, lead.clone());
                        let mut before = before;
                        before[0].leading = loop_leading;
                        let n = before.len();
                        block.stmts.splice(i..i, before);
                        i += n;
                    }
                }
            }
            _ => {}
        }
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{emit, parse_unit, SkipReason};

    fn tm(src: &str) -> (String, ProgramUnit) {
        let unit = parse_unit(src).unwrap();
        let out = to_test_mode(&unit, &TransformOptions::default());
        (emit(&out), out)
    }

    #[test]
    fn requires_become_leading_expects() {
        let (out, _) = tm("method m(x: int)\n  requires x > 0\n{\n  print x;\n}\n");
        assert_eq!(out, "method m(x: int) {\n  expect x > 0;\n  print x;\n}\n");
    }

    #[test]
    fn ensures_checked_at_end_and_before_returns() {
        let src = "method m(x: int) returns (r: int)\n  ensures r >= x\n{\n  if x > 0 {\n    return x;\n  }\n  r := x;\n}\n";
        let (out, _) = tm(src);
        assert_eq!(
            out,
            "method m(x: int) returns (r: int) {\n  if x > 0 {\n    r := x;\n    expect r >= x;\n    return;\n  }\n  r := x;\n  expect r >= x;\n}\n"
        );
    }

    #[test]
    fn old_of_parameter_uses_snapshot() {
        let src = "method m(x: int) returns (r: int)\n  ensures r == old(x) + 1\n{\n  r := x + 1;\n}\n";
        let (out, unit) = tm(src);
        assert!(out.contains("  var x__old := x;\n  r := x + 1;\n  expect r == x__old + 1;\n"), "{out}");
        assert!(unit.test_mode_skips.is_empty());
    }

    #[test]
    fn old_of_field_is_skipped() {
        let src = "method m() returns (r: int)\n  ensures capacity == old(capacity)\n{\n  r := 0;\n}\n";
        let (out, unit) = tm(src);
        assert!(out.contains("ensures capacity == old(capacity)"));
        assert_eq!(unit.test_mode_skips.len(), 1);
        assert_eq!(unit.test_mode_skips[0].reason, SkipReason::UnsupportedOld);
    }

    #[test]
    fn function_clauses_are_skipped() {
        let src = "function method f(x: int): int\n  requires x > 0\n  ensures f(x) > 0\n{ x }\n";
        let (out, unit) = tm(src);
        assert_eq!(out, src);
        let reasons: Vec<_> = unit.test_mode_skips.iter().map(|s| s.reason).collect();
        assert_eq!(reasons, vec![SkipReason::FunctionRequires, SkipReason::FunctionEnsures]);
    }

    #[test]
    fn invariants_checked_before_loop_and_after_each_iteration() {
        let src = "method m() {\n  var i := 0;\n  while i < 3\n    invariant i <= 3\n    decreases 3 - i\n  {\n    i := i + 1;\n  }\n}\n";
        let (out, _) = tm(src);
        assert_eq!(
            out,
            "method m() {\n  var i := 0;\n  expect i <= 3;\n  while i < 3\n    decreases 3 - i\n  {\n    i := i + 1;\n    expect i <= 3;\n  }\n}\n"
        );
    }

    #[test]
    fn removed_clause_comments_survive() {
        let src = "method m(x: int)\n  // must be positive\n  requires x > 0\n{\n  print x;\n}\n";
        let (out, _) = tm(src);
        assert!(out.contains("// must be positive"), "{out}");
        assert!(out.contains("expect x > 0;"));
    }

    #[test]
    fn options_disable_rewrites() {
        let src = "method m() { assert 1 < 2; assume 2 < 3; }";
        let unit = parse_unit(src).unwrap();
        let opts = TransformOptions { asserts: false, ..Default::default() };
        let out = emit(&to_test_mode(&unit, &opts));
        assert_eq!(out, "method m() { assert 1 < 2; expect 2 < 3; }");
    }

    #[test]
    fn report_counts() {
        let src = "method m(x: int) requires x > 0 { assert x > 0; while x < 0 invariant true { } }";
        let before = parse_unit(src).unwrap();
        let after = to_test_mode(&before, &TransformOptions::default());
        let r = transform_report(&before, &after);
        assert_eq!((r.asserts, r.requires, r.invariants, r.skipped), (1, 1, 1, 0));
    }

    #[test]
    fn idempotent_on_samples() {
        for src in [
            "method m(x: int) returns (r: int)\n  requires x > 0\n  ensures r > old(x)\n{\n  r := x + 1;\n  return r;\n}\n",
            "method m() { var i := 0; while i < 2 invariant i <= 2 { i := i + 1; } }",
            "function f(x: nat): nat ensures f(x) >= 0 { x }",
        ] {
            let once = to_test_mode(&parse_unit(src).unwrap(), &TransformOptions::default());
            let twice = to_test_mode(&parse_unit(&emit(&once)).unwrap(), &TransformOptions::default());
            assert_eq!(emit(&twice), emit(&once));
        }
    }
}
