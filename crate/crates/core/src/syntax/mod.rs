//! Lexer, statement-level parser and emitter for the Dafny subset used by
//! exercises, oracle harnesses and the test-mode rewrite.

pub mod ast;
mod emit;
pub mod lexer;
mod parser;

pub use ast::*;
pub use emit::{emit, emit_block, emit_decl, emit_stmt};
pub use lexer::{tokenize, LexError, Span, Token, TokenKind, TokenStream, Trivia, TriviaKind};
pub use parser::{parse_unit, ParseError};

/// Frame clause kept opaque: `modifies` or `reads`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameClause {
    pub kind: ClauseKind,
    pub expr: ExprSpan,
}

/// Specification of one declaration, each list in source order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpecClauses {
    pub requires: Vec<ExprSpan>,
    pub ensures: Vec<ExprSpan>,
    pub decreases: Vec<ExprSpan>,
    pub modifies_reads: Vec<FrameClause>,
}

impl SpecClauses {
    pub fn is_empty(&self) -> bool {
        self.requires.is_empty()
            && self.ensures.is_empty()
            && self.decreases.is_empty()
            && self.modifies_reads.is_empty()
    }

    pub fn modifies(&self) -> impl Iterator<Item = &ExprSpan> {
        self.modifies_reads.iter().filter(|f| f.kind == ClauseKind::Modifies).map(|f| &f.expr)
    }

    pub fn reads(&self) -> impl Iterator<Item = &ExprSpan> {
        self.modifies_reads.iter().filter(|f| f.kind == ClauseKind::Reads).map(|f| &f.expr)
    }
}

/// Collect a declaration's clauses. `decreases a, b` contributes one entry per
/// top-level comma-separated expression. Non-routines yield an empty spec.
pub fn extract_spec(decl: &Decl) -> SpecClauses {
    let mut spec = SpecClauses::default();
    let Some(routine) = decl.routine() else {
        return spec;
    };
    for clause in &routine.clauses {
        match clause.kind {
            ClauseKind::Requires => spec.requires.push(clause.expr.clone()),
            ClauseKind::Ensures => spec.ensures.push(clause.expr.clone()),
            ClauseKind::Decreases => spec.decreases.extend(split_top_level_commas(&clause.expr)),
            ClauseKind::Modifies | ClauseKind::Reads => {
                spec.modifies_reads.push(FrameClause { kind: clause.kind, expr: clause.expr.clone() })
            }
            ClauseKind::Invariant => {}
        }
    }
    spec
}

/// Split an expression on commas that are not nested in any delimiter.
pub fn split_top_level_commas(expr: &ExprSpan) -> Vec<ExprSpan> {
    let Ok(stream) = tokenize(&expr.text) else {
        return vec![expr.clone()];
    };
    let mut depth = 0i32;
    let mut cuts = Vec::new();
    for tok in &stream.tokens {
        if tok.kind.is_open() {
            depth += 1;
        } else if tok.kind.is_close() {
            depth -= 1;
        } else if tok.kind == TokenKind::Comma && depth == 0 {
            cuts.push(tok.span.clone());
        }
    }
    if cuts.is_empty() {
        return vec![expr.clone()];
    }
    let mut pieces = Vec::with_capacity(cuts.len() + 1);
    let mut from = 0;
    for cut in &cuts {
        pieces.push((from, cut.start));
        from = cut.end;
    }
    pieces.push((from, expr.text.len()));

    let mut out = Vec::new();
    for (a, b) in pieces {
        let raw = &expr.text[a..b];
        let lead = raw.len() - raw.trim_start().len();
        let text = raw.trim();
        if text.is_empty() {
            continue;
        }
        let span = expr.span.as_ref().map(|s| s.start + a + lead..s.start + a + lead + text.len());
        out.push(ExprSpan { text: text.to_owned(), span });
    }
    out
}

/// Collapse runs of whitespace to one space and trim; used when comparing type texts.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
