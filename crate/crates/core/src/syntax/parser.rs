//! Statement-level parser.
//!
//! Declarations the subset does not model (classes, lemmas, ghost
//! declarations, modules, ...) become opaque spans that run up to the next
//! top-level declaration keyword. A routine whose shape the parser does not
//! recognise falls back to the same opaque treatment, so parsing only fails
//! on lexical errors or unbalanced delimiters.

use thiserror::Error;

use super::ast::*;
use super::lexer::{tokenize, LexError, Span, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("unbalanced delimiters at byte {offset}")]
    UnbalancedDelimiters { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Lex(e) => e.offset(),
            ParseError::UnbalancedDelimiters { offset } => *offset,
        }
    }
}

const MODIFIERS: &[&str] = &["static", "abstract", "twostate", "ghost", "opaque", "least", "greatest", "inductive"];

const DECL_KEYWORDS: &[&str] = &[
    "method", "function", "predicate", "lemma", "datatype", "codatatype", "class", "trait", "module",
    "import", "include", "const", "type", "newtype", "iterator", "constructor", "export", "copredicate",
    "colemma",
];

const OPAQUE_STMT_KEYWORDS: &[&str] = &[
    "forall", "match", "calc", "for", "label", "modify", "reveal", "break", "continue", "yield", "new",
];

pub fn parse_unit(source: &str) -> Result<ProgramUnit, ParseError> {
    let stream = tokenize(source)?;
    let matching = match_delimiters(&stream.tokens)?;
    let parser = Parser { src: source, toks: &stream.tokens, matching };

    let mut decls = Vec::new();
    let mut pos = 0;
    while pos < parser.toks.len() {
        let (decl, next) = parser.decl(pos);
        decls.push(decl);
        pos = next;
    }
    let trailing = source[parser.prev_end(parser.toks.len())..].to_owned();
    Ok(ProgramUnit { decls, trailing, test_mode_skips: Vec::new() })
}

/// Index of the matching closer for every opener; `usize::MAX` elsewhere.
fn match_delimiters(tokens: &[Token]) -> Result<Vec<usize>, ParseError> {
    let mut matching = vec![usize::MAX; tokens.len()];
    let mut stack: Vec<usize> = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        if tok.kind.is_open() {
            stack.push(i);
        } else if tok.kind.is_close() {
            match stack.pop() {
                Some(open) if tokens[open].kind.closer() == Some(tok.kind) => matching[open] = i,
                _ => return Err(ParseError::UnbalancedDelimiters { offset: tok.span.start }),
            }
        }
    }
    if let Some(&open) = stack.first() {
        return Err(ParseError::UnbalancedDelimiters { offset: tokens[open].span.start });
    }
    Ok(matching)
}

struct Parser<'a> {
    src: &'a str,
    toks: &'a [Token],
    matching: Vec<usize>,
}

impl<'a> Parser<'a> {
    fn kind(&self, i: usize) -> Option<TokenKind> {
        self.toks.get(i).map(|t| t.kind)
    }

    fn word(&self, i: usize) -> &'a str {
        match self.toks.get(i) {
            Some(t) if t.kind == TokenKind::Ident => &self.src[t.span.clone()],
            _ => "",
        }
    }

    fn op(&self, i: usize) -> &'a str {
        match self.toks.get(i) {
            Some(t) if t.kind == TokenKind::Op => &self.src[t.span.clone()],
            _ => "",
        }
    }

    fn prev_end(&self, i: usize) -> usize {
        if i == 0 {
            0
        } else {
            self.toks[i - 1].span.end
        }
    }

    /// Trivia immediately before token `i`.
    fn gap(&self, i: usize) -> String {
        self.src[self.prev_end(i)..self.toks[i].span.start].to_owned()
    }

    fn span(&self, from: usize, to: usize) -> Span {
        self.toks[from].span.start..self.toks[to - 1].span.end
    }

    fn slice(&self, from: usize, to: usize) -> String {
        self.src[self.span(from, to)].to_owned()
    }

    fn expr(&self, from: usize, to: usize) -> ExprSpan {
        ExprSpan { text: self.slice(from, to), span: Some(self.span(from, to)) }
    }

    /// Next index after token `i`, jumping over a whole delimited group.
    fn skip(&self, i: usize) -> usize {
        match self.matching.get(i) {
            Some(&m) if m != usize::MAX => m + 1,
            _ => i + 1,
        }
    }

    fn is_attr_open(&self, i: usize) -> bool {
        self.kind(i) == Some(TokenKind::LBrace) && self.kind(i + 1) == Some(TokenKind::Colon)
    }

    fn is_body_open(&self, i: usize) -> bool {
        self.kind(i) == Some(TokenKind::LBrace) && !self.is_attr_open(i)
    }

    fn skip_attrs(&self, mut i: usize) -> usize {
        while self.is_attr_open(i) {
            i = self.skip(i);
        }
        i
    }

    fn is_decl_start(&self, i: usize) -> bool {
        let w = self.word(i);
        DECL_KEYWORDS.contains(&w) || MODIFIERS.contains(&w)
    }

    fn clause_kind(&self, i: usize) -> Option<ClauseKind> {
        ClauseKind::from_keyword(self.word(i))
    }

    fn is_routine_clause(&self, i: usize) -> bool {
        matches!(
            self.clause_kind(i),
            Some(ClauseKind::Requires | ClauseKind::Ensures | ClauseKind::Decreases | ClauseKind::Modifies | ClauseKind::Reads)
        )
    }

    fn is_loop_clause(&self, i: usize) -> bool {
        matches!(
            self.clause_kind(i),
            Some(ClauseKind::Invariant | ClauseKind::Decreases | ClauseKind::Modifies)
        )
    }

    /// Advance from `from` over whole groups until `stop` holds or `limit` is hit.
    fn scan(&self, from: usize, limit: usize, stop: impl Fn(usize) -> bool) -> usize {
        let mut i = from;
        while i < limit && !stop(i) {
            i = self.skip(i);
        }
        i.min(limit)
    }

    fn decl(&self, start: usize) -> (Decl, usize) {
        let leading = self.gap(start);
        if let Some((kind, name, form, end)) = self.structured_decl(start) {
            let decl = Decl { leading, span: Some(self.span(start, end)), kind, name, form };
            return (decl, end);
        }
        self.opaque_decl(start, leading)
    }

    fn structured_decl(&self, start: usize) -> Option<(DeclKind, Option<String>, DeclForm, usize)> {
        let mut i = start;
        let mut ghost = false;
        while MODIFIERS.contains(&self.word(i)) {
            ghost |= self.word(i) == "ghost";
            i += 1;
        }
        if ghost {
            return None;
        }
        let (kind, after) = match self.word(i) {
            "method" => (DeclKind::Method, i + 1),
            "function" if self.word(i + 1) == "method" => (DeclKind::FunctionMethod, i + 2),
            "function" => (DeclKind::Function, i + 1),
            "predicate" if self.word(i + 1) == "method" => (DeclKind::Predicate, i + 2),
            "predicate" => (DeclKind::Predicate, i + 1),
            "datatype" | "codatatype" => return self.datatype(start, i + 1),
            _ => return None,
        };
        let (name, routine, end) = self.routine(start, kind, after)?;
        Some((kind, Some(name), DeclForm::Routine(routine), end))
    }

    fn routine(&self, start: usize, kind: DeclKind, after_kw: usize) -> Option<(String, Routine, usize)> {
        let mut i = self.skip_attrs(after_kw);
        if self.kind(i) != Some(TokenKind::Ident) || self.is_decl_start(i) {
            return None;
        }
        let name = self.word(i).to_owned();
        i += 1;

        let mut type_params = None;
        if self.kind(i) == Some(TokenKind::Lt) {
            let end = self.angle_group(i)?;
            type_params = Some(self.slice(i, end));
            i = end;
        }

        if self.kind(i) != Some(TokenKind::LParen) {
            return None;
        }
        let params = self.params(i)?;
        i = self.skip(i);

        let returns = if kind == DeclKind::Method {
            if self.word(i) == "returns" {
                if self.kind(i + 1) != Some(TokenKind::LParen) {
                    return None;
                }
                let named = self.params(i + 1)?;
                i = self.skip(i + 1);
                Returns::Named(named)
            } else {
                Returns::Nothing
            }
        } else if self.kind(i) == Some(TokenKind::Colon) {
            if self.kind(i + 1) == Some(TokenKind::LParen) {
                let named = self.params(i + 1)?;
                if named.len() != 1 {
                    return None;
                }
                i = self.skip(i + 1);
                Returns::Named(named)
            } else {
                let from = i + 1;
                let end = self.scan(from, self.toks.len(), |j| {
                    self.is_routine_clause(j) || self.is_body_open(j) || self.is_decl_start(j)
                });
                if end == from {
                    return None;
                }
                i = end;
                Returns::Type(self.slice(from, end))
            }
        } else if kind == DeclKind::Predicate {
            Returns::Nothing
        } else {
            return None;
        };

        let header = self.slice(start, i);

        let mut clauses = Vec::new();
        while let Some(ck) = self.clause_kind(i).filter(|_| self.is_routine_clause(i)) {
            let from = self.skip_attrs(i + 1);
            let end = self.scan(from, self.toks.len(), |j| {
                self.clause_kind(j).is_some() || self.is_body_open(j) || self.is_decl_start(j)
            });
            if end == from {
                return None;
            }
            clauses.push(SpecClause {
                leading: self.gap(i),
                span: Some(self.span(i, end)),
                kind: ck,
                text: self.slice(i, end),
                expr: self.expr(from, end),
            });
            i = end;
        }

        let body = if self.is_body_open(i) {
            let close = self.skip(i) - 1;
            let body = if kind == DeclKind::Method {
                RoutineBody::Block(self.block(i)?)
            } else {
                if close == i + 1 {
                    return None;
                }
                RoutineBody::Expr(ExprBody {
                    leading: self.gap(i),
                    inner_leading: self.gap(i + 1),
                    expr: self.expr(i + 1, close),
                    closing: self.gap(close),
                })
            };
            i = close + 1;
            Some(body)
        } else {
            if i < self.toks.len() && !self.is_decl_start(i) {
                return None;
            }
            None
        };

        let routine = Routine { header, type_params, params, returns, clauses, body };
        Some((name, routine, i))
    }

    fn angle_group(&self, open: usize) -> Option<usize> {
        let mut depth = 0usize;
        let mut i = open;
        while i < self.toks.len() {
            match self.kind(i) {
                Some(TokenKind::Lt) => depth += 1,
                Some(TokenKind::Gt) => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i + 1);
                    }
                }
                _ => {}
            }
            i = self.skip(i);
        }
        None
    }

    fn params(&self, open: usize) -> Option<Vec<Param>> {
        let close = self.skip(open) - 1;
        let mut out = Vec::new();
        let mut seg_start = open + 1;
        let mut i = seg_start;
        while i <= close {
            if i == close || self.kind(i) == Some(TokenKind::Comma) {
                if i > seg_start {
                    out.push(self.param(seg_start, i)?);
                } else if i != close || !out.is_empty() {
                    return None;
                }
                seg_start = i + 1;
                i += 1;
                continue;
            }
            i = self.skip(i);
        }
        Some(out)
    }

    fn param(&self, from: usize, to: usize) -> Option<Param> {
        let mut i = from;
        let mut ghost = false;
        while matches!(self.word(i), "ghost" | "nameonly" | "new" | "older") && i + 1 < to {
            ghost |= self.word(i) == "ghost";
            i += 1;
        }
        if self.kind(i) != Some(TokenKind::Ident) || self.kind(i + 1) != Some(TokenKind::Colon) {
            return None;
        }
        let ty_from = i + 2;
        let ty_to = self.scan(ty_from, to, |j| self.kind(j) == Some(TokenKind::Assign));
        if ty_to == ty_from {
            return None;
        }
        Some(Param { name: self.word(i).to_owned(), ty: self.slice(ty_from, ty_to), ghost })
    }

    fn datatype(&self, start: usize, after_kw: usize) -> Option<(DeclKind, Option<String>, DeclForm, usize)> {
        let name_at = self.skip_attrs(after_kw);
        let name = (self.kind(name_at) == Some(TokenKind::Ident)).then(|| self.word(name_at).to_owned());
        let end = self.scan(after_kw, self.toks.len(), |j| self.is_decl_start(j));

        let eq = (name_at..end).find(|&j| self.op(j) == "=" && self.depth_zero(name_at, j))?;
        let mut constructors = Vec::new();
        let mut i = eq + 1;
        while i < end {
            let seg_end = self.scan(i, end, |j| self.op(j) == "|");
            let first = self.skip_attrs(i);
            if first < seg_end {
                if self.is_body_open(first) {
                    break;
                }
                if self.kind(first) == Some(TokenKind::Ident) {
                    let params = (self.kind(first + 1) == Some(TokenKind::LParen))
                        .then(|| self.slice(first + 1, self.skip(first + 1)));
                    constructors.push(Constructor { name: self.word(first).to_owned(), params });
                }
            }
            i = seg_end + 1;
        }
        let form = DeclForm::Datatype(DatatypeDecl { text: self.slice(start, end), constructors });
        Some((DeclKind::Datatype, name, form, end))
    }

    /// True when token `j` is not nested inside a group that opened at or after `from`.
    fn depth_zero(&self, from: usize, j: usize) -> bool {
        let mut i = from;
        while i < j {
            i = self.skip(i);
        }
        i == j
    }

    fn opaque_decl(&self, start: usize, leading: String) -> (Decl, usize) {
        let mut i = start;
        while MODIFIERS.contains(&self.word(i)) {
            i += 1;
        }
        if DECL_KEYWORDS.contains(&self.word(i)) {
            let kw = self.word(i);
            i += 1;
            if matches!(kw, "function" | "predicate") && self.word(i) == "method" {
                i += 1;
            }
        }
        let name_at = self.skip_attrs(i);
        let name = (i > start && self.kind(name_at) == Some(TokenKind::Ident) && !self.is_decl_start(name_at))
            .then(|| self.word(name_at).to_owned());
        if i == start {
            i = self.skip(start);
        }
        let end = self.scan(i, self.toks.len(), |j| self.is_decl_start(j));
        let decl = Decl {
            leading,
            span: Some(self.span(start, end)),
            kind: DeclKind::Opaque,
            name,
            form: DeclForm::Opaque { text: self.slice(start, end) },
        };
        (decl, end)
    }

    fn block(&self, open: usize) -> Option<Block> {
        let close = self.skip(open) - 1;
        let mut stmts = Vec::new();
        let mut i = open + 1;
        while i < close {
            let (stmt, next) = self.stmt(i, close);
            stmts.push(stmt);
            i = next;
        }
        Some(Block {
            leading: self.gap(open),
            span: Some(self.span(open, close + 1)),
            stmts,
            closing: self.gap(close),
        })
    }

    fn stmt(&self, start: usize, limit: usize) -> (Stmt, usize) {
        let leading = self.gap(start);
        let parsed = match self.word(start) {
            "assert" | "assume" => self.assertion(start, limit),
            "expect" => self.expect_stmt(start, limit),
            "if" => self.if_stmt(start, limit),
            "while" => self.while_stmt(start, limit),
            "var" => self.simple(start, limit, |text| StmtKind::VarDecl { text }),
            "print" => self.simple(start, limit, |text| StmtKind::Print { text }),
            "return" => self.return_stmt(start, limit),
            w if OPAQUE_STMT_KEYWORDS.contains(&w) => None,
            _ if self.kind(start) == Some(TokenKind::LBrace) => None,
            _ => self.expression_stmt(start, limit),
        };
        let (kind, end) = parsed.unwrap_or_else(|| self.opaque_stmt(start, limit));
        (Stmt { leading, span: Some(self.span(start, end)), kind }, end)
    }

    fn semi_end(&self, from: usize, limit: usize) -> Option<usize> {
        let i = self.scan(from, limit, |j| self.kind(j) == Some(TokenKind::Semi));
        (i < limit).then_some(i)
    }

    fn simple(&self, start: usize, limit: usize, make: impl Fn(String) -> StmtKind) -> Option<(StmtKind, usize)> {
        let semi = self.semi_end(start, limit)?;
        Some((make(self.slice(start, semi + 1)), semi + 1))
    }

    fn assertion(&self, start: usize, limit: usize) -> Option<(StmtKind, usize)> {
        let is_assert = self.word(start) == "assert";
        let mut from = self.skip_attrs(start + 1);
        if is_assert
            && self.kind(from) == Some(TokenKind::Ident)
            && self.kind(from + 1) == Some(TokenKind::Colon)
        {
            from += 2;
        }
        let end = self.scan(from, limit, |j| {
            self.kind(j) == Some(TokenKind::Semi) || (is_assert && self.word(j) == "by")
        });
        if end == from || end >= limit {
            return None;
        }
        let stmt_end = if self.word(end) == "by" {
            if !self.is_body_open(end + 1) || end + 1 >= limit {
                return None;
            }
            self.skip(end + 1)
        } else {
            end + 1
        };
        let expr = self.expr(from, end);
        let text = self.slice(start, stmt_end);
        let kind = if is_assert { StmtKind::Assert { expr, text } } else { StmtKind::Assume { expr, text } };
        Some((kind, stmt_end))
    }

    fn expect_stmt(&self, start: usize, limit: usize) -> Option<(StmtKind, usize)> {
        let from = self.skip_attrs(start + 1);
        let end = self.scan(from, limit, |j| matches!(self.kind(j), Some(TokenKind::Semi | TokenKind::Comma)));
        if end == from || end >= limit {
            return None;
        }
        let (message, semi) = if self.kind(end) == Some(TokenKind::Comma) {
            let semi = self.semi_end(end + 1, limit)?;
            if semi == end + 1 {
                return None;
            }
            (Some(self.expr(end + 1, semi)), semi)
        } else {
            (None, end)
        };
        let kind = StmtKind::Expect { expr: self.expr(from, end), message, text: self.slice(start, semi + 1) };
        Some((kind, semi + 1))
    }

    fn return_stmt(&self, start: usize, limit: usize) -> Option<(StmtKind, usize)> {
        let semi = self.semi_end(start + 1, limit)?;
        let value = (semi > start + 1).then(|| self.expr(start + 1, semi));
        Some((StmtKind::Return { value, text: self.slice(start, semi + 1) }, semi + 1))
    }

    fn expression_stmt(&self, start: usize, limit: usize) -> Option<(StmtKind, usize)> {
        let semi = self.semi_end(start, limit)?;
        let mut i = start;
        let mut assigns = false;
        while i < semi {
            let t = &self.src[self.toks[i].span.clone()];
            assigns |= matches!(t, ":=" | ":|" | ":-");
            i = self.skip(i);
        }
        let text = self.slice(start, semi + 1);
        let kind = if assigns { StmtKind::Assign { text } } else { StmtKind::Call { text } };
        Some((kind, semi + 1))
    }

    fn if_stmt(&self, start: usize, limit: usize) -> Option<(StmtKind, usize)> {
        let from = start + 1;
        if self.word(from) == "case" {
            return None;
        }
        let g_end = self.scan(from, limit, |j| self.is_body_open(j));
        if g_end == from || g_end >= limit {
            return None;
        }
        let then_block = self.block(g_end)?;
        let mut i = self.skip(g_end);

        let mut else_branch = None;
        if i < limit && self.word(i) == "else" {
            let leading = self.gap(i);
            let target = if self.word(i + 1) == "if" {
                let (kind, end) = self.if_stmt(i + 1, limit)?;
                let inner = Stmt { leading: self.gap(i + 1), span: Some(self.span(i + 1, end)), kind };
                i = end;
                ElseTarget::If(Box::new(inner))
            } else if self.is_body_open(i + 1) && i + 1 < limit {
                let b = self.block(i + 1)?;
                i = self.skip(i + 1);
                ElseTarget::Block(b)
            } else {
                return None;
            };
            else_branch = Some(ElseBranch { leading, target });
        }

        let stmt = IfStmt { header: self.slice(start, g_end), guard: self.expr(from, g_end), then_block, else_branch };
        Some((StmtKind::If(stmt), i))
    }

    fn while_stmt(&self, start: usize, limit: usize) -> Option<(StmtKind, usize)> {
        let from = start + 1;
        let g_end = self.scan(from, limit, |j| self.is_loop_clause(j) || self.is_body_open(j));
        if g_end == from || g_end >= limit {
            return None;
        }
        let mut i = g_end;
        let mut clauses = Vec::new();
        while let Some(ck) = self.clause_kind(i).filter(|_| self.is_loop_clause(i)) {
            let e_from = self.skip_attrs(i + 1);
            let end = self.scan(e_from, limit, |j| self.is_loop_clause(j) || self.is_body_open(j));
            if end == e_from || end >= limit {
                return None;
            }
            clauses.push(SpecClause {
                leading: self.gap(i),
                span: Some(self.span(i, end)),
                kind: ck,
                text: self.slice(i, end),
                expr: self.expr(e_from, end),
            });
            i = end;
        }
        if !self.is_body_open(i) {
            return None;
        }
        let body = self.block(i)?;
        let end = self.skip(i);
        let stmt = WhileStmt { header: self.slice(start, g_end), guard: self.expr(from, g_end), clauses, body };
        Some((StmtKind::While(stmt), end))
    }

    fn opaque_stmt(&self, start: usize, limit: usize) -> (StmtKind, usize) {
        let mut i = start;
        while i < limit {
            if self.kind(i) == Some(TokenKind::Semi) {
                i += 1;
                break;
            }
            if self.is_body_open(i) {
                i = self.skip(i);
                if self.word(i) != "else" {
                    break;
                }
                continue;
            }
            i = self.skip(i);
        }
        let end = i.min(limit).max(start + 1);
        (StmtKind::Opaque { text: self.slice(start, end) }, end)
    }
}
