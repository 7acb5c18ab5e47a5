//! Statement-level syntax tree.
//!
//! Every node carries the trivia that precedes it (`leading`) and enough
//! verbatim text to re-emit itself byte for byte. Expressions are never
//! interpreted; they travel as [`ExprSpan`]s. Nodes synthesized by a
//! transformation have `span: None`.

use super::lexer::Span;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProgramUnit {
    pub decls: Vec<Decl>,
    /// Trivia after the last declaration.
    pub trailing: String,
    /// Clauses a test-mode rewrite left in place, with the reason.
    pub test_mode_skips: Vec<SkippedClause>,
}

impl ProgramUnit {
    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name.as_deref() == Some(name))
    }

    pub fn routines(&self) -> impl Iterator<Item = (&Decl, &Routine)> {
        self.decls.iter().filter_map(|d| d.routine().map(|r| (d, r)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeclKind {
    Method,
    FunctionMethod,
    Function,
    Predicate,
    Datatype,
    Opaque,
}

impl DeclKind {
    /// Function-like declarations have an expression body and cannot host statements.
    pub fn is_function_like(self) -> bool {
        matches!(self, DeclKind::FunctionMethod | DeclKind::Function | DeclKind::Predicate)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub leading: String,
    pub span: Option<Span>,
    pub kind: DeclKind,
    pub name: Option<String>,
    pub form: DeclForm,
}

impl Decl {
    pub fn routine(&self) -> Option<&Routine> {
        match &self.form {
            DeclForm::Routine(r) => Some(r),
            _ => None,
        }
    }

    pub fn routine_mut(&mut self) -> Option<&mut Routine> {
        match &mut self.form {
            DeclForm::Routine(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeclForm {
    Routine(Routine),
    Datatype(DatatypeDecl),
    Opaque { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    /// Type text exactly as written.
    pub ty: String,
    pub ghost: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Returns {
    Nothing,
    /// `returns (c: int)` on methods, or a named function result `: (r: int)`.
    Named(Vec<Param>),
    /// `: int` on functions.
    Type(String),
}

/// Method, function, function method or predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Routine {
    /// Verbatim text from the first keyword through the end of the signature.
    pub header: String,
    pub type_params: Option<String>,
    pub params: Vec<Param>,
    pub returns: Returns,
    pub clauses: Vec<SpecClause>,
    pub body: Option<RoutineBody>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoutineBody {
    Block(Block),
    Expr(ExprBody),
}

/// `{ expr }` body of a function-like declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprBody {
    pub leading: String,
    /// Trivia between `{` and the expression.
    pub inner_leading: String,
    pub expr: ExprSpan,
    /// Trivia between the expression and `}`.
    pub closing: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClauseKind {
    Requires,
    Ensures,
    Decreases,
    Modifies,
    Reads,
    Invariant,
}

impl ClauseKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ClauseKind::Requires => "requires",
            ClauseKind::Ensures => "ensures",
            ClauseKind::Decreases => "decreases",
            ClauseKind::Modifies => "modifies",
            ClauseKind::Reads => "reads",
            ClauseKind::Invariant => "invariant",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "requires" => ClauseKind::Requires,
            "ensures" => ClauseKind::Ensures,
            "decreases" => ClauseKind::Decreases,
            "modifies" => ClauseKind::Modifies,
            "reads" => ClauseKind::Reads,
            "invariant" => ClauseKind::Invariant,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecClause {
    pub leading: String,
    pub span: Option<Span>,
    pub kind: ClauseKind,
    /// Keyword through the end of the expression.
    pub text: String,
    pub expr: ExprSpan,
}

impl SpecClause {
    pub fn synthesized(kind: ClauseKind, expr: ExprSpan, leading: &str) -> Self {
        SpecClause {
            leading: leading.to_owned(),
            span: None,
            kind,
            text: format!("{} {}", kind.keyword(), expr.text),
            expr,
        }
    }
}

/// One expression, carried verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExprSpan {
    pub text: String,
    pub span: Option<Span>,
}

impl ExprSpan {
    pub fn synthesized(text: impl Into<String>) -> Self {
        ExprSpan { text: text.into(), span: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatatypeDecl {
    pub text: String,
    pub constructors: Vec<Constructor>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constructor {
    pub name: String,
    pub params: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    /// Trivia before `{`.
    pub leading: String,
    pub span: Option<Span>,
    pub stmts: Vec<Stmt>,
    /// Trivia before `}`.
    pub closing: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub leading: String,
    pub span: Option<Span>,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StmtTag {
    Assert,
    Assume,
    Expect,
    VarDecl,
    Assign,
    Call,
    If,
    While,
    Return,
    Print,
    Opaque,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Assert { expr: ExprSpan, text: String },
    Assume { expr: ExprSpan, text: String },
    Expect { expr: ExprSpan, message: Option<ExprSpan>, text: String },
    VarDecl { text: String },
    Assign { text: String },
    Call { text: String },
    If(IfStmt),
    While(WhileStmt),
    Return { value: Option<ExprSpan>, text: String },
    Print { text: String },
    Opaque { text: String },
}

impl Stmt {
    pub fn tag(&self) -> StmtTag {
        match &self.kind {
            StmtKind::Assert { .. } => StmtTag::Assert,
            StmtKind::Assume { .. } => StmtTag::Assume,
            StmtKind::Expect { .. } => StmtTag::Expect,
            StmtKind::VarDecl { .. } => StmtTag::VarDecl,
            StmtKind::Assign { .. } => StmtTag::Assign,
            StmtKind::Call { .. } => StmtTag::Call,
            StmtKind::If(_) => StmtTag::If,
            StmtKind::While(_) => StmtTag::While,
            StmtKind::Return { .. } => StmtTag::Return,
            StmtKind::Print { .. } => StmtTag::Print,
            StmtKind::Opaque { .. } => StmtTag::Opaque,
        }
    }

    pub fn expect(expr: ExprSpan, leading: impl Into<String>) -> Self {
        let text = format!("expect {};", expr.text);
        Stmt { leading: leading.into(), span: None, kind: StmtKind::Expect { expr, message: None, text } }
    }

    /// Child blocks, in source order.
    pub fn blocks(&self) -> Vec<&Block> {
        match &self.kind {
            StmtKind::If(s) => {
                let mut out = vec![&s.then_block];
                if let Some(e) = &s.else_branch {
                    match &e.target {
                        ElseTarget::Block(b) => out.push(b),
                        ElseTarget::If(inner) => out.extend(inner.blocks()),
                    }
                }
                out
            }
            StmtKind::While(w) => vec![&w.body],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IfStmt {
    /// `if` plus its guard, verbatim.
    pub header: String,
    pub guard: ExprSpan,
    pub then_block: Block,
    pub else_branch: Option<ElseBranch>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElseBranch {
    /// Trivia before `else`.
    pub leading: String,
    pub target: ElseTarget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ElseTarget {
    Block(Block),
    If(Box<Stmt>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhileStmt {
    /// `while` plus its guard, verbatim.
    pub header: String,
    pub guard: ExprSpan,
    /// Loop specification (`invariant`, `decreases`, `modifies`) in source order.
    pub clauses: Vec<SpecClause>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedClause {
    pub decl: String,
    pub kind: ClauseKind,
    pub expr: String,
    pub span: Option<Span>,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SkipReason {
    /// `old(...)` whose argument is not a bare parameter name.
    UnsupportedOld,
    /// Postcondition on an expression-bodied declaration.
    FunctionEnsures,
    /// Precondition on an expression-bodied declaration.
    FunctionRequires,
    /// Routine without a body to host runtime checks.
    NoBody,
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SkipReason::UnsupportedOld => "UnsupportedOld",
            SkipReason::FunctionEnsures => "FunctionEnsures",
            SkipReason::FunctionRequires => "FunctionRequires",
            SkipReason::NoBody => "NoBody",
        })
    }
}
