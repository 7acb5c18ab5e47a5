use super::ast::*;

/// Render a unit back to source. Untouched nodes reproduce their input bytes exactly.
pub fn emit(unit: &ProgramUnit) -> String {
    let mut out = String::new();
    for decl in &unit.decls {
        out.push_str(&decl.leading);
        emit_decl(decl, &mut out);
    }
    out.push_str(&unit.trailing);
    out
}

pub fn emit_decl(decl: &Decl, out: &mut String) {
    match &decl.form {
        DeclForm::Opaque { text } => out.push_str(text),
        DeclForm::Datatype(dt) => out.push_str(&dt.text),
        DeclForm::Routine(r) => {
            out.push_str(&r.header);
            emit_clauses(&r.clauses, out);
            match &r.body {
                Some(RoutineBody::Block(b)) => emit_block(b, out),
                Some(RoutineBody::Expr(e)) => {
                    out.push_str(&e.leading);
                    out.push('{');
                    out.push_str(&e.inner_leading);
                    out.push_str(&e.expr.text);
                    out.push_str(&e.closing);
                    out.push('}');
                }
                None => {}
            }
        }
    }
}

fn emit_clauses(clauses: &[SpecClause], out: &mut String) {
    for c in clauses {
        out.push_str(&c.leading);
        out.push_str(&c.text);
    }
}

pub fn emit_block(block: &Block, out: &mut String) {
    out.push_str(&block.leading);
    out.push('{');
    for s in &block.stmts {
        out.push_str(&s.leading);
        emit_stmt(s, out);
    }
    out.push_str(&block.closing);
    out.push('}');
}

pub fn emit_stmt(stmt: &Stmt, out: &mut String) {
    match &stmt.kind {
        StmtKind::Assert { text, .. }
        | StmtKind::Assume { text, .. }
        | StmtKind::Expect { text, .. }
        | StmtKind::VarDecl { text }
        | StmtKind::Assign { text }
        | StmtKind::Call { text }
        | StmtKind::Return { text, .. }
        | StmtKind::Print { text }
        | StmtKind::Opaque { text } => out.push_str(text),
        StmtKind::If(s) => {
            out.push_str(&s.header);
            emit_block(&s.then_block, out);
            if let Some(e) = &s.else_branch {
                out.push_str(&e.leading);
                out.push_str("else");
                match &e.target {
                    ElseTarget::Block(b) => emit_block(b, out),
                    ElseTarget::If(inner) => {
                        out.push_str(&inner.leading);
                        emit_stmt(inner, out);
                    }
                }
            }
        }
        StmtKind::While(w) => {
            out.push_str(&w.header);
            emit_clauses(&w.clauses, out);
            emit_block(&w.body, out);
        }
    }
}
