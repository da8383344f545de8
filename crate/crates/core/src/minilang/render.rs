use std::fmt::Write as _;

use super::ast::*;

const INDENT: &str = "    ";

pub fn render_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    match e {
        Expr::Int(v) if *v < 0 => {
            let _ = write!(out, "({v})");
        }
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Var(name) => out.push_str(name),
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnaryOp::Neg => '-',
                UnaryOp::Not => '!',
            });
            write_expr(out, inner, 7);
        }
        Expr::Binary(op, lhs, rhs) => {
            let prec = op.precedence();
            let paren = prec < min_prec;
            if paren {
                out.push('(');
            }
            write_expr(out, lhs, prec);
            let _ = write!(out, " {} ", op.symbol());
            // Left-associative: an equal-precedence right operand needs parentheses.
            write_expr(out, rhs, prec + 1);
            if paren {
                out.push(')');
            }
        }
    }
}

fn write_block(out: &mut String, block: &[Stmt], depth: usize) {
    for stmt in block {
        write_stmt(out, stmt, depth);
    }
}

fn write_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    let pad = INDENT.repeat(depth);
    match &stmt.kind {
        StmtKind::Assign { target, value } => {
            let _ = writeln!(out, "{pad}{target} = {};", render_expr(value));
        }
        StmtKind::Let { name, value } => {
            let _ = writeln!(out, "{pad}let {name} = {};", render_expr(value));
        }
        StmtKind::If { cond, then_block, else_block } => {
            let _ = writeln!(out, "{pad}if ({}) {{", render_expr(cond));
            write_block(out, then_block, depth + 1);
            if else_block.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                write_block(out, else_block, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "{pad}while ({}) {{", render_expr(cond));
            write_block(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        StmtKind::Call { callee, args } => {
            let args: Vec<String> = args.iter().map(render_expr).collect();
            let _ = writeln!(out, "{pad}call {callee}({});", args.join(", "));
        }
        StmtKind::Return(value) => {
            let _ = writeln!(out, "{pad}return {};", render_expr(value));
        }
    }
}

pub fn render_function(f: &FunctionDef) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "fn {}({}) {{", f.name, f.params.join(", "));
    write_block(&mut out, &f.body, 1);
    out.push_str("}\n");
    out
}

/// Renders globals followed by functions of one unit, one statement per line.
pub fn render_unit(globals: &[GlobalDecl], functions: &[FunctionDef]) -> String {
    let mut out = String::new();
    for g in globals {
        let _ = writeln!(out, "global {} = {};", g.name, render_expr(&g.init));
    }
    for f in functions {
        out.push_str(&render_function(f));
    }
    out
}

/// Renders every declaration of the program as a single unit.
pub fn render_program(p: &Program) -> String {
    render_unit(&p.globals, &p.functions)
}
