use std::fmt::Write;

use super::ast::{Ast, AstKind, NodeId, ProgramAst, Ty};

/// Renders a program back to parseable MiniLang source. The output re-parses
/// to a structurally identical AST; spacing and redundant parentheses are
/// canonicalized.
pub fn pretty_print(prog: &ProgramAst) -> String {
    let ast = &prog.ast;
    let mut out = String::new();
    for &top in ast.children(prog.root) {
        match ast.kind(top) {
            AstKind::RecordDecl => {
                let _ = writeln!(out, "type {} {{", ast.text(top));
                for &field in ast.children(top) {
                    let (prefix, suffix) = decl_parts(ast.ty(field).unwrap());
                    let _ = writeln!(out, "    {prefix} {}{suffix};", ast.text(field));
                }
                out.push_str("}\n\n");
            }
            AstKind::FuncDecl => {
                let ret = ast.ty(top).unwrap();
                let _ = write!(out, "{ret} {}(", ast.text(top));
                let params: Vec<&NodeId> =
                    ast.children(top).iter().filter(|&&c| ast.kind(c) == AstKind::Param).collect();
                for (i, &&p) in params.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let (prefix, suffix) = decl_parts(ast.ty(p).unwrap());
                    let _ = write!(out, "{prefix} {}{suffix}", ast.text(p));
                }
                out.push_str(") ");
                let body = *ast.children(top).last().unwrap();
                write_block(ast, body, 0, &mut out);
                out.push_str("\n\n");
            }
            other => unreachable!("unexpected top-level node {other:?}"),
        }
    }
    while out.ends_with('\n') {
        out.pop();
    }
    out.push('\n');
    out
}

/// Array types print with the brackets after the name in declarations.
fn decl_parts(ty: &Ty) -> (String, &'static str) {
    match ty {
        Ty::Array(b) => (Ty::basic(*b).to_string(), "[]"),
        other => (other.to_string(), ""),
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn write_block(ast: &Ast, id: NodeId, level: usize, out: &mut String) {
    out.push_str("{\n");
    for &stmt in ast.children(id) {
        write_stmt(ast, stmt, level + 1, out);
    }
    indent(out, level);
    out.push('}');
}

/// Writes a statement followed by a newline, indented to `level`. Block
/// substatements stay on the same line as their header.
fn write_stmt(ast: &Ast, id: NodeId, level: usize, out: &mut String) {
    indent(out, level);
    match ast.kind(id) {
        AstKind::Block => {
            write_block(ast, id, level, out);
            out.push('\n');
        }
        AstKind::VarDecl | AstKind::SizedArrayDecl | AstKind::Assign | AstKind::ExprStmt => {
            write_simple_stmt(ast, id, out);
            out.push_str(";\n");
        }
        AstKind::If => {
            let children = ast.children(id);
            let _ = write!(out, "if ({}) ", expr_to_string(ast, children[0]));
            write_substmt(ast, children[1], level, out);
            if let Some(&alt) = children.get(2) {
                out.push_str(" else ");
                write_substmt(ast, alt, level, out);
            }
            out.push('\n');
        }
        AstKind::While => {
            let children = ast.children(id);
            let _ = write!(out, "while ({}) ", expr_to_string(ast, children[0]));
            write_substmt(ast, children[1], level, out);
            out.push('\n');
        }
        AstKind::For => {
            let children = ast.children(id);
            out.push_str("for (");
            write_simple_stmt(ast, children[0], out);
            let _ = write!(out, "; {}; ", expr_to_string(ast, children[1]));
            write_simple_stmt(ast, children[2], out);
            out.push_str(") ");
            write_substmt(ast, children[3], level, out);
            out.push('\n');
        }
        AstKind::Switch => {
            let children = ast.children(id);
            let _ = write!(out, "switch ({}) {{\n", expr_to_string(ast, children[0]));
            for &arm in &children[1..] {
                indent(out, level);
                if ast.kind(arm) == AstKind::CaseArm {
                    let _ = writeln!(out, "case {}:", ast.text(arm));
                } else {
                    out.push_str("default:\n");
                }
                for &s in ast.children(arm) {
                    write_stmt(ast, s, level + 1, out);
                }
            }
            indent(out, level);
            out.push_str("}\n");
        }
        AstKind::Return => {
            let _ = writeln!(out, "return {};", expr_to_string(ast, ast.children(id)[0]));
        }
        other => unreachable!("not a statement kind: {other:?}"),
    }
}

fn write_substmt(ast: &Ast, id: NodeId, level: usize, out: &mut String) {
    if ast.kind(id) == AstKind::Block {
        write_block(ast, id, level, out);
    } else {
        // Inline single statement: reuse the statement writer, then trim the
        // indentation and trailing newline it produced.
        let mut tmp = String::new();
        write_stmt(ast, id, 0, &mut tmp);
        out.push_str(tmp.trim_end_matches('\n'));
    }
}

/// Declaration / assignment / expression statement without the trailing `;`.
fn write_simple_stmt(ast: &Ast, id: NodeId, out: &mut String) {
    match ast.kind(id) {
        AstKind::VarDecl => {
            let (prefix, suffix) = decl_parts(ast.ty(id).unwrap());
            let _ = write!(out, "{prefix} {}{suffix}", ast.text(id));
            if let Some(&init) = ast.children(id).first() {
                let _ = write!(out, " = {}", expr_to_string(ast, init));
            }
        }
        AstKind::SizedArrayDecl => {
            let elem = match ast.ty(id).unwrap() {
                Ty::Array(b) => Ty::basic(*b),
                other => other.clone(),
            };
            let _ = write!(out, "{elem} {}[{}]", ast.text(id), expr_to_string(ast, ast.children(id)[0]));
        }
        AstKind::Assign => {
            let children = ast.children(id);
            let _ = write!(out, "{} = {}", expr_to_string(ast, children[0]), expr_to_string(ast, children[1]));
        }
        AstKind::ExprStmt => {
            out.push_str(&expr_to_string(ast, ast.children(id)[0]));
        }
        other => unreachable!("not a simple statement kind: {other:?}"),
    }
}

fn bin_prec(op: &str) -> u8 {
    match op {
        "||" => 1,
        "&&" => 2,
        "==" | "!=" => 3,
        "<" | "<=" | ">" | ">=" => 4,
        "+" | "-" => 5,
        "*" | "/" | "%" => 6,
        other => unreachable!("unknown binary operator {other}"),
    }
}

/// Renders an expression with the minimum parentheses that preserve the tree.
pub fn expr_to_string(ast: &Ast, id: NodeId) -> String {
    let mut out = String::new();
    write_expr(ast, id, 0, &mut out);
    out
}

/// `min_prec` is the loosest binary precedence that may appear unbracketed.
fn write_expr(ast: &Ast, id: NodeId, min_prec: u8, out: &mut String) {
    match ast.kind(id) {
        AstKind::IntConst | AstKind::FloatConst | AstKind::BoolConst => out.push_str(ast.text(id)),
        AstKind::Local => out.push_str(ast.text(id)),
        AstKind::BinOp => {
            let op = ast.text(id);
            let prec = bin_prec(op);
            let bracket = prec < min_prec;
            if bracket {
                out.push('(');
            }
            let children = ast.children(id);
            write_expr(ast, children[0], prec, out);
            let _ = write!(out, " {op} ");
            // Left-associative: an equal-precedence right child keeps parens.
            write_expr(ast, children[1], prec + 1, out);
            if bracket {
                out.push(')');
            }
        }
        AstKind::UnOp => {
            out.push_str(ast.text(id));
            // `- -a` must not fuse into a `--` token.
            if ast.text(id) == "-" && ast.kind(ast.children(id)[0]) == AstKind::UnOp {
                out.push(' ');
            }
            write_tight(ast, ast.children(id)[0], out);
        }
        AstKind::Cast => {
            let _ = write!(out, "({}) ", ast.ty(id).unwrap());
            write_tight(ast, ast.children(id)[0], out);
        }
        AstKind::Invoke => {
            out.push_str(ast.text(id));
            out.push('(');
            for (i, &arg) in ast.children(id).iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(ast, arg, 0, out);
            }
            out.push(')');
        }
        AstKind::ArrayRef => {
            let children = ast.children(id);
            write_tight(ast, children[0], out);
            out.push('[');
            write_expr(ast, children[1], 0, out);
            out.push(']');
        }
        AstKind::FieldRef => {
            write_tight(ast, ast.children(id)[0], out);
            let _ = write!(out, ".{}", ast.text(id));
        }
        other => unreachable!("not an expression kind: {other:?}"),
    }
}

/// Writes an operand that must bind at least as tightly as a unary operator.
fn write_tight(ast: &Ast, id: NodeId, out: &mut String) {
    if ast.kind(id) == AstKind::BinOp {
        out.push('(');
        write_expr(ast, id, 0, out);
        out.push(')');
    } else {
        write_expr(ast, id, 0, out);
    }
}
