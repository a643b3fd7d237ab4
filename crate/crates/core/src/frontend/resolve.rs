use std::collections::{BTreeMap, BTreeSet};

use super::ast::{Ast, AstKind, FuncSig, NodeId, ProgramAst, RecordInfo, Span, Ty};
use super::FrontendError;

fn err(span: Span, message: String) -> FrontendError {
    FrontendError::Resolve { line: span.line, col: span.col, message }
}

/// Resolves names and checks types over a freshly parsed arena. On success
/// every expression node has exactly one type annotation.
pub(crate) fn resolve(mut ast: Ast, root: NodeId) -> Result<ProgramAst, FrontendError> {
    let top: Vec<NodeId> = ast.children(root).to_vec();

    let mut records: BTreeMap<String, RecordInfo> = BTreeMap::new();
    for &node in &top {
        if ast.kind(node) != AstKind::RecordDecl {
            continue;
        }
        let name = ast.text(node).to_string();
        let span = ast.node(node).span;
        let mut fields = Vec::new();
        let mut seen = BTreeSet::new();
        for &field in ast.children(node) {
            let fname = ast.text(field).to_string();
            let fty = ast.ty(field).cloned().expect("field type set by parser");
            if matches!(fty, Ty::Record(_)) {
                return Err(err(ast.node(field).span, format!("record-typed field '{fname}' is not supported")));
            }
            if !seen.insert(fname.clone()) {
                return Err(err(ast.node(field).span, format!("duplicate field '{fname}' in record '{name}'")));
            }
            fields.push((fname, fty));
        }
        if records.insert(name.clone(), RecordInfo { node, fields }).is_some() {
            return Err(err(span, format!("duplicate record type '{name}'")));
        }
    }

    let mut functions: BTreeMap<String, FuncSig> = BTreeMap::new();
    let mut function_order = Vec::new();
    for &node in &top {
        if ast.kind(node) != AstKind::FuncDecl {
            continue;
        }
        let name = ast.text(node).to_string();
        let span = ast.node(node).span;
        let ret = ast.ty(node).cloned().expect("return type set by parser");
        check_ty_exists(&records, &ret, span)?;
        let mut params = Vec::new();
        for &child in ast.children(node) {
            if ast.kind(child) == AstKind::Param {
                let pty = ast.ty(child).cloned().expect("param type set by parser");
                check_ty_exists(&records, &pty, ast.node(child).span)?;
                params.push((ast.text(child).to_string(), pty));
            }
        }
        if functions.insert(name.clone(), FuncSig { node, params, ret }).is_some() {
            return Err(err(span, format!("duplicate function '{name}'")));
        }
        function_order.push(name);
    }

    for &node in &top {
        if ast.kind(node) == AstKind::FuncDecl {
            let name = ast.text(node).to_string();
            let sig = functions.get(&name).unwrap().clone();
            let mut checker = Checker {
                ast: &mut ast,
                records: &records,
                functions: &functions,
                scopes: vec![BTreeMap::new()],
                declared: BTreeSet::new(),
                ret: sig.ret.clone(),
            };
            for (pname, pty) in &sig.params {
                checker.declare(pname, pty.clone(), checker.ast.node(node).span)?;
            }
            let body = *checker.ast.children(node).last().unwrap();
            checker.stmt(body)?;
        }
    }

    Ok(ProgramAst { ast, root, records, functions, function_order })
}

fn check_ty_exists(records: &BTreeMap<String, RecordInfo>, ty: &Ty, span: Span) -> Result<(), FrontendError> {
    if let Ty::Record(name) = ty {
        if !records.contains_key(name) {
            return Err(err(span, format!("unknown record type '{name}'")));
        }
    }
    Ok(())
}

struct Checker<'a> {
    ast: &'a mut Ast,
    records: &'a BTreeMap<String, RecordInfo>,
    functions: &'a BTreeMap<String, FuncSig>,
    scopes: Vec<BTreeMap<String, Ty>>,
    /// Names declared anywhere in the current function. Redeclaration,
    /// including shadowing in an inner scope, is rejected so that a name
    /// denotes one variable per function.
    declared: BTreeSet<String>,
    ret: Ty,
}

impl<'a> Checker<'a> {
    fn declare(&mut self, name: &str, ty: Ty, span: Span) -> Result<(), FrontendError> {
        if !self.declared.insert(name.to_string()) {
            return Err(err(span, format!("duplicate declaration of '{name}'")));
        }
        self.scopes.last_mut().unwrap().insert(name.to_string(), ty);
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<&Ty> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn stmt(&mut self, id: NodeId) -> Result<(), FrontendError> {
        let kind = self.ast.kind(id);
        let span = self.ast.node(id).span;
        let children: Vec<NodeId> = self.ast.children(id).to_vec();
        match kind {
            AstKind::Block => {
                self.scopes.push(BTreeMap::new());
                for c in children {
                    self.stmt(c)?;
                }
                self.scopes.pop();
            }
            AstKind::VarDecl => {
                let declared_ty = self.ast.ty(id).cloned().unwrap();
                check_ty_exists(self.records, &declared_ty, span)?;
                if let Some(&init) = children.first() {
                    let init_ty = self.expr(init)?;
                    if init_ty != declared_ty {
                        return Err(err(
                            span,
                            format!("initializer type mismatch: expected {declared_ty}, found {init_ty}"),
                        ));
                    }
                }
                let name = self.ast.text(id).to_string();
                self.declare(&name, declared_ty, span)?;
            }
            AstKind::SizedArrayDecl => {
                let size_ty = self.expr(children[0])?;
                if size_ty != Ty::Int {
                    return Err(err(span, format!("array size must be int, found {size_ty}")));
                }
                let name = self.ast.text(id).to_string();
                let ty = self.ast.ty(id).cloned().unwrap();
                self.declare(&name, ty, span)?;
            }
            AstKind::Assign => {
                self.check_lvalue(children[0])?;
                let lhs_ty = self.expr(children[0])?;
                let rhs_ty = self.expr(children[1])?;
                if lhs_ty != rhs_ty {
                    return Err(err(span, format!("assignment type mismatch: expected {lhs_ty}, found {rhs_ty}")));
                }
            }
            AstKind::If => {
                self.condition(children[0])?;
                self.stmt(children[1])?;
                if let Some(&alt) = children.get(2) {
                    self.stmt(alt)?;
                }
            }
            AstKind::While => {
                self.condition(children[0])?;
                self.stmt(children[1])?;
            }
            AstKind::For => {
                self.scopes.push(BTreeMap::new());
                self.stmt(children[0])?;
                self.condition(children[1])?;
                self.stmt(children[2])?;
                self.stmt(children[3])?;
                self.scopes.pop();
            }
            AstKind::Switch => {
                let scrut_ty = self.expr(children[0])?;
                if scrut_ty != Ty::Int {
                    return Err(err(span, format!("switch scrutinee must be int, found {scrut_ty}")));
                }
                let mut labels = BTreeSet::new();
                for &arm in &children[1..] {
                    if self.ast.kind(arm) == AstKind::CaseArm {
                        let text = self.ast.text(arm).to_string();
                        let value: i64 = text.parse().map_err(|_| {
                            err(self.ast.node(arm).span, format!("case label '{text}' out of range"))
                        })?;
                        if !labels.insert(value) {
                            return Err(err(self.ast.node(arm).span, format!("duplicate case label {value}")));
                        }
                    }
                    self.scopes.push(BTreeMap::new());
                    for &s in &self.ast.children(arm).to_vec() {
                        self.stmt(s)?;
                    }
                    self.scopes.pop();
                }
            }
            AstKind::Return => {
                let ty = self.expr(children[0])?;
                if ty != self.ret {
                    let ret = self.ret.clone();
                    return Err(err(span, format!("return type mismatch: expected {ret}, found {ty}")));
                }
            }
            AstKind::ExprStmt => {
                self.expr(children[0])?;
            }
            other => unreachable!("not a statement kind: {other:?}"),
        }
        Ok(())
    }

    fn condition(&mut self, id: NodeId) -> Result<(), FrontendError> {
        let ty = self.expr(id)?;
        if ty != Ty::Bool {
            return Err(err(self.ast.node(id).span, format!("condition must be bool, found {ty}")));
        }
        Ok(())
    }

    fn check_lvalue(&self, id: NodeId) -> Result<(), FrontendError> {
        match self.ast.kind(id) {
            AstKind::Local => Ok(()),
            AstKind::ArrayRef | AstKind::FieldRef => self.check_lvalue(self.ast.children(id)[0]),
            _ => Err(err(self.ast.node(id).span, "invalid assignment target".into())),
        }
    }

    /// Types an expression node, records the annotation, and returns it.
    fn expr(&mut self, id: NodeId) -> Result<Ty, FrontendError> {
        let kind = self.ast.kind(id);
        let span = self.ast.node(id).span;
        let children: Vec<NodeId> = self.ast.children(id).to_vec();
        let ty = match kind {
            AstKind::IntConst => Ty::Int,
            AstKind::FloatConst => Ty::Float,
            AstKind::BoolConst => Ty::Bool,
            AstKind::Local => {
                let name = self.ast.text(id).to_string();
                self.lookup(&name)
                    .cloned()
                    .ok_or_else(|| err(span, format!("undeclared identifier '{name}'")))?
            }
            AstKind::BinOp => {
                let op = self.ast.text(id).to_string();
                let lhs = self.expr(children[0])?;
                let rhs = self.expr(children[1])?;
                match op.as_str() {
                    "+" | "-" | "*" | "/" => {
                        if lhs == rhs && lhs.is_numeric() {
                            lhs
                        } else {
                            return Err(err(span, format!("operator '{op}' expects matching numeric operands, found {lhs} and {rhs}")));
                        }
                    }
                    "%" => {
                        if lhs == Ty::Int && rhs == Ty::Int {
                            Ty::Int
                        } else {
                            return Err(err(span, format!("operator '%' expects int operands, found {lhs} and {rhs}")));
                        }
                    }
                    "<" | "<=" | ">" | ">=" => {
                        if lhs == rhs && lhs.is_numeric() {
                            Ty::Bool
                        } else {
                            return Err(err(span, format!("operator '{op}' expects matching numeric operands, found {lhs} and {rhs}")));
                        }
                    }
                    "==" | "!=" => {
                        if lhs == rhs && matches!(lhs, Ty::Int | Ty::Float | Ty::Bool) {
                            Ty::Bool
                        } else {
                            return Err(err(span, format!("operator '{op}' expects matching scalar operands, found {lhs} and {rhs}")));
                        }
                    }
                    "&&" | "||" => {
                        if lhs == Ty::Bool && rhs == Ty::Bool {
                            Ty::Bool
                        } else {
                            return Err(err(span, format!("operator '{op}' expects bool operands, found {lhs} and {rhs}")));
                        }
                    }
                    other => unreachable!("unknown binary operator {other}"),
                }
            }
            AstKind::UnOp => {
                let op = self.ast.text(id).to_string();
                let operand = self.expr(children[0])?;
                match op.as_str() {
                    "-" if operand.is_numeric() => operand,
                    "!" if operand == Ty::Bool => Ty::Bool,
                    _ => return Err(err(span, format!("operator '{op}' cannot apply to {operand}"))),
                }
            }
            AstKind::Invoke => {
                let name = self.ast.text(id).to_string();
                let sig = self
                    .functions
                    .get(&name)
                    .cloned()
                    .ok_or_else(|| err(span, format!("call to undeclared function '{name}'")))?;
                if children.len() != sig.params.len() {
                    return Err(err(
                        span,
                        format!(
                            "call arity mismatch: '{name}' expects {} argument(s), got {}",
                            sig.params.len(),
                            children.len()
                        ),
                    ));
                }
                for (i, (&arg, (pname, pty))) in children.iter().zip(&sig.params).enumerate() {
                    let aty = self.expr(arg)?;
                    if &aty != pty {
                        return Err(err(
                            self.ast.node(arg).span,
                            format!("argument {} ('{pname}') of '{name}' expects {pty}, found {aty}", i + 1),
                        ));
                    }
                }
                sig.ret
            }
            AstKind::ArrayRef => {
                let base = self.expr(children[0])?;
                let idx = self.expr(children[1])?;
                if idx != Ty::Int {
                    return Err(err(span, format!("array index must be int, found {idx}")));
                }
                match base {
                    Ty::Array(b) => Ty::basic(b),
                    other => return Err(err(span, format!("cannot index into {other}"))),
                }
            }
            AstKind::FieldRef => {
                let base = self.expr(children[0])?;
                let field = self.ast.text(id).to_string();
                match base {
                    Ty::Record(rname) => {
                        let rec = self.records.get(&rname).expect("record checked at declaration");
                        rec.field_ty(&field)
                            .cloned()
                            .ok_or_else(|| err(span, format!("record '{rname}' has no field '{field}'")))?
                    }
                    other => return Err(err(span, format!("cannot access field '{field}' of {other}"))),
                }
            }
            AstKind::Cast => {
                let target = self.ast.ty(id).cloned().unwrap();
                check_ty_exists(self.records, &target, span)?;
                let source = self.expr(children[0])?;
                let legal = target == source || (target.is_numeric() && source.is_numeric());
                if !legal {
                    return Err(err(span, format!("invalid cast from {source} to {target}")));
                }
                target
            }
            other => unreachable!("not an expression kind: {other:?}"),
        };
        self.ast.set_ty(id, ty.clone());
        Ok(ty)
    }
}
