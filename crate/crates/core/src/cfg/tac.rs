use crate::frontend::{expr_to_string, Ast, AstKind, NodeId};

/// Branch / jump target. Before CFG construction this indexes the function's
/// label table; [`super::build_cfg`] rewrites every target to the id of the
/// block it resolved to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TacLabel(pub u32);

/// An instruction operand. Destinations come first by convention; composite
/// expressions stay as references into the AST arena.
#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    /// Named local or parameter.
    Var(String),
    /// Compiler temporary `%tN`; excluded from def/use sets.
    Temp(u32),
    /// Literal, by its source text.
    Const(String),
    /// Composite expression subtree (condition, return value, argument, or an
    /// array/field lvalue destination).
    Expr(NodeId),
}

impl Operand {
    pub fn text(&self, ast: &Ast) -> String {
        match self {
            Operand::Var(name) => name.clone(),
            Operand::Temp(n) => format!("%t{n}"),
            Operand::Const(text) => text.clone(),
            Operand::Expr(id) => expr_to_string(ast, *id),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TacKind {
    /// Operands `[dst, reads...]`. `dst` is a [`Operand::Var`] (killing
    /// definition) or an [`Operand::Expr`] lvalue (array/field write: defines
    /// the whole variable but kills nothing). Entry/exit markers are
    /// `DefStmt`s backed by the function-declaration node; an entry marker's
    /// operands are the parameters it defines.
    DefStmt,
    /// Operands `[cond]`, exactly one condition operand.
    BranchCond { then_to: TacLabel, else_to: TacLabel },
    /// Operands `[scrutinee]`. One target per case arm plus the default.
    Switch { arms: Vec<(i64, TacLabel)>, default_to: TacLabel },
    /// Operands `[dst-temp, args...]`.
    Call { callee: String },
    /// Operands `[value]`.
    Return,
    /// Operands `[]`.
    Jump { to: TacLabel },
}

/// One three-address instruction. `backing_ast` always points at the AST
/// subtree the instruction came from and is what block ASTs are built from.
#[derive(Debug, Clone, PartialEq)]
pub struct TacInstr {
    pub kind: TacKind,
    pub operands: Vec<Operand>,
    pub backing_ast: NodeId,
}

impl TacInstr {
    pub fn is_terminator(&self) -> bool {
        matches!(
            self.kind,
            TacKind::BranchCond { .. } | TacKind::Switch { .. } | TacKind::Return | TacKind::Jump { .. }
        )
    }

    /// Entry/exit markers are definition statements backed by a
    /// function-declaration node.
    pub fn is_marker(&self, ast: &Ast) -> bool {
        self.kind == TacKind::DefStmt && ast.kind(self.backing_ast) == AstKind::FuncDecl
    }

    /// Variables this instruction defines, with a flag telling whether the
    /// definition kills earlier ones. Scalar writes kill; array and field
    /// writes define the whole variable but leave earlier definitions live.
    /// Temporaries never appear.
    pub fn defined_vars(&self, ast: &Ast) -> Vec<(String, bool)> {
        if self.is_marker(ast) {
            return self
                .operands
                .iter()
                .filter_map(|op| match op {
                    Operand::Var(name) => Some((name.clone(), true)),
                    _ => None,
                })
                .collect();
        }
        match self.kind {
            TacKind::DefStmt => match self.operands.first() {
                Some(Operand::Var(name)) => vec![(name.clone(), true)],
                Some(Operand::Expr(lvalue)) => vec![(lvalue_base(ast, *lvalue), false)],
                _ => Vec::new(),
            },
            // Call results land in temporaries.
            _ => Vec::new(),
        }
    }

    /// Named variables this instruction reads, in operand order (duplicates
    /// possible). Temporaries are excluded.
    pub fn used_vars(&self, ast: &Ast) -> Vec<String> {
        if self.is_marker(ast) {
            return Vec::new();
        }
        let mut out = Vec::new();
        match self.kind {
            TacKind::DefStmt | TacKind::Call { .. } => {
                // Skip the destination slot, but an lvalue destination still
                // reads its index expressions.
                if let Some(Operand::Expr(lvalue)) = self.operands.first() {
                    collect_reads_except_base(ast, *lvalue, &mut out);
                }
                for op in self.operands.iter().skip(1) {
                    operand_reads(ast, op, &mut out);
                }
            }
            TacKind::BranchCond { .. } | TacKind::Switch { .. } | TacKind::Return => {
                for op in &self.operands {
                    operand_reads(ast, op, &mut out);
                }
            }
            TacKind::Jump { .. } => {}
        }
        out
    }

    /// Single-line rendering for CFG dumps.
    pub fn text(&self, ast: &Ast) -> String {
        if self.is_marker(ast) {
            let params: Vec<String> = self.operands.iter().map(|op| op.text(ast)).collect();
            return format!("marker {}({})", ast.text(self.backing_ast), params.join(", "));
        }
        match &self.kind {
            TacKind::DefStmt => match ast.kind(self.backing_ast) {
                AstKind::VarDecl => {
                    let name = ast.text(self.backing_ast);
                    match ast.children(self.backing_ast).first() {
                        Some(&init) => format!("{name} = {}", expr_to_string(ast, init)),
                        None => format!("decl {name}"),
                    }
                }
                AstKind::SizedArrayDecl => {
                    let size = ast.children(self.backing_ast)[0];
                    format!("{} = array[{}]", ast.text(self.backing_ast), expr_to_string(ast, size))
                }
                AstKind::Assign => {
                    let children = ast.children(self.backing_ast);
                    format!("{} = {}", expr_to_string(ast, children[0]), expr_to_string(ast, children[1]))
                }
                // Bare expression statement materialized into a temporary.
                _ => format!("{} = {}", self.operands[0].text(ast), expr_to_string(ast, self.backing_ast)),
            },
            TacKind::BranchCond { then_to, else_to } => {
                format!("if {} -> {} else -> {}", self.operands[0].text(ast), then_to.0, else_to.0)
            }
            TacKind::Switch { arms, default_to } => {
                let mut parts: Vec<String> =
                    arms.iter().map(|(v, l)| format!("{v} -> {}", l.0)).collect();
                parts.push(format!("default -> {}", default_to.0));
                format!("switch {} [{}]", self.operands[0].text(ast), parts.join(", "))
            }
            TacKind::Call { callee } => {
                let args: Vec<String> = self.operands.iter().skip(1).map(|op| op.text(ast)).collect();
                format!("{} = call {callee}({})", self.operands[0].text(ast), args.join(", "))
            }
            TacKind::Return => format!("return {}", self.operands[0].text(ast)),
            TacKind::Jump { to } => format!("goto {}", to.0),
        }
    }
}

fn operand_reads(ast: &Ast, op: &Operand, out: &mut Vec<String>) {
    match op {
        Operand::Var(name) => out.push(name.clone()),
        Operand::Expr(id) => collect_reads(ast, *id, out),
        Operand::Temp(_) | Operand::Const(_) => {}
    }
}

/// Local names read inside an expression subtree, left to right. Call
/// subtrees are skipped: their reads belong to the hoisted call instruction.
fn collect_reads(ast: &Ast, id: NodeId, out: &mut Vec<String>) {
    match ast.kind(id) {
        AstKind::Local => out.push(ast.text(id).to_string()),
        AstKind::Invoke => {}
        _ => {
            for &c in ast.children(id) {
                collect_reads(ast, c, out);
            }
        }
    }
}

/// Root variable of an lvalue chain like `a[i]` or `p.f[i]`.
fn lvalue_base(ast: &Ast, id: NodeId) -> String {
    match ast.kind(id) {
        AstKind::Local => ast.text(id).to_string(),
        AstKind::ArrayRef | AstKind::FieldRef => lvalue_base(ast, ast.children(id)[0]),
        other => unreachable!("not an lvalue kind: {other:?}"),
    }
}

/// Reads in an lvalue destination: index expressions count, the written base
/// variable does not.
fn collect_reads_except_base(ast: &Ast, id: NodeId, out: &mut Vec<String>) {
    match ast.kind(id) {
        AstKind::Local => {}
        AstKind::ArrayRef => {
            collect_reads_except_base(ast, ast.children(id)[0], out);
            collect_reads(ast, ast.children(id)[1], out);
        }
        AstKind::FieldRef => collect_reads_except_base(ast, ast.children(id)[0], out),
        other => unreachable!("not an lvalue kind: {other:?}"),
    }
}

/// Lowered instruction stream of one function, before block formation.
#[derive(Debug, Clone)]
pub struct TacFunc {
    pub name: String,
    pub instrs: Vec<TacInstr>,
    /// Label table: label id to instruction index. A label may sit one past
    /// the last instruction (a join point at the function's end).
    pub labels: Vec<usize>,
}

/// All lowered functions of a compilation unit, in source order.
#[derive(Debug, Clone)]
pub struct TacProgram {
    pub funcs: Vec<TacFunc>,
}
