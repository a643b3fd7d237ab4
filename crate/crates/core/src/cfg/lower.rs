use super::tac::{Operand, TacFunc, TacInstr, TacKind, TacLabel, TacProgram};
use crate::frontend::{Ast, AstKind, NodeId, ProgramAst};

/// Lowers every function to a linear three-address stream. Calls are hoisted
/// into their own instructions (post-order, so arguments evaluate first) and
/// leave their result in a fresh `%tN`; conditions of `if` / `while` / `for`
/// lower short-circuit `&&` and `||` into nested conditional branches. In
/// value positions `&&` / `||` stay strict operand expressions.
pub fn lower_to_tac(prog: &ProgramAst) -> TacProgram {
    let mut funcs = Vec::new();
    for name in &prog.function_order {
        let sig = &prog.functions[name];
        let mut lw = Lowerer { ast: &prog.ast, instrs: Vec::new(), labels: Vec::new(), next_temp: 0 };
        let body = *prog.ast.children(sig.node).last().unwrap();
        lw.stmt(body);
        funcs.push(TacFunc { name: name.clone(), instrs: lw.instrs, labels: lw.labels });
    }
    TacProgram { funcs }
}

struct Lowerer<'a> {
    ast: &'a Ast,
    instrs: Vec<TacInstr>,
    labels: Vec<usize>,
    next_temp: u32,
}

impl<'a> Lowerer<'a> {
    fn fresh_label(&mut self) -> TacLabel {
        let l = TacLabel(self.labels.len() as u32);
        self.labels.push(usize::MAX);
        l
    }

    fn bind(&mut self, label: TacLabel) {
        self.labels[label.0 as usize] = self.instrs.len();
    }

    fn fresh_temp(&mut self) -> u32 {
        let t = self.next_temp;
        self.next_temp += 1;
        t
    }

    fn emit(&mut self, kind: TacKind, operands: Vec<Operand>, backing_ast: NodeId) {
        self.instrs.push(TacInstr { kind, operands, backing_ast });
    }

    /// Emits one call instruction per `Invoke` in `expr`, innermost first,
    /// and returns the temporaries keyed by invoke node. Skips subtrees of
    /// hoisted calls when the walk reaches them again via `skip`.
    fn hoist_calls(&mut self, expr: NodeId, temps: &mut Vec<(NodeId, u32)>) {
        for &child in self.ast.children(expr) {
            self.hoist_calls(child, temps);
        }
        if self.ast.kind(expr) == AstKind::Invoke {
            let callee = self.ast.text(expr).to_string();
            let mut operands = vec![Operand::Temp(0)]; // patched below
            for &arg in self.ast.children(expr) {
                operands.push(self.atom_or_expr(arg, temps));
            }
            let t = self.fresh_temp();
            operands[0] = Operand::Temp(t);
            self.emit(TacKind::Call { callee }, operands, expr);
            temps.push((expr, t));
        }
    }

    fn temp_for(&self, invoke: NodeId, temps: &[(NodeId, u32)]) -> u32 {
        temps
            .iter()
            .rev()
            .find(|(node, _)| *node == invoke)
            .map(|&(_, t)| t)
            .expect("call hoisted before use")
    }

    /// Atomic operand for a leaf-ish expression; composites stay `Expr`.
    fn atom_or_expr(&self, expr: NodeId, temps: &[(NodeId, u32)]) -> Operand {
        match self.ast.kind(expr) {
            AstKind::Local => Operand::Var(self.ast.text(expr).to_string()),
            AstKind::IntConst | AstKind::FloatConst | AstKind::BoolConst => {
                Operand::Const(self.ast.text(expr).to_string())
            }
            AstKind::Invoke => Operand::Temp(self.temp_for(expr, temps)),
            _ => Operand::Expr(expr),
        }
    }

    /// Flattens an rvalue into atomic reads: variables, constants, and the
    /// temporaries of hoisted calls, left to right.
    fn flatten_reads(&self, expr: NodeId, temps: &[(NodeId, u32)], out: &mut Vec<Operand>) {
        match self.ast.kind(expr) {
            AstKind::Local => out.push(Operand::Var(self.ast.text(expr).to_string())),
            AstKind::IntConst | AstKind::FloatConst | AstKind::BoolConst => {
                out.push(Operand::Const(self.ast.text(expr).to_string()))
            }
            AstKind::Invoke => out.push(Operand::Temp(self.temp_for(expr, temps))),
            _ => {
                for &child in self.ast.children(expr) {
                    self.flatten_reads(child, temps, out);
                }
            }
        }
    }

    /// Lowers one statement. Returns whether control can fall through to the
    /// next statement; callers skip emitting follow-up jumps after a
    /// non-falling statement so no dead instructions are produced.
    fn stmt(&mut self, id: NodeId) -> bool {
        let kind = self.ast.kind(id);
        let children: Vec<NodeId> = self.ast.children(id).to_vec();
        match kind {
            AstKind::Block => {
                let mut falls = true;
                for &child in &children {
                    // Statements after a return/jump are lowered too; the CFG
                    // builder reports them as unreachable.
                    falls = self.stmt(child);
                }
                falls
            }
            AstKind::VarDecl => {
                let name = self.ast.text(id).to_string();
                let mut operands = vec![Operand::Var(name)];
                if let Some(&init) = children.first() {
                    let mut temps = Vec::new();
                    self.hoist_calls(init, &mut temps);
                    self.flatten_reads(init, &temps, &mut operands);
                }
                self.emit(TacKind::DefStmt, operands, id);
                true
            }
            AstKind::SizedArrayDecl => {
                let name = self.ast.text(id).to_string();
                let mut temps = Vec::new();
                self.hoist_calls(children[0], &mut temps);
                let mut operands = vec![Operand::Var(name)];
                self.flatten_reads(children[0], &temps, &mut operands);
                self.emit(TacKind::DefStmt, operands, id);
                true
            }
            AstKind::Assign => {
                let (lvalue, rhs) = (children[0], children[1]);
                let mut temps = Vec::new();
                self.hoist_calls(rhs, &mut temps);
                let dst = if self.ast.kind(lvalue) == AstKind::Local {
                    Operand::Var(self.ast.text(lvalue).to_string())
                } else {
                    // Array/field write: hoist calls in the index chain too.
                    self.hoist_calls(lvalue, &mut temps);
                    Operand::Expr(lvalue)
                };
                let mut operands = vec![dst];
                self.flatten_reads(rhs, &temps, &mut operands);
                self.emit(TacKind::DefStmt, operands, id);
                true
            }
            AstKind::ExprStmt => {
                let expr = children[0];
                let mut temps = Vec::new();
                self.hoist_calls(expr, &mut temps);
                if self.ast.kind(expr) != AstKind::Invoke {
                    // A side-effect-free statement still occupies a slot so
                    // the block AST keeps it.
                    let t = self.fresh_temp();
                    let mut operands = vec![Operand::Temp(t)];
                    self.flatten_reads(expr, &temps, &mut operands);
                    self.emit(TacKind::DefStmt, operands, expr);
                }
                true
            }
            AstKind::If => {
                let then_label = self.fresh_label();
                let end_label = self.fresh_label();
                let else_label = if children.len() == 3 { self.fresh_label() } else { end_label };
                self.condition(children[0], then_label, else_label);
                self.bind(then_label);
                let then_falls = self.stmt(children[1]);
                if let Some(&alt) = children.get(2) {
                    if then_falls {
                        self.emit(TacKind::Jump { to: end_label }, Vec::new(), id);
                    }
                    self.bind(else_label);
                    self.stmt(alt);
                }
                self.bind(end_label);
                true
            }
            AstKind::While => {
                let head = self.fresh_label();
                let body = self.fresh_label();
                let end = self.fresh_label();
                self.bind(head);
                self.condition(children[0], body, end);
                self.bind(body);
                if self.stmt(children[1]) {
                    self.emit(TacKind::Jump { to: head }, Vec::new(), id);
                }
                self.bind(end);
                true
            }
            AstKind::For => {
                let (init, cond, step, body) = (children[0], children[1], children[2], children[3]);
                self.stmt(init);
                let head = self.fresh_label();
                let body_label = self.fresh_label();
                let end = self.fresh_label();
                self.bind(head);
                self.condition(cond, body_label, end);
                self.bind(body_label);
                if self.stmt(body) {
                    self.stmt(step);
                    self.emit(TacKind::Jump { to: head }, Vec::new(), id);
                }
                self.bind(end);
                true
            }
            AstKind::Switch => {
                let scrutinee = children[0];
                let mut temps = Vec::new();
                self.hoist_calls(scrutinee, &mut temps);
                let scrut_op = self.atom_or_expr(scrutinee, &temps);
                let end = self.fresh_label();
                let mut arms = Vec::new();
                let mut default_to = end;
                let mut arm_labels = Vec::new();
                for &arm in &children[1..] {
                    let label = self.fresh_label();
                    arm_labels.push(label);
                    if self.ast.kind(arm) == AstKind::CaseArm {
                        let value: i64 = self.ast.text(arm).parse().expect("checked at resolution");
                        arms.push((value, label));
                    } else {
                        default_to = label;
                    }
                }
                self.emit(TacKind::Switch { arms, default_to }, vec![scrut_op], scrutinee);
                for (&arm, &label) in children[1..].iter().zip(&arm_labels) {
                    self.bind(label);
                    let mut falls = true;
                    for &s in &self.ast.children(arm).to_vec() {
                        falls = self.stmt(s);
                    }
                    // No fallthrough between arms.
                    if falls {
                        self.emit(TacKind::Jump { to: end }, Vec::new(), arm);
                    }
                }
                self.bind(end);
                true
            }
            AstKind::Return => {
                let value = children[0];
                let mut temps = Vec::new();
                self.hoist_calls(value, &mut temps);
                let op = self.atom_or_expr(value, &temps);
                self.emit(TacKind::Return, vec![op], id);
                false
            }
            other => unreachable!("not a statement kind: {other:?}"),
        }
    }

    /// Branch on `cond`, short-circuiting `&&` / `||` and folding `!` into a
    /// target swap.
    fn condition(&mut self, cond: NodeId, then_to: TacLabel, else_to: TacLabel) {
        match self.ast.kind(cond) {
            AstKind::BinOp if self.ast.text(cond) == "&&" => {
                let children = self.ast.children(cond).to_vec();
                let mid = self.fresh_label();
                self.condition(children[0], mid, else_to);
                self.bind(mid);
                self.condition(children[1], then_to, else_to);
            }
            AstKind::BinOp if self.ast.text(cond) == "||" => {
                let children = self.ast.children(cond).to_vec();
                let mid = self.fresh_label();
                self.condition(children[0], then_to, mid);
                self.bind(mid);
                self.condition(children[1], then_to, else_to);
            }
            AstKind::UnOp if self.ast.text(cond) == "!" => {
                let operand = self.ast.children(cond)[0];
                self.condition(operand, else_to, then_to);
            }
            _ => {
                let mut temps = Vec::new();
                self.hoist_calls(cond, &mut temps);
                let op = self.atom_or_expr(cond, &temps);
                self.emit(TacKind::BranchCond { then_to, else_to }, vec![op], cond);
            }
        }
    }
}
