//! Per-block tree construction and the augmentation pass.

use serde::{Deserialize, Serialize};

use crate::cfg::{BasicBlock, BlockId, TacInstr, TacKind};
use crate::frontend::{AstKind, NodeId, ProgramAst, Ty};

use super::GraphError;

/// One node of a per-block tree. Inner nodes carry construct labels
/// (`DefStmt`, `BOp`, ...); leaves carry terminal tokens (subtokens, type
/// names, digits, operators). Freshly built nodes may hold a pending
/// payload that the augmentation pass expands into extra leaves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugNode {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<AugNode>,
    #[serde(skip)]
    pub augmented: bool,
    #[serde(skip)]
    payload: Option<Payload>,
}

/// Structural equality; the augmentation bookkeeping does not participate.
impl PartialEq for AugNode {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.children == other.children
    }
}
impl Eq for AugNode {}

impl AugNode {
    fn new(label: impl Into<String>) -> AugNode {
        AugNode { label: label.into(), children: Vec::new(), augmented: false, payload: None }
    }

    fn with_payload(label: impl Into<String>, payload: Payload) -> AugNode {
        AugNode { payload: Some(payload), ..AugNode::new(label) }
    }

    fn leaf(text: impl Into<String>) -> AugNode {
        AugNode { augmented: true, ..AugNode::new(text) }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Pre-order traversal of every label in the subtree.
    pub fn labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node.label.as_str());
            for child in node.children.iter().rev() {
                stack.push(child);
            }
        }
        out
    }

    /// Marks a deserialized tree as augmented (stored trees always are).
    pub(super) fn mark_augmented(&mut self) {
        self.augmented = true;
        for child in &mut self.children {
            child.mark_augmented();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Payload {
    /// A variable occurrence: name subtokens then type leaves.
    Var { name: String, ty: Ty },
    /// A field access: field-name subtokens then the field's type leaves.
    Field { name: String, ty: Ty },
    IntLit(String),
    FloatLit(String),
    BoolLit(bool),
    /// Source and target types of a cast, expanded in that order.
    CastTypes { src: Ty, dst: Ty },
    /// A callee: name subtokens then return-type leaves.
    Method { name: String, ret: Ty },
}

/// The tree carried by one basic block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockAst {
    pub block: BlockId,
    pub root: AugNode,
}

/// Splits an identifier at underscores and CamelCase boundaries, keeping
/// the original casing. An upper-case run followed by a lower-case letter
/// starts a new segment, so acronym prefixes stay whole.
pub fn split_camel(ident: &str) -> Vec<String> {
    let chars: Vec<char> = ident.chars().collect();
    let mut segments = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' {
            if !current.is_empty() {
                segments.push(std::mem::take(&mut current));
            }
            continue;
        }
        if let Some(prev) = current.chars().last() {
            let next_is_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            let boundary = c.is_uppercase()
                && (prev.is_lowercase()
                    || prev.is_numeric()
                    || (prev.is_uppercase() && next_is_lower));
            if boundary {
                segments.push(std::mem::take(&mut current));
            }
        }
        current.push(c);
    }
    if !current.is_empty() {
        segments.push(current);
    }
    if segments.is_empty() {
        // Identifiers of only underscores keep their spelling.
        segments.push(ident.to_string());
    }
    segments
}

/// Splits a numeric literal into one leaf token per character of its
/// canonical decimal rendering; `-` and `.` become their own leaves.
pub fn decompose_constant(literal: &str) -> Vec<String> {
    let canonical = if literal.contains('.') {
        literal.parse::<f64>().map(|v| format!("{v:?}")).unwrap_or_else(|_| literal.to_string())
    } else {
        literal.parse::<i64>().map(|v| v.to_string()).unwrap_or_else(|_| literal.to_string())
    };
    canonical.chars().map(String::from).collect()
}

fn type_leaves(ty: &Ty) -> Vec<String> {
    match ty {
        Ty::Record(name) => split_camel(name),
        other => vec![other.to_string()],
    }
}

fn type_subtree(ty: &Ty) -> AugNode {
    match ty {
        Ty::Record(name) => {
            let mut node = AugNode::new("Record");
            node.children = split_camel(name).into_iter().map(AugNode::leaf).collect();
            node.augmented = true;
            node
        }
        other => AugNode::leaf(other.to_string()),
    }
}

/// Builds the augmented tree for one basic block: a synthetic `Block` root
/// with one subtree per instruction, in instruction order.
pub fn augment_block_ast(prog: &ProgramAst, block: &BasicBlock) -> BlockAst {
    let mut root = AugNode::new("Block");
    for instr in &block.instrs {
        root.children.push(instr_node(prog, instr));
    }
    let mut ast = BlockAst { block: block.id, root };
    augment(&mut ast).expect("freshly built tree cannot be augmented already");
    ast
}

/// Expands pending payloads into leaves and flags every node. A tree that
/// has already been through this pass is rejected.
pub fn augment(ast: &mut BlockAst) -> Result<(), GraphError> {
    if ast.root.augmented {
        return Err(GraphError::AlreadyAugmented { block: ast.block });
    }
    expand(&mut ast.root);
    Ok(())
}

fn expand(node: &mut AugNode) {
    node.augmented = true;
    for child in &mut node.children {
        expand(child);
    }
    let Some(payload) = node.payload.take() else { return };
    match payload {
        Payload::Var { name, ty } | Payload::Field { name, ty } => {
            node.children.extend(split_camel(&name).into_iter().map(AugNode::leaf));
            node.children.extend(type_leaves(&ty).into_iter().map(AugNode::leaf));
        }
        Payload::IntLit(text) | Payload::FloatLit(text) => {
            node.children.extend(decompose_constant(&text).into_iter().map(AugNode::leaf));
        }
        Payload::BoolLit(value) => {
            node.children.push(AugNode::leaf(if value { "true" } else { "false" }));
        }
        Payload::CastTypes { src, dst } => {
            node.children.push(type_subtree(&src));
            node.children.push(type_subtree(&dst));
        }
        Payload::Method { name, ret } => {
            node.children.extend(split_camel(&name).into_iter().map(AugNode::leaf));
            node.children.extend(type_leaves(&ret).into_iter().map(AugNode::leaf));
        }
    }
}

fn instr_node(prog: &ProgramAst, instr: &TacInstr) -> AugNode {
    let ast = &prog.ast;
    if instr.is_marker(ast) {
        return AugNode::new("FuncDecl");
    }
    let backing = instr.backing_ast;
    match &instr.kind {
        TacKind::DefStmt => match ast.kind(backing) {
            AstKind::VarDecl | AstKind::SizedArrayDecl => {
                let mut node = AugNode::new("DefStmt");
                node.children.push(declared_var(prog, backing));
                // VarDecl: optional initializer; sized array: extent.
                for &child in ast.children(backing) {
                    node.children.push(expr_node(prog, child));
                }
                node
            }
            AstKind::Assign => {
                let mut node = AugNode::new("DefStmt");
                for &child in ast.children(backing) {
                    node.children.push(expr_node(prog, child));
                }
                node
            }
            // Value computed and discarded by an expression statement.
            _ => expr_node(prog, backing),
        },
        TacKind::BranchCond { .. } => {
            let mut node = AugNode::new("If");
            node.children.push(expr_node(prog, backing));
            node
        }
        TacKind::Switch { .. } => {
            let mut node = AugNode::new("Switch");
            node.children.push(expr_node(prog, backing));
            node
        }
        TacKind::Call { callee } => {
            let mut node = AugNode::new("Invoke");
            node.children.push(method_node(prog, callee));
            for &arg in ast.children(backing) {
                node.children.push(expr_node(prog, arg));
            }
            node
        }
        TacKind::Return => {
            let mut node = AugNode::new("ReturnOp");
            for &child in ast.children(backing) {
                node.children.push(expr_node(prog, child));
            }
            node
        }
        TacKind::Jump { .. } => AugNode::new("Goto"),
    }
}

fn declared_var(prog: &ProgramAst, decl: NodeId) -> AugNode {
    let name = prog.ast.text(decl).to_string();
    let ty = prog.ast.ty(decl).expect("declarations carry their type").clone();
    AugNode::with_payload("Local", Payload::Var { name, ty })
}

fn method_node(prog: &ProgramAst, callee: &str) -> AugNode {
    let ret = prog.functions[callee].ret.clone();
    AugNode::with_payload("Method", Payload::Method { name: callee.to_string(), ret })
}

fn expr_node(prog: &ProgramAst, id: NodeId) -> AugNode {
    let ast = &prog.ast;
    let kind = ast.kind(id);
    let label = kind.label();
    match kind {
        AstKind::Local => AugNode::with_payload(
            label,
            Payload::Var {
                name: ast.text(id).to_string(),
                ty: ast.ty(id).expect("resolved").clone(),
            },
        ),
        AstKind::IntConst => AugNode::with_payload(label, Payload::IntLit(ast.text(id).to_string())),
        AstKind::FloatConst => {
            AugNode::with_payload(label, Payload::FloatLit(ast.text(id).to_string()))
        }
        AstKind::BoolConst => {
            AugNode::with_payload(label, Payload::BoolLit(ast.text(id) == "true"))
        }
        AstKind::BinOp | AstKind::UnOp => {
            let mut node = AugNode::new(label);
            for &child in ast.children(id) {
                node.children.push(expr_node(prog, child));
            }
            node.children.push(AugNode::leaf(ast.text(id)));
            node
        }
        AstKind::ArrayRef => {
            let mut node = AugNode::new(label);
            for &child in ast.children(id) {
                node.children.push(expr_node(prog, child));
            }
            node
        }
        AstKind::FieldRef => {
            let mut node = AugNode::with_payload(
                label,
                Payload::Field {
                    name: ast.text(id).to_string(),
                    ty: ast.ty(id).expect("resolved").clone(),
                },
            );
            node.children.push(expr_node(prog, ast.children(id)[0]));
            node
        }
        // Nested calls were hoisted into their own instructions; at the use
        // site only the callee signature remains.
        AstKind::Invoke => {
            let mut node = AugNode::new(label);
            node.children.push(method_node(prog, ast.text(id)));
            node
        }
        AstKind::Cast => {
            let operand = ast.children(id)[0];
            let mut node = AugNode::with_payload(
                label,
                Payload::CastTypes {
                    src: ast.ty(operand).expect("resolved").clone(),
                    dst: ast.ty(id).expect("resolved").clone(),
                },
            );
            node.children.push(expr_node(prog, operand));
            node
        }
        other => {
            debug_assert!(false, "not an expression: {other:?}");
            AugNode::new(other.label())
        }
    }
}
