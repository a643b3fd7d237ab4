//! Three-address lowering and control-flow graph construction.
//!
//! [`lower_to_tac`] flattens each function body into a linear instruction
//! stream: calls are hoisted into their own instructions with `%tN` result
//! temporaries, short-circuit `&&` / `||` in branch conditions become nested
//! conditional branches, and every instruction keeps a reference to the AST
//! subtree it came from. [`build_cfg`] then splits the streams into maximal
//! basic blocks (leaders are the function entry, branch targets, and the
//! instruction after a terminator), adds one synthetic entry and exit block
//! per function, and emits the typed flow edges:
//!
//! * `SeqExec` for fall-through, jumps, and returns into the exit block,
//! * `CondTrue` / `CondFalse` from conditional branches,
//! * `SwitchBranch` from a switch to each arm and its default target,
//! * `CallFlow` from a call-site block to the callee's entry block (callees
//!   defined in the same compilation unit only; no return edges),
//! * `DataFlow` is reserved for the reaching-definitions pass,
//! * `ExceptionFlow` is reserved in the edge vocabulary and never emitted.
//!
//! Block ids are dense over the whole compilation unit. Construction fails if
//! any block is unreachable from its function's entry via control edges.

mod build;
mod lower;
mod tac;

pub use build::{build_cfg, reverse_graph, CfgError};
pub use lower::lower_to_tac;
pub use tac::{Operand, TacFunc, TacInstr, TacKind, TacLabel, TacProgram};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frontend::ProgramAst;

/// Dense block index over one compilation unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The seven flow edge kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    SeqExec,
    CondTrue,
    CondFalse,
    SwitchBranch,
    DataFlow,
    CallFlow,
    ExceptionFlow,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 7] = [
        EdgeKind::SeqExec,
        EdgeKind::CondTrue,
        EdgeKind::CondFalse,
        EdgeKind::SwitchBranch,
        EdgeKind::DataFlow,
        EdgeKind::CallFlow,
        EdgeKind::ExceptionFlow,
    ];

    /// Control edges propagate facts in the dataflow solver; `DataFlow` and
    /// `CallFlow` do not.
    pub fn is_control(self) -> bool {
        matches!(
            self,
            EdgeKind::SeqExec | EdgeKind::CondTrue | EdgeKind::CondFalse | EdgeKind::SwitchBranch
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::SeqExec => "SeqExec",
            EdgeKind::CondTrue => "CondTrue",
            EdgeKind::CondFalse => "CondFalse",
            EdgeKind::SwitchBranch => "SwitchBranch",
            EdgeKind::DataFlow => "DataFlow",
            EdgeKind::CallFlow => "CallFlow",
            EdgeKind::ExceptionFlow => "ExceptionFlow",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One directed, typed edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowEdge {
    pub src: BlockId,
    pub dst: BlockId,
    pub kind: EdgeKind,
}

impl FlowEdge {
    pub fn new(src: BlockId, dst: BlockId, kind: EdgeKind) -> FlowEdge {
        FlowEdge { src, dst, kind }
    }
}

/// A maximal basic block. Instructions are non-empty except that synthetic
/// entry/exit blocks hold a single marker pseudo-instruction; a terminator,
/// if present, is last.
#[derive(Debug, Clone)]
pub struct BasicBlock {
    pub id: BlockId,
    pub function: String,
    pub instrs: Vec<TacInstr>,
}

/// Entry and exit block of one function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionBlocks {
    pub name: String,
    pub entry: BlockId,
    pub exit: BlockId,
}

/// Control-flow graph of a whole compilation unit.
#[derive(Debug, Clone)]
pub struct Cfg {
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<FlowEdge>,
    /// Functions in source order.
    pub functions: Vec<FunctionBlocks>,
}

impl Cfg {
    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.blocks[id.0 as usize]
    }

    pub fn function(&self, name: &str) -> Option<&FunctionBlocks> {
        self.functions.iter().find(|f| f.name == name)
    }

    fn role(&self, id: BlockId) -> Option<&'static str> {
        for f in &self.functions {
            if f.entry == id {
                return Some("entry");
            }
            if f.exit == id {
                return Some("exit");
            }
        }
        None
    }

    /// Debug dump: blocks with instruction text, then one `src -> dst [kind]`
    /// line per edge. Stable; used by golden tests.
    pub fn dump(&self, prog: &ProgramAst) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            out.push_str(&format!("block {} [{}]", block.id, block.function));
            if let Some(role) = self.role(block.id) {
                out.push_str(&format!(" ({role})"));
            }
            out.push_str(":\n");
            for instr in &block.instrs {
                out.push_str("    ");
                out.push_str(&instr.text(&prog.ast));
                out.push('\n');
            }
        }
        out.push_str("edges:\n");
        for e in &self.edges {
            out.push_str(&format!("{} -> {} [{}]\n", e.src, e.dst, e.kind));
        }
        out
    }
}
