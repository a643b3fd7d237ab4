use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use super::tac::{Operand, TacInstr, TacKind, TacLabel, TacProgram};
use super::{BasicBlock, BlockId, Cfg, EdgeKind, FlowEdge, FunctionBlocks};
use crate::frontend::ProgramAst;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CfgError {
    /// A block cannot be reached from its function's entry via control edges.
    #[error("{line}:{col}: error: unreachable code in function '{function}'")]
    Unreachable { function: String, line: u32, col: u32 },
}

/// Builds the control-flow graph of a lowered compilation unit. Every branch
/// and jump target inside the returned blocks is rewritten from a label to
/// the id of the block it resolved to.
pub fn build_cfg(prog: &ProgramAst, tac: &TacProgram) -> Result<Cfg, CfgError> {
    let mut blocks: Vec<BasicBlock> = Vec::new();
    let mut edges: Vec<FlowEdge> = Vec::new();
    let mut seen_edges: BTreeSet<FlowEdge> = BTreeSet::new();
    let mut functions: Vec<FunctionBlocks> = Vec::new();
    // Call sites are connected after all entries are known.
    let mut call_sites: Vec<(BlockId, String)> = Vec::new();

    let push_edge = |edges: &mut Vec<FlowEdge>, seen: &mut BTreeSet<FlowEdge>, e: FlowEdge| {
        if seen.insert(e) {
            edges.push(e);
        }
    };

    for func in &tac.funcs {
        let sig = &prog.functions[&func.name];
        let n = func.instrs.len();

        // Leaders: index 0, referenced branch targets, and the instruction
        // after a terminator. A target at index n refers to the exit block.
        let mut leaders: BTreeSet<usize> = BTreeSet::new();
        if n > 0 {
            leaders.insert(0);
        }
        for (i, instr) in func.instrs.iter().enumerate() {
            for target in instr_targets(instr) {
                let pos = func.labels[target.0 as usize];
                if pos < n {
                    leaders.insert(pos);
                }
            }
            if instr.is_terminator() && i + 1 < n {
                leaders.insert(i + 1);
            }
        }

        let entry_id = BlockId(blocks.len() as u32);
        let starts: Vec<usize> = leaders.iter().copied().collect();
        let exit_id = BlockId(entry_id.0 + 1 + starts.len() as u32);
        let mut start_to_block: BTreeMap<usize, BlockId> = BTreeMap::new();
        for (k, &start) in starts.iter().enumerate() {
            start_to_block.insert(start, BlockId(entry_id.0 + 1 + k as u32));
        }
        let resolve = |label: TacLabel| -> BlockId {
            let pos = func.labels[label.0 as usize];
            if pos >= n {
                exit_id
            } else {
                start_to_block[&pos]
            }
        };

        let entry_marker = TacInstr {
            kind: TacKind::DefStmt,
            operands: sig.params.iter().map(|(name, _)| Operand::Var(name.clone())).collect(),
            backing_ast: sig.node,
        };
        let exit_marker =
            TacInstr { kind: TacKind::DefStmt, operands: Vec::new(), backing_ast: sig.node };

        blocks.push(BasicBlock { id: entry_id, function: func.name.clone(), instrs: vec![entry_marker] });
        let first_body = start_to_block.get(&0).copied().unwrap_or(exit_id);
        push_edge(&mut edges, &mut seen_edges, FlowEdge::new(entry_id, first_body, EdgeKind::SeqExec));

        for (k, &start) in starts.iter().enumerate() {
            let end = starts.get(k + 1).copied().unwrap_or(n);
            let id = start_to_block[&start];
            let mut instrs: Vec<TacInstr> = Vec::new();
            for instr in &func.instrs[start..end] {
                let mut instr = instr.clone();
                // Rewrite label targets to block ids.
                match &mut instr.kind {
                    TacKind::BranchCond { then_to, else_to } => {
                        *then_to = TacLabel(resolve(*then_to).0);
                        *else_to = TacLabel(resolve(*else_to).0);
                    }
                    TacKind::Switch { arms, default_to } => {
                        for (_, target) in arms.iter_mut() {
                            *target = TacLabel(resolve(*target).0);
                        }
                        *default_to = TacLabel(resolve(*default_to).0);
                    }
                    TacKind::Jump { to } => *to = TacLabel(resolve(*to).0),
                    _ => {}
                }
                if let TacKind::Call { callee } = &instr.kind {
                    call_sites.push((id, callee.clone()));
                }
                instrs.push(instr);
            }

            match instrs.last().map(|i| i.kind.clone()) {
                Some(TacKind::BranchCond { then_to, else_to }) => {
                    push_edge(&mut edges, &mut seen_edges, FlowEdge::new(id, BlockId(then_to.0), EdgeKind::CondTrue));
                    push_edge(&mut edges, &mut seen_edges, FlowEdge::new(id, BlockId(else_to.0), EdgeKind::CondFalse));
                }
                Some(TacKind::Switch { arms, default_to }) => {
                    for (_, target) in &arms {
                        push_edge(&mut edges, &mut seen_edges, FlowEdge::new(id, BlockId(target.0), EdgeKind::SwitchBranch));
                    }
                    push_edge(&mut edges, &mut seen_edges, FlowEdge::new(id, BlockId(default_to.0), EdgeKind::SwitchBranch));
                }
                Some(TacKind::Jump { to }) => {
                    push_edge(&mut edges, &mut seen_edges, FlowEdge::new(id, BlockId(to.0), EdgeKind::SeqExec));
                }
                Some(TacKind::Return) => {
                    push_edge(&mut edges, &mut seen_edges, FlowEdge::new(id, exit_id, EdgeKind::SeqExec));
                }
                _ => {
                    // Fall through to the next block in layout order.
                    let next = starts.get(k + 1).map(|s| start_to_block[s]).unwrap_or(exit_id);
                    push_edge(&mut edges, &mut seen_edges, FlowEdge::new(id, next, EdgeKind::SeqExec));
                }
            }
            blocks.push(BasicBlock { id, function: func.name.clone(), instrs });
        }

        blocks.push(BasicBlock { id: exit_id, function: func.name.clone(), instrs: vec![exit_marker] });
        functions.push(FunctionBlocks { name: func.name.clone(), entry: entry_id, exit: exit_id });
    }

    for (site, callee) in call_sites {
        if let Some(f) = functions.iter().find(|f| f.name == callee) {
            push_edge(&mut edges, &mut seen_edges, FlowEdge::new(site, f.entry, EdgeKind::CallFlow));
        }
    }

    let cfg = Cfg { blocks, edges, functions };
    check_reachability(prog, &cfg)?;
    Ok(cfg)
}

fn instr_targets(instr: &TacInstr) -> Vec<TacLabel> {
    match &instr.kind {
        TacKind::BranchCond { then_to, else_to } => vec![*then_to, *else_to],
        TacKind::Switch { arms, default_to } => {
            let mut ts: Vec<TacLabel> = arms.iter().map(|&(_, t)| t).collect();
            ts.push(*default_to);
            ts
        }
        TacKind::Jump { to } => vec![*to],
        _ => Vec::new(),
    }
}

/// Every block must be reachable from its function's entry over control
/// edges (`DataFlow` and `CallFlow` do not count).
fn check_reachability(prog: &ProgramAst, cfg: &Cfg) -> Result<(), CfgError> {
    let mut adj: BTreeMap<BlockId, Vec<BlockId>> = BTreeMap::new();
    for e in &cfg.edges {
        if e.kind.is_control() {
            adj.entry(e.src).or_default().push(e.dst);
        }
    }
    let mut reached: BTreeSet<BlockId> = BTreeSet::new();
    for f in &cfg.functions {
        let mut queue = VecDeque::from([f.entry]);
        reached.insert(f.entry);
        while let Some(b) = queue.pop_front() {
            for &next in adj.get(&b).into_iter().flatten() {
                if reached.insert(next) {
                    queue.push_back(next);
                }
            }
        }
    }
    for block in &cfg.blocks {
        if !reached.contains(&block.id) {
            let span = prog.ast.node(block.instrs[0].backing_ast).span;
            return Err(CfgError::Unreachable {
                function: block.function.clone(),
                line: span.line,
                col: span.col,
            });
        }
    }
    Ok(())
}

/// The reverse graph: identical blocks, every edge flipped, kinds kept.
pub fn reverse_graph(cfg: &Cfg) -> Cfg {
    Cfg {
        blocks: cfg.blocks.clone(),
        edges: cfg.edges.iter().map(|e| FlowEdge::new(e.dst, e.src, e.kind)).collect(),
        functions: cfg.functions.clone(),
    }
}
