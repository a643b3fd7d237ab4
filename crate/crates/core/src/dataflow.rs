//! Reaching definitions over the control skeleton, and the data-flow edges
//! derived from them.
//!
//! A definition site is one instruction writing one named variable. Scalar
//! writes kill earlier sites of the same variable; array-element and field
//! writes add a site without killing (the old contents may survive). The
//! analysis is a forward may-analysis solved with a worklist in reverse
//! post-order; only control edges propagate facts.
//!
//! A block *uses* a variable when some instruction reads it before any write
//! to it inside the same block; any write shadows later reads, killing or
//! not. For every definition site that reaches the head of a using block, a
//! `DataFlow` edge runs from the defining block to the using block. Edges are
//! deduplicated, and a loop can legitimately produce a self-edge.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::cfg::{BasicBlock, BlockId, Cfg, EdgeKind, FlowEdge};
use crate::frontend::ProgramAst;

/// One instruction writing one named variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DefSite {
    pub block: BlockId,
    /// Index of the defining instruction within its block.
    pub instr: usize,
    pub var: String,
}

/// Solved reaching-definitions facts for a whole compilation unit.
#[derive(Debug, Clone)]
pub struct ReachingDefs {
    sites: Vec<DefSite>,
    ins: BTreeMap<BlockId, BTreeSet<usize>>,
    outs: BTreeMap<BlockId, BTreeSet<usize>>,
}

impl ReachingDefs {
    pub fn sites(&self) -> &[DefSite] {
        &self.sites
    }

    /// Does site `idx` reach the head of `block`?
    pub fn reaches(&self, idx: usize, block: BlockId) -> bool {
        self.ins.get(&block).map(|s| s.contains(&idx)).unwrap_or(false)
    }

    /// Sites reaching the head of `block`, in site-creation order.
    pub fn reaching(&self, block: BlockId) -> Vec<&DefSite> {
        self.ins
            .get(&block)
            .into_iter()
            .flatten()
            .map(|&i| &self.sites[i])
            .collect()
    }

    /// Sites live at the end of `block`.
    pub fn leaving(&self, block: BlockId) -> Vec<&DefSite> {
        self.outs
            .get(&block)
            .into_iter()
            .flatten()
            .map(|&i| &self.sites[i])
            .collect()
    }
}

/// Variables read by some instruction of `block` before any instruction of
/// the same block writes them.
pub fn block_uses(prog: &ProgramAst, block: &BasicBlock) -> BTreeSet<String> {
    let mut uses = BTreeSet::new();
    let mut written: BTreeSet<String> = BTreeSet::new();
    for instr in &block.instrs {
        for read in instr.used_vars(&prog.ast) {
            if !written.contains(&read) {
                uses.insert(read);
            }
        }
        for (var, _) in instr.defined_vars(&prog.ast) {
            written.insert(var);
        }
    }
    uses
}

pub fn reaching_definitions(prog: &ProgramAst, cfg: &Cfg) -> ReachingDefs {
    // Site table in block/instruction order, so set iteration is layout order.
    let mut sites: Vec<DefSite> = Vec::new();
    let mut sites_of_var: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for block in &cfg.blocks {
        for (i, instr) in block.instrs.iter().enumerate() {
            for (var, _) in instr.defined_vars(&prog.ast) {
                sites.push(DefSite { block: block.id, instr: i, var });
            }
        }
    }
    for (idx, site) in sites.iter().enumerate() {
        sites_of_var.entry(&site.var).or_default().push(idx);
    }

    // Per-block transfer: gen = sites surviving to the block's end when
    // nothing flows in; killed = variables with at least one killing write.
    let mut gens: BTreeMap<BlockId, BTreeSet<usize>> = BTreeMap::new();
    let mut killed: BTreeMap<BlockId, BTreeSet<String>> = BTreeMap::new();
    let mut cursor = 0usize;
    for block in &cfg.blocks {
        let gen = gens.entry(block.id).or_default();
        let killed = killed.entry(block.id).or_default();
        for instr in &block.instrs {
            for (var, killing) in instr.defined_vars(&prog.ast) {
                if killing {
                    gen.retain(|&s| sites[s].var != var);
                    killed.insert(var.clone());
                }
                gen.insert(cursor);
                cursor += 1;
            }
        }
    }

    let mut succs: BTreeMap<BlockId, Vec<BlockId>> = BTreeMap::new();
    let mut preds: BTreeMap<BlockId, Vec<BlockId>> = BTreeMap::new();
    for e in &cfg.edges {
        if e.kind.is_control() {
            succs.entry(e.src).or_default().push(e.dst);
            preds.entry(e.dst).or_default().push(e.src);
        }
    }

    let order = reverse_post_order(cfg, &succs);
    let mut ins: BTreeMap<BlockId, BTreeSet<usize>> = BTreeMap::new();
    let mut outs: BTreeMap<BlockId, BTreeSet<usize>> = BTreeMap::new();
    for block in &cfg.blocks {
        ins.insert(block.id, BTreeSet::new());
        outs.insert(block.id, BTreeSet::new());
    }

    let mut queue: VecDeque<BlockId> = order.iter().copied().collect();
    let mut queued: BTreeSet<BlockId> = queue.iter().copied().collect();
    while let Some(b) = queue.pop_front() {
        queued.remove(&b);
        let mut new_in = BTreeSet::new();
        for p in preds.get(&b).into_iter().flatten() {
            new_in.extend(outs[p].iter().copied());
        }
        let mut new_out = gens[&b].clone();
        let killed = &killed[&b];
        new_out.extend(new_in.iter().copied().filter(|&s| !killed.contains(&sites[s].var)));
        ins.insert(b, new_in);
        if outs[&b] != new_out {
            outs.insert(b, new_out);
            for s in succs.get(&b).into_iter().flatten() {
                if queued.insert(*s) {
                    queue.push_back(*s);
                }
            }
        }
    }

    ReachingDefs { sites, ins, outs }
}

fn reverse_post_order(cfg: &Cfg, succs: &BTreeMap<BlockId, Vec<BlockId>>) -> Vec<BlockId> {
    let mut order = Vec::new();
    let mut visited: BTreeSet<BlockId> = BTreeSet::new();
    for f in &cfg.functions {
        let mut post = Vec::new();
        let mut stack: Vec<(BlockId, usize)> = vec![(f.entry, 0)];
        visited.insert(f.entry);
        while let Some(&mut (node, ref mut i)) = stack.last_mut() {
            let next = succs.get(&node).and_then(|s| s.get(*i)).copied();
            match next {
                Some(next) => {
                    *i += 1;
                    if visited.insert(next) {
                        stack.push((next, 0));
                    }
                }
                None => {
                    post.push(node);
                    stack.pop();
                }
            }
        }
        post.reverse();
        order.extend(post);
    }
    order
}

/// One deduplicated `DataFlow` edge per (defining block, using block) pair
/// where some reaching site's variable is used by the target block.
pub fn dataflow_edges(prog: &ProgramAst, cfg: &Cfg, rd: &ReachingDefs) -> Vec<FlowEdge> {
    let mut edges = Vec::new();
    let mut seen: BTreeSet<FlowEdge> = BTreeSet::new();
    for block in &cfg.blocks {
        let uses = block_uses(prog, block);
        for site in rd.reaching(block.id) {
            if uses.contains(&site.var) {
                let e = FlowEdge::new(site.block, block.id, EdgeKind::DataFlow);
                if seen.insert(e) {
                    edges.push(e);
                }
            }
        }
    }
    edges
}

/// The input graph plus its data-flow edges, appended after the existing
/// edges in deterministic order.
pub fn with_dataflow(prog: &ProgramAst, cfg: &Cfg) -> Cfg {
    debug_assert!(
        cfg.edges.iter().all(|e| e.kind != EdgeKind::DataFlow),
        "data-flow edges already present"
    );
    let rd = reaching_definitions(prog, cfg);
    let mut out = cfg.clone();
    out.edges.extend(dataflow_edges(prog, cfg, &rd));
    out
}
