//! Graph assembly, validation, and the versioned JSON interchange format.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfg::{build_cfg, lower_to_tac, BlockId, Cfg, EdgeKind, FlowEdge};
use crate::dataflow::{dataflow_edges, reaching_definitions};
use crate::frontend::{parse_source, FrontendError, ProgramAst};

use super::augment::{augment_block_ast, BlockAst};
use super::FormatError;
use crate::cfg::CfgError;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("block {block} has no tree")]
    MissingAst { block: BlockId },
    #[error("tree attached to unknown block {block}")]
    UnknownBlock { block: BlockId },
    #[error("block {block} renders an empty tree")]
    EmptyBlock { block: BlockId },
    #[error("edge {src} -> {dst} [{kind}] leaves the graph")]
    DanglingEdge { src: BlockId, dst: BlockId, kind: EdgeKind },
    #[error("block {block} is already augmented")]
    AlreadyAugmented { block: BlockId },
}

/// A whole compilation unit ready for the models: one augmented tree per
/// basic block plus the merged control, call, and data-flow edges.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeGraph {
    /// Trees in block-id order, one per block.
    pub blocks: Vec<BlockAst>,
    pub edges: Vec<FlowEdge>,
    pub block_count: usize,
    /// Task label (class id), when the graph belongs to a labeled corpus.
    pub label: Option<i64>,
}

impl CodeGraph {
    pub fn ast(&self, block: BlockId) -> &BlockAst {
        &self.blocks[block.0 as usize]
    }

    /// Edge count per kind, in enumeration order.
    pub fn edge_histogram(&self) -> Vec<(EdgeKind, usize)> {
        EdgeKind::ALL
            .iter()
            .map(|&kind| (kind, self.edges.iter().filter(|e| e.kind == kind).count()))
            .collect()
    }
}

/// Merges the control-flow graph, the data-flow edges, and the per-block
/// trees into one validated graph.
pub fn assemble_graph(
    cfg: &Cfg,
    dfedges: &[FlowEdge],
    blockasts: Vec<BlockAst>,
    label: Option<i64>,
) -> Result<CodeGraph, GraphError> {
    let block_count = cfg.blocks.len();
    let mut slots: Vec<Option<BlockAst>> = (0..block_count).map(|_| None).collect();
    for ast in blockasts {
        let idx = ast.block.0 as usize;
        if idx >= block_count {
            return Err(GraphError::UnknownBlock { block: ast.block });
        }
        slots[idx] = Some(ast);
    }
    let mut blocks = Vec::with_capacity(block_count);
    for (idx, slot) in slots.into_iter().enumerate() {
        let block = BlockId(idx as u32);
        let ast = slot.ok_or(GraphError::MissingAst { block })?;
        if ast.root.children.is_empty() {
            return Err(GraphError::EmptyBlock { block });
        }
        blocks.push(ast);
    }
    let mut edges = cfg.edges.clone();
    edges.extend_from_slice(dfedges);
    for e in &edges {
        if e.src.0 as usize >= block_count || e.dst.0 as usize >= block_count {
            return Err(GraphError::DanglingEdge { src: e.src, dst: e.dst, kind: e.kind });
        }
    }
    Ok(CodeGraph { blocks, edges, block_count, label })
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Cfg(#[from] CfgError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Source text to validated graph: parse, lower, form blocks, run reaching
/// definitions, augment every block, and assemble.
pub fn graph_from_source(source: &str, label: Option<i64>) -> Result<CodeGraph, PipelineError> {
    let prog = parse_source(source)?;
    Ok(graph_from_program(&prog, label)?)
}

/// Same pipeline, starting from an already-parsed program.
pub fn graph_from_program(prog: &ProgramAst, label: Option<i64>) -> Result<CodeGraph, PipelineError> {
    let tac = lower_to_tac(prog);
    let cfg = build_cfg(prog, &tac)?;
    let rd = reaching_definitions(prog, &cfg);
    let dfedges = dataflow_edges(prog, &cfg, &rd);
    let asts = cfg.blocks.iter().map(|b| augment_block_ast(prog, b)).collect();
    Ok(assemble_graph(&cfg, &dfedges, asts, label)?)
}

const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct GraphFile {
    version: u64,
    blocks: Vec<BlockEntry>,
    edges: Vec<FlowEdge>,
    label: Option<i64>,
}

#[derive(Serialize, Deserialize)]
struct BlockEntry {
    id: u32,
    ast: super::augment::AugNode,
}

pub fn serialize_graph(graph: &CodeGraph) -> String {
    let file = GraphFile {
        version: FORMAT_VERSION,
        blocks: graph
            .blocks
            .iter()
            .map(|b| BlockEntry { id: b.block.0, ast: b.root.clone() })
            .collect(),
        edges: graph.edges.clone(),
        label: graph.label,
    };
    serde_json::to_string_pretty(&file).expect("graphs are plain data")
}

pub fn deserialize_graph(text: &str) -> Result<CodeGraph, FormatError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| FormatError::Schema(e.to_string()))?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(FORMAT_VERSION) => {}
        Some(other) => return Err(FormatError::Version(other)),
        None => return Err(FormatError::Schema("missing version field".into())),
    }
    let file: GraphFile =
        serde_json::from_value(value).map_err(|e| FormatError::Schema(e.to_string()))?;
    let block_count = file.blocks.len();
    let mut blocks = Vec::with_capacity(block_count);
    for (idx, entry) in file.blocks.into_iter().enumerate() {
        if entry.id as usize != idx {
            return Err(FormatError::Schema(format!(
                "block ids must be dense, found {} at position {idx}",
                entry.id
            )));
        }
        let mut root = entry.ast;
        root.mark_augmented();
        blocks.push(BlockAst { block: BlockId(entry.id), root });
    }
    for e in &file.edges {
        if e.src.0 as usize >= block_count || e.dst.0 as usize >= block_count {
            return Err(FormatError::Schema(format!("edge {} -> {} leaves the graph", e.src, e.dst)));
        }
    }
    Ok(CodeGraph { blocks, edges: file.edges, block_count, label: file.label })
}
