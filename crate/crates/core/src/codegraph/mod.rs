//! The hierarchical source-code model: flow-typed block graphs whose basic
//! blocks carry augmented syntax trees.
//!
//! Each basic block of a compilation unit is re-expanded into a small tree
//! rooted at a synthetic `Block` node, one child per instruction. The trees
//! are *augmented*: variable uses grow name-subtoken leaves plus a type
//! leaf, user-typed uses grow one leaf per CamelCase segment of the type
//! name, numeric literals are split into digit/sign/point leaves, and casts
//! carry both the source and the target type. A [`Vocabulary`] maps every
//! label and subtoken to a dense index, with index 0 reserved for unknowns.
//!
//! The assembled [`CodeGraph`] bundles the trees with the control, call, and
//! data-flow edges and round-trips through a versioned JSON format.

mod augment;
mod graph;
mod vocab;

pub use augment::{augment, augment_block_ast, decompose_constant, split_camel, AugNode, BlockAst};
pub use graph::{
    assemble_graph, deserialize_graph, graph_from_source, serialize_graph, CodeGraph, GraphError,
    PipelineError,
};
pub use vocab::{bow_block_features, build_vocab, Vocabulary};

use thiserror::Error;

/// Violations of the on-disk formats (graph JSON, vocabulary file).
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("unsupported graph format version {0}")]
    Version(u64),
    #[error("malformed graph: {0}")]
    Schema(String),
    #[error("vocabulary file must start with <UNK>")]
    VocabHeader,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
