//! Graph-based program representation and learning for MiniLang.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`frontend`] lexes, parses, and type-checks MiniLang source into an AST.
//! 2. [`cfg`] lowers functions to three-address instructions and builds
//!    per-function control-flow graphs with typed edges.
//! 3. [`dataflow`] runs reaching definitions and derives def-to-use edges.
//! 4. [`codegraph`] augments per-block ASTs, builds the vocabulary, and
//!    assembles the serializable [`codegraph::CodeGraph`].
//! 5. [`tensor`] is a small reverse-mode autodiff engine over `f64` tensors.
//! 6. [`nn`] implements the model: tree-based convolution for block-local
//!    features, a directed attention network over the typed edges for context,
//!    fusion, and the classification / clone heads.
//! 7. [`train`] holds dataset manifests, the training loop, metrics, and the
//!    ablation driver.

pub mod cfg;
pub mod codegraph;
pub mod dataflow;
pub mod frontend;
pub mod nn;
pub mod tensor;
pub mod train;

pub use cfg::{BlockId, Cfg, EdgeKind, FlowEdge};
pub use codegraph::{
    build_vocab, graph_from_source, BlockAst, CodeGraph, PipelineError, Vocabulary,
};
pub use frontend::{Ast, AstKind, NodeId, ProgramAst, Ty};
pub use nn::{AblationConfig, Hyper, MfgnnParams};
pub use tensor::{ParamSet, Tape, TensorValue};
pub use train::{DatasetManifest, Metrics, TrainOptions, TrainedModel};
