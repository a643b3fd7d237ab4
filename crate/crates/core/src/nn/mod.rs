//! The neural model over code graphs: per-block tree convolution for
//! local features, stacked bidirectional attention layers over the typed
//! flow edges for context, sum-then-max fusion into one program vector,
//! and classifier plus clone-scoring heads. [`config`] selects between
//! the default pipeline and its ablation variants; all parameters live
//! in one named [`MfgnnParams`] collection.

mod agn4d;
mod audit;
mod config;
mod model;
mod params;
mod tbcnn;

pub use agn4d::{
    agn4d_layer, agn4d_layer_with, attention_coefficients, Adjacency, BlockAttention, LayerTrace,
};
pub use audit::{gradient_audit, AuditRow, AUDIT_STEP, AUDIT_TOLERANCE};
pub use config::{
    AblationConfig, Aggregator, BlockRepr, CombineRule, ConfigError, EdgeSubset, EdgeTyping,
};
pub use model::{
    classify, classify_logits, clone_logit, clone_score, forward, forward_with_config,
    fuse_and_pool, ModelOutput,
};
pub use params::{Hyper, MfgnnParams};
pub use tbcnn::{tbcnn_forward, tbcnn_weights};
