//! Whole-model forward passes. A graph's blocks first get local tree
//! features, the message-passing layers then fold in context along the
//! flow edges, and fusion (elementwise sum, then columnwise max over
//! blocks) condenses everything into one program vector. Two read-outs
//! sit on top: a softmax classifier and a similarity score over the
//! absolute feature difference of two programs.

use crate::cfg::FlowEdge;
use crate::codegraph::{bow_block_features, CodeGraph, Vocabulary};
use crate::tensor::{ParamSet, ShapeError, Tape, VarId};

use super::agn4d::{agn4d_layer, agn4d_layer_with, LayerTrace};
use super::config::{BlockRepr, CombineRule};
use super::params::MfgnnParams;
use super::tbcnn::tbcnn_forward;

/// Everything one forward pass produces, beyond the program vector:
/// the per-block features before and after message passing, and the
/// attention records of every layer.
#[derive(Debug)]
pub struct ModelOutput {
    pub program_vector: VarId,
    pub local: Vec<VarId>,
    pub contextual: Vec<VarId>,
    pub layers: Vec<LayerTrace>,
}

/// The default pipeline: tree features per block, every stacked layer
/// with typed attention and residual sums, fusion at the end. Panics when
/// the parameters were built for a non-default variant; variant runs go
/// through [`forward_with_config`].
pub fn forward(
    tape: &Tape,
    graph: &CodeGraph,
    vocab: &Vocabulary,
    params: &MfgnnParams,
) -> Result<ModelOutput, ShapeError> {
    assert!(
        params.config.is_default(),
        "these parameters select a variant; use forward_with_config"
    );
    let mut local = Vec::with_capacity(graph.blocks.len());
    for block in &graph.blocks {
        local.push(tbcnn_forward(tape, block, vocab, &params.set)?);
    }
    let mut contextual = local.clone();
    let mut layers = Vec::with_capacity(params.hyper.layers);
    for layer in 1..=params.hyper.layers {
        let (next, trace) = agn4d_layer(tape, &contextual, &graph.edges, &params.set, layer)?;
        contextual = next;
        layers.push(trace);
    }
    let program_vector = fuse_and_pool(tape, &local, &contextual)?;
    Ok(ModelOutput { program_vector, local, contextual, layers })
}

/// The variant pipeline selected by `params.config`: bag-of-labels or
/// tree block features, a restricted edge subset, shared or per-kind
/// destination vectors, plain-sum or attention aggregation, residual sum
/// or concatenation. The default selection computes bit for bit what
/// [`forward`] computes.
pub fn forward_with_config(
    tape: &Tape,
    graph: &CodeGraph,
    vocab: &Vocabulary,
    params: &MfgnnParams,
) -> Result<ModelOutput, ShapeError> {
    let cfg = params.config;
    let mut local = Vec::with_capacity(graph.blocks.len());
    for block in &graph.blocks {
        local.push(match cfg.block_repr {
            BlockRepr::Ast => tbcnn_forward(tape, block, vocab, &params.set)?,
            BlockRepr::Bow => {
                let counts = tape.vector(bow_block_features(block, vocab));
                tape.matmul(counts, tape.param("bow.proj", &params.set))?
            }
        });
    }

    let kept: Vec<FlowEdge> =
        graph.edges.iter().filter(|e| cfg.edges.admits(e.kind)).copied().collect();
    let mut contextual = local.clone();
    let mut layers = Vec::with_capacity(params.hyper.layers);
    for layer in 1..=params.hyper.layers {
        let (next, trace) = agn4d_layer_with(
            tape,
            &contextual,
            &kept,
            &params.set,
            layer,
            cfg.edge_typing,
            cfg.aggregator,
            cfg.combine,
        )?;
        contextual = next;
        layers.push(trace);
    }

    // Concatenation widens the contextual rows; pad the locals with
    // zeros so the elementwise fusion still lines up.
    let local_width = tape.shape(local[0])[0];
    let final_width = tape.shape(contextual[0])[0];
    let fusable: Vec<VarId> = if matches!(cfg.combine, CombineRule::Concatenation)
        && local_width != final_width
    {
        local
            .iter()
            .map(|&x| tape.concat(&[x, tape.vector(vec![0.0; final_width - local_width])]))
            .collect::<Result<_, _>>()?
    } else {
        local.clone()
    };
    let program_vector = fuse_and_pool(tape, &fusable, &contextual)?;
    Ok(ModelOutput { program_vector, local, contextual, layers })
}

/// Adds each block's local and contextual features, then takes the
/// columnwise max over blocks. Blocks may come in any order; the result
/// only depends on the set of fused rows.
pub fn fuse_and_pool(
    tape: &Tape,
    local: &[VarId],
    contextual: &[VarId],
) -> Result<VarId, ShapeError> {
    assert_eq!(local.len(), contextual.len(), "one contextual row per block");
    assert!(!local.is_empty(), "cannot pool an empty graph");
    let fused: Vec<VarId> = local
        .iter()
        .zip(contextual)
        .map(|(&x, &h)| tape.add(x, h))
        .collect::<Result<_, _>>()?;
    tape.row_max_pool(tape.stack_rows(&fused)?)
}

/// Raw class scores of the linear classifier head.
pub fn classify_logits(tape: &Tape, v: VarId, params: &ParamSet) -> Result<VarId, ShapeError> {
    tape.add(
        tape.matmul(v, tape.param("head.classify.w", params))?,
        tape.param("head.classify.b", params),
    )
}

/// Class probabilities; they always sum to one.
pub fn classify(tape: &Tape, v: VarId, params: &ParamSet) -> Result<VarId, ShapeError> {
    tape.softmax(classify_logits(tape, v, params)?)
}

/// Raw similarity score: a weighted sum of the absolute feature
/// difference, plus a bias.
pub fn clone_logit(
    tape: &Tape,
    v1: VarId,
    v2: VarId,
    params: &ParamSet,
) -> Result<VarId, ShapeError> {
    let diff = tape.abs(tape.sub(v1, v2)?);
    tape.add(
        tape.dot(tape.param("head.clone.w", params), diff)?,
        tape.param("head.clone.b", params),
    )
}

/// Probability that two programs are clones of each other. Symmetric in
/// its arguments.
pub fn clone_score(
    tape: &Tape,
    v1: VarId,
    v2: VarId,
    params: &ParamSet,
) -> Result<VarId, ShapeError> {
    Ok(tape.sigmoid(clone_logit(tape, v1, v2, params)?))
}
