//! Finite-difference audit of every differentiable stage.
//!
//! Each row isolates one stage: the stage's tensors (and, where needed,
//! its inputs) live in a dedicated parameter set, and the analytic
//! gradients are compared against central differences at h = 1e-5. Cost
//! grows with the number of audited scalars, two evaluations each, so
//! callers should keep the widths small.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cfg::{BlockId, EdgeKind, FlowEdge};
use crate::codegraph::{build_vocab, graph_from_source, CodeGraph, Vocabulary};
use crate::tensor::{
    finite_diff_check, uniform_init, xavier_uniform, zeros, ParamSet, ShapeError, Tape,
    TensorValue,
};

use super::model::{classify_logits, clone_logit, fuse_and_pool};
use super::params::{attention_vec, key_orig_name, key_rev_name, p_dst_name, p_src_name};
use super::tbcnn::tbcnn_forward;
use super::{agn4d_layer, EdgeTyping, Hyper};

/// Largest acceptable relative error between analytic and numeric
/// gradients at step 1e-5.
pub const AUDIT_TOLERANCE: f64 = 1e-4;

/// One audited stage and its worst relative gradient error.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub stage: String,
    pub worst_rel_err: f64,
}

impl AuditRow {
    pub fn passed(&self) -> bool {
        self.worst_rel_err < AUDIT_TOLERANCE
    }
}

/// A small branching function; parsing it yields several blocks with
/// sequential, conditional, and data-flow edges.
const AUDIT_SOURCE: &str = "int pick(int a, int b) {\n    int best = a;\n    if (a < b) { best = b; }\n    return best * 2;\n}\n";

/// Central-difference step used for every audited scalar.
pub const AUDIT_STEP: f64 = 1e-5;

/// Checks every stage at the given widths: the tree convolution, each
/// attention layer, fusion plus the classification head, and the pair
/// head. All randomness (weights and stage inputs) comes from `seed`.
pub fn gradient_audit(seed: u64, hyper: Hyper) -> Result<Vec<AuditRow>, ShapeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![audit_tree_convolution(&mut rng, hyper)?];
    for layer in 1..=hyper.layers {
        rows.push(audit_attention_layer(&mut rng, hyper, layer)?);
    }
    rows.push(audit_fusion_and_classifier(&mut rng, hyper)?);
    rows.push(audit_pair_head(&mut rng, hyper)?);
    Ok(rows)
}

fn audit_tree_convolution(rng: &mut ChaCha8Rng, hyper: Hyper) -> Result<AuditRow, ShapeError> {
    let graph: CodeGraph =
        graph_from_source(AUDIT_SOURCE, None).expect("the audit fixture must parse");
    let vocab: Vocabulary = build_vocab(graph.blocks.iter());
    let mut set = ParamSet::new();
    set.insert("embedding", uniform_init(rng, vocab.len(), hyper.embed_dim, 0.05));
    set.insert("conv.w_top", xavier_uniform(rng, hyper.embed_dim, hyper.hidden_dim));
    set.insert("conv.w_left", xavier_uniform(rng, hyper.embed_dim, hyper.hidden_dim));
    set.insert("conv.w_right", xavier_uniform(rng, hyper.embed_dim, hyper.hidden_dim));
    set.insert("conv.bias", zeros(vec![hyper.hidden_dim]));

    let worst = finite_diff_check(&mut set, AUDIT_STEP, |set| {
        set.zero_grads();
        let tape = Tape::new();
        let mut total = tape.scalar(0.0);
        for block in &graph.blocks {
            let features = tbcnn_forward(&tape, block, &vocab, set).unwrap();
            total = tape.add(total, tape.sum(features)).unwrap();
        }
        tape.backward(total);
        tape.write_grads(set);
        tape.scalar_value(total)
    });
    Ok(AuditRow { stage: "tree convolution".into(), worst_rel_err: worst })
}

/// A five-block neighborhood covering all seven edge kinds, a self-edge,
/// and two parallel edges of different kinds.
fn audit_edges() -> Vec<FlowEdge> {
    let b = |i: u32| BlockId(i);
    vec![
        FlowEdge::new(b(0), b(1), EdgeKind::SeqExec),
        FlowEdge::new(b(0), b(1), EdgeKind::DataFlow),
        FlowEdge::new(b(0), b(4), EdgeKind::DataFlow),
        FlowEdge::new(b(1), b(2), EdgeKind::CondTrue),
        FlowEdge::new(b(1), b(3), EdgeKind::CondFalse),
        FlowEdge::new(b(2), b(2), EdgeKind::ExceptionFlow),
        FlowEdge::new(b(2), b(4), EdgeKind::SeqExec),
        FlowEdge::new(b(3), b(1), EdgeKind::SwitchBranch),
        FlowEdge::new(b(3), b(4), EdgeKind::SeqExec),
        FlowEdge::new(b(4), b(0), EdgeKind::CallFlow),
    ]
}

fn audit_attention_layer(
    rng: &mut ChaCha8Rng,
    hyper: Hyper,
    layer: usize,
) -> Result<AuditRow, ShapeError> {
    let width = hyper.hidden_dim;
    let edges = audit_edges();
    let blocks = 5;
    let inputs: Vec<Vec<f64>> = (0..blocks)
        .map(|_| (0..width).map(|_| rng.gen_range(-0.8..0.8)).collect())
        .collect();

    let mut set = ParamSet::new();
    set.insert(key_orig_name(layer), xavier_uniform(rng, width, width));
    set.insert(key_rev_name(layer), xavier_uniform(rng, width, width));
    set.insert(p_src_name(layer), attention_vec(rng, width));
    for kind in EdgeKind::ALL {
        set.insert(p_dst_name(layer, kind, EdgeTyping::Typed), attention_vec(rng, width));
    }

    let worst = finite_diff_check(&mut set, AUDIT_STEP, |set| {
        set.zero_grads();
        let tape = Tape::new();
        let h_prev: Vec<_> = inputs.iter().map(|v| tape.vector(v.clone())).collect();
        let (h_next, _) = agn4d_layer(&tape, &h_prev, &edges, set, layer).unwrap();
        let mut total = tape.scalar(0.0);
        for h in h_next {
            total = tape.add(total, tape.sum(h)).unwrap();
        }
        tape.backward(total);
        tape.write_grads(set);
        tape.scalar_value(total)
    });
    Ok(AuditRow { stage: format!("attention layer {layer}"), worst_rel_err: worst })
}

fn audit_fusion_and_classifier(
    rng: &mut ChaCha8Rng,
    hyper: Hyper,
) -> Result<AuditRow, ShapeError> {
    let width = hyper.hidden_dim;
    let (blocks, classes) = (4, 3);
    let mut set = ParamSet::new();
    // The per-block features are parameters too, so the check exercises
    // the gradient through the fusion sum and the column max-pool.
    for i in 0..blocks {
        set.insert(format!("fuse.local.{i}"), random_vec(rng, width));
        set.insert(format!("fuse.context.{i}"), random_vec(rng, width));
    }
    set.insert("head.classify.w", xavier_uniform(rng, width, classes));
    set.insert("head.classify.b", zeros(vec![classes]));

    let worst = finite_diff_check(&mut set, AUDIT_STEP, |set| {
        set.zero_grads();
        let tape = Tape::new();
        let local: Vec<_> =
            (0..blocks).map(|i| tape.param(&format!("fuse.local.{i}"), set)).collect();
        let context: Vec<_> =
            (0..blocks).map(|i| tape.param(&format!("fuse.context.{i}"), set)).collect();
        let pooled = fuse_and_pool(&tape, &local, &context).unwrap();
        let logits = classify_logits(&tape, pooled, set).unwrap();
        let loss = tape.cross_entropy_with_logits(logits, 0).unwrap();
        tape.backward(loss);
        tape.write_grads(set);
        tape.scalar_value(loss)
    });
    Ok(AuditRow { stage: "fusion and classification head".into(), worst_rel_err: worst })
}

fn audit_pair_head(rng: &mut ChaCha8Rng, hyper: Hyper) -> Result<AuditRow, ShapeError> {
    let width = hyper.hidden_dim;
    let mut set = ParamSet::new();
    set.insert("pair.left", random_vec(rng, width));
    set.insert("pair.right", random_vec(rng, width));
    set.insert("head.clone.w", attention_vec(rng, width));
    set.insert("head.clone.b", zeros(vec![1]));

    let worst = finite_diff_check(&mut set, AUDIT_STEP, |set| {
        set.zero_grads();
        let tape = Tape::new();
        let left = tape.param("pair.left", set);
        let right = tape.param("pair.right", set);
        let logit = clone_logit(&tape, left, right, set).unwrap();
        let loss = tape.binary_cross_entropy_with_logits(logit, 1.0).unwrap();
        tape.backward(loss);
        tape.write_grads(set);
        tape.scalar_value(loss)
    });
    Ok(AuditRow { stage: "pair similarity head".into(), worst_rel_err: worst })
}

fn random_vec(rng: &mut ChaCha8Rng, width: usize) -> TensorValue {
    TensorValue::vector((0..width).map(|_| rng.gen_range(-0.9..0.9)).collect()).with_grad()
}
