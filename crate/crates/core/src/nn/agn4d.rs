//! Contextual features: attention message passing over the typed flow
//! edges. Each layer transforms the block features into per-direction
//! keys, attends over every block's out-edges in the graph and in its
//! reverse, and joins both messages with the previous features through a
//! residual. Blocks without out-edges contribute a zero message; the
//! block itself never joins its own attention sum, self-information only
//! flows through the residual (explicit self-edges do participate).

use crate::cfg::{EdgeKind, FlowEdge};
use crate::tensor::{ParamSet, ShapeError, Tape, VarId};

use super::config::{Aggregator, CombineRule, EdgeTyping};
use super::params::{key_orig_name, key_rev_name, p_dst_name, p_src_name};

/// Negative-side slope of the rectifier applied to attention logits.
const ATTENTION_SLOPE: f64 = 0.2;

/// Out-neighborhoods for one traversal direction. Buckets are sorted by
/// target then kind, so the stored edge order never leaks into results.
#[derive(Debug, Clone)]
pub struct Adjacency {
    /// Per block: `(target block, edge kind)`, one slot per edge.
    pub out: Vec<Vec<(usize, EdgeKind)>>,
}

impl Adjacency {
    /// Follows each edge from source to destination.
    pub fn forward(edges: &[FlowEdge], blocks: usize) -> Adjacency {
        Adjacency::build(edges, blocks, false)
    }

    /// Follows each edge from destination to source (the reverse graph).
    pub fn reverse(edges: &[FlowEdge], blocks: usize) -> Adjacency {
        Adjacency::build(edges, blocks, true)
    }

    fn build(edges: &[FlowEdge], blocks: usize, flip: bool) -> Adjacency {
        let mut out = vec![Vec::new(); blocks];
        for edge in edges {
            let (from, to) =
                if flip { (edge.dst, edge.src) } else { (edge.src, edge.dst) };
            out[from.0 as usize].push((to.0 as usize, edge.kind));
        }
        for bucket in &mut out {
            bucket.sort();
        }
        Adjacency { out }
    }
}

/// One block's attention over its out-edges in one direction.
#[derive(Debug, Clone)]
pub struct BlockAttention {
    pub block: usize,
    /// Edge slots in the order the coefficients are laid out.
    pub targets: Vec<(usize, EdgeKind)>,
    /// The normalized coefficient vector, one entry per edge slot.
    pub alpha: VarId,
}

/// Attention records of one layer, both traversal directions. Only blocks
/// with at least one out-edge appear; the plain-sum aggregator records
/// nothing.
#[derive(Debug, Clone, Default)]
pub struct LayerTrace {
    pub original: Vec<BlockAttention>,
    pub reverse: Vec<BlockAttention>,
}

/// Normalized weights for one source node's out-edges. Each edge scores
/// the source key against the shared source vector plus the target key
/// against the edge's destination vector; scores pass through the leaky
/// rectifier and a softmax, so they always sum to one.
pub fn attention_coefficients(
    tape: &Tape,
    k_src: VarId,
    p_src: VarId,
    neighbors: &[(VarId, VarId)],
) -> Result<VarId, ShapeError> {
    assert!(!neighbors.is_empty(), "attention needs at least one out-edge");
    let src_score = tape.dot(p_src, k_src)?;
    let mut logits = Vec::with_capacity(neighbors.len());
    for &(k_dst, p_dst) in neighbors {
        logits.push(tape.add(src_score, tape.dot(p_dst, k_dst)?)?);
    }
    tape.softmax(tape.leaky_relu(tape.concat(&logits)?, ATTENTION_SLOPE))
}

/// Attention messages for every block in one direction; `None` marks an
/// empty neighborhood.
fn attend_direction(
    tape: &Tape,
    keys: &[VarId],
    adj: &Adjacency,
    params: &ParamSet,
    layer: usize,
    typing: EdgeTyping,
    trace: &mut Vec<BlockAttention>,
) -> Result<Vec<Option<VarId>>, ShapeError> {
    let p_src = tape.param(&p_src_name(layer), params);
    let mut out = Vec::with_capacity(adj.out.len());
    for (block, bucket) in adj.out.iter().enumerate() {
        if bucket.is_empty() {
            out.push(None);
            continue;
        }
        let neighbors: Vec<(VarId, VarId)> = bucket
            .iter()
            .map(|&(v, kind)| (keys[v], tape.param(&p_dst_name(layer, kind, typing), params)))
            .collect();
        let alpha = attention_coefficients(tape, keys[block], p_src, &neighbors)?;
        let stacked = tape.stack_rows(&bucket.iter().map(|&(v, _)| keys[v]).collect::<Vec<_>>())?;
        let message = tape.elu(tape.matmul(alpha, stacked)?);
        trace.push(BlockAttention { block, targets: bucket.clone(), alpha });
        out.push(Some(message));
    }
    Ok(out)
}

/// Plain-sum messages for every block in one direction: the transformed
/// successor features added up, one addend per edge, with no attention
/// and no squashing.
fn sum_direction(
    tape: &Tape,
    keys: &[VarId],
    adj: &Adjacency,
) -> Result<Vec<Option<VarId>>, ShapeError> {
    let mut out = Vec::with_capacity(adj.out.len());
    for bucket in &adj.out {
        let mut acc: Option<VarId> = None;
        for &(v, _) in bucket {
            acc = Some(match acc {
                None => keys[v],
                Some(sum) => tape.add(sum, keys[v])?,
            });
        }
        out.push(acc);
    }
    Ok(out)
}

fn direction_keys(
    tape: &Tape,
    h_prev: &[VarId],
    transform: VarId,
) -> Result<Vec<VarId>, ShapeError> {
    h_prev.iter().map(|&h| tape.matmul(h, transform)).collect()
}

/// One message-passing layer of the default variant: typed attention in
/// both directions joined with the previous features by a residual sum.
pub fn agn4d_layer(
    tape: &Tape,
    h_prev: &[VarId],
    edges: &[FlowEdge],
    params: &ParamSet,
    layer: usize,
) -> Result<(Vec<VarId>, LayerTrace), ShapeError> {
    let k_orig = direction_keys(tape, h_prev, tape.param(&key_orig_name(layer), params))?;
    let k_rev = direction_keys(tape, h_prev, tape.param(&key_rev_name(layer), params))?;
    let fwd = Adjacency::forward(edges, h_prev.len());
    let rev = Adjacency::reverse(edges, h_prev.len());
    let mut trace = LayerTrace::default();
    let typing = EdgeTyping::Typed;
    let msg_orig =
        attend_direction(tape, &k_orig, &fwd, params, layer, typing, &mut trace.original)?;
    let msg_rev = attend_direction(tape, &k_rev, &rev, params, layer, typing, &mut trace.reverse)?;

    let mut out = Vec::with_capacity(h_prev.len());
    for block in 0..h_prev.len() {
        let message = join_messages(tape, msg_orig[block], msg_rev[block])?;
        out.push(match message {
            Some(m) => tape.add(m, h_prev[block])?,
            None => h_prev[block],
        });
    }
    Ok((out, trace))
}

/// One message-passing layer under an arbitrary variant selection. The
/// default selection (typed, attention, residual sum) computes exactly
/// what [`agn4d_layer`] computes.
#[allow(clippy::too_many_arguments)]
pub fn agn4d_layer_with(
    tape: &Tape,
    h_prev: &[VarId],
    edges: &[FlowEdge],
    params: &ParamSet,
    layer: usize,
    typing: EdgeTyping,
    aggregator: Aggregator,
    combine: CombineRule,
) -> Result<(Vec<VarId>, LayerTrace), ShapeError> {
    let k_orig = direction_keys(tape, h_prev, tape.param(&key_orig_name(layer), params))?;
    let k_rev = direction_keys(tape, h_prev, tape.param(&key_rev_name(layer), params))?;
    let fwd = Adjacency::forward(edges, h_prev.len());
    let rev = Adjacency::reverse(edges, h_prev.len());
    let mut trace = LayerTrace::default();
    let (msg_orig, msg_rev) = match aggregator {
        Aggregator::Attention => (
            attend_direction(tape, &k_orig, &fwd, params, layer, typing, &mut trace.original)?,
            attend_direction(tape, &k_rev, &rev, params, layer, typing, &mut trace.reverse)?,
        ),
        Aggregator::GcnSum => {
            (sum_direction(tape, &k_orig, &fwd)?, sum_direction(tape, &k_rev, &rev)?)
        }
    };

    let mut out = Vec::with_capacity(h_prev.len());
    for block in 0..h_prev.len() {
        let message = join_messages(tape, msg_orig[block], msg_rev[block])?;
        match combine {
            CombineRule::Summation => out.push(match message {
                Some(m) => tape.add(m, h_prev[block])?,
                None => h_prev[block],
            }),
            CombineRule::Concatenation => {
                let width = tape.shape(h_prev[block])[0];
                let m = match message {
                    Some(m) => m,
                    None => tape.vector(vec![0.0; width]),
                };
                out.push(tape.concat(&[m, h_prev[block]])?);
            }
        }
    }
    Ok((out, trace))
}

fn join_messages(
    tape: &Tape,
    orig: Option<VarId>,
    rev: Option<VarId>,
) -> Result<Option<VarId>, ShapeError> {
    Ok(match (orig, rev) {
        (Some(a), Some(b)) => Some(tape.add(a, b)?),
        (Some(a), None) | (None, Some(a)) => Some(a),
        (None, None) => None,
    })
}
