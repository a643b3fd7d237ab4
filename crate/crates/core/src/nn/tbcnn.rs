//! Per-block local features: a tree convolution whose mixing weights
//! grow with global node depth, followed by an elementwise max over all
//! window outputs of the tree.

use crate::codegraph::{AugNode, BlockAst, Vocabulary};
use crate::tensor::{ParamSet, ShapeError, Tape, VarId};

/// Position coefficients of one tree node: overall depth weight, left
/// mixing weight, right mixing weight.
///
/// `depth` is the node's 1-based depth in the whole tree and `depth_max`
/// the tree's depth, so deeper nodes get larger weights. `position` is
/// the node's 1-based index among `siblings` nodes sharing its parent.
/// A one-level tree takes the full depth weight, and an only child sits
/// halfway between left and right.
pub fn tbcnn_weights(
    depth: usize,
    depth_max: usize,
    position: usize,
    siblings: usize,
) -> (f64, f64, f64) {
    assert!(depth >= 1 && depth <= depth_max, "depth {depth} outside [1, {depth_max}]");
    assert!(position >= 1 && position <= siblings, "position {position} outside [1, {siblings}]");
    let top = if depth_max == 1 {
        1.0
    } else {
        (depth - 1) as f64 / (depth_max - 1) as f64
    };
    let spread = if siblings == 1 {
        0.5
    } else {
        (position - 1) as f64 / (siblings - 1) as f64
    };
    let left = top * spread;
    let right = top * (1.0 - left);
    (top, left, right)
}

/// Depth of the tree rooted at `node`, counting the root as one level.
fn tree_depth(node: &AugNode) -> usize {
    1 + node.children.iter().map(tree_depth).max().unwrap_or(0)
}

struct TreeCtx<'a> {
    tape: &'a Tape,
    vocab: &'a Vocabulary,
    embedding: VarId,
    w_top: VarId,
    w_left: VarId,
    w_right: VarId,
    bias: VarId,
    depth_max: usize,
}

/// Pushes one window output per node (post-order) and returns the node's
/// own mixing term. The coefficients depend only on the node's global
/// position, never on which window it appears in, so the term is shared
/// between the node's own window and its parent's.
fn convolve(
    ctx: &TreeCtx,
    node: &AugNode,
    depth: usize,
    position: usize,
    siblings: usize,
    ys: &mut Vec<VarId>,
) -> Result<VarId, ShapeError> {
    let tape = ctx.tape;
    let (top, left, right) = tbcnn_weights(depth, ctx.depth_max, position, siblings);
    let embed = tape.row(ctx.embedding, ctx.vocab.encode(&node.label))?;
    let mixed_top = tape.scale(tape.matmul(embed, ctx.w_top)?, top);
    let mixed_left = tape.scale(tape.matmul(embed, ctx.w_left)?, left);
    let mixed_right = tape.scale(tape.matmul(embed, ctx.w_right)?, right);
    let term = tape.add(tape.add(mixed_top, mixed_left)?, mixed_right)?;

    let mut window = term;
    let fanout = node.children.len();
    for (i, child) in node.children.iter().enumerate() {
        let child_term = convolve(ctx, child, depth + 1, i + 1, fanout, ys)?;
        window = tape.add(window, child_term)?;
    }
    ys.push(tape.tanh(tape.add(window, ctx.bias)?));
    Ok(term)
}

/// Local feature of one block: every node's window (the node plus its
/// children) is mixed through the three weight matrices, squashed, and
/// the results reduce by an elementwise max.
pub fn tbcnn_forward(
    tape: &Tape,
    block: &BlockAst,
    vocab: &Vocabulary,
    params: &ParamSet,
) -> Result<VarId, ShapeError> {
    let ctx = TreeCtx {
        tape,
        vocab,
        embedding: tape.param("embedding", params),
        w_top: tape.param("conv.w_top", params),
        w_left: tape.param("conv.w_left", params),
        w_right: tape.param("conv.w_right", params),
        bias: tape.param("conv.bias", params),
        depth_max: tree_depth(&block.root),
    };
    let mut ys = Vec::new();
    convolve(&ctx, &block.root, 1, 1, 1, &mut ys)?;
    tape.row_max_pool(tape.stack_rows(&ys)?)
}
