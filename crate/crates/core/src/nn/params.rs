//! Construction of every learnable tensor the network uses, shaped for a
//! given variant configuration and drawn deterministically from one RNG.

use rand::Rng;

use super::config::{AblationConfig, BlockRepr, CombineRule, EdgeTyping};
use crate::cfg::EdgeKind;
use crate::tensor::{uniform_init, xavier_uniform, zeros, ParamSet, TensorValue};

/// Network dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hyper {
    /// Width of one token embedding row.
    pub embed_dim: usize,
    /// Width of block features and message-passing keys.
    pub hidden_dim: usize,
    /// Number of message-passing layers.
    pub layers: usize,
}

impl Default for Hyper {
    fn default() -> Hyper {
        Hyper { embed_dim: 50, hidden_dim: 200, layers: 3 }
    }
}

/// The named parameter collection plus the bookkeeping needed to rebuild
/// the computation that owns it: dimensions, vocabulary size, class
/// count, and the variant the shapes were built for.
#[derive(Debug, Clone)]
pub struct MfgnnParams {
    pub set: ParamSet,
    pub hyper: Hyper,
    pub vocab_size: usize,
    pub num_classes: usize,
    pub config: AblationConfig,
}

/// `p_src` name for one layer.
pub(super) fn p_src_name(layer: usize) -> String {
    format!("agn.{layer}.p_src")
}

/// Key-transform name for the given-direction traversal of one layer.
pub(super) fn key_orig_name(layer: usize) -> String {
    format!("agn.{layer}.key_orig")
}

/// Key-transform name for the reversed traversal of one layer.
pub(super) fn key_rev_name(layer: usize) -> String {
    format!("agn.{layer}.key_rev")
}

/// Destination-vector name for one layer and edge kind; with untyped
/// edges every kind shares one vector.
pub(super) fn p_dst_name(layer: usize, kind: EdgeKind, typing: EdgeTyping) -> String {
    match typing {
        EdgeTyping::Typed => format!("agn.{layer}.p_dst.{}", kind.name()),
        EdgeTyping::Single => format!("agn.{layer}.p_dst"),
    }
}

/// Uniform init on ±sqrt(6 / (dim + 1)), shaped as a vector.
pub(super) fn attention_vec(rng: &mut impl Rng, dim: usize) -> TensorValue {
    let bound = (6.0 / (dim as f64 + 1.0)).sqrt();
    let data = (0..dim).map(|_| rng.gen_range(-bound..bound)).collect();
    TensorValue::vector(data).with_grad()
}

impl MfgnnParams {
    /// Allocates and initializes every tensor the configured variant
    /// needs. Draw order is fixed: block-representation tensors, then
    /// each layer in ascending order (original key transform, reversed
    /// key transform, source vector, destination vectors in edge-kind
    /// enumeration order), then the classification head, then the pair
    /// head. Biases start at zero, embeddings on ±0.05, matrices and
    /// attention vectors on the fan-based uniform range.
    pub fn new(
        hyper: Hyper,
        vocab_size: usize,
        num_classes: usize,
        config: AblationConfig,
        rng: &mut impl Rng,
    ) -> MfgnnParams {
        assert!(vocab_size >= 1, "vocabulary cannot be empty");
        assert!(num_classes >= 2, "need at least two classes");
        assert!(hyper.layers >= 1 && hyper.embed_dim >= 1 && hyper.hidden_dim >= 1);

        let mut set = ParamSet::new();
        match config.block_repr {
            BlockRepr::Ast => {
                set.insert("embedding", uniform_init(rng, vocab_size, hyper.embed_dim, 0.05));
                set.insert("conv.w_top", xavier_uniform(rng, hyper.embed_dim, hyper.hidden_dim));
                set.insert("conv.w_left", xavier_uniform(rng, hyper.embed_dim, hyper.hidden_dim));
                set.insert("conv.w_right", xavier_uniform(rng, hyper.embed_dim, hyper.hidden_dim));
                set.insert("conv.bias", zeros(vec![hyper.hidden_dim]));
            }
            BlockRepr::Bow => {
                set.insert("bow.proj", xavier_uniform(rng, vocab_size, hyper.hidden_dim));
            }
        }

        for layer in 1..=hyper.layers {
            let w = width_into_layer(hyper, config, layer);
            set.insert(key_orig_name(layer), xavier_uniform(rng, w, w));
            set.insert(key_rev_name(layer), xavier_uniform(rng, w, w));
            set.insert(p_src_name(layer), attention_vec(rng, w));
            match config.edge_typing {
                EdgeTyping::Typed => {
                    for kind in EdgeKind::ALL {
                        set.insert(p_dst_name(layer, kind, config.edge_typing), attention_vec(rng, w));
                    }
                }
                EdgeTyping::Single => {
                    set.insert(p_dst_name(layer, EdgeKind::SeqExec, config.edge_typing), attention_vec(rng, w));
                }
            }
        }

        let out = final_width(hyper, config);
        set.insert("head.classify.w", xavier_uniform(rng, out, num_classes));
        set.insert("head.classify.b", zeros(vec![num_classes]));
        set.insert("head.clone.w", attention_vec(rng, out));
        set.insert("head.clone.b", zeros(vec![1]));

        MfgnnParams { set, hyper, vocab_size, num_classes, config }
    }

    /// Feature width entering layer `layer` (1-based).
    pub fn width_into_layer(&self, layer: usize) -> usize {
        width_into_layer(self.hyper, self.config, layer)
    }

    /// Width of the contextual features leaving the last layer.
    pub fn final_width(&self) -> usize {
        final_width(self.hyper, self.config)
    }
}

fn width_into_layer(hyper: Hyper, config: AblationConfig, layer: usize) -> usize {
    debug_assert!(layer >= 1 && layer <= hyper.layers);
    match config.combine {
        CombineRule::Summation => hyper.hidden_dim,
        CombineRule::Concatenation => hyper.hidden_dim << (layer - 1),
    }
}

fn final_width(hyper: Hyper, config: AblationConfig) -> usize {
    match config.combine {
        CombineRule::Summation => hyper.hidden_dim,
        CombineRule::Concatenation => hyper.hidden_dim << hyper.layers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_params(seed: u64) -> MfgnnParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MfgnnParams::new(Hyper::default(), 7, 3, AblationConfig::default(), &mut rng)
    }

    #[test]
    fn default_shapes_follow_the_dimension_contract() {
        let p = default_params(1);
        assert_eq!(p.set.get("embedding").shape, [7, 50]);
        assert_eq!(p.set.get("conv.w_top").shape, [50, 200]);
        assert_eq!(p.set.get("conv.w_right").shape, [50, 200]);
        assert_eq!(p.set.get("conv.bias").shape, [200]);
        assert_eq!(p.set.get("agn.2.key_rev").shape, [200, 200]);
        assert_eq!(p.set.get("agn.1.p_src").shape, [200]);
        assert_eq!(p.set.get("agn.3.p_dst.DataFlow").shape, [200]);
        assert_eq!(p.set.get("head.classify.w").shape, [200, 3]);
        assert_eq!(p.set.get("head.classify.b").shape, [3]);
        assert_eq!(p.set.get("head.clone.w").shape, [200]);
        assert_eq!(p.set.get("head.clone.b").shape, [1]);
        // 5 block tensors + 3 layers x (2 keys + p_src + 7 p_dst) + 4 head tensors.
        assert_eq!(p.set.len(), 5 + 3 * 10 + 4);
        assert_eq!(p.width_into_layer(2), 200);
        assert_eq!(p.final_width(), 200);
    }

    #[test]
    fn concatenation_doubles_the_width_every_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let config =
            AblationConfig { combine: CombineRule::Concatenation, ..AblationConfig::default() };
        let p = MfgnnParams::new(Hyper::default(), 7, 2, config, &mut rng);
        assert_eq!(p.set.get("agn.1.key_orig").shape, [200, 200]);
        assert_eq!(p.set.get("agn.2.key_orig").shape, [400, 400]);
        assert_eq!(p.set.get("agn.3.key_orig").shape, [800, 800]);
        assert_eq!(p.set.get("agn.3.p_src").shape, [800]);
        assert_eq!(p.set.get("head.classify.w").shape, [1600, 2]);
        assert_eq!(p.final_width(), 1600);
    }

    #[test]
    fn untyped_edges_share_one_destination_vector_per_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let config = AblationConfig { edge_typing: EdgeTyping::Single, ..AblationConfig::default() };
        let p = MfgnnParams::new(Hyper::default(), 7, 2, config, &mut rng);
        assert!(p.set.contains("agn.1.p_dst"));
        assert!(!p.set.contains("agn.1.p_dst.SeqExec"));
        assert_eq!(p.set.len(), 5 + 3 * 4 + 4);
    }

    #[test]
    fn bag_of_words_swaps_the_tree_tensors_for_a_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let config = AblationConfig { block_repr: BlockRepr::Bow, ..AblationConfig::default() };
        let p = MfgnnParams::new(Hyper::default(), 9, 2, config, &mut rng);
        assert_eq!(p.set.get("bow.proj").shape, [9, 200]);
        assert!(!p.set.contains("embedding"));
        assert!(!p.set.contains("conv.w_top"));
    }

    #[test]
    fn the_seed_determines_every_value() {
        let (a, b, c) = (default_params(9), default_params(9), default_params(10));
        for (name, value) in a.set.iter() {
            assert_eq!(value.data, b.set.get(name).data, "{name} depends on more than the seed");
        }
        assert_ne!(a.set.get("embedding").data, c.set.get("embedding").data);
    }

    #[test]
    fn initial_ranges_hold() {
        let p = default_params(11);
        assert!(p.set.get("embedding").data.iter().all(|x| x.abs() <= 0.05));
        assert!(p.set.get("conv.bias").data.iter().all(|&x| x == 0.0));
        assert!(p.set.get("head.classify.b").data.iter().all(|&x| x == 0.0));
        let bound = (6.0f64 / 201.0).sqrt();
        assert!(p.set.get("agn.1.p_src").data.iter().all(|x| x.abs() <= bound));
    }
}
