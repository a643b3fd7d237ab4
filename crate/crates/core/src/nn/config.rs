//! Variant selection for the network: which block representation, edge
//! subset, edge typing, per-layer combine rule, and neighborhood
//! aggregator to run with. The default configuration is the full model;
//! every other combination exists for controlled comparisons.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::cfg::EdgeKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// How a basic block becomes a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockRepr {
    /// Tree convolution over the block's augmented syntax tree.
    Ast,
    /// Label counts pushed through a learned linear projection; discards
    /// token order and tree structure.
    Bow,
}

/// Which flow edges participate in message passing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSubset {
    /// Every edge the graph carries.
    Both,
    /// Everything except data-flow edges.
    ControlOnly,
    /// Data-flow edges only.
    DataOnly,
}

impl EdgeSubset {
    pub fn admits(self, kind: EdgeKind) -> bool {
        match self {
            EdgeSubset::Both => true,
            EdgeSubset::ControlOnly => kind != EdgeKind::DataFlow,
            EdgeSubset::DataOnly => kind == EdgeKind::DataFlow,
        }
    }
}

/// Whether attention distinguishes edge kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTyping {
    /// One destination vector per edge kind per layer.
    Typed,
    /// A single destination vector shared by all kinds.
    Single,
}

/// How a layer's messages join the previous features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineRule {
    /// Residual sum; the width stays fixed.
    Summation,
    /// Concatenation; the width doubles every layer.
    Concatenation,
}

/// How a node's out-neighborhood is reduced to one message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    /// Softmax attention over the out-edges.
    Attention,
    /// Plain sum of the transformed successor features.
    GcnSum,
}

/// One complete variant selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationConfig {
    pub block_repr: BlockRepr,
    pub edges: EdgeSubset,
    pub edge_typing: EdgeTyping,
    pub combine: CombineRule,
    pub aggregator: Aggregator,
}

impl Default for AblationConfig {
    fn default() -> AblationConfig {
        AblationConfig {
            block_repr: BlockRepr::Ast,
            edges: EdgeSubset::Both,
            edge_typing: EdgeTyping::Typed,
            combine: CombineRule::Summation,
            aggregator: Aggregator::Attention,
        }
    }
}

impl AblationConfig {
    pub fn is_default(&self) -> bool {
        *self == AblationConfig::default()
    }

    /// Compact description, e.g. `ast+control+data+typed+sum+attention`.
    pub fn label(&self) -> String {
        let repr = match self.block_repr {
            BlockRepr::Ast => "ast",
            BlockRepr::Bow => "bow",
        };
        let edges = match self.edges {
            EdgeSubset::Both => "control+data",
            EdgeSubset::ControlOnly => "control",
            EdgeSubset::DataOnly => "data",
        };
        let typing = match self.edge_typing {
            EdgeTyping::Typed => "typed",
            EdgeTyping::Single => "untyped",
        };
        let combine = match self.combine {
            CombineRule::Summation => "sum",
            CombineRule::Concatenation => "concat",
        };
        let agg = match self.aggregator {
            Aggregator::Attention => "attention",
            Aggregator::GcnSum => "gcn",
        };
        format!("{repr}+{edges}+{typing}+{combine}+{agg}")
    }

    pub fn load(path: &Path) -> Result<AblationConfig, ConfigError> {
        AblationConfig::parse(&fs::read_to_string(path)?)
    }

    /// The flat `key = value` form that [`AblationConfig::parse`] reads
    /// back; used to persist a selection alongside checkpoints.
    pub fn render(&self) -> String {
        let block_repr = match self.block_repr {
            BlockRepr::Ast => "ast",
            BlockRepr::Bow => "bow",
        };
        let edges = match self.edges {
            EdgeSubset::Both => "both",
            EdgeSubset::ControlOnly => "control",
            EdgeSubset::DataOnly => "data",
        };
        let edge_typing = match self.edge_typing {
            EdgeTyping::Typed => "typed",
            EdgeTyping::Single => "single",
        };
        let combine = match self.combine {
            CombineRule::Summation => "sum",
            CombineRule::Concatenation => "concat",
        };
        let aggregator = match self.aggregator {
            Aggregator::Attention => "attention",
            Aggregator::GcnSum => "gcn",
        };
        format!(
            "block_repr = {block_repr}\nedges = {edges}\nedge_typing = {edge_typing}\n\
             combine = {combine}\naggregator = {aggregator}\n"
        )
    }

    /// Parses flat `key = value` lines. `#` starts a comment, blank lines
    /// are skipped, unset keys keep their defaults, and a repeated key
    /// takes its last value.
    pub fn parse(text: &str) -> Result<AblationConfig, ConfigError> {
        let mut config = AblationConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "block_repr" => {
                    config.block_repr = match value {
                        "ast" => BlockRepr::Ast,
                        "bow" => BlockRepr::Bow,
                        _ => return Err(bad_value(line, key, value)),
                    }
                }
                "edges" => {
                    config.edges = match value {
                        "both" => EdgeSubset::Both,
                        "control" => EdgeSubset::ControlOnly,
                        "data" => EdgeSubset::DataOnly,
                        _ => return Err(bad_value(line, key, value)),
                    }
                }
                "edge_typing" => {
                    config.edge_typing = match value {
                        "typed" => EdgeTyping::Typed,
                        "single" => EdgeTyping::Single,
                        _ => return Err(bad_value(line, key, value)),
                    }
                }
                "combine" => {
                    config.combine = match value {
                        "sum" | "summation" => CombineRule::Summation,
                        "concat" | "concatenation" => CombineRule::Concatenation,
                        _ => return Err(bad_value(line, key, value)),
                    }
                }
                "aggregator" => {
                    config.aggregator = match value {
                        "attention" => Aggregator::Attention,
                        "gcn" => Aggregator::GcnSum,
                        _ => return Err(bad_value(line, key, value)),
                    }
                }
                _ => {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        Ok(config)
    }
}

fn bad_value(line: usize, key: &str, value: &str) -> ConfigError {
    ConfigError::Syntax { line, message: format!("key `{key}` cannot take value `{value}`") }
}
