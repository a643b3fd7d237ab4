//! Token vocabulary and bag-of-words block features.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use super::augment::BlockAst;
use super::FormatError;

pub const UNK: &str = "<UNK>";

/// A frozen token-to-index table. Index 0 is reserved for unknown tokens;
/// the remaining indices run in first-seen corpus order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Vocabulary {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the unknown token is always present
    }

    /// Unknown tokens map to index 0.
    pub fn encode(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn decode(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// One token per line; the line number minus one is the index.
    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        let mut file = std::fs::File::create(path)?;
        for token in &self.tokens {
            writeln!(file, "{token}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocabulary, FormatError> {
        let file = std::fs::File::open(path)?;
        let tokens: Vec<String> = std::io::BufReader::new(file).lines().collect::<Result<_, _>>()?;
        if tokens.first().map(String::as_str) != Some(UNK) {
            return Err(FormatError::VocabHeader);
        }
        Ok(Vocabulary::from_tokens(tokens))
    }
}

/// Collects every label and subtoken of the corpus, in first-seen order,
/// behind the reserved unknown token. The result is frozen: later lookups
/// of unseen tokens yield index 0.
pub fn build_vocab<'a>(corpus: impl IntoIterator<Item = &'a BlockAst>) -> Vocabulary {
    let mut tokens = vec![UNK.to_string()];
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    index.insert(UNK.to_string(), 0);
    for ast in corpus {
        for label in ast.root.labels() {
            if !index.contains_key(label) {
                index.insert(label.to_string(), tokens.len());
                tokens.push(label.to_string());
            }
        }
    }
    Vocabulary { tokens, index }
}

/// Per-token occurrence counts over all node labels of the block's tree.
/// Unknown tokens land in the reserved slot.
pub fn bow_block_features(block: &BlockAst, vocab: &Vocabulary) -> Vec<f64> {
    let mut counts = vec![0.0; vocab.len()];
    for label in block.root.labels() {
        counts[vocab.encode(label)] += 1.0;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{build_cfg, lower_to_tac, BlockId};
    use crate::codegraph::augment_block_ast;
    use crate::frontend::parse_source;

    fn block_ast(src: &str, block: u32) -> BlockAst {
        let prog = parse_source(src).unwrap();
        let tac = lower_to_tac(&prog);
        let cfg = build_cfg(&prog, &tac).unwrap();
        augment_block_ast(&prog, cfg.block(BlockId(block)))
    }

    #[test]
    fn one_block_corpus_collects_labels_and_subtokens() {
        let ast = block_ast("int f(int a, int b) { int c = a + b; return c; }", 1);
        let vocab = build_vocab([&ast]);
        for token in ["<UNK>", "Block", "DefStmt", "Local", "BOp", "+", "int", "a", "b", "c"] {
            assert!(vocab.contains(token), "missing {token}");
        }
        assert_eq!(vocab.encode(UNK), 0);
    }

    #[test]
    fn empty_corpus_is_just_the_unknown_token() {
        let vocab = build_vocab([]);
        assert_eq!(vocab.len(), 1);
        assert_eq!(vocab.decode(0), UNK);
    }

    #[test]
    fn unseen_tokens_map_to_the_reserved_index() {
        let ast = block_ast("int f() { return 1; }", 1);
        let vocab = build_vocab([&ast]);
        assert_eq!(vocab.encode("neverSeen"), 0);
    }

    #[test]
    fn indices_are_dense_and_stable() {
        let ast = block_ast("int f(int x) { return x * 2; }", 1);
        let vocab = build_vocab([&ast]);
        for i in 0..vocab.len() {
            assert_eq!(vocab.encode(vocab.decode(i)), i);
        }
    }

    #[test]
    fn vocabulary_survives_save_and_load() {
        let ast = block_ast("float f(float y) { return y / 2.0; }", 1);
        let vocab = build_vocab([&ast]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        vocab.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(vocab, loaded);
    }

    #[test]
    fn loading_rejects_a_file_without_the_unknown_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        std::fs::write(&path, "Block\nDefStmt\n").unwrap();
        assert!(matches!(Vocabulary::load(&path), Err(FormatError::VocabHeader)));
    }

    #[test]
    fn counts_follow_label_multiplicity() {
        let ast = block_ast("int f(int a, int b) { int c = a + b; return c; }", 1);
        let vocab = build_vocab([&ast]);
        let counts = bow_block_features(&ast, &vocab);
        assert_eq!(counts.len(), vocab.len());
        assert_eq!(counts[vocab.encode("int")], 4.0, "one type leaf per variable use");
        assert_eq!(counts[vocab.encode("Local")], 4.0, "c, a, b, and the returned c");
        assert_eq!(counts[vocab.encode(UNK)], 0.0);
        let total: f64 = counts.iter().sum();
        assert_eq!(total, ast.root.labels().len() as f64);
    }

    #[test]
    fn structurally_different_blocks_with_equal_multisets_collide() {
        let left = block_ast("int f(int a, int b, int c) { return (a + b) * c; }", 1);
        let right = block_ast("int f(int a, int b, int c) { return a + (b * c); }", 1);
        assert_ne!(left.root, right.root, "the trees differ");
        let vocab = build_vocab([&left, &right]);
        assert_eq!(
            bow_block_features(&left, &vocab),
            bow_block_features(&right, &vocab),
            "counting forgets the structure"
        );
    }
}
