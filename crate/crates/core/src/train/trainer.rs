//! Mini-batch training with Adamax, per-epoch validation tracking, and
//! directory checkpoints that restore a model bit for bit.
//!
//! Both trainers follow the same schedule: one seeded generator draws the
//! initial parameters and then the epoch shuffles, each batch accumulates
//! its mean loss on a fresh tape, and after every epoch the model is
//! re-scored on the train and validation splits. The returned model is the
//! snapshot from the best validation epoch, with earlier epochs winning
//! ties.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegraph::{build_vocab, CodeGraph, FormatError, Vocabulary};
use crate::nn::{
    classify, classify_logits, clone_logit, clone_score, forward, forward_with_config,
    AblationConfig, ConfigError, Hyper, MfgnnParams, ModelOutput,
};
use crate::tensor::{adamax_step, AdamaxState, CheckpointError, ParamSet, ShapeError, Tape};

use super::data::DataError;
use super::metrics::{classification_metrics, clone_metrics, Metrics};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Vocab(#[from] FormatError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("checkpoint metadata: {0}")]
    Meta(#[from] serde_json::Error),
    #[error("checkpoint i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint is inconsistent: {0}")]
    Corrupt(String),
}

/// Knobs of one training run. The defaults are the reference schedule;
/// `stop_at_train_score` ends the run early once the score on the
/// training split reaches the given value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub stop_at_train_score: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> TrainOptions {
        TrainOptions {
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.002,
            seed: 42,
            stop_at_train_score: None,
        }
    }
}

/// One epoch of the training history. `train_loss` is the mean
/// per-sample loss; the scores are accuracy for classification and the
/// positive-class F1 for pair scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_score: f64,
    pub val_score: f64,
}

/// The outcome of a run: the parameter snapshot from the best validation
/// epoch, the vocabulary it was trained under, and the full history.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: MfgnnParams,
    pub vocab: Vocabulary,
    /// 1-based epoch whose snapshot `params` holds.
    pub best_epoch: usize,
    pub best_val_score: f64,
    pub history: Vec<EpochRecord>,
}

/// Runs the model variant the parameters were drawn for.
fn run_forward(
    tape: &Tape,
    graph: &CodeGraph,
    vocab: &Vocabulary,
    params: &MfgnnParams,
) -> Result<ModelOutput, ShapeError> {
    if params.config.is_default() {
        forward(tape, graph, vocab, params)
    } else {
        forward_with_config(tape, graph, vocab, params)
    }
}

/// Mean of already-built per-sample losses.
fn batch_mean(tape: &Tape, losses: &[crate::tensor::VarId]) -> Result<crate::tensor::VarId, ShapeError> {
    let mut total = losses[0];
    for &loss in &losses[1..] {
        total = tape.add(total, loss)?;
    }
    Ok(tape.scale(total, 1.0 / losses.len() as f64))
}

/// Keeps the strictly best validation score, so ties resolve to the
/// earliest epoch.
struct BestTracker {
    epoch: usize,
    score: f64,
    snapshot: Option<MfgnnParams>,
}

impl BestTracker {
    fn new() -> BestTracker {
        BestTracker { epoch: 0, score: f64::NEG_INFINITY, snapshot: None }
    }

    fn offer(&mut self, epoch: usize, score: f64, params: &MfgnnParams) {
        if score > self.score {
            self.epoch = epoch;
            self.score = score;
            self.snapshot = Some(params.clone());
        }
    }
}

/// Trains the classification head on labeled programs. The vocabulary is
/// frozen from the training split alone.
pub fn train_classifier(
    train: &[(CodeGraph, usize)],
    val: &[(CodeGraph, usize)],
    classes: usize,
    hyper: Hyper,
    config: AblationConfig,
    options: &TrainOptions,
) -> Result<TrainedModel, TrainError> {
    assert!(!train.is_empty() && !val.is_empty(), "both splits must be non-empty");
    let vocab = build_vocab(train.iter().flat_map(|(g, _)| g.blocks.iter()));
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut params = MfgnnParams::new(hyper, vocab.len(), classes, config, &mut rng);
    let mut opt = AdamaxState::new(options.learning_rate);
    let mut best = BestTracker::new();
    let mut history = Vec::with_capacity(options.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=options.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(options.batch_size) {
            let tape = Tape::new();
            let mut losses = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let (graph, label) = &train[i];
                let out = run_forward(&tape, graph, &vocab, &params)?;
                let logits = classify_logits(&tape, out.program_vector, &params.set)?;
                losses.push(tape.cross_entropy_with_logits(logits, *label)?);
            }
            let loss = batch_mean(&tape, &losses)?;
            tape.backward(loss);
            params.set.zero_grads();
            tape.write_grads(&mut params.set);
            adamax_step(&mut params.set, &mut opt);
            loss_sum += tape.scalar_value(loss) * chunk.len() as f64;
        }

        let train_score = evaluate_classifier(train, &vocab, &params)?.accuracy;
        let val_score = evaluate_classifier(val, &vocab, &params)?.accuracy;
        best.offer(epoch, val_score, &params);
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_score,
            val_score,
        });
        if options.stop_at_train_score.is_some_and(|target| train_score >= target) {
            break;
        }
    }

    Ok(TrainedModel {
        params: best.snapshot.expect("at least one epoch ran"),
        vocab,
        best_epoch: best.epoch,
        best_val_score: best.score,
        history,
    })
}

/// Trains the pair-similarity head on labeled program pairs. The
/// vocabulary is frozen from both sides of the training pairs.
pub fn train_clone_scorer(
    train: &[(CodeGraph, CodeGraph, bool)],
    val: &[(CodeGraph, CodeGraph, bool)],
    hyper: Hyper,
    config: AblationConfig,
    options: &TrainOptions,
) -> Result<TrainedModel, TrainError> {
    assert!(!train.is_empty() && !val.is_empty(), "both splits must be non-empty");
    let vocab =
        build_vocab(train.iter().flat_map(|(a, b, _)| a.blocks.iter().chain(b.blocks.iter())));
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut params = MfgnnParams::new(hyper, vocab.len(), 2, config, &mut rng);
    let mut opt = AdamaxState::new(options.learning_rate);
    let mut best = BestTracker::new();
    let mut history = Vec::with_capacity(options.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=options.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(options.batch_size) {
            let tape = Tape::new();
            let mut losses = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let (a, b, label) = &train[i];
                let va = run_forward(&tape, a, &vocab, &params)?.program_vector;
                let vb = run_forward(&tape, b, &vocab, &params)?.program_vector;
                let logit = clone_logit(&tape, va, vb, &params.set)?;
                losses.push(tape.binary_cross_entropy_with_logits(logit, f64::from(*label))?);
            }
            let loss = batch_mean(&tape, &losses)?;
            tape.backward(loss);
            params.set.zero_grads();
            tape.write_grads(&mut params.set);
            adamax_step(&mut params.set, &mut opt);
            loss_sum += tape.scalar_value(loss) * chunk.len() as f64;
        }

        let train_score = evaluate_clone_scorer(train, &vocab, &params)?.positive_f1();
        let val_score = evaluate_clone_scorer(val, &vocab, &params)?.positive_f1();
        best.offer(epoch, val_score, &params);
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_score,
            val_score,
        });
        if options.stop_at_train_score.is_some_and(|target| train_score >= target) {
            break;
        }
    }

    Ok(TrainedModel {
        params: best.snapshot.expect("at least one epoch ran"),
        vocab,
        best_epoch: best.epoch,
        best_val_score: best.score,
        history,
    })
}

/// First index of the largest value; ties go to the lowest class id.
fn argmax(xs: &[f64]) -> usize {
    let mut at = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[at] {
            at = i;
        }
    }
    at
}

/// Scores a classifier on labeled programs.
pub fn evaluate_classifier(
    items: &[(CodeGraph, usize)],
    vocab: &Vocabulary,
    params: &MfgnnParams,
) -> Result<Metrics, ShapeError> {
    let mut preds = Vec::with_capacity(items.len());
    let mut labels = Vec::with_capacity(items.len());
    for (graph, label) in items {
        let tape = Tape::new();
        let out = run_forward(&tape, graph, vocab, params)?;
        let probs = classify(&tape, out.program_vector, &params.set)?;
        preds.push(argmax(&tape.value(probs)));
        labels.push(*label);
    }
    Ok(classification_metrics(&preds, &labels, params.num_classes))
}

/// Scores a pair model on labeled pairs, thresholding at 0.5.
pub fn evaluate_clone_scorer(
    pairs: &[(CodeGraph, CodeGraph, bool)],
    vocab: &Vocabulary,
    params: &MfgnnParams,
) -> Result<Metrics, ShapeError> {
    let mut scores = Vec::with_capacity(pairs.len());
    let mut labels = Vec::with_capacity(pairs.len());
    for (a, b, label) in pairs {
        let tape = Tape::new();
        let va = run_forward(&tape, a, vocab, params)?.program_vector;
        let vb = run_forward(&tape, b, vocab, params)?.program_vector;
        let score = clone_score(&tape, va, vb, &params.set)?;
        scores.push(tape.scalar_value(score));
        labels.push(*label);
    }
    Ok(clone_metrics(&scores, &labels))
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    embed_dim: usize,
    hidden_dim: usize,
    layers: usize,
    vocab_size: usize,
    num_classes: usize,
}

/// Writes a model as a directory: tensors, vocabulary, variant selection,
/// and dimensions. [`load_checkpoint`] restores it exactly.
pub fn save_checkpoint(
    params: &MfgnnParams,
    vocab: &Vocabulary,
    dir: &Path,
) -> Result<(), TrainError> {
    fs::create_dir_all(dir)?;
    params.set.save(&dir.join("params.json"))?;
    vocab.save(&dir.join("vocab.txt"))?;
    fs::write(dir.join("config.txt"), params.config.render())?;
    let meta = CheckpointMeta {
        embed_dim: params.hyper.embed_dim,
        hidden_dim: params.hyper.hidden_dim,
        layers: params.hyper.layers,
        vocab_size: params.vocab_size,
        num_classes: params.num_classes,
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Reads a checkpoint directory back into a model. Every stored float
/// round-trips bit-exactly, so evaluation after a reload reproduces the
/// original numbers.
pub fn load_checkpoint(dir: &Path) -> Result<(MfgnnParams, Vocabulary), TrainError> {
    let set = ParamSet::load(&dir.join("params.json"))?;
    let vocab = Vocabulary::load(&dir.join("vocab.txt"))?;
    let config = AblationConfig::load(&dir.join("config.txt"))?;
    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
    if vocab.len() != meta.vocab_size {
        return Err(TrainError::Corrupt(format!(
            "vocabulary holds {} tokens but the metadata says {}",
            vocab.len(),
            meta.vocab_size
        )));
    }
    let hyper = Hyper {
        embed_dim: meta.embed_dim,
        hidden_dim: meta.hidden_dim,
        layers: meta.layers,
    };
    let params = MfgnnParams {
        set,
        hyper,
        vocab_size: meta.vocab_size,
        num_classes: meta.num_classes,
        config,
    };
    Ok((params, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegraph::graph_from_source;

    fn graph(source: &str) -> CodeGraph {
        graph_from_source(source, None).unwrap()
    }

    fn toy_classify() -> (Vec<(CodeGraph, usize)>, Vec<(CodeGraph, usize)>) {
        let train = vec![
            (graph("int a() { return 1; }"), 0),
            (graph("int b() { return 2; }"), 0),
            (graph("int c(int x, int y) { return x + y; }"), 1),
            (graph("int d(int x, int y) { return x * y; }"), 1),
        ];
        let val = vec![
            (graph("int e() { return 3; }"), 0),
            (graph("int f(int x) { return x + 3; }"), 1),
        ];
        (train, val)
    }

    fn small_hyper() -> Hyper {
        Hyper { embed_dim: 4, hidden_dim: 6, layers: 2 }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_at_initialization() {
        let (train, val) = toy_classify();
        let hyper = Hyper { embed_dim: 3, hidden_dim: 4, layers: 1 };
        let options = TrainOptions {
            epochs: 3,
            learning_rate: 0.0,
            seed: 5,
            ..TrainOptions::default()
        };
        let model =
            train_classifier(&train, &val, 2, hyper, AblationConfig::default(), &options).unwrap();

        let vocab = build_vocab(train.iter().flat_map(|(g, _)| g.blocks.iter()));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fresh = MfgnnParams::new(hyper, vocab.len(), 2, AblationConfig::default(), &mut rng);
        assert_eq!(model.params.set, fresh.set, "a zero step size must not move any tensor");

        // Every epoch scores identically, so the earliest one stays best.
        assert_eq!(model.best_epoch, 1);
        assert_eq!(model.history.len(), 3);
        let epochs: Vec<usize> = model.history.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![1, 2, 3]);
        assert!(model.history.windows(2).all(|w| w[0].val_score == w[1].val_score));
    }

    #[test]
    fn classifier_fits_a_separable_toy_corpus() {
        let (train, val) = toy_classify();
        let options = TrainOptions {
            epochs: 60,
            learning_rate: 0.05,
            seed: 3,
            stop_at_train_score: Some(1.0),
            ..TrainOptions::default()
        };
        let model =
            train_classifier(&train, &val, 2, small_hyper(), AblationConfig::default(), &options)
                .unwrap();
        let last = model.history.last().unwrap();
        assert_eq!(last.train_score, 1.0, "history: {:?}", model.history);
        assert!(model.history.len() < 60, "early stop should fire before the epoch cap");
        assert!(model.best_epoch >= 1 && model.best_val_score >= 0.5);
        assert_eq!(model.best_val_score, model.history[model.best_epoch - 1].val_score);
    }

    #[test]
    fn pair_scorer_fits_identical_versus_different_pairs() {
        let same_a = graph("int a(int x) { return x + 1; }");
        let same_b = graph("int b() { return 7; }");
        let train = vec![
            (same_a.clone(), same_a.clone(), true),
            (same_b.clone(), same_b.clone(), true),
            (same_a.clone(), same_b.clone(), false),
            (graph("int c(int x, int y) { return x * y; }"), same_b.clone(), false),
        ];
        let val = vec![
            (same_a.clone(), same_a.clone(), true),
            (same_a.clone(), graph("int d() { return 9; }"), false),
        ];
        let options = TrainOptions {
            epochs: 30,
            learning_rate: 0.1,
            seed: 4,
            stop_at_train_score: Some(1.0),
            ..TrainOptions::default()
        };
        let model =
            train_clone_scorer(&train, &val, small_hyper(), AblationConfig::default(), &options)
                .unwrap();
        assert_eq!(model.history.last().unwrap().train_score, 1.0, "{:?}", model.history);
        let metrics = evaluate_clone_scorer(&train, &model.vocab, &model.params).unwrap();
        assert!(metrics.auc.is_some());
    }

    #[test]
    fn evaluation_breaks_probability_ties_toward_the_lowest_class() {
        assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
        assert_eq!(argmax(&[0.1, 0.2, 0.7]), 2);
    }

    #[test]
    fn checkpoints_restore_the_exact_model() {
        let (train, val) = toy_classify();
        let options = TrainOptions {
            epochs: 2,
            learning_rate: 0.05,
            seed: 9,
            ..TrainOptions::default()
        };
        let hyper = Hyper { embed_dim: 3, hidden_dim: 5, layers: 2 };
        let model =
            train_classifier(&train, &val, 2, hyper, AblationConfig::default(), &options).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt");
        save_checkpoint(&model.params, &model.vocab, &path).unwrap();
        let (restored, vocab) = load_checkpoint(&path).unwrap();

        assert_eq!(restored.set, model.params.set, "tensors must round-trip bit for bit");
        assert_eq!(vocab, model.vocab);
        assert_eq!(restored.hyper, model.params.hyper);
        assert_eq!(restored.config, model.params.config);
        assert_eq!(
            (restored.vocab_size, restored.num_classes),
            (model.params.vocab_size, model.params.num_classes)
        );

        let before = evaluate_classifier(&val, &model.vocab, &model.params).unwrap();
        let after = evaluate_classifier(&val, &vocab, &restored).unwrap();
        assert_eq!(before, after, "reloaded evaluation must reproduce every number");
    }

    #[test]
    fn corrupt_checkpoints_are_reported() {
        let (train, val) = toy_classify();
        let options =
            TrainOptions { epochs: 1, learning_rate: 0.0, ..TrainOptions::default() };
        let hyper = Hyper { embed_dim: 2, hidden_dim: 3, layers: 1 };
        let model =
            train_classifier(&train, &val, 2, hyper, AblationConfig::default(), &options).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt");
        save_checkpoint(&model.params, &model.vocab, &path).unwrap();

        std::fs::write(path.join("vocab.txt"), "<UNK>\nonly\n").unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(matches!(err, TrainError::Corrupt(_)), "{err}");

        std::fs::remove_file(path.join("meta.json")).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(matches!(err, TrainError::Io(_)), "{err}");
    }
}
