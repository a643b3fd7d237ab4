//! Dataset manifests, training loops, evaluation metrics, and variant
//! grids.
//!
//! A [`DatasetManifest`] lists labeled programs (or program pairs) on
//! disk; [`split_dataset`] cuts it 3:1:1 into train, validation, and test
//! by a seeded shuffle. [`train_classifier`] and [`train_clone_scorer`]
//! run the mini-batch Adamax schedule and keep the snapshot from the best
//! validation epoch. [`run_ablation`] repeats a run across model variants
//! under identical seeds and splits, so rows are directly comparable.
//! Everything is single-threaded and seed-deterministic: the same inputs
//! reproduce the same model bit for bit.

mod ablate;
mod data;
mod metrics;
mod trainer;

pub use ablate::{format_ablation_table, run_ablation, AblationRow};
pub use data::{
    load_classify_set, load_clone_set, split_dataset, split_indices, ClassifyEntry, ClonePair,
    DataError, DatasetManifest, ManifestEntries, Task,
};
pub use metrics::{
    accuracy, auc, classification_metrics, clone_metrics, f1_per_class, macro_f1, ClassScores,
    MetricError, Metrics,
};
pub use trainer::{
    evaluate_classifier, evaluate_clone_scorer, load_checkpoint, save_checkpoint, train_classifier,
    train_clone_scorer, EpochRecord, TrainError, TrainOptions, TrainedModel,
};
