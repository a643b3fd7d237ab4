//! Variant grids: train every listed model selection on the same split
//! and seed, score each on the held-out test set, and render the rows as
//! an aligned comparison table.

use crate::codegraph::CodeGraph;
use crate::nn::{AblationConfig, Hyper};

use super::data::{load_classify_set, load_clone_set, split_indices, DatasetManifest, Task};
use super::metrics::Metrics;
use super::trainer::{
    evaluate_classifier, evaluate_clone_scorer, train_classifier, train_clone_scorer, TrainError,
    TrainOptions,
};

/// One trained variant and its test-set scores.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub label: String,
    pub config: AblationConfig,
    pub metrics: Metrics,
    pub best_epoch: usize,
}

/// Trains each selection in `matrix` on the manifest's seeded split and
/// scores it on the test set. Every run shares `options`, so rows differ
/// only in the model variant.
pub fn run_ablation(
    matrix: &[AblationConfig],
    manifest: &DatasetManifest,
    hyper: Hyper,
    options: &TrainOptions,
) -> Result<Vec<AblationRow>, TrainError> {
    if matrix.is_empty() {
        return Ok(Vec::new());
    }
    let (train_idx, val_idx, test_idx) = split_indices(manifest.len(), manifest.seed)?;
    let mut rows = Vec::with_capacity(matrix.len());
    match manifest.task {
        Task::Classify => {
            let set = load_classify_set(manifest)?;
            let pick = |idx: &[usize]| -> Vec<(CodeGraph, usize)> {
                idx.iter().map(|&i| set[i].clone()).collect()
            };
            let (train, val, test) = (pick(&train_idx), pick(&val_idx), pick(&test_idx));
            for &config in matrix {
                let model =
                    train_classifier(&train, &val, manifest.classes, hyper, config, options)?;
                let metrics = evaluate_classifier(&test, &model.vocab, &model.params)?;
                rows.push(AblationRow {
                    label: config.label(),
                    config,
                    metrics,
                    best_epoch: model.best_epoch,
                });
            }
        }
        Task::Clone => {
            let set = load_clone_set(manifest)?;
            let pick = |idx: &[usize]| -> Vec<(CodeGraph, CodeGraph, bool)> {
                idx.iter().map(|&i| set[i].clone()).collect()
            };
            let (train, val, test) = (pick(&train_idx), pick(&val_idx), pick(&test_idx));
            for &config in matrix {
                let model = train_clone_scorer(&train, &val, hyper, config, options)?;
                let metrics = evaluate_clone_scorer(&test, &model.vocab, &model.params)?;
                rows.push(AblationRow {
                    label: config.label(),
                    config,
                    metrics,
                    best_epoch: model.best_epoch,
                });
            }
        }
    }
    Ok(rows)
}

/// Renders rows as a fixed-width table: one line per variant with its
/// accuracy, macro-F1, ranking quality when present, and best epoch.
pub fn format_ablation_table(rows: &[AblationRow]) -> String {
    let label_width =
        rows.iter().map(|r| r.label.len()).chain(std::iter::once("variant".len())).max().unwrap();
    let mut out = format!(
        "{:<label_width$}  {:>8}  {:>8}  {:>6}  {:>10}\n",
        "variant", "accuracy", "macro-F1", "AUC", "best epoch"
    );
    for row in rows {
        let auc = row.metrics.auc.map_or("-".to_string(), |a| format!("{a:.4}"));
        out.push_str(&format!(
            "{:<label_width$}  {:>8.4}  {:>8.4}  {:>6}  {:>10}\n",
            row.label, row.metrics.accuracy, row.metrics.macro_f1, auc, row.best_epoch
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::BlockRepr;
    use std::fs;
    use std::path::Path;

    fn toy_manifest(dir: &Path) -> DatasetManifest {
        let mut text = String::from("{\"task\": \"classify\", \"classes\": 2, \"seed\": 6}\n");
        for i in 0..4 {
            let name = format!("c{i}.mini");
            fs::write(dir.join(&name), format!("int f{i}() {{ return {i}; }}")).unwrap();
            text.push_str(&format!("{{\"path\": \"{name}\", \"label\": 0}}\n"));
        }
        for i in 0..4 {
            let name = format!("e{i}.mini");
            fs::write(dir.join(&name), format!("int g{i}(int a) {{ return a + {i}; }}")).unwrap();
            text.push_str(&format!("{{\"path\": \"{name}\", \"label\": 1}}\n"));
        }
        DatasetManifest::parse(&text, dir).unwrap()
    }

    fn tiny_options() -> TrainOptions {
        TrainOptions { epochs: 2, learning_rate: 0.05, seed: 11, ..TrainOptions::default() }
    }

    fn tiny_hyper() -> Hyper {
        Hyper { embed_dim: 3, hidden_dim: 4, layers: 1 }
    }

    #[test]
    fn an_empty_matrix_produces_no_rows() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = toy_manifest(dir.path());
        let rows = run_ablation(&[], &manifest, tiny_hyper(), &tiny_options()).unwrap();
        assert!(rows.is_empty());
        assert_eq!(format_ablation_table(&rows).lines().count(), 1);
    }

    #[test]
    fn the_default_row_matches_a_standalone_run_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = toy_manifest(dir.path());
        let rows = run_ablation(
            &[AblationConfig::default()],
            &manifest,
            tiny_hyper(),
            &tiny_options(),
        )
        .unwrap();

        let (train_idx, val_idx, test_idx) = split_indices(manifest.len(), manifest.seed).unwrap();
        let set = load_classify_set(&manifest).unwrap();
        let pick = |idx: &[usize]| -> Vec<_> { idx.iter().map(|&i| set[i].clone()).collect() };
        let model = train_classifier(
            &pick(&train_idx),
            &pick(&val_idx),
            2,
            tiny_hyper(),
            AblationConfig::default(),
            &tiny_options(),
        )
        .unwrap();
        let standalone =
            evaluate_classifier(&pick(&test_idx), &model.vocab, &model.params).unwrap();

        assert_eq!(rows[0].metrics, standalone, "grid and standalone runs must agree exactly");
        assert_eq!(rows[0].best_epoch, model.best_epoch);
        assert_eq!(rows[0].label, "ast+control+data+typed+sum+attention");
    }

    #[test]
    fn the_table_lists_one_line_per_variant() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = toy_manifest(dir.path());
        let bow = AblationConfig { block_repr: BlockRepr::Bow, ..AblationConfig::default() };
        let options = TrainOptions { epochs: 1, ..tiny_options() };
        let rows = run_ablation(
            &[AblationConfig::default(), bow],
            &manifest,
            tiny_hyper(),
            &options,
        )
        .unwrap();
        let table = format_ablation_table(&rows);
        assert_eq!(table.lines().count(), 3, "{table}");
        assert!(table.contains("ast+control+data+typed+sum+attention"));
        assert!(table.contains("bow+control+data+typed+sum+attention"));
        assert!(table.lines().next().unwrap().contains("accuracy"));
    }
}
