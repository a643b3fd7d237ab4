//! Dataset manifests: labeled program lists on disk, their validation,
//! and the seeded three-way split.
//!
//! A manifest is a JSON-lines file. The first line is a header naming the
//! task; every following line is one entry:
//!
//! ```text
//! {"task": "classify", "classes": 2, "seed": 7}
//! {"path": "progs/a.mini", "label": 0}
//! ```
//!
//! Clone manifests use `{"task": "clone", "seed": 7}` and pair entries
//! `{"a": "x.mini", "b": "y.mini", "label": 1}`. Entry paths resolve
//! relative to the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::codegraph::{graph_from_source, CodeGraph, PipelineError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("manifest line {line}: label {label} outside 0..{classes}")]
    LabelRange { line: usize, label: i64, classes: usize },
    #[error("manifest line {line}: no such file {path}")]
    MissingFile { line: usize, path: PathBuf },
    #[error("manifest line {line}: duplicate entry")]
    DuplicateEntry { line: usize },
    #[error("dataset needs at least {need} entries, found {found}")]
    TooSmall { need: usize, found: usize },
    #[error("{path}: {source}")]
    BadProgram { path: PathBuf, source: PipelineError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classify,
    Clone,
}

/// One labeled program of a classification manifest; the path is already
/// resolved against the manifest directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifyEntry {
    pub path: PathBuf,
    pub label: usize,
}

/// One labeled program pair of a clone manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClonePair {
    pub a: PathBuf,
    pub b: PathBuf,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestEntries {
    Classify(Vec<ClassifyEntry>),
    Clone(Vec<ClonePair>),
}

/// A validated dataset description: what task, which labeled entries,
/// how many classes, and the seed that fixes the split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub task: Task,
    /// Number of label classes; always 2 for the clone task.
    pub classes: usize,
    /// Seed of the train/validation/test shuffle.
    pub seed: u64,
    pub entries: ManifestEntries,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    task: String,
    classes: Option<usize>,
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyLine {
    path: String,
    label: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CloneLine {
    a: String,
    b: String,
    label: i64,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<DatasetManifest, DataError> {
        let text = std::fs::read_to_string(path)?;
        DatasetManifest::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Parses manifest text, resolving entry paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<DatasetManifest, DataError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (idx, header) = lines
            .next()
            .ok_or_else(|| DataError::Malformed { line: 1, message: "missing header".into() })?;
        let header: HeaderLine = serde_json::from_str(header)
            .map_err(|e| DataError::Malformed { line: idx + 1, message: e.to_string() })?;
        let (task, classes) = match header.task.as_str() {
            "classify" => {
                let classes = header.classes.ok_or_else(|| DataError::Malformed {
                    line: idx + 1,
                    message: "classify manifests must declare `classes`".into(),
                })?;
                if classes < 2 {
                    return Err(DataError::Malformed {
                        line: idx + 1,
                        message: format!("need at least 2 classes, got {classes}"),
                    });
                }
                (Task::Classify, classes)
            }
            "clone" => (Task::Clone, 2),
            other => {
                return Err(DataError::Malformed {
                    line: idx + 1,
                    message: format!("unknown task `{other}`"),
                })
            }
        };

        let mut classify_entries = Vec::new();
        let mut clone_pairs = Vec::new();
        let mut seen = BTreeSet::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            match task {
                Task::Classify => {
                    let entry: ClassifyLine = serde_json::from_str(raw)
                        .map_err(|e| DataError::Malformed { line, message: e.to_string() })?;
                    if entry.label < 0 || entry.label as usize >= classes {
                        return Err(DataError::LabelRange { line, label: entry.label, classes });
                    }
                    let path = resolve(base, &entry.path, line)?;
                    // The program, not the (program, label) pair, is the
                    // unit: one file listed twice is a duplicate even
                    // under different labels.
                    if !seen.insert(vec![path.clone()]) {
                        return Err(DataError::DuplicateEntry { line });
                    }
                    classify_entries.push(ClassifyEntry { path, label: entry.label as usize });
                }
                Task::Clone => {
                    let entry: CloneLine = serde_json::from_str(raw)
                        .map_err(|e| DataError::Malformed { line, message: e.to_string() })?;
                    if !(0..=1).contains(&entry.label) {
                        return Err(DataError::LabelRange { line, label: entry.label, classes: 2 });
                    }
                    let a = resolve(base, &entry.a, line)?;
                    let b = resolve(base, &entry.b, line)?;
                    // Scoring is symmetric, so an unordered pair listed
                    // in either order is a duplicate.
                    let mut key = vec![a.clone(), b.clone()];
                    key.sort();
                    if !seen.insert(key) {
                        return Err(DataError::DuplicateEntry { line });
                    }
                    clone_pairs.push(ClonePair { a, b, label: entry.label == 1 });
                }
            }
        }

        let entries = match task {
            Task::Classify => ManifestEntries::Classify(classify_entries),
            Task::Clone => ManifestEntries::Clone(clone_pairs),
        };
        Ok(DatasetManifest { task, classes, seed: header.seed, entries })
    }

    pub fn len(&self) -> usize {
        match &self.entries {
            ManifestEntries::Classify(v) => v.len(),
            ManifestEntries::Clone(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The classification entries; panics when the manifest holds pairs.
    pub fn classify_entries(&self) -> &[ClassifyEntry] {
        match &self.entries {
            ManifestEntries::Classify(v) => v,
            ManifestEntries::Clone(_) => panic!("clone manifest has no classify entries"),
        }
    }

    /// The clone pairs; panics when the manifest holds single programs.
    pub fn clone_pairs(&self) -> &[ClonePair] {
        match &self.entries {
            ManifestEntries::Clone(v) => v,
            ManifestEntries::Classify(_) => panic!("classify manifest has no clone pairs"),
        }
    }

    fn subset(&self, picks: &[usize]) -> DatasetManifest {
        let entries = match &self.entries {
            ManifestEntries::Classify(v) => {
                ManifestEntries::Classify(picks.iter().map(|&i| v[i].clone()).collect())
            }
            ManifestEntries::Clone(v) => {
                ManifestEntries::Clone(picks.iter().map(|&i| v[i].clone()).collect())
            }
        };
        DatasetManifest { task: self.task, classes: self.classes, seed: self.seed, entries }
    }
}

fn resolve(base: &Path, rel: &str, line: usize) -> Result<PathBuf, DataError> {
    let path = base.join(rel);
    if !path.is_file() {
        return Err(DataError::MissingFile { line, path });
    }
    Ok(path)
}

/// Index split: shuffles `0..n` by the seed and cuts off the front
/// `floor(0.6 n)` for training and the next `floor(0.2 n)` for
/// validation; the rest is the test set.
pub fn split_indices(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), DataError> {
    if n < 5 {
        return Err(DataError::TooSmall { need: 5, found: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train_n = n * 6 / 10;
    let val_n = n * 2 / 10;
    let test = order.split_off(train_n + val_n);
    let val = order.split_off(train_n);
    Ok((order, val, test))
}

/// Splits a manifest 3:1:1 into train, validation, and test manifests.
pub fn split_dataset(
    manifest: &DatasetManifest,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest, DatasetManifest), DataError> {
    let (train, val, test) = split_indices(manifest.len(), seed)?;
    Ok((manifest.subset(&train), manifest.subset(&val), manifest.subset(&test)))
}

/// Reads and parses every program of a classification manifest.
pub fn load_classify_set(manifest: &DatasetManifest) -> Result<Vec<(CodeGraph, usize)>, DataError> {
    let mut out = Vec::with_capacity(manifest.len());
    for entry in manifest.classify_entries() {
        out.push((load_graph(&entry.path, Some(entry.label as i64))?, entry.label));
    }
    Ok(out)
}

/// Reads and parses both programs of every pair in a clone manifest.
pub fn load_clone_set(
    manifest: &DatasetManifest,
) -> Result<Vec<(CodeGraph, CodeGraph, bool)>, DataError> {
    let mut out = Vec::with_capacity(manifest.len());
    for pair in manifest.clone_pairs() {
        out.push((load_graph(&pair.a, None)?, load_graph(&pair.b, None)?, pair.label));
    }
    Ok(out)
}

fn load_graph(path: &Path, label: Option<i64>) -> Result<CodeGraph, DataError> {
    let text = std::fs::read_to_string(path)?;
    graph_from_source(&text, label)
        .map_err(|source| DataError::BadProgram { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_programs(dir: &Path, names: &[&str]) {
        for name in names {
            fs::write(dir.join(name), "int f() { return 1; }").unwrap();
        }
    }

    #[test]
    fn a_classify_manifest_parses_and_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("progs")).unwrap();
        write_programs(&dir.path().join("progs"), &["a.mini", "b.mini"]);
        let text = "{\"task\": \"classify\", \"classes\": 3, \"seed\": 9}\n\
                    {\"path\": \"progs/a.mini\", \"label\": 0}\n\
                    \n\
                    {\"path\": \"progs/b.mini\", \"label\": 2}\n";
        let manifest_path = dir.path().join("data.jsonl");
        fs::write(&manifest_path, text).unwrap();
        let manifest = DatasetManifest::load(&manifest_path).unwrap();
        assert_eq!(manifest.task, Task::Classify);
        assert_eq!((manifest.classes, manifest.seed, manifest.len()), (3, 9, 2));
        let entries = manifest.classify_entries();
        assert_eq!(entries[0].path, dir.path().join("progs/a.mini"));
        assert_eq!(entries[1].label, 2);
    }

    #[test]
    fn header_and_entry_problems_name_their_line() {
        let dir = tempfile::tempdir().unwrap();
        write_programs(dir.path(), &["a.mini"]);
        let base = dir.path();

        let err = DatasetManifest::parse("", base).unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 1, .. }), "{err}");

        let err = DatasetManifest::parse("{\"task\": \"rank\", \"seed\": 1}", base).unwrap_err();
        assert!(err.to_string().contains("unknown task `rank`"), "{err}");

        let err = DatasetManifest::parse("{\"task\": \"classify\", \"seed\": 1}", base).unwrap_err();
        assert!(err.to_string().contains("must declare `classes`"), "{err}");

        let text = "{\"task\": \"classify\", \"classes\": 2, \"seed\": 1}\n\
                    {\"path\": \"a.mini\", \"label\": 2}";
        let err = DatasetManifest::parse(text, base).unwrap_err();
        assert!(
            matches!(err, DataError::LabelRange { line: 2, label: 2, classes: 2 }),
            "{err}"
        );

        let text = "{\"task\": \"classify\", \"classes\": 2, \"seed\": 1}\nnot json";
        let err = DatasetManifest::parse(text, base).unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{err}");

        let text = "{\"task\": \"classify\", \"classes\": 2, \"seed\": 1}\n\
                    {\"path\": \"ghost.mini\", \"label\": 0}";
        let err = DatasetManifest::parse(text, base).unwrap_err();
        assert!(matches!(err, DataError::MissingFile { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicates_are_rejected_in_both_tasks() {
        let dir = tempfile::tempdir().unwrap();
        write_programs(dir.path(), &["a.mini", "b.mini"]);
        let base = dir.path();

        let text = "{\"task\": \"classify\", \"classes\": 2, \"seed\": 1}\n\
                    {\"path\": \"a.mini\", \"label\": 0}\n\
                    {\"path\": \"a.mini\", \"label\": 1}";
        let err = DatasetManifest::parse(text, base).unwrap_err();
        assert!(matches!(err, DataError::DuplicateEntry { line: 3 }), "{err}");

        // The reversed pair is the same unordered pair.
        let text = "{\"task\": \"clone\", \"seed\": 1}\n\
                    {\"a\": \"a.mini\", \"b\": \"b.mini\", \"label\": 1}\n\
                    {\"a\": \"b.mini\", \"b\": \"a.mini\", \"label\": 1}";
        let err = DatasetManifest::parse(text, base).unwrap_err();
        assert!(matches!(err, DataError::DuplicateEntry { line: 3 }), "{err}");
    }

    #[test]
    fn clone_labels_are_binary() {
        let dir = tempfile::tempdir().unwrap();
        write_programs(dir.path(), &["a.mini", "b.mini"]);
        let text = "{\"task\": \"clone\", \"seed\": 1}\n\
                    {\"a\": \"a.mini\", \"b\": \"b.mini\", \"label\": 3}";
        let err = DatasetManifest::parse(text, dir.path()).unwrap_err();
        assert!(matches!(err, DataError::LabelRange { line: 2, label: 3, .. }), "{err}");
    }

    #[test]
    fn split_sizes_follow_the_three_one_one_ratio() {
        let (train, val, test) = split_indices(100, 0).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (60, 20, 20));
        let (train, val, test) = split_indices(5, 7).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (3, 1, 1));
        assert!(matches!(split_indices(4, 0), Err(DataError::TooSmall { need: 5, found: 4 })));
    }

    #[test]
    fn splits_are_deterministic_disjoint_and_covering() {
        for seed in 0..1000 {
            let (train, val, test) = split_indices(50, seed).unwrap();
            let again = split_indices(50, seed).unwrap();
            assert_eq!((&train, &val, &test), (&again.0, &again.1, &again.2));
            let mut all: Vec<usize> =
                train.iter().chain(&val).chain(&test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..50).collect::<Vec<_>>(), "seed {seed} lost or repeated items");
        }
    }

    #[test]
    fn manifest_splits_partition_the_entries() {
        let dir = tempfile::tempdir().unwrap();
        let names: Vec<String> = (0..10).map(|i| format!("p{i}.mini")).collect();
        write_programs(dir.path(), &names.iter().map(String::as_str).collect::<Vec<_>>());
        let mut text = String::from("{\"task\": \"classify\", \"classes\": 2, \"seed\": 3}\n");
        for (i, name) in names.iter().enumerate() {
            text.push_str(&format!("{{\"path\": \"{name}\", \"label\": {}}}\n", i % 2));
        }
        let manifest = DatasetManifest::parse(&text, dir.path()).unwrap();
        let (train, val, test) = split_dataset(&manifest, manifest.seed).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (6, 2, 2));
        assert_eq!(train.task, Task::Classify);
        let mut paths: Vec<&PathBuf> = train
            .classify_entries()
            .iter()
            .chain(val.classify_entries())
            .chain(test.classify_entries())
            .map(|e| &e.path)
            .collect();
        paths.sort();
        paths.dedup();
        assert_eq!(paths.len(), 10);
    }

    #[test]
    fn loading_parses_programs_and_keeps_labels() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x.mini"), "int f() { return 1; }").unwrap();
        fs::write(dir.path().join("y.mini"), "int g(int a) { return a + 2; }").unwrap();
        let text = "{\"task\": \"classify\", \"classes\": 2, \"seed\": 1}\n\
                    {\"path\": \"x.mini\", \"label\": 0}\n\
                    {\"path\": \"y.mini\", \"label\": 1}";
        let manifest = DatasetManifest::parse(text, dir.path()).unwrap();
        let set = load_classify_set(&manifest).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set[0].0.label, Some(0));
        assert_eq!(set[1].1, 1);

        fs::write(dir.path().join("bad.mini"), "int f( { return }").unwrap();
        let text = "{\"task\": \"classify\", \"classes\": 2, \"seed\": 1}\n\
                    {\"path\": \"bad.mini\", \"label\": 0}";
        let manifest = DatasetManifest::parse(text, dir.path()).unwrap();
        assert!(matches!(load_classify_set(&manifest), Err(DataError::BadProgram { .. })));
    }

    #[test]
    fn clone_sets_load_both_sides() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x.mini"), "int f() { return 1; }").unwrap();
        fs::write(dir.path().join("y.mini"), "int g() { return 2; }").unwrap();
        let text = "{\"task\": \"clone\", \"seed\": 1}\n\
                    {\"a\": \"x.mini\", \"b\": \"y.mini\", \"label\": 0}";
        let manifest = DatasetManifest::parse(text, dir.path()).unwrap();
        let set = load_clone_set(&manifest).unwrap();
        assert_eq!(set.len(), 1);
        assert!(!set[0].2);
        assert_ne!(set[0].0.blocks, set[0].1.blocks);
    }
}
