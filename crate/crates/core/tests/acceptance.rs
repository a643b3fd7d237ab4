//! Ten end-to-end guarantees, one test each. Every test prints a single
//! `criterion NN <name>: pass|FAIL` line (visible with `--nocapture`),
//! so a run doubles as a checklist of the system's promises: gradient
//! correctness, the closed-form convolution weights, attention
//! normalization, the dataflow solver against path enumeration, fixture
//! discriminability, overfit and clone sanity at reference widths,
//! metric oracles, format round-trips, and sweep consistency.

use std::fs;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mfgnn_core::cfg::{build_cfg, lower_to_tac, BlockId, Cfg, EdgeKind, FlowEdge};
use mfgnn_core::codegraph::{
    build_vocab, deserialize_graph, graph_from_source, serialize_graph, CodeGraph,
};
use mfgnn_core::dataflow::{reaching_definitions, DefSite};
use mfgnn_core::frontend::{parse_source, ProgramAst};
use mfgnn_core::nn::{
    agn4d_layer, clone_score, forward, forward_with_config, gradient_audit, tbcnn_weights,
    AblationConfig, Adjacency, BlockRepr, EdgeSubset, EdgeTyping, Hyper, MfgnnParams,
};
use mfgnn_core::tensor::Tape;
use mfgnn_core::train::{
    accuracy, auc, evaluate_classifier, evaluate_clone_scorer, f1_per_class, load_checkpoint,
    load_classify_set, load_clone_set, macro_f1, run_ablation, save_checkpoint, split_dataset,
    train_classifier, train_clone_scorer, format_ablation_table, DatasetManifest, TrainOptions,
};

/// Runs one check, prints its verdict line, and re-raises any failure.
fn verdict(number: usize, name: &str, body: impl FnOnce()) {
    let result = catch_unwind(AssertUnwindSafe(body));
    println!(
        "criterion {number:02} {name}: {}",
        if result.is_ok() { "pass" } else { "FAIL" }
    );
    if let Err(panic) = result {
        resume_unwind(panic);
    }
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

fn fixture_graph(rel: &str) -> CodeGraph {
    let source = fs::read_to_string(fixture(rel)).unwrap();
    graph_from_source(&source, None).unwrap()
}

/// Reference widths used throughout: embedding 50, features 200, three
/// message-passing layers.
const FULL: Hyper = Hyper { embed_dim: 50, hidden_dim: 200, layers: 3 };

#[test]
fn criterion_01_gradient_suite() {
    verdict(1, "finite-difference gradient suite", || {
        let started = Instant::now();
        let rows = gradient_audit(42, Hyper { embed_dim: 4, hidden_dim: 6, layers: 3 }).unwrap();
        let stages: Vec<&str> = rows.iter().map(|r| r.stage.as_str()).collect();
        assert_eq!(
            stages,
            [
                "tree convolution",
                "attention layer 1",
                "attention layer 2",
                "attention layer 3",
                "fusion and classification head",
                "pair similarity head",
            ]
        );
        for row in &rows {
            assert!(row.passed(), "{} off by {:.3e}", row.stage, row.worst_rel_err);
        }
        assert!(started.elapsed().as_secs() < 30, "took {:?}", started.elapsed());
    });
}

#[test]
fn criterion_02_depth_weight_triples() {
    verdict(2, "hand-derived convolution weight triples", || {
        assert_eq!(tbcnn_weights(3, 5, 2, 3), (0.5, 0.25, 0.375));
        assert_eq!(tbcnn_weights(1, 5, 1, 1), (0.0, 0.0, 0.0));
        assert_eq!(tbcnn_weights(5, 5, 1, 2), (1.0, 0.0, 1.0));
    });
}

#[test]
fn criterion_03_attention_normalization() {
    verdict(3, "attention coefficients sum to one", || {
        let hyper = Hyper { embed_dim: 3, hidden_dim: 6, layers: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let params = MfgnnParams::new(hyper, 5, 2, AblationConfig::default(), &mut rng);
        for _ in 0..100 {
            let blocks = rng.gen_range(2..=12usize);
            // One edge of every kind, plus random extras.
            let mut edges: Vec<FlowEdge> = EdgeKind::ALL
                .iter()
                .map(|&kind| random_edge(&mut rng, blocks, Some(kind)))
                .collect();
            for _ in 0..rng.gen_range(0..=10) {
                edges.push(random_edge(&mut rng, blocks, None));
            }
            let tape = Tape::new();
            let mut h: Vec<_> = (0..blocks)
                .map(|_| {
                    tape.vector(
                        (0..hyper.hidden_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    )
                })
                .collect();
            for layer in 1..=hyper.layers {
                let (next, trace) = agn4d_layer(&tape, &h, &edges, &params.set, layer).unwrap();
                for (adjacency, records) in [
                    (Adjacency::forward(&edges, blocks), &trace.original),
                    (Adjacency::reverse(&edges, blocks), &trace.reverse),
                ] {
                    let expected: Vec<usize> =
                        (0..blocks).filter(|&u| !adjacency.out[u].is_empty()).collect();
                    let recorded: Vec<usize> = records.iter().map(|r| r.block).collect();
                    assert_eq!(recorded, expected, "every block with out-edges is normalized");
                    for record in records {
                        let alpha = tape.value(record.alpha);
                        assert_eq!(alpha.len(), record.targets.len());
                        let total: f64 = alpha.iter().sum();
                        assert!(
                            (total - 1.0).abs() <= 1e-12,
                            "layer {layer} block {} sums to {total}",
                            record.block
                        );
                    }
                }
                h = next;
            }
        }
    });
}

fn random_edge(rng: &mut ChaCha8Rng, blocks: usize, kind: Option<EdgeKind>) -> FlowEdge {
    let kind = kind.unwrap_or_else(|| EdgeKind::ALL[rng.gen_range(0..EdgeKind::ALL.len())]);
    FlowEdge::new(
        BlockId(rng.gen_range(0..blocks) as u32),
        BlockId(rng.gen_range(0..blocks) as u32),
        kind,
    )
}

/// Statement pool for the enumerated dataflow family: three variables,
/// reads and killing writes interleaved.
const STMTS: [&str; 6] =
    ["b = 3;", "b = a;", "c = a + b;", "a = a - 1;", "c = c * b;", "b = c;"];

/// Every program of the family: all statement triples under each of four
/// shapes (straight line, if, if-else, while). All stay within six basic
/// blocks and three named variables.
fn dataflow_family() -> Vec<String> {
    let mut programs = Vec::new();
    for si in STMTS {
        for sj in STMTS {
            for sk in STMTS {
                let head = "int f(int a) { int b = 0; int c = 1;";
                let tail = "return a + b + c; }";
                programs.push(format!("{head} {si} {sj} {sk} {tail}"));
                programs.push(format!("{head} {si} if (a < b) {{ {sj} }} {sk} {tail}"));
                programs.push(format!("{head} {si} if (a < b) {{ {sj} }} else {{ {sk} }} {tail}"));
                programs.push(format!("{head} {si} while (b > 0) {{ {sj} }} {sk} {tail}"));
            }
        }
    }
    programs
}

/// Reference predicate: the definition survives its own block past the
/// defining instruction, then some control path reaches `target` without
/// an intervening killing write. Visiting each block at most twice makes
/// the path enumeration exhaustive, since any witness walk shortens to
/// one without repeated interior blocks (plus one revisit for cycles
/// through the defining block).
fn oracle_reaches(prog: &ProgramAst, cfg: &Cfg, site: &DefSite, target: BlockId) -> bool {
    let block = cfg.block(site.block);
    for instr in &block.instrs[site.instr + 1..] {
        let kills = instr
            .defined_vars(&prog.ast)
            .iter()
            .any(|(var, killing)| *killing && *var == site.var);
        if kills {
            return false;
        }
    }
    let kills: Vec<bool> = cfg
        .blocks
        .iter()
        .map(|b| {
            b.instrs.iter().any(|i| {
                i.defined_vars(&prog.ast)
                    .iter()
                    .any(|(var, killing)| *killing && *var == site.var)
            })
        })
        .collect();
    let mut succs: Vec<Vec<BlockId>> = vec![Vec::new(); cfg.blocks.len()];
    for e in &cfg.edges {
        if e.kind.is_control() {
            succs[e.src.0 as usize].push(e.dst);
        }
    }
    let mut visits = vec![0u32; cfg.blocks.len()];
    enumerate_paths(&succs, &kills, site.block, target, &mut visits)
}

fn enumerate_paths(
    succs: &[Vec<BlockId>],
    kills: &[bool],
    from: BlockId,
    target: BlockId,
    visits: &mut [u32],
) -> bool {
    for &next in &succs[from.0 as usize] {
        if next == target {
            return true;
        }
        let slot = next.0 as usize;
        if visits[slot] < 2 && !kills[slot] {
            visits[slot] += 1;
            if enumerate_paths(succs, kills, next, target, visits) {
                return true;
            }
            visits[slot] -= 1;
        }
    }
    false
}

#[test]
fn criterion_04_dataflow_oracle() {
    verdict(4, "reaching definitions match path enumeration", || {
        let started = Instant::now();
        let family = dataflow_family();
        assert!(family.len() >= 200, "family holds {} programs", family.len());
        for src in &family {
            let prog = parse_source(src).unwrap();
            let tac = lower_to_tac(&prog);
            let cfg = build_cfg(&prog, &tac).unwrap();
            assert!(cfg.blocks.len() <= 6, "family overflow: {src}");
            let rd = reaching_definitions(&prog, &cfg);
            for (idx, site) in rd.sites().iter().enumerate() {
                for block in &cfg.blocks {
                    assert_eq!(
                        rd.reaches(idx, block.id),
                        oracle_reaches(&prog, &cfg, site, block.id),
                        "site {site:?} at block {} disagrees\nprogram: {src}",
                        block.id
                    );
                }
            }
        }
        assert!(started.elapsed().as_secs() < 60, "took {:?}", started.elapsed());
    });
}

fn program_vector(graph: &CodeGraph, params: &MfgnnParams, vocab_src: &[&CodeGraph]) -> Vec<f64> {
    let vocab = build_vocab(vocab_src.iter().flat_map(|g| &g.blocks));
    let tape = Tape::new();
    let out = if params.config.is_default() {
        forward(&tape, graph, &vocab, params).unwrap()
    } else {
        forward_with_config(&tape, graph, &vocab, params).unwrap()
    };
    tape.value(out.program_vector)
}

#[test]
fn criterion_05_fixture_discriminability() {
    verdict(5, "reassociated fixtures separate, label counts collapse", || {
        let a = fixture_graph("field_score_a.mini");
        let b = fixture_graph("field_score_b.mini");
        assert_eq!(a.block_count, b.block_count);
        assert_eq!(a.edges, b.edges);
        let differing = a.blocks.iter().zip(&b.blocks).filter(|(x, y)| x != y).count();
        assert_eq!(differing, 1, "exactly one block tree should differ");

        let sources = [&a, &b];
        let vocab_len = build_vocab(sources.iter().flat_map(|g| &g.blocks)).len();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let params = MfgnnParams::new(FULL, vocab_len, 2, AblationConfig::default(), &mut rng);
        let va = program_vector(&a, &params, &sources);
        let vb = program_vector(&b, &params, &sources);
        let linf = va.iter().zip(&vb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(linf > 1e-6, "tree-aware features look identical, L-inf {linf:.3e}");

        // The differing blocks hold the same label multiset, so a variant
        // that only counts labels cannot tell the programs apart.
        let counts = AblationConfig { block_repr: BlockRepr::Bow, ..AblationConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let params = MfgnnParams::new(FULL, vocab_len, 2, counts, &mut rng);
        let va = program_vector(&a, &params, &sources);
        let vb = program_vector(&b, &params, &sources);
        assert_eq!(va, vb, "label-count features should collapse the difference");
    });
}

#[test]
fn criterion_06_overfit_sanity() {
    verdict(6, "two-class corpus fits at reference widths", || {
        let started = Instant::now();
        let manifest = DatasetManifest::load(&fixture("classify/manifest.jsonl")).unwrap();
        assert_eq!(manifest.len(), 20);
        let (train_part, val_part, _) = split_dataset(&manifest, manifest.seed).unwrap();
        let train = load_classify_set(&train_part).unwrap();
        let val = load_classify_set(&val_part).unwrap();
        assert!(
            (1..train.len()).contains(&train.iter().filter(|(_, l)| *l == 1).count()),
            "training split should hold both classes"
        );
        let options = TrainOptions { stop_at_train_score: Some(1.0), ..TrainOptions::default() };
        let model = train_classifier(
            &train,
            &val,
            manifest.classes,
            FULL,
            AblationConfig::default(),
            &options,
        )
        .unwrap();
        assert!(model.history.len() <= 200);
        assert!(
            model.history.iter().any(|epoch| epoch.train_score == 1.0),
            "training accuracy never reached 1.0: {:?}",
            model.history.last()
        );
        assert!(started.elapsed().as_secs() < 300, "took {:?}", started.elapsed());
    });
}

#[test]
fn criterion_07_clone_sanity() {
    verdict(7, "pair scorer separates its training pairs", || {
        let manifest = DatasetManifest::load(&fixture("clone/pairs.jsonl")).unwrap();
        assert_eq!(manifest.len(), 30);
        let (train_part, val_part, _) = split_dataset(&manifest, manifest.seed).unwrap();
        let train = load_clone_set(&train_part).unwrap();
        let val = load_clone_set(&val_part).unwrap();
        let options = TrainOptions { stop_at_train_score: Some(1.0), ..TrainOptions::default() };
        let model =
            train_clone_scorer(&train, &val, FULL, AblationConfig::default(), &options).unwrap();
        let on_train = evaluate_clone_scorer(&train, &model.vocab, &model.params).unwrap();
        assert_eq!(on_train.positive_f1(), 1.0, "training pairs not separated: {on_train:?}");

        // The similarity is built on |v1 - v2|, so swapping the arguments
        // must reproduce the score bit for bit.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let tape = Tape::new();
            let v1 =
                tape.vector((0..FULL.hidden_dim).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let v2 =
                tape.vector((0..FULL.hidden_dim).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let ab = tape.scalar_value(clone_score(&tape, v1, v2, &model.params.set).unwrap());
            let ba = tape.scalar_value(clone_score(&tape, v2, v1, &model.params.set).unwrap());
            assert_eq!(ab.to_bits(), ba.to_bits(), "asymmetric: {ab} vs {ba}");
        }
    });
}

#[test]
fn criterion_08_metric_oracles() {
    verdict(8, "metrics match brute-force recomputation", || {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let classes = rng.gen_range(2..=5usize);
            let n = rng.gen_range(2..=40usize);
            let preds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();

            let hits = preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
            assert_eq!(accuracy(&preds, &labels), hits as f64 / n as f64);

            let scores = f1_per_class(&preds, &labels, classes);
            let mut f1_sum = 0.0;
            for class in 0..classes {
                let count = |f: &dyn Fn(usize, usize) -> bool| {
                    preds.iter().zip(&labels).filter(|(&p, &l)| f(p, l)).count() as f64
                };
                let tp = count(&|p, l| p == class && l == class);
                let fp = count(&|p, l| p == class && l != class);
                let missed = count(&|p, l| p != class && l == class);
                let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
                let recall = if tp + missed == 0.0 { 0.0 } else { tp / (tp + missed) };
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                assert_eq!(scores[class].precision, precision);
                assert_eq!(scores[class].recall, recall);
                assert_eq!(scores[class].f1, f1);
                f1_sum += f1;
            }
            assert_eq!(macro_f1(&preds, &labels, classes), f1_sum / classes as f64);

            // Coarse score grid, so tie handling is exercised constantly.
            let outcomes: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let ranks: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64 / 7.0).collect();
            let pos = outcomes.iter().filter(|&&l| l).count();
            let neg = n - pos;
            if pos == 0 || neg == 0 {
                assert!(auc(&ranks, &outcomes).is_err());
                continue;
            }
            let mut won = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if outcomes[i] && !outcomes[j] {
                        if ranks[i] > ranks[j] {
                            won += 1.0;
                        } else if ranks[i] == ranks[j] {
                            won += 0.5;
                        }
                    }
                }
            }
            let brute = won / (pos as f64 * neg as f64);
            let fast = auc(&ranks, &outcomes).unwrap();
            assert!((fast - brute).abs() <= 1e-12, "auc {fast} vs brute-force {brute}");
        }
    });
}

#[test]
fn criterion_09_format_round_trip() {
    verdict(9, "serialization identity and bit-exact restore", || {
        let mut count = 0usize;
        let mut corpus: Vec<PathBuf> =
            ["classify", "clone"].iter().flat_map(|dir| list_mini(&fixture(dir))).collect();
        corpus.push(fixture("field_score_a.mini"));
        corpus.push(fixture("field_score_b.mini"));
        for (i, path) in corpus.iter().enumerate() {
            let label = if i % 3 == 0 { None } else { Some(i as i64 % 7) };
            let source = fs::read_to_string(path).unwrap();
            let graph = graph_from_source(&source, label).unwrap();
            let back = deserialize_graph(&serialize_graph(&graph)).unwrap();
            assert_eq!(back, graph, "{}", path.display());
            count += 1;
        }
        assert!(count >= 40, "round-tripped only {count} graphs");

        let manifest = DatasetManifest::load(&fixture("classify/manifest.jsonl")).unwrap();
        let (train_part, val_part, test_part) = split_dataset(&manifest, manifest.seed).unwrap();
        let train = load_classify_set(&train_part).unwrap();
        let val = load_classify_set(&val_part).unwrap();
        let test = load_classify_set(&test_part).unwrap();
        let hyper = Hyper { embed_dim: 4, hidden_dim: 6, layers: 2 };
        let options = TrainOptions { epochs: 2, ..TrainOptions::default() };
        let model = train_classifier(
            &train,
            &val,
            manifest.classes,
            hyper,
            AblationConfig::default(),
            &options,
        )
        .unwrap();
        let before = evaluate_classifier(&test, &model.vocab, &model.params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&model.params, &model.vocab, dir.path()).unwrap();
        let (params, vocab) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(params.set, model.params.set, "restored tensors drifted");
        let after = evaluate_classifier(&test, &vocab, &params).unwrap();
        assert_eq!(before, after, "metrics changed across the round trip");
    });
}

fn list_mini(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().map(|e| e == "mini").unwrap_or(false))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_ablation_driver() {
    verdict(10, "variant sweep matches standalone runs", || {
        let manifest = DatasetManifest::load(&fixture("classify/manifest.jsonl")).unwrap();
        let hyper = Hyper { embed_dim: 8, hidden_dim: 12, layers: 2 };
        let options = TrainOptions { epochs: 3, ..TrainOptions::default() };

        let rows =
            run_ablation(&[AblationConfig::default()], &manifest, hyper, &options).unwrap();
        let (train_part, val_part, test_part) = split_dataset(&manifest, manifest.seed).unwrap();
        let train = load_classify_set(&train_part).unwrap();
        let val = load_classify_set(&val_part).unwrap();
        let test = load_classify_set(&test_part).unwrap();
        let model = train_classifier(
            &train,
            &val,
            manifest.classes,
            hyper,
            AblationConfig::default(),
            &options,
        )
        .unwrap();
        let standalone = evaluate_classifier(&test, &model.vocab, &model.params).unwrap();
        assert_eq!(rows[0].metrics, standalone, "sweep row drifted from the standalone run");
        assert_eq!(rows[0].best_epoch, model.best_epoch);

        let variants = [
            AblationConfig {
                edges: EdgeSubset::ControlOnly,
                edge_typing: EdgeTyping::Single,
                ..AblationConfig::default()
            },
            AblationConfig {
                edges: EdgeSubset::DataOnly,
                edge_typing: EdgeTyping::Single,
                ..AblationConfig::default()
            },
            AblationConfig {
                edges: EdgeSubset::ControlOnly,
                edge_typing: EdgeTyping::Typed,
                ..AblationConfig::default()
            },
        ];
        let rows = run_ablation(&variants, &manifest, hyper, &options).unwrap();
        assert_eq!(rows.len(), 3);
        let table = format_ablation_table(&rows);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4, "header plus one row per variant:\n{table}");
        for column in ["variant", "accuracy", "macro-F1", "AUC", "best epoch"] {
            assert!(lines[0].contains(column), "missing column {column}:\n{table}");
        }
        assert!(lines[1].starts_with("ast+control+untyped"));
        assert!(lines[2].starts_with("ast+data+untyped"));
        assert!(lines[3].starts_with("ast+control+typed"));
    });
}
