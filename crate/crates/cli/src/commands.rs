//! The six subcommand implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Serialize;

use mfgnn_core::cfg::EdgeKind;
use mfgnn_core::codegraph::{graph_from_source, serialize_graph};
use mfgnn_core::nn::{gradient_audit, AblationConfig, Hyper, AUDIT_STEP, AUDIT_TOLERANCE};
use mfgnn_core::train::{
    evaluate_classifier, evaluate_clone_scorer, format_ablation_table, load_checkpoint,
    load_classify_set, load_clone_set, run_ablation, save_checkpoint, split_dataset,
    train_classifier, train_clone_scorer, DatasetManifest, Metrics, Task, TrainedModel,
};

use crate::report::{read_input, write_json, CliError, MetricsReport};
use crate::{AblateArgs, EvalArgs, FitArgs, GradcheckArgs, GraphArgs, Split};

/// Corpus-level statistics over the converted sources.
#[derive(Serialize)]
struct CorpusStats {
    programs: usize,
    blocks: usize,
    avg_blocks: f64,
    /// Edge totals per kind; every kind is listed, present or not.
    edges: BTreeMap<&'static str, usize>,
    /// Conditional-true plus switch edges per program.
    avg_branch_edges: f64,
    /// Unary and binary operator nodes per program.
    avg_operators: f64,
}

pub fn graph(args: &GraphArgs) -> Result<(), CliError> {
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Failed(format!("{}: {e}", args.out.display())))?;
    let mut edges: BTreeMap<&'static str, usize> =
        EdgeKind::ALL.iter().map(|kind| (kind.name(), 0)).collect();
    let (mut blocks, mut branch_edges, mut operators) = (0usize, 0usize, 0usize);
    let mut used = BTreeSet::new();
    for input in &args.inputs {
        let source = read_input(input)?;
        let graph = graph_from_source(&source, None)
            .map_err(|e| CliError::Failed(format!("{}: {e}", input.display())))?;
        let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("program");
        // Distinct outputs even when two inputs share a file stem.
        let mut name = stem.to_string();
        let mut serial = 1;
        while !used.insert(name.clone()) {
            serial += 1;
            name = format!("{stem}-{serial}");
        }
        let out_path = args.out.join(format!("{name}.json"));
        fs::write(&out_path, serialize_graph(&graph))
            .map_err(|e| CliError::Failed(format!("{}: {e}", out_path.display())))?;
        blocks += graph.block_count;
        for edge in &graph.edges {
            *edges.get_mut(edge.kind.name()).expect("every kind is preseeded") += 1;
            if matches!(edge.kind, EdgeKind::CondTrue | EdgeKind::SwitchBranch) {
                branch_edges += 1;
            }
        }
        for block in &graph.blocks {
            operators += block
                .root
                .labels()
                .iter()
                .filter(|label| **label == "BOp" || **label == "UOp")
                .count();
        }
    }
    let programs = args.inputs.len();
    let denom = programs.max(1) as f64;
    let stats = CorpusStats {
        programs,
        blocks,
        avg_blocks: blocks as f64 / denom,
        edges,
        avg_branch_edges: branch_edges as f64 / denom,
        avg_operators: operators as f64 / denom,
    };
    write_json(&args.out.join("stats.json"), &stats)?;
    println!("wrote {programs} graph file(s) to {}", args.out.display());
    println!(
        "blocks {} (avg {:.2}), branch edges/program {:.2}, operators/program {:.2}",
        stats.blocks, stats.avg_blocks, stats.avg_branch_edges, stats.avg_operators
    );
    let listing: Vec<String> = EdgeKind::ALL
        .iter()
        .map(|kind| format!("{} {}", kind.name(), stats.edges[kind.name()]))
        .collect();
    println!("edges: {}", listing.join(", "));
    Ok(())
}

pub fn train(args: &FitArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest, Some(Task::Classify))?;
    let config = load_config(args.config.as_deref())?;
    let options = args.schedule.to_options();
    // The split follows the manifest seed, not --seed: held-out membership
    // is a property of the dataset, and `eval` must find the same split.
    let (train_part, val_part, test_part) = split_dataset(&manifest, manifest.seed)?;
    let train_set = load_classify_set(&train_part)?;
    let val_set = load_classify_set(&val_part)?;
    let test_set = load_classify_set(&test_part)?;
    let model = train_classifier(
        &train_set,
        &val_set,
        manifest.classes,
        args.hyper.to_hyper(),
        config,
        &options,
    )?;
    let metrics = evaluate_classifier(&test_set, &model.vocab, &model.params)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    finish_fit(args, Task::Classify, options.seed, &model, metrics)
}

pub fn clone_pairs(args: &FitArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest, Some(Task::Clone))?;
    let config = load_config(args.config.as_deref())?;
    let options = args.schedule.to_options();
    let (train_part, val_part, test_part) = split_dataset(&manifest, manifest.seed)?;
    let train_set = load_clone_set(&train_part)?;
    let val_set = load_clone_set(&val_part)?;
    let test_set = load_clone_set(&test_part)?;
    let model =
        train_clone_scorer(&train_set, &val_set, args.hyper.to_hyper(), config, &options)?;
    let metrics = evaluate_clone_scorer(&test_set, &model.vocab, &model.params)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    finish_fit(args, Task::Clone, options.seed, &model, metrics)
}

/// Saves the fitted model, writes the reports, and prints the summary
/// shared by `train` and `clone`.
fn finish_fit(
    args: &FitArgs,
    task: Task,
    seed: u64,
    model: &TrainedModel,
    metrics: Metrics,
) -> Result<(), CliError> {
    save_checkpoint(&model.params, &model.vocab, &args.out)?;
    write_json(&args.out.join("history.json"), &model.history)?;
    let report = MetricsReport {
        task: task_name(task),
        split: "test",
        seed,
        variant: model.params.config.label(),
        best_epoch: Some(model.best_epoch),
        best_val_score: Some(model.best_val_score),
        metrics,
    };
    let metrics_path = args.metrics.clone().unwrap_or_else(|| args.out.join("metrics.json"));
    write_json(&metrics_path, &report)?;
    println!(
        "{} epoch(s) run, best epoch {} (val score {:.4})",
        model.history.len(),
        model.best_epoch,
        model.best_val_score
    );
    println!("test: {}", summarize(task, &report.metrics));
    println!("checkpoint -> {}", args.out.display());
    println!("metrics -> {}", metrics_path.display());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest, None)?;
    if !args.checkpoint.is_dir() {
        return Err(CliError::Missing(format!(
            "no such checkpoint: {}",
            args.checkpoint.display()
        )));
    }
    let (params, vocab) = load_checkpoint(&args.checkpoint)?;
    let part = match args.split {
        Split::All => manifest,
        pick => {
            let (train_part, val_part, test_part) = split_dataset(&manifest, manifest.seed)?;
            match pick {
                Split::Train => train_part,
                Split::Val => val_part,
                Split::Test => test_part,
                Split::All => unreachable!(),
            }
        }
    };
    let metrics = match part.task {
        Task::Classify => {
            if part.classes != params.num_classes {
                return Err(CliError::Failed(format!(
                    "checkpoint expects {} classes, manifest declares {}",
                    params.num_classes, part.classes
                )));
            }
            let set = load_classify_set(&part)?;
            evaluate_classifier(&set, &vocab, &params)
                .map_err(|e| CliError::Failed(e.to_string()))?
        }
        Task::Clone => {
            let set = load_clone_set(&part)?;
            evaluate_clone_scorer(&set, &vocab, &params)
                .map_err(|e| CliError::Failed(e.to_string()))?
        }
    };
    let report = MetricsReport {
        task: task_name(part.task),
        split: args.split.name(),
        seed: part.seed,
        variant: params.config.label(),
        best_epoch: None,
        best_val_score: None,
        metrics,
    };
    write_json(&args.metrics, &report)?;
    println!("{} {}: {}", report.task, report.split, summarize(part.task, &report.metrics));
    println!("metrics -> {}", args.metrics.display());
    Ok(())
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    // Small widths keep the two evaluations per audited scalar affordable;
    // every stage and layer is still exercised.
    let hyper = Hyper { embed_dim: 4, hidden_dim: 6, layers: 3 };
    let rows = gradient_audit(args.seed, hyper).map_err(|e| CliError::Failed(e.to_string()))?;
    println!(
        "gradient audit: seed {}, step {:e}, tolerance {:e}",
        args.seed, AUDIT_STEP, AUDIT_TOLERANCE
    );
    for row in &rows {
        println!(
            "  {:<32} {:>12.3e}  {}",
            row.stage,
            row.worst_rel_err,
            if row.passed() { "ok" } else { "FAIL" }
        );
    }
    if let Some(out) = &args.out {
        write_json(out, &rows)?;
        println!("report -> {}", out.display());
    }
    let failures = rows.iter().filter(|row| !row.passed()).count();
    if failures > 0 {
        return Err(CliError::Failed(format!(
            "{failures} stage(s) exceeded the gradient tolerance"
        )));
    }
    Ok(())
}

/// One sweep row as written to the JSON report.
#[derive(Serialize)]
struct VariantReport<'a> {
    variant: &'a str,
    best_epoch: usize,
    #[serde(flatten)]
    metrics: &'a Metrics,
}

pub fn ablate(args: &AblateArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest, None)?;
    let matrix = if args.configs.is_empty() {
        vec![AblationConfig::default()]
    } else {
        args.configs
            .iter()
            .map(|path| load_config(Some(path)))
            .collect::<Result<Vec<_>, _>>()?
    };
    let rows =
        run_ablation(&matrix, &manifest, args.hyper.to_hyper(), &args.schedule.to_options())?;
    print!("{}", format_ablation_table(&rows));
    let report: Vec<VariantReport> = rows
        .iter()
        .map(|row| VariantReport {
            variant: &row.label,
            best_epoch: row.best_epoch,
            metrics: &row.metrics,
        })
        .collect();
    write_json(&args.out, &report)?;
    println!("rows -> {}", args.out.display());
    Ok(())
}

fn load_manifest(path: &Path, expected: Option<Task>) -> Result<DatasetManifest, CliError> {
    if !path.is_file() {
        return Err(CliError::Missing(format!("no such manifest: {}", path.display())));
    }
    let manifest = DatasetManifest::load(path)?;
    match (expected, manifest.task) {
        (Some(Task::Classify), Task::Clone) => Err(CliError::Failed(format!(
            "{}: expected a classification manifest, found clone pairs",
            path.display()
        ))),
        (Some(Task::Clone), Task::Classify) => Err(CliError::Failed(format!(
            "{}: expected a clone-pair manifest, found labeled programs",
            path.display()
        ))),
        _ => Ok(manifest),
    }
}

fn load_config(path: Option<&Path>) -> Result<AblationConfig, CliError> {
    let Some(path) = path else { return Ok(AblationConfig::default()) };
    if !path.is_file() {
        return Err(CliError::Missing(format!("no such config: {}", path.display())));
    }
    AblationConfig::load(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

fn task_name(task: Task) -> &'static str {
    match task {
        Task::Classify => "classify",
        Task::Clone => "clone",
    }
}

fn summarize(task: Task, metrics: &Metrics) -> String {
    let mut line =
        format!("accuracy {:.4}, macro-F1 {:.4}", metrics.accuracy, metrics.macro_f1);
    if task == Task::Clone {
        line.push_str(&format!(", positive-class F1 {:.4}", metrics.positive_f1()));
    }
    if let Some(auc) = metrics.auc {
        line.push_str(&format!(", AUC {auc:.4}"));
    }
    line
}
