//! Measures the three hot paths: source-to-graph conversion, the
//! reaching-definitions solve, and one model forward pass.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mfgnn_core::cfg::{build_cfg, lower_to_tac};
use mfgnn_core::codegraph::{build_vocab, graph_from_source};
use mfgnn_core::dataflow::reaching_definitions;
use mfgnn_core::frontend::parse_source;
use mfgnn_core::nn::{forward, AblationConfig, Hyper, MfgnnParams};
use mfgnn_core::tensor::Tape;

/// Three functions with a loop, a branch, a switch, and cross-function
/// calls; large enough that every edge kind except exceptions shows up.
const SOURCE: &str = "\
int scale(int v, int k) {
    int acc = 0;
    for (int i = 0; i < k; i = i + 1) {
        if (v % 2 == 0 && i > 1) { acc = acc + v; } else { acc = acc - i; }
    }
    switch (acc) { case 0: return v; default: acc = acc + 1; }
    return acc;
}
int pick(int a, int b) {
    int best = a;
    if (a < b) { best = b; }
    return scale(best, 3);
}
int spin(int n) {
    int i = 0;
    int total = 0;
    while (i < n) {
        total = total + pick(i, n - i);
        i = i + 1;
    }
    return total;
}
";

fn source_to_graph(c: &mut Criterion) {
    c.bench_function("source_to_graph", |b| {
        b.iter(|| graph_from_source(black_box(SOURCE), None).unwrap())
    });
}

fn reaching_defs_solve(c: &mut Criterion) {
    let prog = parse_source(SOURCE).unwrap();
    let tac = lower_to_tac(&prog);
    let cfg = build_cfg(&prog, &tac).unwrap();
    c.bench_function("reaching_definitions", |b| {
        b.iter(|| reaching_definitions(black_box(&prog), black_box(&cfg)))
    });
}

fn model_forward(c: &mut Criterion) {
    let graph = graph_from_source(SOURCE, None).unwrap();
    let vocab = build_vocab(&graph.blocks);
    let hyper = Hyper { embed_dim: 8, hidden_dim: 16, layers: 3 };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let params = MfgnnParams::new(hyper, vocab.len(), 2, AblationConfig::default(), &mut rng);
    c.bench_function("model_forward", |b| {
        b.iter(|| {
            let tape = Tape::new();
            forward(&tape, black_box(&graph), &vocab, &params).unwrap()
        })
    });
}

criterion_group!(benches, source_to_graph, reaching_defs_solve, model_forward);
criterion_main!(benches);
