use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rosptp::{
    build_histogram, check, compile_pipeline, load_graph, parse_query, simulate, CheckOptions, PipelineSpec, Ptp,
    ScenarioConfig,
};

fn fixture(name: &str) -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/");
    std::fs::read_to_string(format!("{path}{name}")).unwrap()
}

fn checker(c: &mut Criterion) {
    let q = parse_query("Pmax=?[F<=35 \"Success\"]").unwrap();
    let opts = CheckOptions::default();
    let original = Ptp::from_json(&fixture("original_model.json")).unwrap();
    let improved = compile_pipeline(&PipelineSpec::from_json(&fixture("improved_inline.json")).unwrap()).unwrap();
    let mut group = c.benchmark_group("check");
    group.sample_size(10);
    for (name, m) in [("original", &original), ("improved", &improved)] {
        for g in [2u32, 4, 8] {
            group.bench_with_input(BenchmarkId::new(name, g), &g, |b, &g| {
                b.iter(|| check(black_box(m), &q, g, &opts).unwrap())
            });
        }
    }
    group.finish();
}

fn estimation(c: &mut Criterion) {
    let graph = load_graph(&fixture("case_study_graph.json")).unwrap();
    let mut cfg = ScenarioConfig::from_json(&fixture("case_study_scenario.json")).unwrap();
    cfg.horizon = 1000.0;
    c.bench_function("simulate_1000s", |b| b.iter(|| simulate(black_box(&graph), &cfg).unwrap()));

    let samples: Vec<f64> = (0..10_000).map(|i| 0.09 + (i % 97) as f64 * 0.0003).collect();
    c.bench_function("histogram_10k", |b| b.iter(|| build_histogram(black_box(&samples), 0.01, 0.05).unwrap()));
}

criterion_group!(benches, checker, estimation);
criterion_main!(benches);
