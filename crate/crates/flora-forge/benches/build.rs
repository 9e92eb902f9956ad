//! Benchmarks the full build with the rayon path against the forced
//! sequential path on the same fixture. With the `parallel` feature
//! disabled both arms run sequentially.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use flora_forge::lengths::DistKind;
use flora_forge::pipeline::{run_with_parallelism, PipelineConfig};
use flora_forge::types::NumberingStyle;

fn write_corpus(path: &Path, n: usize) {
    let words = ["harbor", "lantern", "granite", "willow", "copper", "meadow"];
    let file = File::create(path).expect("create bench corpus");
    let mut w = BufWriter::new(file);
    for i in 0..n {
        let mut response = format!("Observation {i}:");
        for j in 0..(40 + (i * 13) % 160) {
            response.push(' ');
            response.push_str(words[(i + j) % words.len()]);
        }
        let domain = ["math", "code", "general"][i % 3];
        let line = serde_json::json!({
            "id": format!("src{i:06}"),
            "instruction": format!("Describe the outcome of procedure {i}."),
            "response": response,
            "domain": domain,
        });
        writeln!(w, "{line}").unwrap();
    }
}

fn config(source: PathBuf, output: PathBuf) -> PipelineConfig {
    PipelineConfig {
        source,
        output,
        seed: 42,
        max_tokens: 16_384,
        dist: DistKind::FloraExp,
        normal_mean: 0.5,
        normal_sigma: 0.15,
        target_sample_count: 200,
        strategy_weights: [1.0 / 7.0; 7],
        beta_fqa: 1,
        beta_aba: 1,
        beta_aid: 1,
        ana_unanswered_fraction: 0.2,
        replacement_threshold: 2048,
        min_budget: 2048,
        overhead: 512,
        counter: "heuristic:4".into(),
        templates: None,
        rules: None,
        max_reuse: None,
        strip_meta: false,
        separator: "\n\n".into(),
        numbering: NumberingStyle::Bracketed,
    }
}

fn bench_build(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("source.jsonl");
    write_corpus(&source, 3000);
    let mut group = c.benchmark_group("pipeline_build");
    group.sample_size(10);
    for (label, parallel) in [("parallel", true), ("sequential", false)] {
        let cfg = config(source.clone(), dir.path().join(format!("{label}.jsonl")));
        group.bench_function(BenchmarkId::new("200_records_16k", label), |b| {
            b.iter(|| run_with_parallelism(&cfg, parallel).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, bench_build);
criterion_main!(benches);
