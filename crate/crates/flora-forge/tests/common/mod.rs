//! Shared helpers for the integration suites: a deterministic synthetic
//! source corpus and a baseline pipeline config.

#![allow(dead_code)]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use flora_forge::lengths::DistKind;
use flora_forge::pipeline::PipelineConfig;
use flora_forge::types::NumberingStyle;

const FILLER: [&str; 12] = [
    "harbor", "lantern", "granite", "willow", "copper", "meadow", "ember", "stratum", "quarry",
    "breeze", "timber", "signal",
];

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One synthetic source record as a JSON line. Instructions and
/// responses are unique per index; lengths vary from ~20 to ~370 tokens
/// under the 4-chars-per-token heuristic.
pub fn fixture_line(i: usize) -> String {
    let domain = ["math", "code", "general"][i % 3];
    let instruction = format!(
        "Describe the outcome of procedure {i} when parameter {} is {}.",
        i % 89,
        FILLER[i % FILLER.len()]
    );
    let input = if i.is_multiple_of(7) {
        format!("Reference notes for procedure {i}.")
    } else {
        String::new()
    };
    let words = 10 + (mix(i as u64) % 200) as usize;
    let mut response = format!("Observation {i}: the procedure settles after");
    for w in 0..words {
        response.push(' ');
        response.push_str(FILLER[(i + w * 5) % FILLER.len()]);
    }
    response.push_str(&format!(" cycles in configuration {i}."));
    serde_json::json!({
        "id": format!("src{i:06}"),
        "instruction": instruction,
        "input": input,
        "response": response,
        "domain": domain,
    })
    .to_string()
}

/// Writes an `n`-record synthetic corpus to `path`.
pub fn write_corpus(path: &Path, n: usize) {
    let file = File::create(path).expect("create fixture corpus");
    let mut w = BufWriter::new(file);
    for i in 0..n {
        writeln!(w, "{}", fixture_line(i)).unwrap();
    }
    w.flush().unwrap();
}

/// Baseline config: defaults everywhere except the handful of knobs the
/// suites vary.
pub fn base_config(
    source: PathBuf,
    output: PathBuf,
    target_sample_count: usize,
    max_tokens: usize,
    dist: DistKind,
    seed: u64,
) -> PipelineConfig {
    PipelineConfig {
        source,
        output,
        seed,
        max_tokens,
        dist,
        normal_mean: 0.5,
        normal_sigma: 0.15,
        target_sample_count,
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
