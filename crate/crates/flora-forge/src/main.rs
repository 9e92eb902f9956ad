use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use flora_forge::classify::{partition, DomainRuleSet};
use flora_forge::corpus::{load_corpus, read_dataset};
use flora_forge::lengths::{equal_edges, DistKind, LengthDistribution};
use flora_forge::pipeline::{run, PipelineConfig};
use flora_forge::report::{build_report, fit_report, verify_dataset};
use flora_forge::tokenize::TokenCounter;
use flora_forge::types::{Domain, Strategy};
use flora_forge::FloraError;

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 verification
/// failure.
#[derive(Parser)]
#[command(name = "flora-forge", version, about, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a source corpus into math / code / general files
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value = "heuristic:4")]
        counter: String,
    },
    /// Run the full dataset build from a config file
    Build(BuildArgs),
    /// Dataset statistics
    Stats {
        #[command(subcommand)]
        mode: StatsMode,
    },
    /// Replay every record from its sources and report the pass rate
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long, default_value_t = 2048)]
        threshold: usize,
        #[arg(long, default_value = "heuristic:4")]
        counter: String,
    },
    /// Pretty-print one record
    Inspect {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, conflicts_with = "id")]
        index: Option<usize>,
        #[arg(long)]
        id: Option<String>,
    },
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    counter: Option<String>,
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    strip_meta: bool,
    #[arg(long)]
    max_reuse: Option<usize>,
}

#[derive(Subcommand)]
enum StatsMode {
    /// Analytic vs empirical bucket table as CSV
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        dist: String,
        #[arg(long)]
        max_tokens: usize,
        #[arg(long, default_value_t = 5)]
        buckets: usize,
    },
    /// Human-readable summary
    Summary {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        dist: String,
        #[arg(long)]
        max_tokens: usize,
        #[arg(long, default_value_t = 20)]
        buckets: usize,
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long, default_value = "heuristic:4")]
        counter: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode, FloraError> {
    match cmd {
        Command::Classify {
            input,
            out_dir,
            rules,
            counter,
        } => cmd_classify(input, out_dir, rules, &counter),
        Command::Build(args) => cmd_build(args),
        Command::Stats { mode } => cmd_stats(mode),
        Command::Verify {
            input,
            source,
            threshold,
            counter,
        } => cmd_verify(input, source, threshold, &counter),
        Command::Inspect { input, index, id } => cmd_inspect(input, index, id),
    }
}

fn cmd_classify(
    input: PathBuf,
    out_dir: PathBuf,
    rules: Option<PathBuf>,
    counter: &str,
) -> Result<ExitCode, FloraError> {
    let counter = TokenCounter::from_spec(counter)?;
    let rules = match rules {
        Some(p) => DomainRuleSet::from_file(p)?,
        None => DomainRuleSet::default(),
    };
    let (corpus, skipped) = load_corpus(&input, &counter, false)?;
    let total = corpus.len();
    let (pools, counts) = partition(corpus, &rules);
    std::fs::create_dir_all(&out_dir).map_err(|e| FloraError::io(&out_dir, e))?;
    for domain in [Domain::Math, Domain::Code, Domain::General] {
        let path = out_dir.join(format!("{domain}.jsonl"));
        let file = std::fs::File::create(&path).map_err(|e| FloraError::io(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        use std::io::Write;
        for s in &pools[&domain] {
            let line = serde_json::json!({
                "id": s.id,
                "instruction": s.instruction,
                "input": s.input,
                "response": s.response,
                "domain": domain.as_str(),
            });
            writeln!(w, "{line}").map_err(|e| FloraError::io(&path, e))?;
        }
    }
    println!("total: {total}");
    println!("skipped: {skipped}");
    for domain in [Domain::Math, Domain::Code, Domain::General] {
        println!("{domain}: {}", counts[&domain]);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_build(args: BuildArgs) -> Result<ExitCode, FloraError> {
    let mut cfg = PipelineConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output = out;
    }
    if let Some(counter) = args.counter {
        cfg.counter = counter;
    }
    if let Some(dist) = args.dist {
        cfg.dist = DistKind::from_cli(&dist)?;
    }
    if let Some(max_tokens) = args.max_tokens {
        cfg.max_tokens = max_tokens;
    }
    if let Some(templates) = args.templates {
        cfg.templates = Some(templates);
    }
    if let Some(rules) = args.rules {
        cfg.rules = Some(rules);
    }
    if args.strip_meta {
        cfg.strip_meta = true;
    }
    if let Some(max_reuse) = args.max_reuse {
        cfg.max_reuse = Some(max_reuse);
    }
    cfg.validate()?;
    let out = run(&cfg)?;
    let counter = TokenCounter::from_spec(&cfg.counter)?;
    let dist = LengthDistribution::with_normal_params(
        cfg.dist,
        cfg.max_tokens,
        cfg.normal_mean,
        cfg.normal_sigma,
    );
    let report = build_report(&out.records, &dist, &equal_edges(5), &counter, None)?;
    println!("wrote {} records to {}", out.records.len(), cfg.output.display());
    if out.skipped_source_lines > 0 {
        println!("skipped {} malformed source lines", out.skipped_source_lines);
    }
    print!("{}", report.summary());
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(mode: StatsMode) -> Result<ExitCode, FloraError> {
    match mode {
        StatsMode::Fit {
            input,
            dist,
            max_tokens,
            buckets,
        } => {
            let records = read_dataset(&input)?;
            let dist = LengthDistribution::new(DistKind::from_cli(&dist)?, max_tokens);
            let fit = fit_report(&records, &dist, &equal_edges(buckets))?;
            print!("{}", fit.to_csv());
        }
        StatsMode::Summary {
            input,
            dist,
            max_tokens,
            buckets,
            source,
            counter,
        } => {
            let records = read_dataset(&input)?;
            let counter = TokenCounter::from_spec(&counter)?;
            let dist = LengthDistribution::new(DistKind::from_cli(&dist)?, max_tokens);
            let source_index: Option<HashMap<String, String>> = match source {
                Some(path) => {
                    let (corpus, _) = load_corpus(&path, &counter, false)?;
                    let rules = DomainRuleSet::default();
                    let (pools, _) = partition(corpus, &rules);
                    let mut index = HashMap::new();
                    for (d, pool) in &pools {
                        for s in pool {
                            index.insert(s.id.clone(), d.to_string());
                        }
                    }
                    Some(index)
                }
                None => None,
            };
            let report = build_report(
                &records,
                &dist,
                &equal_edges(buckets),
                &counter,
                source_index.as_ref(),
            )?;
            print!("{}", report.summary());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(
    input: PathBuf,
    source: PathBuf,
    threshold: usize,
    counter: &str,
) -> Result<ExitCode, FloraError> {
    let counter = TokenCounter::from_spec(counter)?;
    let records = read_dataset(&input)?;
    let (corpus, _) = load_corpus(&source, &counter, false)?;
    let result = verify_dataset(&records, &corpus, threshold);
    println!("records: {}", result.total);
    println!("passed: {}", result.passed);
    println!("pass_rate: {:.6}", result.pass_rate);
    if let Some((id, reason)) = &result.first_failure {
        println!("first_failure: {id}: {reason}");
    }
    if result.pass_rate < 1.0 {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_inspect(
    input: PathBuf,
    index: Option<usize>,
    id: Option<String>,
) -> Result<ExitCode, FloraError> {
    let records = read_dataset(&input)?;
    let rec = match (index, id) {
        (Some(i), _) => records
            .get(i)
            .ok_or_else(|| FloraError::NotFound(format!("index {i}")))?,
        (None, Some(id)) => records
            .iter()
            .find(|r| r.id == id)
            .ok_or(FloraError::NotFound(id))?,
        (None, None) => records
            .first()
            .ok_or_else(|| FloraError::NotFound("empty dataset".into()))?,
    };
    println!("id: {}", rec.id);
    println!("strategy: {}", rec.strategy);
    if rec.strategy == Strategy::Passthrough {
        println!("verbatim: true");
    }
    println!("sources: {}", rec.source_ids.join(", "));
    println!("token_count: {}", rec.token_count);
    if let Some(t) = &rec.template_id {
        println!("template: {t}");
    }
    if let Some(meta) = &rec.meta {
        println!(
            "meta: {}",
            serde_json::to_string(meta).expect("meta serializes")
        );
    }
    println!("instruction ({} chars):", rec.instruction.chars().count());
    println!("{}", rec.instruction);
    println!("response ({} chars):", rec.response.chars().count());
    println!("{}", rec.response);
    Ok(ExitCode::SUCCESS)
}
