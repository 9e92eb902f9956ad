//! End-to-end build: partition, per-record budget sampling, pack
//! building, strategy assignment, assembly, under-threshold replacement,
//! shuffle, write. All randomness derives from (seed, record index), so
//! parallel and serial runs produce identical datasets.

use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assemble::{assemble, AssemblySpec};
use crate::classify::{partition, DomainRuleSet};
use crate::corpus::{load_corpus, write_dataset, Manifest};
use crate::error::{FloraError, Result};
use crate::lengths::{DistKind, LengthDistribution};
use crate::pack::{build_pack, grow_pack};
use crate::templates::TemplateLibrary;
use crate::tokenize::TokenCounter;
use crate::types::{
    AssemblyMeta, AugmentedSample, Domain, MetaDetail, NumberingStyle, ShortSample, Strategy,
};

fn default_weights() -> [f64; 7] {
    [1.0 / 7.0; 7]
}
fn default_threshold() -> usize {
    2048
}
fn default_min_budget() -> usize {
    2048
}
fn default_overhead() -> usize {
    512
}
fn default_counter() -> String {
    "heuristic:4".into()
}
fn default_separator() -> String {
    "\n\n".into()
}
fn default_normal_mean() -> f64 {
    0.5
}
fn default_normal_sigma() -> f64 {
    0.15
}
fn default_beta() -> usize {
    1
}
fn default_ana_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub source: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub max_tokens: usize,
    pub dist: DistKind,
    #[serde(default = "default_normal_mean")]
    pub normal_mean: f64,
    #[serde(default = "default_normal_sigma")]
    pub normal_sigma: f64,
    pub target_sample_count: usize,
    /// Weights over [mosaic_plain, mosaic_permute, mosaic_maskout,
    /// fqa, aba, ana, aid]; must sum to 1.
    #[serde(default = "default_weights")]
    pub strategy_weights: [f64; 7],
    #[serde(default = "default_beta")]
    pub beta_fqa: usize,
    #[serde(default = "default_beta")]
    pub beta_aba: usize,
    #[serde(default = "default_beta")]
    pub beta_aid: usize,
    #[serde(default = "default_ana_fraction")]
    pub ana_unanswered_fraction: f64,
    #[serde(default = "default_threshold")]
    pub replacement_threshold: usize,
    #[serde(default = "default_min_budget")]
    pub min_budget: usize,
    #[serde(default = "default_overhead")]
    pub overhead: usize,
    #[serde(default = "default_counter")]
    pub counter: String,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default)]
    pub max_reuse: Option<usize>,
    #[serde(default)]
    pub strip_meta: bool,
    #[serde(default = "default_separator")]
    pub separator: String,
    #[serde(default)]
    pub numbering: NumberingStyle,
}

impl PipelineConfig {
    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FloraError::io(path, e))?;
        let cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| FloraError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.strategy_weights.iter().sum();
        if self.strategy_weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(FloraError::InvalidConfig(format!(
                "strategy weights must be nonnegative and sum to 1 (sum = {sum})"
            )));
        }
        if self.replacement_threshold >= self.max_tokens {
            return Err(FloraError::InvalidConfig(
                "replacement_threshold must be below max_tokens".into(),
            ));
        }
        if self.min_budget <= self.overhead {
            return Err(FloraError::InvalidConfig(
                "min_budget must exceed overhead".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.ana_unanswered_fraction)
            || self.ana_unanswered_fraction <= 0.0
        {
            return Err(FloraError::InvalidConfig(
                "ana_unanswered_fraction must lie in (0,1)".into(),
            ));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        let body = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(body.as_bytes());
        let digest = h.finalize();
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn assembly_spec(&self) -> AssemblySpec {
        AssemblySpec {
            separator: self.separator.clone(),
            numbering: self.numbering,
            beta_fqa: self.beta_fqa,
            beta_aba: self.beta_aba,
            beta_aid: self.beta_aid,
            ana_unanswered_fraction: self.ana_unanswered_fraction,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Independent rng stream for one record index.
pub fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)))
}

const SHUFFLE_STREAM: u64 = u64::MAX;

struct BuildContext {
    cfg: PipelineConfig,
    counter: TokenCounter,
    dist: LengthDistribution,
    library: TemplateLibrary,
    spec: AssemblySpec,
    pools: HashMap<Domain, Vec<ShortSample>>,
    /// (domain, cumulative token mass) in fixed order for the roulette pick.
    domain_cum: Vec<(Domain, f64)>,
    short_pool: Vec<ShortSample>,
}

const DOMAIN_ORDER: [Domain; 3] = [Domain::Math, Domain::Code, Domain::General];
const PACK_RETRIES: usize = 5;
/// Bound on pack-extension rounds when the rendered text runs below its
/// budget (strategies whose instruction lists questions without answers
/// render far less text than the pack's member token sum).
const GROW_ROUNDS: usize = 24;

impl BuildContext {
    fn pick_domain(&self, rng: &mut impl Rng) -> Domain {
        let total = self.domain_cum.last().map(|x| x.1).unwrap_or(0.0);
        let u = rng.gen::<f64>() * total;
        for &(d, cum) in &self.domain_cum {
            if u < cum {
                return d;
            }
        }
        self.domain_cum.last().unwrap().0
    }

    fn pick_strategy(&self, rng: &mut impl Rng) -> Strategy {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &w) in self.cfg.strategy_weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return Strategy::ASSEMBLED[i];
            }
        }
        Strategy::ASSEMBLED[6]
    }

    fn counted(&self, instruction: &str, response: &str) -> usize {
        self.counter
            .count(&format!("{instruction}{response}"))
    }

    fn make_passthrough(&self, id: String, rng: &mut impl Rng) -> Result<AugmentedSample> {
        if self.short_pool.is_empty() {
            return Err(FloraError::Infeasible(format!(
                "no source samples under the {}-token replacement threshold",
                self.cfg.replacement_threshold
            )));
        }
        let src = &self.short_pool[rng.gen_range(0..self.short_pool.len())];
        let instruction = src.passthrough_instruction();
        let token_count = self.counted(&instruction, &src.response);
        Ok(AugmentedSample {
            id,
            instruction,
            response: src.response.clone(),
            strategy: Strategy::Passthrough,
            source_ids: vec![src.id.clone()],
            token_count,
            template_id: None,
            meta: Some(AssemblyMeta {
                separator: self.cfg.separator.clone(),
                numbering: self.cfg.numbering,
                detail: MetaDetail::Passthrough,
            }),
        })
    }

    fn build_record(&self, index: usize) -> Result<AugmentedSample> {
        let mut rng = record_rng(self.cfg.seed, index as u64);
        let budget = self.dist.sample_target_length(self.cfg.min_budget, &mut rng);
        let domain = self.pick_domain(&mut rng);
        let mut strategy = self.pick_strategy(&mut rng);
        let pool = &self.pools[&domain];
        let id = format!("r{index:08}");

        // the rendered record should land near its sampled budget; below
        // this the pack is extended and re-assembled
        let target_low = budget.saturating_sub(self.cfg.overhead);

        let mut attempt = 0;
        'fresh: loop {
            let mut pack = build_pack(pool, domain, budget, self.cfg.overhead, &mut rng)?;
            if pack.samples.len() < strategy.min_pack_size() {
                attempt += 1;
                if attempt >= PACK_RETRIES {
                    strategy = Strategy::MosaicPlain;
                }
                continue;
            }
            let template = self.library.choose(strategy, &mut rng)?.clone();
            // assembly randomness (permutations, masks, targets) restarts
            // from the same seed on every re-assembly, so the rendered
            // length is a stable function of pack size and the grow /
            // shrink loop below converges instead of oscillating
            let shape_seed: u64 = rng.gen();
            let mut shape = ChaCha8Rng::seed_from_u64(shape_seed);
            let mut out = match assemble(strategy, &pack, &template, &self.spec, &mut shape) {
                Ok(out) => out,
                Err(_) if attempt + 1 < PACK_RETRIES => {
                    attempt += 1;
                    continue;
                }
                Err(_) => {
                    // persistent strategy-specific infeasibility (e.g. all
                    // duplicate responses under AID): degrade to plain
                    strategy = Strategy::MosaicPlain;
                    attempt = 0;
                    continue;
                }
            };
            // exact recount loop: grow while the rendered text undershoots
            // the budget, shrink by dropping tail members over the hard cap
            let mut grows = 0;
            loop {
                let count = self.counted(&out.instruction, &out.response);
                if count > self.cfg.max_tokens && pack.samples.len() <= strategy.min_pack_size()
                {
                    attempt += 1;
                    if attempt >= PACK_RETRIES {
                        return Err(FloraError::Infeasible(format!(
                            "record {index}: cannot fit {strategy} under max_tokens"
                        )));
                    }
                    continue 'fresh;
                }
                let over_budget =
                    count > budget.saturating_add(self.cfg.overhead) || count > self.cfg.max_tokens;
                if over_budget && pack.samples.len() > strategy.min_pack_size() {
                    pack.samples.pop();
                    let mut shape = ChaCha8Rng::seed_from_u64(shape_seed);
                    out = assemble(strategy, &pack, &template, &self.spec, &mut shape)?;
                    continue;
                }
                if count < target_low && grows < GROW_ROUNDS {
                    let per_member = (count / pack.samples.len()).max(1);
                    let want = (target_low - count) / per_member + 1;
                    if grow_pack(pool, &mut pack, want, &mut rng) > 0 {
                        grows += 1;
                        let mut shape = ChaCha8Rng::seed_from_u64(shape_seed);
                        out = assemble(strategy, &pack, &template, &self.spec, &mut shape)?;
                        continue;
                    }
                }
                if count < self.cfg.replacement_threshold {
                    return self.make_passthrough(id, &mut rng);
                }
                return Ok(crate::assemble::into_record(
                    id,
                    &pack,
                    out,
                    &template.template_id,
                    strategy,
                    count,
                ));
            }
        }
    }
}

pub struct BuildOutput {
    pub records: Vec<AugmentedSample>,
    pub manifest: Manifest,
    pub skipped_source_lines: usize,
}

/// Runs the full build and writes dataset + manifest to `cfg.output`.
pub fn run(cfg: &PipelineConfig) -> Result<BuildOutput> {
    let parallel = cfg!(feature = "parallel") && cfg.max_reuse.is_none();
    run_with_parallelism(cfg, parallel)
}

pub fn run_with_parallelism(cfg: &PipelineConfig, parallel: bool) -> Result<BuildOutput> {
    cfg.validate()?;
    let counter = TokenCounter::from_spec(&cfg.counter)?;
    let rules = match &cfg.rules {
        Some(p) => DomainRuleSet::from_file(p)?,
        None => DomainRuleSet::default(),
    };
    let library = match &cfg.templates {
        Some(p) => TemplateLibrary::from_file(p)?,
        None => TemplateLibrary::builtin(),
    };
    let (corpus, skipped) = load_corpus(&cfg.source, &counter, false)?;
    if corpus.is_empty() {
        return Err(FloraError::Infeasible("source corpus is empty".into()));
    }
    let (pools, _) = partition(corpus, &rules);

    let mut domain_cum = Vec::new();
    let mut acc = 0.0;
    for d in DOMAIN_ORDER {
        let mass: usize = pools[&d].iter().map(|s| s.token_count).sum();
        if mass > 0 {
            acc += mass as f64;
            domain_cum.push((d, acc));
        }
    }
    if domain_cum.is_empty() {
        return Err(FloraError::Infeasible("all domain pools are empty".into()));
    }

    let short_pool: Vec<ShortSample> = pools
        .values()
        .flatten()
        .filter(|s| {
            let instr = s.passthrough_instruction();
            counter.count(&format!("{}{}", instr, s.response)) < cfg.replacement_threshold
        })
        .cloned()
        .collect();
    let mut short_pool = short_pool;
    short_pool.sort_by(|a, b| a.id.cmp(&b.id)); // pool order independent of hash iteration

    let ctx = BuildContext {
        cfg: cfg.clone(),
        counter: counter.clone(),
        dist: LengthDistribution::with_normal_params(
            cfg.dist,
            cfg.max_tokens,
            cfg.normal_mean,
            cfg.normal_sigma,
        ),
        library,
        spec: cfg.assembly_spec(),
        pools,
        domain_cum,
        short_pool,
    };

    let n = cfg.target_sample_count;
    let mut records = build_records(&ctx, n, parallel)?;

    if let Some(max_reuse) = cfg.max_reuse {
        enforce_max_reuse(&ctx, &mut records, max_reuse)?;
    }

    let mut shuffle_rng = record_rng(cfg.seed, SHUFFLE_STREAM);
    records.shuffle(&mut shuffle_rng);

    if cfg.strip_meta {
        for r in &mut records {
            r.meta = None;
            r.template_id = None;
        }
    }

    write_dataset(records.iter(), &cfg.output)?;
    let manifest = Manifest {
        source: cfg.source.display().to_string(),
        record_count: records.len(),
        counter: counter.name(),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
    };
    manifest.write(&cfg.output)?;
    Ok(BuildOutput {
        records,
        manifest,
        skipped_source_lines: skipped,
    })
}

#[cfg(feature = "parallel")]
fn build_records(ctx: &BuildContext, n: usize, parallel: bool) -> Result<Vec<AugmentedSample>> {
    if parallel {
        (0..n)
            .into_par_iter()
            .map(|i| ctx.build_record(i))
            .collect()
    } else {
        (0..n).map(|i| ctx.build_record(i)).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn build_records(ctx: &BuildContext, n: usize, _parallel: bool) -> Result<Vec<AugmentedSample>> {
    (0..n).map(|i| ctx.build_record(i)).collect()
}

/// Rebuilds records whose sources exceed the reuse cap, sequentially, by
/// replaying them as passthroughs of under-threshold samples that still
/// have headroom. Coarse by design; the default is unlimited reuse.
fn enforce_max_reuse(
    ctx: &BuildContext,
    records: &mut [AugmentedSample],
    max_reuse: usize,
) -> Result<()> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for (i, rec) in records.iter_mut().enumerate() {
        let over = rec
            .source_ids
            .iter()
            .any(|id| counts.get(id).copied().unwrap_or(0) >= max_reuse);
        if over {
            let mut rng = record_rng(ctx.cfg.seed ^ 0x5EED, i as u64);
            let replacement_pool: Vec<&ShortSample> = ctx
                .short_pool
                .iter()
                .filter(|s| counts.get(&s.id).copied().unwrap_or(0) < max_reuse)
                .collect();
            if replacement_pool.is_empty() {
                return Err(FloraError::Infeasible(
                    "max_reuse exhausted every replacement sample".into(),
                ));
            }
            let src = replacement_pool[rng.gen_range(0..replacement_pool.len())];
            let instruction = src.passthrough_instruction();
            let token_count = ctx.counted(&instruction, &src.response);
            *rec = AugmentedSample {
                id: rec.id.clone(),
                instruction,
                response: src.response.clone(),
                strategy: Strategy::Passthrough,
                source_ids: vec![src.id.clone()],
                token_count,
                template_id: None,
                meta: Some(AssemblyMeta {
                    separator: ctx.cfg.separator.clone(),
                    numbering: ctx.cfg.numbering,
                    detail: MetaDetail::Passthrough,
                }),
            };
        }
        for id in &rec.source_ids {
            *counts.entry(id.clone()).or_default() += 1;
        }
    }
    Ok(())
}
