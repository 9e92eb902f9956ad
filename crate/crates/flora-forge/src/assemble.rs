//! Strategy assemblers: turn a Pack plus a meta-instruction template
//! into one augmented record. Assemblers are pure functions of
//! (pack, template, spec, rng substream); the recorded meta block is
//! sufficient to replay the response from the source samples.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{FloraError, Result};
use crate::pack::Pack;
use crate::templates::{render, MetaInstruction};
use crate::types::{
    AssemblyMeta, AugmentedSample, MetaDetail, NumberingStyle, ShortSample, Strategy,
};

#[derive(Debug, Clone)]
pub struct AssemblySpec {
    pub separator: String,
    pub numbering: NumberingStyle,
    /// β for FQA, ABA and AID.
    pub beta_fqa: usize,
    pub beta_aba: usize,
    pub beta_aid: usize,
    /// Fraction of pack members left unanswered under ANA.
    pub ana_unanswered_fraction: f64,
}

impl Default for AssemblySpec {
    fn default() -> Self {
        AssemblySpec {
            separator: "\n\n".into(),
            numbering: NumberingStyle::Bracketed,
            beta_fqa: 1,
            beta_aba: 1,
            beta_aid: 1,
            ana_unanswered_fraction: 0.2,
        }
    }
}

fn q_label(style: NumberingStyle, n: usize) -> String {
    match style {
        NumberingStyle::Bracketed => format!("[Q{n}]"),
        NumberingStyle::QPrefix => format!("Q{n}"),
    }
}

fn a_label(style: NumberingStyle, n: usize) -> String {
    match style {
        NumberingStyle::Bracketed => format!("[A{n}]"),
        NumberingStyle::QPrefix => format!("A{n}"),
    }
}

fn t_label(style: NumberingStyle, n: usize) -> String {
    match style {
        NumberingStyle::Bracketed => format!("[T{n}]"),
        NumberingStyle::QPrefix => format!("T{n}"),
    }
}

fn question_item(style: NumberingStyle, n: usize, s: &ShortSample) -> String {
    let mut item = format!("{}: {}", q_label(style, n), s.instruction);
    if !s.input.trim().is_empty() {
        item.push('\n');
        item.push_str(&s.input);
    }
    item
}

fn answer_item(style: NumberingStyle, n: usize, text: &str) -> String {
    format!("{}: {}", a_label(style, n), text)
}

fn pair_item(style: NumberingStyle, n: usize, s: &ShortSample) -> String {
    format!(
        "{}\n{}",
        question_item(style, n, s),
        answer_item(style, n, &s.response)
    )
}

fn numbered_questions(style: NumberingStyle, samples: &[ShortSample], sep: &str) -> String {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| question_item(style, i + 1, s))
        .collect::<Vec<_>>()
        .join(sep)
}

fn number_list(indices: &[usize]) -> String {
    indices
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// The positional retrieval clause an ABA instruction states. The
/// anchor text is delimited so a parser can recover it.
pub fn aba_clause(
    style: NumberingStyle,
    clause_no: usize,
    anchor: &ShortSample,
    offset: i64,
) -> String {
    let n = offset.unsigned_abs();
    let word = if offset < 0 { "before" } else { "after" };
    let plural = if n == 1 { "" } else { "s" };
    format!(
        "{}: Answer the question that comes {n} question{plural} {word} the question <<{}>>",
        t_label(style, clause_no),
        anchor.instruction
    )
}

/// Rebuilds the response text from the source samples and the recorded
/// assembly metadata. The assemblers route through this, and the
/// dataset verifier replays it.
pub fn compose_response(samples: &[ShortSample], meta: &AssemblyMeta) -> String {
    let style = meta.numbering;
    let sep = meta.separator.as_str();
    let items: Vec<String> = match &meta.detail {
        MetaDetail::MosaicPlain => samples
            .iter()
            .enumerate()
            .map(|(i, s)| answer_item(style, i + 1, &s.response))
            .collect(),
        MetaDetail::MosaicPermute { order } => order
            .iter()
            .map(|&i| answer_item(style, i + 1, &samples[i].response))
            .collect(),
        MetaDetail::MosaicMaskout { masked } => samples
            .iter()
            .enumerate()
            .filter(|(i, _)| !masked.contains(i))
            .map(|(i, s)| answer_item(style, i + 1, &s.response))
            .collect(),
        MetaDetail::Fqa { targets } => {
            let example_count = samples.len() - targets.len();
            targets
                .iter()
                .enumerate()
                .map(|(j, &t)| answer_item(style, example_count + j + 1, &samples[t].response))
                .collect()
        }
        MetaDetail::Aba { clauses } => clauses
            .iter()
            .enumerate()
            .map(|(j, &(anchor, offset))| {
                let idx = (anchor as i64 + offset) as usize;
                answer_item(style, j + 1, &samples[idx].response)
            })
            .collect(),
        MetaDetail::Ana { unanswered } => unanswered
            .iter()
            .map(|&i| answer_item(style, i + 1, &samples[i].response))
            .collect(),
        MetaDetail::Aid { presented } => presented
            .iter()
            .enumerate()
            .map(|(j, &i)| answer_item(style, j + 1, &(i + 1).to_string()))
            .collect(),
        MetaDetail::Passthrough => vec![samples[0].response.clone()],
    };
    items.join(sep)
}

pub struct Assembled {
    pub instruction: String,
    pub response: String,
    pub meta: AssemblyMeta,
}

fn finish(
    pack: &Pack,
    template: &MetaInstruction,
    spec: &AssemblySpec,
    detail: MetaDetail,
    bindings: HashMap<&str, String>,
) -> Result<Assembled> {
    let meta = AssemblyMeta {
        separator: spec.separator.clone(),
        numbering: spec.numbering,
        detail,
    };
    let response = compose_response(&pack.samples, &meta);
    let instruction = render(template, &bindings, true)?;
    Ok(Assembled {
        instruction,
        response,
        meta,
    })
}

fn distinct_indices(k: usize, count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..k).collect();
    all.shuffle(rng);
    all.truncate(count);
    all
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MosaicVariant {
    Plain,
    Permute,
    Maskout,
}

pub fn assemble_mosaic(
    pack: &Pack,
    template: &MetaInstruction,
    variant: MosaicVariant,
    spec: &AssemblySpec,
    rng: &mut impl Rng,
) -> Result<Assembled> {
    let k = pack.samples.len();
    if k == 0 {
        return Err(FloraError::Infeasible("empty pack".into()));
    }
    if variant != MosaicVariant::Plain && k < 2 {
        return Err(FloraError::Infeasible(format!(
            "{variant:?} needs at least 2 samples, pack has {k}"
        )));
    }
    let sep = spec.separator.as_str();
    let questions = numbered_questions(spec.numbering, &pack.samples, sep);
    let mut bindings: HashMap<&str, String> = HashMap::new();
    bindings.insert("QUESTIONS", questions);
    let detail = match variant {
        MosaicVariant::Plain => MetaDetail::MosaicPlain,
        MosaicVariant::Permute => {
            let mut order: Vec<usize> = (0..k).collect();
            order.shuffle(rng);
            bindings.insert("TARGETS", number_list(&order));
            MetaDetail::MosaicPermute { order }
        }
        MosaicVariant::Maskout => {
            // nonempty strict subset
            let m = rng.gen_range(1..k);
            let mut masked = distinct_indices(k, m, rng);
            masked.sort_unstable();
            bindings.insert("TARGETS", number_list(&masked));
            MetaDetail::MosaicMaskout { masked }
        }
    };
    finish(pack, template, spec, detail, bindings)
}

pub fn assemble_fqa(
    pack: &Pack,
    template: &MetaInstruction,
    beta: usize,
    spec: &AssemblySpec,
    rng: &mut impl Rng,
) -> Result<Assembled> {
    let k = pack.samples.len();
    if beta == 0 || k < beta + 1 {
        return Err(FloraError::Infeasible(format!(
            "fqa needs at least beta+1={} samples, pack has {k}",
            beta + 1
        )));
    }
    let targets = distinct_indices(k, beta, rng);
    let style = spec.numbering;
    let sep = spec.separator.as_str();
    // examples numbered 1..k-beta in pack order; targets continue the
    // numbering in presentation order
    let mut examples = Vec::new();
    let mut example_no = 0;
    for (i, s) in pack.samples.iter().enumerate() {
        if !targets.contains(&i) {
            example_no += 1;
            examples.push(pair_item(style, example_no, s));
        }
    }
    let target_items: Vec<String> = targets
        .iter()
        .enumerate()
        .map(|(j, &t)| question_item(style, example_no + j + 1, &pack.samples[t]))
        .collect();
    let mut bindings: HashMap<&str, String> = HashMap::new();
    bindings.insert("EXAMPLES", examples.join(sep));
    bindings.insert("TARGETS", target_items.join(sep));
    finish(pack, template, spec, MetaDetail::Fqa { targets }, bindings)
}

pub fn assemble_aba(
    pack: &Pack,
    template: &MetaInstruction,
    beta: usize,
    spec: &AssemblySpec,
    rng: &mut impl Rng,
) -> Result<Assembled> {
    let k = pack.samples.len();
    if k < 2 || beta == 0 {
        return Err(FloraError::Infeasible(format!(
            "aba needs at least 2 samples, pack has {k}"
        )));
    }
    let mut clauses = Vec::with_capacity(beta);
    for _ in 0..beta {
        let anchor = rng.gen_range(0..k);
        // feasible nonzero offsets keep anchor+offset inside the pack;
        // with k >= 2 every anchor has at least one
        let lo = -(anchor as i64);
        let hi = (k - 1 - anchor) as i64;
        let mut offset = 0;
        while offset == 0 {
            offset = rng.gen_range(lo..=hi);
        }
        clauses.push((anchor, offset));
    }
    let clause_text: Vec<String> = clauses
        .iter()
        .enumerate()
        .map(|(j, &(anchor, offset))| {
            aba_clause(spec.numbering, j + 1, &pack.samples[anchor], offset)
        })
        .collect();
    let mut bindings: HashMap<&str, String> = HashMap::new();
    bindings.insert(
        "QUESTIONS",
        numbered_questions(spec.numbering, &pack.samples, &spec.separator),
    );
    bindings.insert("OFFSETS", clause_text.join(&spec.separator));
    finish(pack, template, spec, MetaDetail::Aba { clauses }, bindings)
}

pub fn assemble_ana(
    pack: &Pack,
    template: &MetaInstruction,
    unanswered_fraction: f64,
    spec: &AssemblySpec,
    rng: &mut impl Rng,
) -> Result<Assembled> {
    let k = pack.samples.len();
    if k < 2 {
        return Err(FloraError::Infeasible(format!(
            "ana needs at least 2 samples, pack has {k}"
        )));
    }
    if !(0.0..1.0).contains(&unanswered_fraction) || unanswered_fraction <= 0.0 {
        return Err(FloraError::InvalidConfig(format!(
            "ana unanswered fraction {unanswered_fraction} outside (0,1)"
        )));
    }
    let u = (unanswered_fraction * k as f64).ceil() as usize;
    if u == 0 || u >= k {
        return Err(FloraError::Infeasible(format!(
            "ana split leaves no answered member (k={k}, unanswered={u})"
        )));
    }
    let mut unanswered = distinct_indices(k, u, rng);
    unanswered.sort_unstable();
    let style = spec.numbering;
    let items: Vec<String> = pack
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if unanswered.contains(&i) {
                question_item(style, i + 1, s)
            } else {
                pair_item(style, i + 1, s)
            }
        })
        .collect();
    let mut bindings: HashMap<&str, String> = HashMap::new();
    bindings.insert("QUESTIONS", items.join(&spec.separator));
    finish(pack, template, spec, MetaDetail::Ana { unanswered }, bindings)
}

pub fn assemble_aid(
    pack: &Pack,
    template: &MetaInstruction,
    beta: usize,
    spec: &AssemblySpec,
    rng: &mut impl Rng,
) -> Result<Assembled> {
    let k = pack.samples.len();
    if k < 2 || beta == 0 || beta > k {
        return Err(FloraError::Infeasible(format!(
            "aid needs 2 <= pack size and beta <= pack size (k={k}, beta={beta})"
        )));
    }
    // only responses unique within the pack can be identified by a
    // single ID; draw presented answers from those
    let mut unique: Vec<usize> = (0..k)
        .filter(|&i| {
            pack.samples
                .iter()
                .enumerate()
                .all(|(j, s)| j == i || s.response != pack.samples[i].response)
        })
        .collect();
    if unique.len() < beta {
        return Err(FloraError::Infeasible(format!(
            "aid: only {} unambiguous responses for beta={beta}",
            unique.len()
        )));
    }
    unique.shuffle(rng);
    let presented: Vec<usize> = unique.into_iter().take(beta).collect();
    let style = spec.numbering;
    let answer_block: Vec<String> = presented
        .iter()
        .enumerate()
        .map(|(j, &i)| format!("Answer {}:\n{}", j + 1, pack.samples[i].response))
        .collect();
    let mut bindings: HashMap<&str, String> = HashMap::new();
    bindings.insert(
        "QUESTIONS",
        numbered_questions(style, &pack.samples, &spec.separator),
    );
    bindings.insert("ANSWERS", answer_block.join(&spec.separator));
    finish(pack, template, spec, MetaDetail::Aid { presented }, bindings)
}

/// Dispatch on strategy. Passthrough is handled by the pipeline, not here.
pub fn assemble(
    strategy: Strategy,
    pack: &Pack,
    template: &MetaInstruction,
    spec: &AssemblySpec,
    rng: &mut impl Rng,
) -> Result<Assembled> {
    match strategy {
        Strategy::MosaicPlain => assemble_mosaic(pack, template, MosaicVariant::Plain, spec, rng),
        Strategy::MosaicPermute => {
            assemble_mosaic(pack, template, MosaicVariant::Permute, spec, rng)
        }
        Strategy::MosaicMaskout => {
            assemble_mosaic(pack, template, MosaicVariant::Maskout, spec, rng)
        }
        Strategy::Fqa => assemble_fqa(pack, template, spec.beta_fqa, spec, rng),
        Strategy::Aba => assemble_aba(pack, template, spec.beta_aba, spec, rng),
        Strategy::Ana => assemble_ana(pack, template, spec.ana_unanswered_fraction, spec, rng),
        Strategy::Aid => assemble_aid(pack, template, spec.beta_aid, spec, rng),
        Strategy::Passthrough => Err(FloraError::Infeasible(
            "passthrough records are not assembled".into(),
        )),
    }
}

/// Builds the output record around an assembly, recounting tokens on the
/// final text.
pub fn into_record(
    id: String,
    pack: &Pack,
    assembled: Assembled,
    template_id: &str,
    strategy: Strategy,
    token_count: usize,
) -> AugmentedSample {
    AugmentedSample {
        id,
        instruction: assembled.instruction,
        response: assembled.response,
        strategy,
        source_ids: pack.samples.iter().map(|s| s.id.clone()).collect(),
        token_count,
        template_id: Some(template_id.to_string()),
        meta: Some(assembled.meta),
    }
}
