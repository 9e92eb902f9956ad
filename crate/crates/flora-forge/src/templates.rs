//! Meta-instruction templates. Each strategy owns a required placeholder
//! set; shipped defaults live in `default_templates.txt` and can be
//! replaced wholesale via `--templates`.
//!
//! Template file format (UTF-8):
//!
//! ```text
//! strategy: fqa
//! id: fqa-1
//! body:
//! <body lines, placeholders in braces>
//! directive:
//! <format directive lines>
//! %%
//! ```
//!
//! `%%` on its own line separates records.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::Rng;

use crate::error::{FloraError, Result};
use crate::types::Strategy;

pub const PLACEHOLDERS: [&str; 6] = [
    "QUESTIONS",
    "EXAMPLES",
    "TARGETS",
    "OFFSETS",
    "ANSWERS",
    "SEPARATOR",
];

/// Placeholders a strategy's template body must contain, exactly.
pub fn required_placeholders(strategy: Strategy) -> &'static [&'static str] {
    match strategy {
        Strategy::MosaicPlain => &["QUESTIONS"],
        Strategy::MosaicPermute => &["QUESTIONS", "TARGETS"],
        Strategy::MosaicMaskout => &["QUESTIONS", "TARGETS"],
        Strategy::Fqa => &["EXAMPLES", "TARGETS"],
        Strategy::Aba => &["QUESTIONS", "OFFSETS"],
        Strategy::Ana => &["QUESTIONS"],
        Strategy::Aid => &["QUESTIONS", "ANSWERS"],
        Strategy::Passthrough => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaInstruction {
    pub strategy: Strategy,
    pub template_id: String,
    pub body: String,
    pub format_directive: String,
}

/// Placeholder names appearing in a body, in `{NAME}` form.
pub fn placeholders_in(body: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for name in PLACEHOLDERS {
        if body.contains(&format!("{{{name}}}")) {
            out.insert(name.to_string());
        }
    }
    out
}

/// Literal single-pass substitution. Values are inserted verbatim and
/// never re-expanded. `strict` rejects bindings the body does not use.
pub fn render(
    template: &MetaInstruction,
    bindings: &HashMap<&str, String>,
    strict: bool,
) -> Result<String> {
    let present = placeholders_in(&template.body);
    for name in &present {
        if !bindings.contains_key(name.as_str()) {
            return Err(FloraError::MissingBinding(name.clone()));
        }
    }
    if strict {
        for key in bindings.keys() {
            if !present.contains(*key) {
                return Err(FloraError::UnknownBinding(key.to_string()));
            }
        }
    }
    // split on placeholders so inserted values are never rescanned
    let mut out = String::with_capacity(template.body.len());
    let mut rest = template.body.as_str();
    while let Some(open) = rest.find('{') {
        let Some(close_rel) = rest[open..].find('}') else {
            break;
        };
        let name = &rest[open + 1..open + close_rel];
        if let Some(value) = bindings.get(name) {
            out.push_str(&rest[..open]);
            out.push_str(value);
            rest = &rest[open + close_rel + 1..];
        } else {
            out.push_str(&rest[..open + 1]);
            rest = &rest[open + 1..];
        }
    }
    out.push_str(rest);
    if !template.format_directive.is_empty() {
        out.push_str("\n\n");
        out.push_str(&template.format_directive);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TemplateLibrary {
    by_strategy: HashMap<Strategy, Vec<MetaInstruction>>,
}

impl TemplateLibrary {
    /// Built-in defaults, parsed from the shipped template file.
    pub fn builtin() -> Self {
        Self::parse(include_str!("default_templates.txt"))
            .expect("builtin templates parse and lint clean")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FloraError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut by_strategy: HashMap<Strategy, Vec<MetaInstruction>> = HashMap::new();
        for (idx, record) in text.split("\n%%").enumerate() {
            let record = record.trim_matches('\n');
            if record.trim().is_empty() {
                continue;
            }
            let tpl = parse_record(record)
                .map_err(|e| FloraError::MalformedTemplate(format!("record {}: {e}", idx + 1)))?;
            lint(&tpl)?;
            by_strategy.entry(tpl.strategy).or_default().push(tpl);
        }
        Ok(TemplateLibrary { by_strategy })
    }

    pub fn templates_for(&self, strategy: Strategy) -> &[MetaInstruction] {
        self.by_strategy
            .get(&strategy)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Uniform random choice among the strategy's templates.
    pub fn choose(&self, strategy: Strategy, rng: &mut impl Rng) -> Result<&MetaInstruction> {
        let set = self.templates_for(strategy);
        if set.is_empty() {
            return Err(FloraError::EmptyTemplateSet(strategy));
        }
        Ok(&set[rng.gen_range(0..set.len())])
    }
}

fn parse_strategy(name: &str) -> Option<Strategy> {
    match name {
        "mosaic_plain" => Some(Strategy::MosaicPlain),
        "mosaic_permute" => Some(Strategy::MosaicPermute),
        "mosaic_maskout" => Some(Strategy::MosaicMaskout),
        "fqa" => Some(Strategy::Fqa),
        "aba" => Some(Strategy::Aba),
        "ana" => Some(Strategy::Ana),
        "aid" => Some(Strategy::Aid),
        _ => None,
    }
}

fn parse_record(record: &str) -> std::result::Result<MetaInstruction, String> {
    let mut lines = record.lines();
    let strategy_line = lines.next().ok_or("empty record")?;
    let strategy = strategy_line
        .strip_prefix("strategy:")
        .map(str::trim)
        .and_then(parse_strategy)
        .ok_or_else(|| format!("bad strategy line {strategy_line:?}"))?;
    let id_line = lines.next().ok_or("missing id line")?;
    let template_id = id_line
        .strip_prefix("id:")
        .map(str::trim)
        .ok_or_else(|| format!("bad id line {id_line:?}"))?
        .to_string();
    let body_marker = lines.next().ok_or("missing body marker")?;
    if body_marker.trim() != "body:" {
        return Err(format!("expected 'body:', found {body_marker:?}"));
    }
    let mut body = Vec::new();
    let mut directive = Vec::new();
    let mut in_directive = false;
    for line in lines {
        if line.trim() == "directive:" && !in_directive {
            in_directive = true;
        } else if in_directive {
            directive.push(line);
        } else {
            body.push(line);
        }
    }
    if !in_directive {
        return Err("missing directive section".into());
    }
    Ok(MetaInstruction {
        strategy,
        template_id,
        body: body.join("\n").trim().to_string(),
        format_directive: directive.join("\n").trim().to_string(),
    })
}

/// Placeholder set must exactly match the strategy's required set.
pub fn lint(tpl: &MetaInstruction) -> Result<()> {
    let present = placeholders_in(&tpl.body);
    let required: BTreeSet<String> = required_placeholders(tpl.strategy)
        .iter()
        .map(|s| s.to_string())
        .collect();
    if present != required {
        return Err(FloraError::MalformedTemplate(format!(
            "template {} for {}: placeholders {:?} do not match required {:?}",
            tpl.template_id, tpl.strategy, present, required
        )));
    }
    Ok(())
}
