//! Rule-based domain classification: metadata label first, code patterns,
//! then math patterns, General as fallback. No model calls.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{FloraError, Result};
use crate::types::{Domain, ShortSample};

/// Fraction of non-whitespace characters that must be digits or math
/// operators before a sample is considered math-shaped.
const MATH_DENSITY_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone)]
pub struct DomainRuleSet {
    pub math_patterns: Vec<String>,
    pub code_patterns: Vec<String>,
}

impl Default for DomainRuleSet {
    fn default() -> Self {
        DomainRuleSet {
            code_patterns: [
                "```", "def ", "#include", "fn main", "public static", "console.log",
                "import numpy", "select * from", "printf(", "std::", "function(", "lambda ",
                "write a function", "write code", "implement a function", "regex",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            math_patterns: [
                "solve", "equation", "integral", "derivative", "theorem", "\\frac",
                "polynomial", "probability that", "how many", "what is the value",
                "simplify", "compute the",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

impl DomainRuleSet {
    /// Rules file: one pattern per line, `code: <pattern>` or
    /// `math: <pattern>`; `#` lines and blanks ignored. Patterns are
    /// case-insensitive literals and replace the defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FloraError::io(path, e))?;
        let mut rules = DomainRuleSet {
            math_patterns: Vec::new(),
            code_patterns: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once(':') {
                Some(("code", p)) => rules.code_patterns.push(p.trim().to_string()),
                Some(("math", p)) => rules.math_patterns.push(p.trim().to_string()),
                _ => {
                    return Err(FloraError::InvalidConfig(format!(
                        "rules file line {}: expected 'code: <pattern>' or 'math: <pattern>'",
                        i + 1
                    )))
                }
            }
        }
        Ok(rules)
    }
}

fn matches_any(text: &str, patterns: &[String]) -> bool {
    patterns.iter().any(|p| text.contains(&p.to_lowercase()))
}

fn math_density(text: &str) -> f64 {
    let mut total = 0usize;
    let mut mathy = 0usize;
    for c in text.chars() {
        if c.is_whitespace() {
            continue;
        }
        total += 1;
        if c.is_ascii_digit() || matches!(c, '+' | '-' | '*' | '/' | '=' | '^' | '%') {
            mathy += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        mathy as f64 / total as f64
    }
}

/// Total function: every sample gets exactly one of Math, Code, General.
/// An explicit source label wins over the text rules.
pub fn classify(sample: &ShortSample, rules: &DomainRuleSet) -> Domain {
    match sample.domain {
        Domain::Math | Domain::Code | Domain::General => return sample.domain,
        Domain::Unlabeled => {}
    }
    let text = format!(
        "{}\n{}\n{}",
        sample.instruction, sample.input, sample.response
    )
    .to_lowercase();
    if matches_any(&text, &rules.code_patterns) {
        Domain::Code
    } else if matches_any(&text, &rules.math_patterns)
        || math_density(&text) > MATH_DENSITY_THRESHOLD
    {
        Domain::Math
    } else {
        Domain::General
    }
}

/// Splits a corpus into the three domain pools. Counts sum to the input.
pub fn partition(
    corpus: Vec<ShortSample>,
    rules: &DomainRuleSet,
) -> (HashMap<Domain, Vec<ShortSample>>, HashMap<Domain, usize>) {
    let mut pools: HashMap<Domain, Vec<ShortSample>> = HashMap::new();
    for d in [Domain::Math, Domain::Code, Domain::General] {
        pools.insert(d, Vec::new());
    }
    for mut s in corpus {
        let d = classify(&s, rules);
        s.domain = d;
        pools.get_mut(&d).unwrap().push(s);
    }
    let counts = pools.iter().map(|(d, v)| (*d, v.len())).collect();
    (pools, counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(instruction: &str, response: &str, domain: Domain) -> ShortSample {
        ShortSample {
            id: format!("{instruction}-{response}"),
            instruction: instruction.into(),
            input: String::new(),
            response: response.into(),
            domain,
            token_count: 0,
        }
    }

    #[test]
    fn metadata_label_wins() {
        let s = sample("```python\nprint(1)\n```", "code!", Domain::Math);
        assert_eq!(classify(&s, &DomainRuleSet::default()), Domain::Math);
    }

    #[test]
    fn fenced_block_is_code() {
        let s = sample(
            "Write a function in any language to reverse a list",
            "```python\ndef rev(xs): return xs[::-1]\n```",
            Domain::Unlabeled,
        );
        assert_eq!(classify(&s, &DomainRuleSet::default()), Domain::Code);
    }

    #[test]
    fn plain_question_is_general() {
        let s = sample(
            "What is the capital of France?",
            "Paris.",
            Domain::Unlabeled,
        );
        assert_eq!(classify(&s, &DomainRuleSet::default()), Domain::General);
    }

    #[test]
    fn equation_density_is_math() {
        let s = sample("2+3*4=?", "14", Domain::Unlabeled);
        assert_eq!(classify(&s, &DomainRuleSet::default()), Domain::Math);
    }

    #[test]
    fn code_beats_math_on_ties() {
        let s = sample(
            "Solve the equation in code",
            "```\nx = 4\n```",
            Domain::Unlabeled,
        );
        assert_eq!(classify(&s, &DomainRuleSet::default()), Domain::Code);
    }

    #[test]
    fn classification_is_pure() {
        let s = sample("Solve x^2 = 4", "x = ±2", Domain::Unlabeled);
        let rules = DomainRuleSet::default();
        assert_eq!(classify(&s, &rules), classify(&s, &rules));
    }

    #[test]
    fn partition_is_exhaustive_and_disjoint() {
        let rules = DomainRuleSet::default();
        let corpus: Vec<ShortSample> = (0..10)
            .map(|i| match i % 3 {
                0 => sample(&format!("write code {i}"), "```x```", Domain::Unlabeled),
                1 => sample(&format!("solve {i}"), "42", Domain::Unlabeled),
                _ => sample(&format!("tell me {i}"), "a story", Domain::Unlabeled),
            })
            .collect();
        let n = corpus.len();
        let ids: std::collections::HashSet<String> =
            corpus.iter().map(|s| s.id.clone()).collect();
        let (pools, counts) = partition(corpus, &rules);
        assert_eq!(counts.values().sum::<usize>(), n);
        let mut seen = std::collections::HashSet::new();
        for pool in pools.values() {
            for s in pool {
                assert!(seen.insert(s.id.clone()), "id in two pools");
            }
        }
        assert_eq!(seen, ids);
    }

    #[test]
    fn empty_corpus_partitions_empty() {
        let (pools, counts) = partition(Vec::new(), &DomainRuleSet::default());
        assert!(pools.values().all(|v| v.is_empty()));
        assert_eq!(counts.values().sum::<usize>(), 0);
    }

    #[test]
    fn prelabeled_samples_keep_their_stream() {
        let corpus = vec![
            sample("anything", "at all", Domain::General),
            sample("```code```", "x", Domain::General),
        ];
        let (pools, _) = partition(corpus, &DomainRuleSet::default());
        assert_eq!(pools[&Domain::General].len(), 2);
        assert!(pools[&Domain::Code].is_empty());
    }
}
