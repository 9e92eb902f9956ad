//! Core record types shared across the pipeline.

use serde::{Deserialize, Serialize};

/// Domain a short sample belongs to. `Unlabeled` only occurs before
/// classification; every classified sample is Math, Code or General.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Math,
    Code,
    General,
    Unlabeled,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Math => "math",
            Domain::Code => "code",
            Domain::General => "general",
            Domain::Unlabeled => "unlabeled",
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The seven augmentation strategies plus the verbatim carry-through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    MosaicPlain,
    MosaicPermute,
    MosaicMaskout,
    Fqa,
    Aba,
    Ana,
    Aid,
    Passthrough,
}

impl Strategy {
    /// The seven assembled strategies, in weight-vector order.
    pub const ASSEMBLED: [Strategy; 7] = [
        Strategy::MosaicPlain,
        Strategy::MosaicPermute,
        Strategy::MosaicMaskout,
        Strategy::Fqa,
        Strategy::Aba,
        Strategy::Ana,
        Strategy::Aid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::MosaicPlain => "mosaic_plain",
            Strategy::MosaicPermute => "mosaic_permute",
            Strategy::MosaicMaskout => "mosaic_maskout",
            Strategy::Fqa => "fqa",
            Strategy::Aba => "aba",
            Strategy::Ana => "ana",
            Strategy::Aid => "aid",
            Strategy::Passthrough => "passthrough",
        }
    }

    /// Smallest pack that makes the strategy well-posed.
    pub fn min_pack_size(self) -> usize {
        match self {
            Strategy::MosaicPlain => 1,
            Strategy::Passthrough => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One source triplet. `token_count` is cached under the active counter
/// and covers instruction + input + response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShortSample {
    pub id: String,
    pub instruction: String,
    #[serde(default)]
    pub input: String,
    pub response: String,
    #[serde(default = "unlabeled")]
    pub domain: Domain,
    #[serde(skip)]
    pub token_count: usize,
}

fn unlabeled() -> Domain {
    Domain::Unlabeled
}

impl ShortSample {
    /// The text a passthrough record carries: instruction, then the
    /// input block when present.
    pub fn passthrough_instruction(&self) -> String {
        if self.input.trim().is_empty() {
            self.instruction.clone()
        } else {
            format!("{}\n\n{}", self.instruction, self.input)
        }
    }
}

/// How questions and answers are labelled inside assembled text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NumberingStyle {
    #[default]
    Bracketed,
    QPrefix,
}

/// Per-record assembly metadata, enough to replay the response from the
/// source samples. Indices refer to positions in `source_ids`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetaDetail {
    MosaicPlain,
    /// Stated presentation order of response items (0-based pack indices).
    MosaicPermute { order: Vec<usize> },
    /// 0-based pack indices whose answers are excluded.
    MosaicMaskout { masked: Vec<usize> },
    /// 0-based pack indices of the held-out targets, in presentation order.
    Fqa { targets: Vec<usize> },
    /// (anchor index, signed offset) per clause, in clause order.
    Aba { clauses: Vec<(usize, i64)> },
    /// 0-based pack indices of the unanswered members (pack order).
    Ana { unanswered: Vec<usize> },
    /// 0-based pack indices of the presented answers, in presentation order.
    Aid { presented: Vec<usize> },
    Passthrough,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyMeta {
    pub separator: String,
    pub numbering: NumberingStyle,
    pub detail: MetaDetail,
}

/// One output record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedSample {
    pub id: String,
    pub instruction: String,
    pub response: String,
    pub strategy: Strategy,
    pub source_ids: Vec<String>,
    pub token_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<AssemblyMeta>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passthrough_instruction_skips_empty_input() {
        let s = ShortSample {
            id: "a".into(),
            instruction: "Q".into(),
            input: "  ".into(),
            response: "R".into(),
            domain: Domain::General,
            token_count: 0,
        };
        assert_eq!(s.passthrough_instruction(), "Q");
    }

    #[test]
    fn passthrough_instruction_appends_input() {
        let s = ShortSample {
            id: "a".into(),
            instruction: "Q".into(),
            input: "ctx".into(),
            response: "R".into(),
            domain: Domain::General,
            token_count: 0,
        };
        assert_eq!(s.passthrough_instruction(), "Q\n\nctx");
    }
}
