//! Dataset statistics, distribution-fit divergence and the dataset
//! verification oracle.

use std::collections::HashMap;

use serde::Serialize;

use crate::assemble::compose_response;
use crate::error::{FloraError, Result};
use crate::lengths::{validate_edges, LengthDistribution};
use crate::tokenize::TokenCounter;
use crate::types::{AugmentedSample, ShortSample, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthField {
    Total,
    ResponseOnly,
}

/// Bucket counts over normalized length (token count / max_tokens).
pub fn histogram(
    records: &[AugmentedSample],
    edges: &[f64],
    max_tokens: usize,
    field: LengthField,
    counter: &TokenCounter,
) -> Result<Vec<usize>> {
    validate_edges(edges)?;
    let buckets = edges.len() - 1;
    let mut counts = vec![0usize; buckets];
    for r in records {
        let tokens = match field {
            LengthField::Total => r.token_count,
            LengthField::ResponseOnly => counter.count(&r.response),
        };
        let x = (tokens as f64 / max_tokens as f64).clamp(0.0, 1.0);
        let mut b = buckets - 1;
        for (i, w) in edges.windows(2).enumerate() {
            if x < w[1] || (i == buckets - 1 && x <= w[1]) {
                b = i;
                break;
            }
        }
        counts[b] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub record_count: usize,
    pub edges: Vec<f64>,
    pub observed: Vec<usize>,
    pub analytic_masses: Vec<f64>,
    pub chi_squared: f64,
    /// Largest absolute bucket deviation, in probability (not pp).
    pub max_abs_deviation: f64,
}

impl FitReport {
    /// Critical value of the chi-squared test at significance 0.01 with
    /// k-1 degrees of freedom (Wilson-Hilferty approximation).
    pub fn critical_value(&self) -> f64 {
        let k = (self.observed.len() - 1) as f64;
        let z = 2.326_347_874_040_841; // standard normal 0.99 quantile
        let t = 1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt();
        k * t.powi(3)
    }

    pub fn rejected(&self) -> bool {
        self.chi_squared > self.critical_value()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bucket_lo,bucket_hi,observed,expected_mass,observed_freq\n");
        let n = self.record_count as f64;
        for (i, w) in self.edges.windows(2).enumerate() {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                w[0],
                w[1],
                self.observed[i],
                self.analytic_masses[i],
                self.observed[i] as f64 / n
            ));
        }
        out.push_str(&format!(
            "chi_squared,{:.6},max_abs_deviation,{:.6},rejected,{}\n",
            self.chi_squared,
            self.max_abs_deviation,
            self.rejected()
        ));
        out
    }
}

/// Chi-squared divergence of realized total-length frequencies against
/// the analytic bucket masses of `dist`.
pub fn fit_report(
    records: &[AugmentedSample],
    dist: &LengthDistribution,
    edges: &[f64],
) -> Result<FitReport> {
    if records.is_empty() {
        return Err(FloraError::Infeasible("empty dataset".into()));
    }
    let counter = TokenCounter::heuristic(4.0); // unused for Total
    let observed = histogram(
        records,
        edges,
        dist.max_tokens,
        LengthField::Total,
        &counter,
    )?;
    let masses = dist.bucket_masses(edges)?;
    let n = records.len() as f64;
    let mut chi = 0.0;
    let mut max_dev = 0.0f64;
    for (o, m) in observed.iter().zip(&masses) {
        let e = m * n;
        if e > 0.0 {
            chi += (*o as f64 - e).powi(2) / e;
        }
        max_dev = max_dev.max((*o as f64 / n - m).abs());
    }
    Ok(FitReport {
        record_count: records.len(),
        edges: edges.to_vec(),
        observed,
        analytic_masses: masses,
        chi_squared: chi,
        max_abs_deviation: max_dev,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyResult {
    pub total: usize,
    pub passed: usize,
    pub pass_rate: f64,
    /// (record id, reason) of the first failing record, if any.
    pub first_failure: Option<(String, String)>,
}

fn check_record(
    rec: &AugmentedSample,
    sources: &HashMap<&str, &ShortSample>,
    threshold: usize,
) -> std::result::Result<(), String> {
    if rec.source_ids.is_empty() {
        return Err("no source ids".into());
    }
    let mut samples = Vec::with_capacity(rec.source_ids.len());
    for id in &rec.source_ids {
        match sources.get(id.as_str()) {
            Some(s) => samples.push((*s).clone()),
            None => return Err(format!("missing source id {id}")),
        }
    }
    let Some(meta) = &rec.meta else {
        return Err("record carries no assembly metadata".into());
    };
    if rec.strategy == Strategy::Passthrough {
        let src = &samples[0];
        if rec.instruction != src.passthrough_instruction() {
            return Err("passthrough instruction not verbatim".into());
        }
        if rec.response != src.response {
            return Err("passthrough response not verbatim".into());
        }
        if rec.token_count >= threshold {
            return Err(format!(
                "passthrough record of {} tokens at threshold {threshold}",
                rec.token_count
            ));
        }
        return Ok(());
    }
    let replayed = compose_response(&samples, meta);
    if replayed != rec.response {
        return Err("replayed response differs from stored response".into());
    }
    Ok(())
}

/// Replays every record's response from its sources and metadata.
/// A shipping build requires pass rate 1.0.
pub fn verify_dataset(
    records: &[AugmentedSample],
    source_corpus: &[ShortSample],
    threshold: usize,
) -> VerifyResult {
    let sources: HashMap<&str, &ShortSample> =
        source_corpus.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut passed = 0;
    let mut first_failure = None;
    for rec in records {
        match check_record(rec, &sources, threshold) {
            Ok(()) => passed += 1,
            Err(reason) => {
                if first_failure.is_none() {
                    first_failure = Some((rec.id.clone(), reason));
                }
            }
        }
    }
    VerifyResult {
        total: records.len(),
        passed,
        pass_rate: if records.is_empty() {
            1.0
        } else {
            passed as f64 / records.len() as f64
        },
        first_failure,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub record_count: usize,
    pub strategy_counts: HashMap<String, usize>,
    pub domain_counts: HashMap<String, usize>,
    pub reuse_histogram: HashMap<usize, usize>,
    pub fit: FitReport,
    pub response_bucket_counts: Vec<usize>,
}

/// Aggregates dataset statistics. `source_index` (id -> domain name) is
/// optional; without it domain counts stay empty.
pub fn build_report(
    records: &[AugmentedSample],
    dist: &LengthDistribution,
    edges: &[f64],
    counter: &TokenCounter,
    source_index: Option<&HashMap<String, String>>,
) -> Result<BuildReport> {
    let fit = fit_report(records, dist, edges)?;
    let response_bucket_counts = histogram(
        records,
        edges,
        dist.max_tokens,
        LengthField::ResponseOnly,
        counter,
    )?;
    let mut strategy_counts: HashMap<String, usize> = HashMap::new();
    let mut domain_counts: HashMap<String, usize> = HashMap::new();
    let mut reuse: HashMap<String, usize> = HashMap::new();
    for r in records {
        *strategy_counts.entry(r.strategy.to_string()).or_default() += 1;
        for id in &r.source_ids {
            *reuse.entry(id.clone()).or_default() += 1;
        }
        if r.strategy != Strategy::Passthrough {
            if let Some(index) = source_index {
                if let Some(domain) = r.source_ids.first().and_then(|id| index.get(id)) {
                    *domain_counts.entry(domain.clone()).or_default() += 1;
                }
            }
        }
    }
    let mut reuse_histogram: HashMap<usize, usize> = HashMap::new();
    for &uses in reuse.values() {
        *reuse_histogram.entry(uses).or_default() += 1;
    }
    Ok(BuildReport {
        record_count: records.len(),
        strategy_counts,
        domain_counts,
        reuse_histogram,
        fit,
        response_bucket_counts,
    })
}

impl BuildReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("records: {}\n", self.record_count));
        let mut strategies: Vec<_> = self.strategy_counts.iter().collect();
        strategies.sort();
        for (s, c) in strategies {
            out.push_str(&format!("strategy {s}: {c}\n"));
        }
        let mut domains: Vec<_> = self.domain_counts.iter().collect();
        domains.sort();
        for (d, c) in domains {
            out.push_str(&format!("domain {d}: {c}\n"));
        }
        out.push_str(&format!(
            "length fit: chi2 = {:.4}, max bucket deviation = {:.4} pp\n",
            self.fit.chi_squared,
            self.fit.max_abs_deviation * 100.0
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lengths::{equal_edges, DistKind};
    use crate::types::{AssemblyMeta, Domain, MetaDetail, NumberingStyle};

    fn record(tokens: usize) -> AugmentedSample {
        AugmentedSample {
            id: format!("r{tokens}"),
            instruction: "i".into(),
            response: "r".repeat(tokens * 4),
            strategy: Strategy::MosaicPlain,
            source_ids: vec!["s".into()],
            token_count: tokens,
            template_id: None,
            meta: None,
        }
    }

    #[test]
    fn histogram_buckets_fixture() {
        let recs = vec![record(10_000), record(30_000), record(70_000)];
        let counter = TokenCounter::heuristic(4.0);
        let counts = histogram(
            &recs,
            &equal_edges(5),
            80_000,
            LengthField::Total,
            &counter,
        )
        .unwrap();
        assert_eq!(counts, vec![1, 1, 0, 0, 1]);
    }

    #[test]
    fn histogram_empty_dataset() {
        let counter = TokenCounter::heuristic(4.0);
        let counts = histogram(&[], &equal_edges(5), 80_000, LengthField::Total, &counter)
            .unwrap();
        assert_eq!(counts, vec![0; 5]);
    }

    #[test]
    fn response_only_recounts() {
        let counter = TokenCounter::heuristic(4.0);
        let mut rec = record(70_000);
        rec.response = "x".repeat(400); // 100 tokens -> first bucket
        let counts = histogram(
            &[rec],
            &equal_edges(5),
            80_000,
            LengthField::ResponseOnly,
            &counter,
        )
        .unwrap();
        assert_eq!(counts, vec![1, 0, 0, 0, 0]);
    }

    #[test]
    fn exact_match_has_near_zero_chi2() {
        let dist = LengthDistribution::new(DistKind::Even, 10_000);
        let mut recs = Vec::new();
        for b in 0..5 {
            for _ in 0..20 {
                recs.push(record(b * 2000 + 1000));
            }
        }
        let fit = fit_report(&recs, &dist, &equal_edges(5)).unwrap();
        assert!(fit.chi_squared < 1e-9, "chi2 = {}", fit.chi_squared);
        assert!(!fit.rejected());
    }

    #[test]
    fn mismatched_distribution_flagged() {
        let flora = LengthDistribution::new(DistKind::FloraExp, 10_000);
        // even-looking dataset scored against the exponential rule
        let mut recs = Vec::new();
        for b in 0..5 {
            for _ in 0..200 {
                recs.push(record(b * 2000 + 1000));
            }
        }
        let fit = fit_report(&recs, &flora, &equal_edges(5)).unwrap();
        assert!(fit.rejected(), "chi2 = {}", fit.chi_squared);
    }

    #[test]
    fn fit_report_rejects_empty() {
        let dist = LengthDistribution::new(DistKind::Even, 10_000);
        assert!(fit_report(&[], &dist, &equal_edges(5)).is_err());
    }

    fn source(i: usize) -> ShortSample {
        ShortSample {
            id: format!("s{i}"),
            instruction: format!("q{i}"),
            input: String::new(),
            response: format!("a{i}"),
            domain: Domain::General,
            token_count: 3,
        }
    }

    #[test]
    fn verify_passes_consistent_record_and_flags_flip() {
        let sources: Vec<ShortSample> = (0..3).map(source).collect();
        let meta = AssemblyMeta {
            separator: "\n\n".into(),
            numbering: NumberingStyle::Bracketed,
            detail: MetaDetail::MosaicPlain,
        };
        let good = AugmentedSample {
            id: "g".into(),
            instruction: "ignored".into(),
            response: compose_response(&sources, &meta),
            strategy: Strategy::MosaicPlain,
            source_ids: sources.iter().map(|s| s.id.clone()).collect(),
            token_count: 5000,
            template_id: None,
            meta: Some(meta.clone()),
        };
        let mut bad = good.clone();
        bad.id = "b".into();
        bad.response.pop();
        let res = verify_dataset(&[good.clone(), bad], &sources, 2048);
        assert_eq!(res.passed, 1);
        assert_eq!(res.first_failure.as_ref().unwrap().0, "b");
        let res = verify_dataset(&[good], &sources, 2048);
        assert_eq!(res.pass_rate, 1.0);
    }

    #[test]
    fn verify_flags_oversized_passthrough() {
        let src = source(0);
        let rec = AugmentedSample {
            id: "p".into(),
            instruction: src.passthrough_instruction(),
            response: src.response.clone(),
            strategy: Strategy::Passthrough,
            source_ids: vec![src.id.clone()],
            token_count: 4000,
            template_id: None,
            meta: Some(AssemblyMeta {
                separator: "\n\n".into(),
                numbering: NumberingStyle::Bracketed,
                detail: MetaDetail::Passthrough,
            }),
        };
        let res = verify_dataset(&[rec], &[src], 2048);
        assert_eq!(res.passed, 0);
    }

    #[test]
    fn verify_flags_missing_source() {
        let rec = AugmentedSample {
            id: "m".into(),
            instruction: "x".into(),
            response: "y".into(),
            strategy: Strategy::MosaicPlain,
            source_ids: vec!["nope".into()],
            token_count: 3000,
            template_id: None,
            meta: Some(AssemblyMeta {
                separator: "\n\n".into(),
                numbering: NumberingStyle::Bracketed,
                detail: MetaDetail::MosaicPlain,
            }),
        };
        let res = verify_dataset(&[rec], &[], 2048);
        assert_eq!(res.passed, 0);
        assert!(res.first_failure.unwrap().1.contains("missing source id"));
    }
}
