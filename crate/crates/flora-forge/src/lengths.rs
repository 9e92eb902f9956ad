//! Token-length distribution rule: densities over normalized length
//! x in [0,1], bucket-mass integration and inverse-CDF budget sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FloraError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    FloraExp,
    Even,
    UShaped,
    ReverseExp,
    Normal,
}

impl DistKind {
    pub const ALL: [DistKind; 5] = [
        DistKind::FloraExp,
        DistKind::Even,
        DistKind::UShaped,
        DistKind::ReverseExp,
        DistKind::Normal,
    ];

    pub fn from_cli(name: &str) -> Result<Self> {
        match name {
            "flora" => Ok(DistKind::FloraExp),
            "even" => Ok(DistKind::Even),
            "ushaped" => Ok(DistKind::UShaped),
            "reverse" => Ok(DistKind::ReverseExp),
            "normal" => Ok(DistKind::Normal),
            _ => Err(FloraError::InvalidConfig(format!(
                "unknown distribution {name:?} (flora|even|ushaped|reverse|normal)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DistKind::FloraExp => "flora",
            DistKind::Even => "even",
            DistKind::UShaped => "ushaped",
            DistKind::ReverseExp => "reverse",
            DistKind::Normal => "normal",
        }
    }
}

/// Number of knots in the tabulated inverse CDF.
const CDF_KNOTS: usize = 8192;
/// Panels for composite Simpson integration over one interval set.
const SIMPSON_PANELS: usize = 20_000;

#[derive(Debug, Clone)]
pub struct LengthDistribution {
    pub kind: DistKind,
    pub max_tokens: usize,
    pub normal_mean: f64,
    pub normal_sigma: f64,
    /// Cumulative mass at x = i / (CDF_KNOTS - 1), normalized to end at 1.
    cdf: Vec<f64>,
}

impl LengthDistribution {
    pub fn new(kind: DistKind, max_tokens: usize) -> Self {
        Self::with_normal_params(kind, max_tokens, 0.5, 0.15)
    }

    pub fn with_normal_params(
        kind: DistKind,
        max_tokens: usize,
        normal_mean: f64,
        normal_sigma: f64,
    ) -> Self {
        let mut dist = LengthDistribution {
            kind,
            max_tokens,
            normal_mean,
            normal_sigma,
            cdf: Vec::new(),
        };
        dist.cdf = dist.build_cdf();
        dist
    }

    /// Unnormalized density at x in [0,1].
    pub fn density(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(FloraError::InvalidConfig(format!(
                "density argument {x} outside [0,1]"
            )));
        }
        Ok(self.density_unchecked(x))
    }

    fn density_unchecked(&self, x: f64) -> f64 {
        match self.kind {
            DistKind::FloraExp => 2.411 * (-10.899 * x).exp() + 0.017,
            DistKind::Even => 0.2,
            DistKind::UShaped => 2.375 * (x - 0.5).powi(2) + 0.01,
            DistKind::ReverseExp => 2.411 * (10.899 * (x - 1.0)).exp() + 0.017,
            DistKind::Normal => {
                let z = (x - self.normal_mean) / self.normal_sigma;
                (-0.5 * z * z).exp()
            }
        }
    }

    fn integrate(&self, a: f64, b: f64, panels: usize) -> f64 {
        // composite Simpson; panels must be even
        let n = if panels.is_multiple_of(2) {
            panels
        } else {
            panels + 1
        };
        let h = (b - a) / n as f64;
        let mut sum = self.density_unchecked(a) + self.density_unchecked(b);
        for i in 1..n {
            let w = if i % 2 == 0 { 2.0 } else { 4.0 };
            sum += w * self.density_unchecked(a + i as f64 * h);
        }
        sum * h / 3.0
    }

    /// Normalized probability mass per bucket defined by ascending edges
    /// over [0,1]; edges must start at 0 and end at 1.
    pub fn bucket_masses(&self, edges: &[f64]) -> Result<Vec<f64>> {
        validate_edges(edges)?;
        let buckets = edges.len() - 1;
        let panels_per_bucket = (SIMPSON_PANELS / buckets).max(100);
        let raw: Vec<f64> = edges
            .windows(2)
            .map(|w| self.integrate(w[0], w[1], panels_per_bucket))
            .collect();
        let total: f64 = raw.iter().sum();
        Ok(raw.iter().map(|m| m / total).collect())
    }

    fn build_cdf(&self) -> Vec<f64> {
        let mut cdf = Vec::with_capacity(CDF_KNOTS);
        cdf.push(0.0);
        let h = 1.0 / (CDF_KNOTS - 1) as f64;
        let mut acc = 0.0;
        for i in 1..CDF_KNOTS {
            let a = (i - 1) as f64 * h;
            let b = i as f64 * h;
            acc += self.integrate(a, b, 4);
            cdf.push(acc);
        }
        let total = *cdf.last().unwrap();
        for v in &mut cdf {
            *v /= total;
        }
        cdf
    }

    /// Inverse-CDF sample of normalized x in [0,1].
    pub fn sample_x(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen();
        let i = match self
            .cdf
            .binary_search_by(|v| v.partial_cmp(&u).unwrap())
        {
            Ok(i) => i,
            Err(i) => i,
        };
        if i == 0 {
            return 0.0;
        }
        let (lo, hi) = (self.cdf[i - 1], self.cdf[i]);
        let h = 1.0 / (CDF_KNOTS - 1) as f64;
        let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.0 };
        ((i - 1) as f64 + frac) * h
    }

    /// Sampled per-record token budget, clamped to [min_tokens, max_tokens].
    pub fn sample_target_length(&self, min_tokens: usize, rng: &mut impl Rng) -> usize {
        let x = self.sample_x(rng);
        let budget = (x * self.max_tokens as f64).round() as usize;
        budget.clamp(min_tokens, self.max_tokens)
    }
}

pub fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2
        || (edges[0] - 0.0).abs() > 1e-12
        || (edges[edges.len() - 1] - 1.0).abs() > 1e-12
        || edges.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(FloraError::InvalidConfig(
            "edges must ascend strictly from 0 to 1".into(),
        ));
    }
    Ok(())
}

/// n equal buckets over [0,1].
pub fn equal_edges(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}
