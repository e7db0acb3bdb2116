//! Empirical margins: mid-rank probability integral transform, rescaled
//! by `n/(n+1)`, and the one-sample Kolmogorov-Smirnov test against
//! Uniform(0, 1).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::copula::UnitPair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarginError {
    #[error("insufficient sample: {0} values, need at least 2")]
    InsufficientSample(usize),
    #[error("non-finite sample value at index {0}")]
    NonFinite(usize),
    #[error("margins have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("value {value} at index {index} is outside (0, 1)")]
    OutOfUnitInterval { index: usize, value: f64 },
}

/// Paired probability-integral-transform values, all strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoObservations {
    pairs: Vec<UnitPair>,
}

impl PseudoObservations {
    /// Ranks both raw margins and pairs the results.
    pub fn from_raw(x: &[f64], y: &[f64]) -> Result<Self, MarginError> {
        if x.len() != y.len() {
            return Err(MarginError::LengthMismatch(x.len(), y.len()));
        }
        let u = empirical_pit(x)?;
        let v = empirical_pit(y)?;
        Ok(Self {
            pairs: u.into_iter().zip(v).map(|(u, v)| UnitPair { u, v }).collect(),
        })
    }

    /// Wraps values that are already pseudo-observations.
    pub fn from_pairs(pairs: Vec<(f64, f64)>) -> Result<Self, MarginError> {
        if pairs.len() < 2 {
            return Err(MarginError::InsufficientSample(pairs.len()));
        }
        for (index, &(u, v)) in pairs.iter().enumerate() {
            for value in [u, v] {
                if !(value > 0.0 && value < 1.0) {
                    return Err(MarginError::OutOfUnitInterval { index, value });
                }
            }
        }
        Ok(Self {
            pairs: pairs.into_iter().map(|(u, v)| UnitPair { u, v }).collect(),
        })
    }

    pub fn pairs(&self) -> &[UnitPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn u(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.u).collect()
    }

    pub fn v(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.v).collect()
    }

    /// Exchanges the two margins.
    pub fn transposed(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(UnitPair::transposed).collect(),
        }
    }
}

/// `rank(x_i) / (n + 1)` with tied values sharing the mean of their ranks.
pub fn empirical_pit(samples: &[f64]) -> Result<Vec<f64>, MarginError> {
    let n = samples.len();
    if n < 2 {
        return Err(MarginError::InsufficientSample(n));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(MarginError::NonFinite(i));
    }
    let ranks = mid_ranks(samples);
    let denom = (n + 1) as f64;
    Ok(ranks.into_iter().map(|r| r / denom).collect())
}

/// 1-based ranks, ties averaged.
pub fn mid_ranks(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && samples[order[end]] == samples[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample KS test of `pits` against Uniform(0, 1) with the asymptotic
/// Kolmogorov p-value.
pub fn ks_uniform_test(pits: &[f64]) -> Result<KsResult, MarginError> {
    let n = pits.len();
    if n == 0 {
        return Err(MarginError::Empty);
    }
    for (index, &value) in pits.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(MarginError::OutOfUnitInterval { index, value });
        }
    }
    let mut sorted = pits.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let above = (i + 1) as f64 / nf - x;
            let below = x - i as f64 / nf;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_p_value(statistic, n),
        n,
    })
}

/// Upper tail of the Kolmogorov distribution at `sqrt(n) * d`.
///
/// Uses the alternating series `2 Σ (-1)^(k-1) exp(-2 k² n d²)` where it
/// converges quickly, and the Jacobi theta form of the CDF for small
/// arguments, where the alternating series does not.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    let lambda = (n as f64).sqrt() * d;
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.0 {
        // P(K <= λ) = sqrt(2π)/λ Σ_{k>=1} exp(-(2k-1)² π² / (8 λ²))
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..100 {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * c).exp();
            sum += term;
            if term < 1e-12 * sum.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        for k in 1..100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-12 {
                break;
            }
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}
