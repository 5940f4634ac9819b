//! Plug-in (maximum-likelihood) Shannon and min-entropy estimates.
//!
//! Probabilities are observed frequencies, `p_s = count_s / total`. Entropy
//! terms are summed over the nonzero counts in ascending count order (ties
//! are equal terms), so the result depends only on the multiset of counts:
//! it is bit-identical under any relabeling of symbols.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::preprocess::{self, Alpha, SymbolStream, PIPELINE_ALPHAS};
use crate::trace::CounterTrace;

/// Histogram of a symbol stream over its full alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolDistribution {
    counts: Vec<u64>,
    total: u64,
}

impl SymbolDistribution {
    /// Builds a distribution from dense counts; `counts.len()` is the
    /// alphabet size.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyStream);
        }
        Ok(Self { counts, total })
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probability(&self, symbol: usize) -> f64 {
        self.counts[symbol] as f64 / self.total as f64
    }
}

pub fn estimate_distribution(stream: &SymbolStream) -> Result<SymbolDistribution> {
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }
    let mut counts = vec![0u64; stream.symbol_width.alphabet_size()];
    for &s in &stream.symbols {
        counts[s as usize] += 1;
    }
    SymbolDistribution::from_counts(counts)
}

/// Shannon entropy in bits of a histogram given as raw counts.
pub(crate) fn entropy_of_counts(counts: &[u64], total: u64) -> f64 {
    let mut nonzero: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
    nonzero.sort_unstable();
    let n = total as f64;
    let sum: f64 = nonzero
        .into_iter()
        .map(|c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum();
    // -0.0 for single-symbol inputs.
    if sum == 0.0 {
        0.0
    } else {
        -sum
    }
}

/// H₁ = −Σ p lg p, with 0·lg 0 = 0.
pub fn shannon_entropy(dist: &SymbolDistribution) -> f64 {
    entropy_of_counts(&dist.counts, dist.total)
}

/// H∞ = −lg max p.
pub fn min_entropy(dist: &SymbolDistribution) -> f64 {
    let max = dist.counts.iter().copied().max().unwrap_or(0);
    let h = -(max as f64 / dist.total as f64).log2();
    if h == 0.0 {
        0.0
    } else {
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEntropy {
    /// Byte-level Shannon entropy, bits per byte.
    pub h1_bits: f64,
    /// Byte-level min-entropy, bits per byte.
    pub hinf_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyAssessment {
    pub counter_id: String,
    pub per_alpha: BTreeMap<Alpha, AlphaEntropy>,
    pub robust_h1: f64,
    pub robust_hinf: f64,
    pub h1_per_bit: f64,
    pub hinf_per_bit: f64,
    pub combined_per_bit: f64,
}

impl EntropyAssessment {
    /// Builds an assessment from per-alpha byte entropies. The robust values
    /// are minima over alpha ∈ {1, 2, 4, 8}; other widths are carried along
    /// but never enter the minimum.
    pub fn from_per_alpha(
        counter_id: impl Into<String>,
        per_alpha: BTreeMap<Alpha, AlphaEntropy>,
    ) -> Result<Self> {
        let counter_id = counter_id.into();
        let mut robust_h1 = f64::INFINITY;
        let mut robust_hinf = f64::INFINITY;
        for alpha in PIPELINE_ALPHAS {
            let e = per_alpha.get(&alpha).ok_or_else(|| Error::MissingAlpha {
                id: counter_id.clone(),
                alpha: alpha.bits(),
            })?;
            robust_h1 = robust_h1.min(e.h1_bits);
            robust_hinf = robust_hinf.min(e.hinf_bits);
        }
        let h1_per_bit = robust_h1 / 8.0;
        let hinf_per_bit = robust_hinf / 8.0;
        Ok(Self {
            counter_id,
            per_alpha,
            robust_h1,
            robust_hinf,
            h1_per_bit,
            hinf_per_bit,
            combined_per_bit: h1_per_bit + hinf_per_bit,
        })
    }
}

/// Minimum trace length giving at least one byte at alpha = 1.
pub const MIN_ASSESS_SAMPLES: usize = 9;

/// Byte-level entropies of one preprocessed stream.
pub fn stream_entropy(stream: &SymbolStream) -> Result<AlphaEntropy> {
    let dist = estimate_distribution(stream)?;
    Ok(AlphaEntropy {
        h1_bits: shannon_entropy(&dist),
        hinf_bits: min_entropy(&dist),
    })
}

pub fn assess_counter(trace: &CounterTrace) -> Result<EntropyAssessment> {
    assess_counter_with(trace, &PIPELINE_ALPHAS)
}

/// Like [`assess_counter`], additionally evaluating the alphas in `extra`.
pub fn assess_counter_with(trace: &CounterTrace, extra: &[Alpha]) -> Result<EntropyAssessment> {
    trace.require_len(MIN_ASSESS_SAMPLES)?;
    let deltas = preprocess::delta(trace)?;
    let mut per_alpha = BTreeMap::new();
    for &alpha in PIPELINE_ALPHAS.iter().chain(extra) {
        if per_alpha.contains_key(&alpha) {
            continue;
        }
        let stream = preprocess::fold_and_pack(&deltas, alpha);
        if stream.is_empty() {
            // Only reachable for extra widths, which need no extra samples.
            return Err(Error::TraceTooShort {
                id: trace.counter_id.clone(),
                len: trace.len(),
                need: MIN_ASSESS_SAMPLES,
            });
        }
        per_alpha.insert(alpha, stream_entropy(&stream)?);
    }
    EntropyAssessment::from_per_alpha(trace.counter_id.clone(), per_alpha)
}
