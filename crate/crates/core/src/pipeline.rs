//! Staged elimination, ranking, representative selection and the entropy
//! budget of a selected counter set.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::dependence::DependencyReport;
use crate::diag::Diagnostic;
use crate::entropy::{assess_counter_with, EntropyAssessment};
use crate::error::{Error, Result};
use crate::preprocess::{self, Alpha};
use crate::trace::TraceRun;

pub const DEFAULT_SHORT_ROUNDS: usize = 10_000;
pub const DEFAULT_LONG_ROUNDS: usize = 100_001;
pub const DEFAULT_TOP: usize = 19;
pub const DEFAULT_SLEEP_MS: f64 = 20.0;

pub const STAGE_INPUT: &str = "input";
pub const STAGE_SHORT: &str = "constant_short_run";
pub const STAGE_LONG: &str = "constant_long_run";
pub const STAGE_DELTA: &str = "constant_delta";
pub const STAGE_FOLDED: &str = "constant_folded";

#[derive(Debug, Clone, PartialEq)]
pub struct EliminationReport {
    /// `(stage, survivors after the stage)`, starting with the input count.
    pub stage_counts: Vec<(String, usize)>,
    /// Ids dropped at each elimination stage, in input order.
    pub eliminated: BTreeMap<String, Vec<String>>,
    /// Green counters, in input order.
    pub survivors: Vec<String>,
}

impl EliminationReport {
    pub fn eliminated_at(&self, stage: &str) -> &[String] {
        self.eliminated.get(stage).map_or(&[], Vec::as_slice)
    }
}

/// Drops counters that are constant in the short run, then in the long run,
/// then after differencing, then after folding for any of `alphas`.
/// "Constant" means every value equal; there is no tolerance.
pub fn eliminate(
    run_short: &TraceRun,
    run_long: &TraceRun,
    alphas: &[Alpha],
) -> Result<EliminationReport> {
    let short_ids: BTreeSet<&str> = run_short.ids().into_iter().collect();
    let long_ids: BTreeSet<&str> = run_long.ids().into_iter().collect();
    if short_ids != long_ids {
        let diff: Vec<&str> = short_ids.symmetric_difference(&long_ids).copied().collect();
        return Err(Error::CounterSetMismatch(diff.join(", ")));
    }
    for run in [run_short, run_long] {
        if run.rounds() < 2 && !run.counters().is_empty() {
            return Err(Error::TraceTooShort {
                id: run.run_id.clone(),
                len: run.rounds(),
                need: 2,
            });
        }
    }

    let mut stage_counts = vec![(STAGE_INPUT.to_owned(), run_short.counters().len())];
    let mut eliminated = BTreeMap::new();
    let mut alive: Vec<&str> = run_short.ids();

    let mut stage =
        |name: &str, alive: &mut Vec<&str>, drop: &dyn Fn(&str) -> Result<bool>| -> Result<()> {
            let flags: Vec<bool> = alive.iter().map(|id| drop(id)).collect::<Result<_>>()?;
            let mut kept = Vec::with_capacity(alive.len());
            let mut dropped = Vec::new();
            for (id, d) in alive.iter().zip(flags) {
                if d {
                    dropped.push((*id).to_owned());
                } else {
                    kept.push(*id);
                }
            }
            *alive = kept;
            stage_counts.push((name.to_owned(), alive.len()));
            eliminated.insert(name.to_owned(), dropped);
            Ok(())
        };

    let long = |id: &str| run_long.counter(id).expect("same counter set");
    stage(STAGE_SHORT, &mut alive, &|id| {
        Ok(run_short.counter(id).expect("listed").is_constant())
    })?;
    stage(STAGE_LONG, &mut alive, &|id| Ok(long(id).is_constant()))?;
    stage(STAGE_DELTA, &mut alive, &|id| {
        Ok(preprocess::delta(long(id))?.is_constant())
    })?;
    stage(STAGE_FOLDED, &mut alive, &|id| {
        let deltas = preprocess::delta(long(id))?;
        Ok(alphas.iter().any(|&a| {
            let s = preprocess::fold_and_pack(&deltas, a);
            s.is_empty() || s.is_constant()
        }))
    })?;

    Ok(EliminationReport {
        stage_counts,
        eliminated,
        survivors: alive.into_iter().map(str::to_owned).collect(),
    })
}

/// Assesses every counter of a run (in parallel, output in run order).
pub fn assess_run(run: &TraceRun, extra_alphas: &[Alpha]) -> Result<Vec<EntropyAssessment>> {
    run.counters()
        .par_iter()
        .map(|c| assess_counter_with(c, extra_alphas))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub rank: usize,
    pub counter_id: String,
    pub h1_per_bit: f64,
    pub hinf_per_bit: f64,
    pub combined_per_bit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub entries: Vec<RankEntry>,
    pub k: usize,
}

impl RankingReport {
    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.counter_id.as_str()).collect()
    }
}

/// Top `k` counters by combined per-bit metric, descending; ties broken by
/// counter id. A `k` beyond the number of assessments is clamped.
pub fn rank(
    assessments: &[EntropyAssessment],
    k: usize,
) -> Result<(RankingReport, Vec<Diagnostic>)> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut diags = Vec::new();
    let mut sorted: Vec<&EntropyAssessment> = assessments.iter().collect();
    sorted.sort_by(|a, b| {
        b.combined_per_bit
            .total_cmp(&a.combined_per_bit)
            .then_with(|| a.counter_id.cmp(&b.counter_id))
    });
    if k > sorted.len() {
        diags.push(Diagnostic::RankClamped {
            requested: k,
            available: sorted.len(),
        });
    }
    let entries: Vec<RankEntry> = sorted
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, a)| RankEntry {
            rank: i + 1,
            counter_id: a.counter_id.clone(),
            h1_per_bit: a.h1_per_bit,
            hinf_per_bit: a.hinf_per_bit,
            combined_per_bit: a.combined_per_bit,
        })
        .collect();
    let k = entries.len();
    Ok((RankingReport { entries, k }, diags))
}

/// Independent counters plus one representative per dependent group, in
/// ranking order.
pub fn select_final(ranking: &RankingReport, dependency: &DependencyReport) -> Result<Vec<String>> {
    let ranked: BTreeSet<&str> = ranking.ids().into_iter().collect();
    let analysed: BTreeSet<&str> = dependency
        .matrix
        .counter_ids
        .iter()
        .map(String::as_str)
        .collect();
    if ranked != analysed {
        let diff: Vec<&str> = ranked.symmetric_difference(&analysed).copied().collect();
        return Err(Error::CounterSetMismatch(diff.join(", ")));
    }
    let keep: BTreeSet<&str> = dependency
        .representatives
        .iter()
        .map(String::as_str)
        .collect();
    Ok(ranking
        .ids()
        .into_iter()
        .filter(|id| keep.contains(id))
        .map(str::to_owned)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyBudget {
    pub selected: Vec<String>,
    pub alpha: Alpha,
    /// Σ byte-level H₁ at `alpha` over the selected counters.
    pub bits_per_cycle: f64,
    /// `(8 / alpha) × (sleep_ms + collect_ms)`: rounds needed for one byte.
    pub cycle_ms: f64,
    pub bits_per_second: f64,
}

/// Entropy gathered per byte-producing cycle. Uses the byte-level H₁ at the
/// given alpha, not the robust minimum.
pub fn budget(
    assessments: &[EntropyAssessment],
    alpha: Alpha,
    sleep_ms: f64,
    collect_ms: f64,
) -> Result<EntropyBudget> {
    if alpha.bits() > 8 {
        return Err(Error::InvalidParameter(format!(
            "budget alpha must be 1, 2, 4 or 8, got {alpha}"
        )));
    }
    if !(sleep_ms > 0.0 && collect_ms > 0.0) {
        return Err(Error::InvalidParameter(
            "sleep and collection times must be positive".into(),
        ));
    }
    let mut bits_per_cycle = 0.0;
    for a in assessments {
        let e = a.per_alpha.get(&alpha).ok_or_else(|| Error::MissingAlpha {
            id: a.counter_id.clone(),
            alpha: alpha.bits(),
        })?;
        bits_per_cycle += e.h1_bits;
    }
    let cycle_ms = (8 / alpha.bits()) as f64 * (sleep_ms + collect_ms);
    Ok(EntropyBudget {
        selected: assessments.iter().map(|a| a.counter_id.clone()).collect(),
        alpha,
        bits_per_cycle,
        cycle_ms,
        bits_per_second: bits_per_cycle * 1000.0 / cycle_ms,
    })
}
