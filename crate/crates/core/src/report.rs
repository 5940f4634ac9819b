//! JSON assessment report.
//!
//! Numbers are written in fixed notation with six decimals and keys appear
//! in declaration order, so identical inputs give identical bytes. Field
//! names carry their unit (`_bits`, `_bits_per_bit`, `_ms`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dependence::{DependencyReport, RobustnessSeries};
use crate::entropy::EntropyAssessment;
use crate::error::{Error, Result};
use crate::pipeline::{EliminationReport, EntropyBudget, RankingReport};
use crate::trace::TraceRun;

pub const SCHEMA_VERSION: u32 = 1;

/// A real number rounded to six decimals for display.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Fixed6(f64);

impl Fixed6 {
    pub fn new(value: f64) -> Self {
        let text = format!("{value:.6}");
        let v: f64 = text.parse().expect("formatted float parses");
        // "-0.000000" would not round-trip through the canonical text.
        Self(if v == 0.0 { 0.0 } else { v })
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for Fixed6 {
    fn from(v: f64) -> Self {
        Self::new(v)
    }
}

impl fmt::Display for Fixed6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

impl Serialize for Fixed6 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let number =
            serde_json::Number::from_str(&self.to_string()).map_err(serde::ser::Error::custom)?;
        number.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Fixed6 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let number = serde_json::Number::deserialize(deserializer)?;
        let v: f64 = number
            .to_string()
            .parse()
            .map_err(serde::de::Error::custom)?;
        Ok(Fixed6::new(v))
    }
}

fn fixed_vec(values: &[f64]) -> Vec<Fixed6> {
    values.iter().copied().map(Fixed6::new).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub run_id: String,
    pub counters: usize,
    pub samples_per_counter: usize,
    pub sample_interval_ms: u64,
}

impl RunInfo {
    pub fn of(run: &TraceRun) -> Self {
        Self {
            run_id: run.run_id.clone(),
            counters: run.counters().len(),
            samples_per_counter: run.rounds(),
            sample_interval_ms: run.sample_interval_ms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRecord {
    pub alpha: u32,
    pub symbols: String,
    pub h1_bits: Fixed6,
    pub hinf_bits: Fixed6,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub counter_id: String,
    pub per_alpha: Vec<AlphaRecord>,
    pub robust_h1_bits: Fixed6,
    pub robust_hinf_bits: Fixed6,
    pub h1_bits_per_bit: Fixed6,
    pub hinf_bits_per_bit: Fixed6,
    pub combined_bits_per_bit: Fixed6,
}

impl From<&EntropyAssessment> for AssessmentRecord {
    fn from(a: &EntropyAssessment) -> Self {
        Self {
            counter_id: a.counter_id.clone(),
            per_alpha: a
                .per_alpha
                .iter()
                .map(|(alpha, e)| AlphaRecord {
                    alpha: alpha.bits(),
                    symbols: "byte".into(),
                    h1_bits: e.h1_bits.into(),
                    hinf_bits: e.hinf_bits.into(),
                })
                .collect(),
            robust_h1_bits: a.robust_h1.into(),
            robust_hinf_bits: a.robust_hinf.into(),
            h1_bits_per_bit: a.h1_per_bit.into(),
            hinf_bits_per_bit: a.hinf_per_bit.into(),
            combined_bits_per_bit: a.combined_per_bit.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub surviving_counters: usize,
    pub eliminated: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationSection {
    pub stages: Vec<StageRecord>,
    pub survivors: Vec<String>,
}

impl From<&EliminationReport> for EliminationSection {
    fn from(r: &EliminationReport) -> Self {
        Self {
            stages: r
                .stage_counts
                .iter()
                .map(|(stage, n)| StageRecord {
                    stage: stage.clone(),
                    surviving_counters: *n,
                    eliminated: r.eliminated_at(stage).to_vec(),
                })
                .collect(),
            survivors: r.survivors.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub rank: usize,
    pub counter_id: String,
    pub h1_bits_per_bit: Fixed6,
    pub hinf_bits_per_bit: Fixed6,
    pub combined_bits_per_bit: Fixed6,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingSection {
    pub k: usize,
    pub entries: Vec<RankRecord>,
}

impl From<&RankingReport> for RankingSection {
    fn from(r: &RankingReport) -> Self {
        Self {
            k: r.k,
            entries: r
                .entries
                .iter()
                .map(|e| RankRecord {
                    rank: e.rank,
                    counter_id: e.counter_id.clone(),
                    h1_bits_per_bit: e.h1_per_bit.into(),
                    hinf_bits_per_bit: e.hinf_per_bit.into(),
                    combined_bits_per_bit: e.combined_per_bit.into(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub members: Vec<String>,
    pub representative: String,
    /// Largest normalized MI between two members (0 for singletons).
    pub max_normalized_mi: Fixed6,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencySection {
    pub alpha: u32,
    pub normalized_mi_threshold: Fixed6,
    pub counter_ids: Vec<String>,
    /// Mutual information divided by 4 bits.
    pub normalized_mi: Vec<Vec<Fixed6>>,
    pub groups: Vec<GroupRecord>,
    pub selected: Vec<String>,
}

impl DependencySection {
    pub fn new(report: &DependencyReport, alpha: u32, selected: Vec<String>) -> Self {
        let m = &report.matrix;
        let groups = report
            .groups
            .iter()
            .zip(&report.representatives)
            .map(|(members, rep)| {
                let idx: Vec<usize> = members.iter().filter_map(|id| m.index_of(id)).collect();
                let mut max = 0.0f64;
                for (a, &i) in idx.iter().enumerate() {
                    for &j in &idx[a + 1..] {
                        max = max.max(m.get(i, j));
                    }
                }
                GroupRecord {
                    members: members.clone(),
                    representative: rep.clone(),
                    max_normalized_mi: max.into(),
                }
            })
            .collect();
        Self {
            alpha,
            normalized_mi_threshold: report.threshold.into(),
            counter_ids: m.counter_ids.clone(),
            normalized_mi: m.values.iter().map(|row| fixed_vec(row)).collect(),
            groups,
            selected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSeries {
    pub runs: [usize; 2],
    pub mean_normalized_mi: Fixed6,
    pub normalized_mi: Vec<Fixed6>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRecord {
    pub counter_id: String,
    pub window_nibbles: usize,
    pub step_nibbles: usize,
    pub normalized_mi_threshold: Fixed6,
    pub classification: String,
    pub degenerate: bool,
    pub pairs: Vec<PairSeries>,
    pub min_normalized_mi: Vec<Fixed6>,
    pub avg_normalized_mi: Vec<Fixed6>,
    pub max_normalized_mi: Vec<Fixed6>,
}

impl From<&RobustnessSeries> for RobustnessRecord {
    fn from(r: &RobustnessSeries) -> Self {
        Self {
            counter_id: r.counter_id.clone(),
            window_nibbles: r.window_len,
            step_nibbles: r.step,
            normalized_mi_threshold: r.threshold.into(),
            classification: r.classification.as_str().to_owned(),
            degenerate: r.degenerate,
            pairs: crate::dependence::RUN_PAIRS
                .iter()
                .enumerate()
                .map(|(p, &(i, j))| PairSeries {
                    runs: [i, j],
                    mean_normalized_mi: r.pair_means[p].into(),
                    normalized_mi: fixed_vec(&r.per_pair_series[p]),
                })
                .collect(),
            min_normalized_mi: fixed_vec(&r.min_series),
            avg_normalized_mi: fixed_vec(&r.avg_series),
            max_normalized_mi: fixed_vec(&r.max_series),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSection {
    pub selected: Vec<String>,
    pub alpha: u32,
    pub bits_per_cycle: Fixed6,
    pub cycle_ms: Fixed6,
    pub bits_per_second: Fixed6,
}

impl From<&EntropyBudget> for BudgetSection {
    fn from(b: &EntropyBudget) -> Self {
        Self {
            selected: b.selected.clone(),
            alpha: b.alpha.bits(),
            bits_per_cycle: b.bits_per_cycle.into(),
            cycle_ms: b.cycle_ms.into(),
            bits_per_second: b.bits_per_second.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReportFile {
    pub schema_version: u32,
    pub run: RunInfo,
    pub assessments: Vec<AssessmentRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elimination: Option<EliminationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<RankingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dependency: Option<DependencySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<Vec<RobustnessRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetSection>,
}

impl AssessmentReportFile {
    pub fn new(run: RunInfo, assessments: &[EntropyAssessment]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            run,
            assessments: assessments.iter().map(AssessmentRecord::from).collect(),
            elimination: None,
            ranking: None,
            dependency: None,
            robustness: None,
            budget: None,
        }
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Report(format!(
                "unsupported schema version {}",
                report.schema_version
            )));
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::assess_counter;
    use crate::trace::CounterTrace;

    #[test]
    fn fixed_notation() {
        assert_eq!(
            serde_json::to_string(&Fixed6::new(0.5)).unwrap(),
            "0.500000"
        );
        assert_eq!(
            serde_json::to_string(&Fixed6::new(1.0)).unwrap(),
            "1.000000"
        );
        assert_eq!(
            serde_json::to_string(&Fixed6::new(-1e-9)).unwrap(),
            "0.000000"
        );
        assert_eq!(
            serde_json::to_string(&Fixed6::new(0.0658836)).unwrap(),
            "0.065884"
        );
        let back: Fixed6 = serde_json::from_str("0.065884").unwrap();
        assert_eq!(back, Fixed6::new(0.065884));
    }

    #[test]
    fn report_round_trips() {
        let t = CounterTrace::new(
            "a",
            (0..200u64)
                .map(|i| i.wrapping_mul(0x9E37_79B9_7F4A_7C15))
                .collect(),
        );
        let run = TraceRun::new("r", vec![t.clone()], None).unwrap();
        let report = AssessmentReportFile::new(RunInfo::of(&run), &[assess_counter(&t).unwrap()]);
        let text = report.to_json().unwrap();
        let back = AssessmentReportFile::from_json(&text).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.to_json().unwrap(), text);
        assert!(!text.contains("ranking"));
    }

    #[test]
    fn rejects_other_schema() {
        let text = r#"{"schema_version":2,"run":{"run_id":"r","counters":0,"samples_per_counter":0,"sample_interval_ms":20},"assessments":[]}"#;
        assert!(matches!(
            AssessmentReportFile::from_json(text),
            Err(Error::Report(_))
        ));
    }
}
