//! Non-fatal diagnostics collected while parsing and analysing traces.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// The input had a header but no data rows.
    EmptyRun,
    /// Timestamp column was not strictly increasing; timestamps were dropped.
    NonMonotoneTimestamps { row: usize },
    /// Some differences had magnitude ≥ 2⁶³ and were reduced modulo 2⁶³.
    DeltaOverflow { counter_id: String, count: usize },
    /// Floating-point cancellation produced slightly negative MI values.
    NegativeMiClamped { count: usize },
    /// Fewer paired samples than ten times the joint alphabet.
    SparseJointHistogram { len: usize, recommended: usize },
    /// A requested top-k exceeded the number of candidates.
    RankClamped { requested: usize, available: usize },
    /// All three runs of a counter were identical.
    DegenerateCorrelation { counter_id: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::EmptyRun => write!(f, "input has no data rows"),
            Diagnostic::NonMonotoneTimestamps { row } => {
                write!(f, "timestamps not strictly increasing at row {row}; timestamps ignored")
            }
            Diagnostic::DeltaOverflow { counter_id, count } => write!(
                f,
                "counter `{counter_id}`: {count} difference(s) overflowed 63-bit magnitude"
            ),
            Diagnostic::NegativeMiClamped { count } => {
                write!(f, "{count} negative mutual information value(s) clamped to 0")
            }
            Diagnostic::SparseJointHistogram { len, recommended } => write!(
                f,
                "only {len} paired samples; at least {recommended} recommended for a 256-cell joint histogram"
            ),
            Diagnostic::RankClamped {
                requested,
                available,
            } => write!(f, "top {requested} requested but only {available} counters available"),
            Diagnostic::DegenerateCorrelation { counter_id } => {
                write!(f, "counter `{counter_id}`: all runs identical")
            }
        }
    }
}
