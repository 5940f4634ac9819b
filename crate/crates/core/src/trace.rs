//! Counter trace model and the wide CSV format.
//!
//! A wide CSV file holds one sampling round per row:
//!
//! ```text
//! t_ms,<id1>,<id2>,...
//! 0,5,1
//! 20,7,1
//! ```
//!
//! Values are unsigned decimal 64-bit integers, lines end in LF.

use std::collections::HashSet;

use crate::diag::Diagnostic;
use crate::error::{Error, Result};

pub const DEFAULT_INTERVAL_MS: u64 = 20;
const TIME_COLUMN: &str = "t_ms";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterTrace {
    pub counter_id: String,
    pub samples: Vec<u64>,
    pub sample_interval_ms: u64,
}

impl CounterTrace {
    pub fn new(counter_id: impl Into<String>, samples: Vec<u64>) -> Self {
        Self {
            counter_id: counter_id.into(),
            samples,
            sample_interval_ms: DEFAULT_INTERVAL_MS,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// True when every sample equals the first one.
    pub fn is_constant(&self) -> bool {
        self.samples.windows(2).all(|w| w[0] == w[1])
    }

    pub(crate) fn require_len(&self, need: usize) -> Result<()> {
        if self.samples.len() < need {
            return Err(Error::TraceTooShort {
                id: self.counter_id.clone(),
                len: self.samples.len(),
                need,
            });
        }
        Ok(())
    }
}

/// One sampling run: a set of equally long, round-aligned traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRun {
    pub run_id: String,
    counters: Vec<CounterTrace>,
    round_timestamps_ms: Option<Vec<u64>>,
}

impl TraceRun {
    pub fn new(
        run_id: impl Into<String>,
        counters: Vec<CounterTrace>,
        round_timestamps_ms: Option<Vec<u64>>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &counters {
            if !valid_id(&c.counter_id) {
                return Err(Error::InvalidCounterId(c.counter_id.clone()));
            }
            if !seen.insert(c.counter_id.as_str()) {
                return Err(Error::DuplicateCounter(c.counter_id.clone()));
            }
        }
        if let Some(first) = counters.first() {
            let expected = first.len();
            for c in &counters[1..] {
                if c.len() != expected {
                    return Err(Error::UnequalLengths {
                        id: c.counter_id.clone(),
                        expected,
                        found: c.len(),
                    });
                }
            }
        }
        if let Some(ts) = &round_timestamps_ms {
            let rounds = counters.first().map_or(ts.len(), CounterTrace::len);
            if ts.len() != rounds {
                return Err(Error::Timestamps(format!(
                    "{} timestamps for {} rounds",
                    ts.len(),
                    rounds
                )));
            }
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Timestamps("not strictly increasing".into()));
            }
        }
        Ok(Self {
            run_id: run_id.into(),
            counters,
            round_timestamps_ms,
        })
    }

    pub fn counters(&self) -> &[CounterTrace] {
        &self.counters
    }

    pub fn counter(&self, id: &str) -> Option<&CounterTrace> {
        self.counters.iter().find(|c| c.counter_id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.counters
            .iter()
            .map(|c| c.counter_id.as_str())
            .collect()
    }

    pub fn round_timestamps_ms(&self) -> Option<&[u64]> {
        self.round_timestamps_ms.as_deref()
    }

    /// Number of sampling rounds (0 for a run without counters).
    pub fn rounds(&self) -> usize {
        self.counters.first().map_or(0, CounterTrace::len)
    }

    /// Nominal interval, taken from the first counter.
    pub fn sample_interval_ms(&self) -> u64 {
        self.counters
            .first()
            .map_or(DEFAULT_INTERVAL_MS, |c| c.sample_interval_ms)
    }

    pub fn with_interval_ms(mut self, interval_ms: u64) -> Self {
        for c in &mut self.counters {
            c.sample_interval_ms = interval_ms;
        }
        self
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id != TIME_COLUMN && !id.contains([',', '"', '\n', '\r']) && id.trim() == id
}

/// Parses a wide CSV run. Non-fatal findings are returned as diagnostics.
pub fn parse_wide_csv(bytes: &[u8], run_id: &str) -> Result<(TraceRun, Vec<Diagnostic>)> {
    let mut diags = Vec::new();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::Csv(e.to_string()))?,
        None => return Err(Error::MalformedHeader("empty input".into())),
    };
    if header.get(0) != Some(TIME_COLUMN) {
        return Err(Error::MalformedHeader(format!(
            "first column must be `{TIME_COLUMN}`"
        )));
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut seen = HashSet::new();
    for id in &ids {
        if !valid_id(id) {
            return Err(Error::MalformedHeader(format!("invalid counter id `{id}`")));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateCounter(id.clone()));
        }
    }

    let mut columns: Vec<Vec<u64>> = vec![Vec::new(); ids.len()];
    let mut timestamps = Vec::new();
    for (i, record) in records.enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != ids.len() + 1 {
            return Err(Error::RowArity {
                row,
                expected: ids.len() + 1,
                found: record.len(),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let value = parse_u64(field).ok_or_else(|| Error::BadValue {
                row,
                column: if col == 0 {
                    TIME_COLUMN.to_owned()
                } else {
                    ids[col - 1].clone()
                },
                value: field.to_owned(),
            })?;
            if col == 0 {
                timestamps.push(value);
            } else {
                columns[col - 1].push(value);
            }
        }
    }

    if timestamps.is_empty() {
        diags.push(Diagnostic::EmptyRun);
    }
    let timestamps = match timestamps.windows(2).position(|w| w[1] <= w[0]) {
        Some(pos) => {
            diags.push(Diagnostic::NonMonotoneTimestamps { row: pos + 3 });
            None
        }
        None => Some(timestamps),
    };
    let counters = ids
        .into_iter()
        .zip(columns)
        .map(|(id, samples)| CounterTrace::new(id, samples))
        .collect();
    Ok((TraceRun::new(run_id, counters, timestamps)?, diags))
}

fn parse_u64(field: &str) -> Option<u64> {
    // u64::from_str accepts a leading '+'; canonical values are bare digits.
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    field.parse().ok()
}

/// Serializes a run to canonical wide CSV. Runs without timestamps get
/// `index × interval` in the time column.
pub fn write_wide_csv(run: &TraceRun) -> Result<Vec<u8>> {
    let rounds = run.rounds();
    for c in run.counters() {
        if c.len() != rounds {
            return Err(Error::UnequalLengths {
                id: c.counter_id.clone(),
                expected: rounds,
                found: c.len(),
            });
        }
    }
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());

    let mut header = vec![TIME_COLUMN.to_owned()];
    header.extend(run.counters().iter().map(|c| c.counter_id.clone()));
    writer.write_record(&header).map_err(csv_err)?;

    let interval = run.sample_interval_ms();
    let mut row = Vec::with_capacity(header.len());
    for r in 0..rounds {
        row.clear();
        let t = match run.round_timestamps_ms() {
            Some(ts) => ts[r],
            None => r as u64 * interval,
        };
        row.push(t.to_string());
        row.extend(run.counters().iter().map(|c| c.samples[r].to_string()));
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.into_inner().map_err(|e| Error::Csv(e.to_string()))
}
