//! Host counter sampler.
//!
//! Only Linux is supported: counters come from `/proc/stat` and
//! `/proc/vmstat`. A round reads every counter, records the values and then
//! sleeps for the interval on a monotonic clock. A counter that fails to
//! read repeats its previous value and bumps the failure count.

use std::time::{Duration, Instant};

/// Narrow interface over an enumerable counter facility.
pub trait CounterSource {
    fn names(&self) -> &[String];
    /// Fills `out` with one value per name; `None` marks a failed read.
    fn read_all(&mut self, out: &mut [Option<u64>]);
}

#[derive(Debug, Default)]
pub struct SamplingStats {
    pub collect_ms: Vec<f64>,
    pub read_failures: usize,
}

impl SamplingStats {
    pub fn mean_collect_ms(&self) -> f64 {
        if self.collect_ms.is_empty() {
            0.0
        } else {
            self.collect_ms.iter().sum::<f64>() / self.collect_ms.len() as f64
        }
    }

    pub fn max_collect_ms(&self) -> f64 {
        self.collect_ms.iter().copied().fold(0.0, f64::max)
    }
}

/// Samples `rounds` rounds. Returns per-round timestamps (ms since start),
/// per-counter columns and collection statistics.
pub fn sample<S: CounterSource>(
    source: &mut S,
    rounds: usize,
    interval: Duration,
) -> (Vec<u64>, Vec<Vec<u64>>, SamplingStats) {
    let k = source.names().len();
    let mut columns = vec![Vec::with_capacity(rounds); k];
    let mut timestamps = Vec::with_capacity(rounds);
    let mut stats = SamplingStats::default();
    let mut buf = vec![None; k];
    let mut last = vec![0u64; k];
    let start = Instant::now();
    let mut last_t = None;

    for _ in 0..rounds {
        let t0 = Instant::now();
        source.read_all(&mut buf);
        stats.collect_ms.push(t0.elapsed().as_secs_f64() * 1000.0);
        for (i, v) in buf.iter().enumerate() {
            match v {
                Some(v) => last[i] = *v,
                None => stats.read_failures += 1,
            }
            columns[i].push(last[i]);
        }
        let mut t = t0.duration_since(start).as_millis() as u64;
        if let Some(prev) = last_t {
            // keep the time column strictly increasing
            t = t.max(prev + 1);
        }
        last_t = Some(t);
        timestamps.push(t);
        std::thread::sleep(interval);
    }
    (timestamps, columns, stats)
}

#[cfg(target_os = "linux")]
pub use linux::ProcCounters as HostCounters;

#[cfg(target_os = "linux")]
mod linux {
    use super::CounterSource;
    use std::fs;

    const STAT: &str = "/proc/stat";
    const VMSTAT: &str = "/proc/vmstat";
    const CPU_FIELDS: [&str; 10] = [
        "user",
        "nice",
        "system",
        "idle",
        "iowait",
        "irq",
        "softirq",
        "steal",
        "guest",
        "guest_nice",
    ];

    /// `(counter name, value)` pairs from `/proc/stat`.
    fn parse_stat(text: &str) -> Vec<(String, u64)> {
        let mut out = Vec::new();
        for line in text.lines() {
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else { continue };
            let values: Vec<u64> = parts.map_while(|p| p.parse().ok()).collect();
            if key.starts_with("cpu") {
                for (field, v) in CPU_FIELDS.iter().zip(&values) {
                    out.push((format!("stat.{key}.{field}"), *v));
                }
            } else if let Some(first) = values.first() {
                // intr/softirq carry a total followed by per-source counts
                out.push((format!("stat.{key}"), *first));
            }
        }
        out
    }

    fn parse_vmstat(text: &str) -> Vec<(String, u64)> {
        text.lines()
            .filter_map(|line| {
                let (k, v) = line.split_once(' ')?;
                Some((format!("vmstat.{k}"), v.trim().parse().ok()?))
            })
            .collect()
    }

    fn read() -> Vec<(String, u64)> {
        let mut all = fs::read_to_string(STAT)
            .map(|t| parse_stat(&t))
            .unwrap_or_default();
        all.extend(
            fs::read_to_string(VMSTAT)
                .map(|t| parse_vmstat(&t))
                .unwrap_or_default(),
        );
        all
    }

    pub struct ProcCounters {
        names: Vec<String>,
    }

    impl ProcCounters {
        /// Enumerates the available counters; `None` when `/proc` exposes none.
        pub fn open() -> Option<Self> {
            let names: Vec<String> = read().into_iter().map(|(k, _)| k).collect();
            (!names.is_empty()).then_some(Self { names })
        }
    }

    impl CounterSource for ProcCounters {
        fn names(&self) -> &[String] {
            &self.names
        }

        fn read_all(&mut self, out: &mut [Option<u64>]) {
            let current: std::collections::HashMap<String, u64> = read().into_iter().collect();
            for (slot, name) in out.iter_mut().zip(&self.names) {
                *slot = current.get(name).copied();
            }
        }
    }

}
