//! Deterministic synthetic counters.
//!
//! Random kinds draw from xoshiro256** (`rand_xoshiro::Xoshiro256StarStar`)
//! seeded through `seed_from_u64`, which expands the 64-bit seed with
//! SplitMix64. Inside a run the per-counter seed is
//!
//! ```text
//! splitmix64(run_seed ^ fnv1a64(counter_id)) ^ seed
//! ```
//!
//! where `splitmix64(s)` is the first output of SplitMix64 seeded with `s`.
//! Different run seeds therefore give unrelated streams for the same spec.
//!
//! `sparse_event` is an extension: a counter that stays flat and jumps by a
//! random amount in `1..=max_step` with probability `probability` per round.

use std::collections::{HashMap, HashSet};

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256StarStar};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{CounterTrace, TraceRun, DEFAULT_INTERVAL_MS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceKind {
    Constant {
        value: u64,
    },
    Incremental {
        #[serde(default)]
        start: u64,
        step: u64,
    },
    Uniform64 {
        seed: u64,
    },
    SingleRandomBit {
        seed: u64,
    },
    /// Uniform values in `[lo, hi]` until `switch_index`, then `hi` forever.
    OscillateThenFreeze {
        lo: u64,
        hi: u64,
        switch_index: usize,
        seed: u64,
    },
    /// `source × scale + offset` (wrapping), element by element.
    DerivedCopy {
        source: String,
        #[serde(default = "one")]
        scale: u64,
        #[serde(default)]
        offset: u64,
    },
    SparseEvent {
        probability: f64,
        seed: u64,
        #[serde(default = "default_max_step")]
        max_step: u64,
    },
}

fn one() -> u64 {
    1
}

fn default_max_step() -> u64 {
    255
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub id: String,
    pub kind: SourceKind,
    pub length: usize,
}

impl SourceSpec {
    pub fn new(id: impl Into<String>, kind: SourceKind, length: usize) -> Self {
        Self {
            id: id.into(),
            kind,
            length,
        }
    }

    fn seed(&self) -> Option<u64> {
        match self.kind {
            SourceKind::Uniform64 { seed }
            | SourceKind::SingleRandomBit { seed }
            | SourceKind::OscillateThenFreeze { seed, .. }
            | SourceKind::SparseEvent { seed, .. } => Some(seed),
            _ => None,
        }
    }

    fn with_seed(&self, new_seed: u64) -> Self {
        let mut spec = self.clone();
        match &mut spec.kind {
            SourceKind::Uniform64 { seed }
            | SourceKind::SingleRandomBit { seed }
            | SourceKind::OscillateThenFreeze { seed, .. }
            | SourceKind::SparseEvent { seed, .. } => *seed = new_seed,
            _ => {}
        }
        spec
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed used for counter `id` in a run seeded with `run_seed`.
pub fn derive_seed(run_seed: u64, id: &str, seed: u64) -> u64 {
    SplitMix64::seed_from_u64(run_seed ^ fnv1a64(id.as_bytes())).next_u64() ^ seed
}

fn rng(seed: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(seed)
}

/// Generates a standalone trace. `derived_copy` needs its source and is only
/// available through [`generate_run`].
pub fn generate(spec: &SourceSpec) -> Result<CounterTrace> {
    generate_with(spec, &HashMap::new())
}

fn generate_with(spec: &SourceSpec, done: &HashMap<String, CounterTrace>) -> Result<CounterTrace> {
    let n = spec.length;
    if n < 2 {
        return Err(Error::Spec(format!(
            "`{}`: length must be at least 2",
            spec.id
        )));
    }
    let samples: Vec<u64> = match &spec.kind {
        SourceKind::Constant { value } => vec![*value; n],
        SourceKind::Incremental { start, step } => (0..n as u64)
            .map(|i| start.wrapping_add(i.wrapping_mul(*step)))
            .collect(),
        SourceKind::Uniform64 { seed } => {
            let mut r = rng(*seed);
            (0..n).map(|_| r.next_u64()).collect()
        }
        SourceKind::SingleRandomBit { seed } => {
            let mut r = rng(*seed);
            (0..n).map(|_| r.next_u64() >> 63).collect()
        }
        SourceKind::OscillateThenFreeze {
            lo,
            hi,
            switch_index,
            seed,
        } => {
            if lo > hi {
                return Err(Error::Spec(format!("`{}`: lo {lo} > hi {hi}", spec.id)));
            }
            let mut r = rng(*seed);
            (0..n)
                .map(|i| {
                    if i < *switch_index {
                        r.random_range(*lo..=*hi)
                    } else {
                        *hi
                    }
                })
                .collect()
        }
        SourceKind::DerivedCopy {
            source,
            scale,
            offset,
        } => {
            let src = done.get(source).ok_or_else(|| {
                Error::Spec(format!("`{}`: unknown or later source `{source}`", spec.id))
            })?;
            if src.len() != n {
                return Err(Error::Spec(format!(
                    "`{}`: source `{source}` has {} samples, expected {n}",
                    spec.id,
                    src.len()
                )));
            }
            src.samples
                .iter()
                .map(|v| v.wrapping_mul(*scale).wrapping_add(*offset))
                .collect()
        }
        SourceKind::SparseEvent {
            probability,
            seed,
            max_step,
        } => {
            if !(0.0..=1.0).contains(probability) {
                return Err(Error::Spec(format!(
                    "`{}`: probability {probability} outside [0, 1]",
                    spec.id
                )));
            }
            if *max_step == 0 {
                return Err(Error::Spec(format!(
                    "`{}`: max_step must be positive",
                    spec.id
                )));
            }
            let mut r = rng(*seed);
            let mut value = 0u64;
            (0..n)
                .map(|_| {
                    if r.random_bool(*probability) {
                        value = value.wrapping_add(r.random_range(1..=*max_step));
                    }
                    value
                })
                .collect()
        }
    };
    Ok(CounterTrace::new(spec.id.clone(), samples))
}

/// Generates a run. Seeded kinds get per-counter seeds from
/// [`derive_seed`]; `derived_copy` may reference any earlier counter.
pub fn generate_run(run_id: &str, specs: &[SourceSpec], run_seed: u64) -> Result<TraceRun> {
    let mut ids = HashSet::new();
    for s in specs {
        if !ids.insert(s.id.as_str()) {
            return Err(Error::DuplicateCounter(s.id.clone()));
        }
    }
    if let Some(first) = specs.first() {
        if let Some(bad) = specs.iter().find(|s| s.length != first.length) {
            return Err(Error::Spec(format!(
                "`{}` has length {}, expected {}",
                bad.id, bad.length, first.length
            )));
        }
    }
    let mut done: HashMap<String, CounterTrace> = HashMap::new();
    let mut order = Vec::with_capacity(specs.len());
    for spec in specs {
        let spec = match spec.seed() {
            Some(seed) => spec.with_seed(derive_seed(run_seed, &spec.id, seed)),
            None => spec.clone(),
        };
        let trace = generate_with(&spec, &done)?;
        order.push(spec.id.clone());
        done.insert(spec.id.clone(), trace);
    }
    let counters = order
        .into_iter()
        .map(|id| done.remove(&id).expect("generated"))
        .collect();
    TraceRun::new(run_id, counters, None)
}

/// Synth spec file (TOML):
///
/// ```toml
/// run_id = "demo"
/// length = 1000
/// run_seed = 1
/// interval_ms = 20
///
/// [[counter]]
/// id = "noise"
/// kind = "uniform64"
/// seed = 7
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    #[serde(default = "default_run_id")]
    pub run_id: String,
    pub length: usize,
    #[serde(default)]
    pub run_seed: u64,
    #[serde(default = "default_interval")]
    pub interval_ms: u64,
    #[serde(default, rename = "counter")]
    pub counters: Vec<CounterEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterEntry {
    pub id: String,
    #[serde(flatten)]
    pub kind: SourceKind,
}

fn default_run_id() -> String {
    "synthetic".to_owned()
}

fn default_interval() -> u64 {
    DEFAULT_INTERVAL_MS
}

impl SynthFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: SynthFile = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        if file.counters.is_empty() {
            return Err(Error::Spec("no [[counter]] entries".into()));
        }
        Ok(file)
    }

    pub fn specs(&self) -> Vec<SourceSpec> {
        self.counters
            .iter()
            .map(|c| SourceSpec::new(c.id.clone(), c.kind.clone(), self.length))
            .collect()
    }

    pub fn generate(&self) -> Result<TraceRun> {
        Ok(generate_run(&self.run_id, &self.specs(), self.run_seed)?
            .with_interval_ms(self.interval_ms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{shannon_entropy, SymbolDistribution};

    #[test]
    fn splitmix_reference_vector() {
        // Reference output of SplitMix64 seeded with 1234567.
        let mut r = SplitMix64::seed_from_u64(1_234_567);
        assert_eq!(r.next_u64(), 6_457_827_717_110_365_317);
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn simple_kinds() {
        let t = generate(&SourceSpec::new("c", SourceKind::Constant { value: 7 }, 5)).unwrap();
        assert_eq!(t.samples, [7; 5]);
        let t = generate(&SourceSpec::new(
            "i",
            SourceKind::Incremental { start: 0, step: 3 },
            4,
        ))
        .unwrap();
        assert_eq!(t.samples, [0, 3, 6, 9]);
    }

    #[test]
    fn oscillation_then_freeze() {
        let (lo, hi) = (2_527_232, 2_576_384);
        let spec = SourceSpec::new(
            "osc",
            SourceKind::OscillateThenFreeze {
                lo,
                hi,
                switch_index: 1643,
                seed: 4,
            },
            10_000,
        );
        let t = generate(&spec).unwrap();
        assert!(t.samples[..1643].iter().all(|v| (lo..=hi).contains(v)));
        assert!(!t.samples[..1643].windows(2).all(|w| w[0] == w[1]));
        assert!(t.samples[1643..].iter().all(|&v| v == hi));

        let bad = SourceSpec::new(
            "osc",
            SourceKind::OscillateThenFreeze {
                lo: 5,
                hi: 4,
                switch_index: 1,
                seed: 0,
            },
            10,
        );
        assert!(matches!(generate(&bad), Err(Error::Spec(_))));
    }

    #[test]
    fn single_random_bit_is_two_valued() {
        let t = generate(&SourceSpec::new(
            "b",
            SourceKind::SingleRandomBit { seed: 11 },
            100_000,
        ))
        .unwrap();
        assert!(t.samples.iter().all(|&v| v <= 1));
        let ones = t.samples.iter().filter(|&&v| v == 1).count() as u64;
        let d = SymbolDistribution::from_counts(vec![100_000 - ones, ones]).unwrap();
        assert!((shannon_entropy(&d) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SourceSpec::new("u", SourceKind::Uniform64 { seed: 99 }, 1000);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let specs = vec![
            spec,
            SourceSpec::new(
                "s",
                SourceKind::SparseEvent {
                    probability: 0.1,
                    seed: 1,
                    max_step: 255,
                },
                1000,
            ),
        ];
        assert_eq!(
            generate_run("r", &specs, 5).unwrap(),
            generate_run("r", &specs, 5).unwrap()
        );
        assert_ne!(
            generate_run("r", &specs, 5).unwrap(),
            generate_run("r", &specs, 6).unwrap()
        );
    }

    #[test]
    fn derived_copy_scales_source() {
        let specs = vec![
            SourceSpec::new("bytes", SourceKind::Uniform64 { seed: 1 }, 200),
            SourceSpec::new(
                "kbytes",
                SourceKind::DerivedCopy {
                    source: "bytes".into(),
                    scale: 1024,
                    offset: 0,
                },
                200,
            ),
        ];
        let run = generate_run("r", &specs, 0).unwrap();
        let a = &run.counter("bytes").unwrap().samples;
        let b = &run.counter("kbytes").unwrap().samples;
        assert!(a.iter().zip(b).all(|(x, y)| x.wrapping_mul(1024) == *y));
        assert!(matches!(generate(&specs[1]), Err(Error::Spec(_))));
    }

    #[test]
    fn run_validation() {
        let a = SourceSpec::new("a", SourceKind::Constant { value: 1 }, 10);
        let b = SourceSpec::new("b", SourceKind::Constant { value: 1 }, 11);
        assert!(matches!(
            generate_run("r", &[a.clone(), a.clone()], 0),
            Err(Error::DuplicateCounter(_))
        ));
        assert!(matches!(generate_run("r", &[a, b], 0), Err(Error::Spec(_))));
        let short = SourceSpec::new("s", SourceKind::Constant { value: 1 }, 1);
        assert!(generate(&short).is_err());
    }

    #[test]
    fn sparse_event_rate() {
        let spec = SourceSpec::new(
            "s",
            SourceKind::SparseEvent {
                probability: 0.05,
                seed: 3,
                max_step: 255,
            },
            100_001,
        );
        let t = generate(&spec).unwrap();
        let jumps = t.samples.windows(2).filter(|w| w[0] != w[1]).count();
        assert!((4_300..5_700).contains(&jumps), "{jumps}");
    }

    #[test]
    fn parses_spec_file() {
        let text = r#"
run_id = "demo"
length = 50
run_seed = 9

[[counter]]
id = "u"
kind = "uniform64"
seed = 1

[[counter]]
id = "k"
kind = "derived_copy"
source = "u"
scale = 1024

[[counter]]
id = "osc"
kind = "oscillate_then_freeze"
lo = 10
hi = 20
switch_index = 5
seed = 2
"#;
        let file = SynthFile::parse(text).unwrap();
        assert_eq!(file.interval_ms, 20);
        assert_eq!(
            file.counters[1].kind,
            SourceKind::DerivedCopy {
                source: "u".into(),
                scale: 1024,
                offset: 0
            }
        );
        let run = file.generate().unwrap();
        assert_eq!(run.ids(), ["u", "k", "osc"]);
        assert_eq!(run.rounds(), 50);

        assert!(SynthFile::parse("length = 5\n").is_err());
        assert!(
            SynthFile::parse("length = 5\n[[counter]]\nid = \"a\"\nkind = \"bogus\"\n").is_err()
        );
    }
}
