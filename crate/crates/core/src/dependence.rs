//! Mutual-information analysis over nibble streams.
//!
//! `I(X;Y) = H₁(X) + H₁(Y) − H₁(X,Y)` with plug-in estimates; the joint
//! histogram has 256 cells. Normalized values divide by 4, the maximum for
//! nibble symbols.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::diag::Diagnostic;
use crate::entropy::entropy_of_counts;
use crate::error::{Error, Result};
use crate::preprocess::{SymbolStream, SymbolWidth};

pub const NIBBLE_BITS: f64 = 4.0;
pub const DEFAULT_MI_THRESHOLD: f64 = 0.10;
pub const DEFAULT_WINDOW: usize = 1400;
pub const DEFAULT_STEP: usize = 100;
pub const DEFAULT_ROBUST_THRESHOLD: f64 = 0.021;
const JOINT_CELLS: usize = 256;

/// Mutual information with its clamping flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    pub bits: f64,
    /// Set when a slightly negative raw value was clamped to 0.
    pub clamped: bool,
}

impl MiEstimate {
    pub fn normalized(self) -> f64 {
        self.bits / NIBBLE_BITS
    }
}

fn check_nibbles(s: &SymbolStream) -> Result<()> {
    if s.symbol_width != SymbolWidth::Nibble {
        return Err(Error::InvalidWidth {
            alpha: s.alpha.bits(),
            symbol_width: s.symbol_width.bits(),
        });
    }
    Ok(())
}

/// Plug-in MI of two aligned nibble sequences.
pub fn mi_of_symbols(x: &[u8], y: &[u8]) -> Result<MiEstimate> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(Error::EmptyStream);
    }
    let mut cx = [0u64; 16];
    let mut cy = [0u64; 16];
    let mut cxy = [0u64; JOINT_CELLS];
    for (&a, &b) in x.iter().zip(y) {
        cx[a as usize] += 1;
        cy[b as usize] += 1;
        cxy[((a as usize) << 4) | b as usize] += 1;
    }
    let n = x.len() as u64;
    let hx = entropy_of_counts(&cx, n);
    let hy = entropy_of_counts(&cy, n);
    let hxy = entropy_of_counts(&cxy, n);
    let raw = hx + hy - hxy;
    Ok(if raw < 0.0 {
        MiEstimate {
            bits: 0.0,
            clamped: true,
        }
    } else {
        MiEstimate {
            bits: raw.min(NIBBLE_BITS),
            clamped: false,
        }
    })
}

/// Mutual information in bits between two nibble streams.
pub fn mutual_information(x: &SymbolStream, y: &SymbolStream) -> Result<f64> {
    check_nibbles(x)?;
    check_nibbles(y)?;
    Ok(mi_of_symbols(&x.symbols, &y.symbols)?.bits)
}

/// Shannon entropy of a nibble sequence in bits.
pub fn nibble_entropy(symbols: &[u8]) -> f64 {
    let mut c = [0u64; 16];
    for &s in symbols {
        c[s as usize] += 1;
    }
    entropy_of_counts(&c, symbols.len() as u64)
}

/// Symmetric matrix of normalized MI. The diagonal holds H₁/4.
#[derive(Debug, Clone, PartialEq)]
pub struct MiMatrix {
    pub counter_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl MiMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.counter_ids.iter().position(|c| c == id)
    }

    pub fn len(&self) -> usize {
        self.counter_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counter_ids.is_empty()
    }

    /// Square CSV: header row and first column carry the counter ids,
    /// values use 6 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("counter");
        for id in &self.counter_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (id, row) in self.counter_ids.iter().zip(&self.values) {
            out.push_str(id);
            for v in row {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the normalized MI matrix. Pairs are evaluated in parallel and
/// merged in fixed `(i, j)` order.
pub fn build_mi_matrix(streams: &[(String, SymbolStream)]) -> Result<(MiMatrix, Vec<Diagnostic>)> {
    let k = streams.len();
    for (_, s) in streams {
        check_nibbles(s)?;
    }
    if let Some((_, first)) = streams.first() {
        for (_, s) in &streams[1..] {
            if s.len() != first.len() {
                return Err(Error::LengthMismatch(first.len(), s.len()));
            }
        }
    }
    let mut diags = Vec::new();
    if let Some((_, first)) = streams.first() {
        let recommended = 10 * JOINT_CELLS;
        if first.len() < recommended {
            diags.push(Diagnostic::SparseJointHistogram {
                len: first.len(),
                recommended,
            });
        }
    }

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect();
    let estimates: Vec<MiEstimate> = pairs
        .par_iter()
        .map(|&(i, j)| mi_of_symbols(&streams[i].1.symbols, &streams[j].1.symbols))
        .collect::<Result<_>>()?;

    let mut values = vec![vec![0.0; k]; k];
    for (i, (_, s)) in streams.iter().enumerate() {
        values[i][i] = nibble_entropy(&s.symbols) / NIBBLE_BITS;
    }
    let mut clamped = 0;
    for (&(i, j), e) in pairs.iter().zip(&estimates) {
        clamped += usize::from(e.clamped);
        values[i][j] = e.normalized();
        values[j][i] = e.normalized();
    }
    if clamped > 0 {
        diags.push(Diagnostic::NegativeMiClamped { count: clamped });
    }
    let counter_ids = streams.iter().map(|(id, _)| id.clone()).collect();
    Ok((
        MiMatrix {
            counter_ids,
            values,
        },
        diags,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependencyReport {
    pub matrix: MiMatrix,
    pub threshold: f64,
    /// Connected components of the over-threshold graph, each sorted by
    /// matrix order; groups ordered by their first member.
    pub groups: Vec<Vec<String>>,
    /// One id per group, in group order.
    pub representatives: Vec<String>,
}

impl DependencyReport {
    pub fn dependent_groups(&self) -> impl Iterator<Item = &Vec<String>> {
        self.groups.iter().filter(|g| g.len() > 1)
    }

    /// Ids of counters that are not grouped with any other counter.
    pub fn singletons(&self) -> impl Iterator<Item = &String> {
        self.groups.iter().filter(|g| g.len() == 1).map(|g| &g[0])
    }
}

/// Groups counters whose normalized MI reaches `threshold` and picks the
/// member with the highest combined metric as each group's representative
/// (ties go to the lexicographically smallest id).
pub fn dependency_groups(
    matrix: MiMatrix,
    threshold: f64,
    metrics: &BTreeMap<String, f64>,
) -> Result<DependencyReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "MI threshold {threshold} outside (0, 1)"
        )));
    }
    let k = matrix.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..k {
        for j in i + 1..k {
            if matrix.get(i, j) >= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..k {
        let r = find(&mut parent, i);
        by_root.entry(r).or_default().push(i);
    }

    let mut groups = Vec::with_capacity(by_root.len());
    let mut representatives = Vec::with_capacity(by_root.len());
    for members in by_root.into_values() {
        let ids: Vec<String> = members
            .iter()
            .map(|&i| matrix.counter_ids[i].clone())
            .collect();
        let rep = if ids.len() == 1 {
            ids[0].clone()
        } else {
            let mut best: Option<(&String, f64)> = None;
            for id in &ids {
                let m = *metrics
                    .get(id)
                    .ok_or_else(|| Error::MissingMetric(id.clone()))?;
                best = match best {
                    Some((bid, bm)) if bm > m || (bm == m && bid < id) => Some((bid, bm)),
                    _ => Some((id, m)),
                };
            }
            best.expect("non-empty group").0.clone()
        };
        representatives.push(rep);
        groups.push(ids);
    }
    Ok(DependencyReport {
        matrix,
        threshold,
        groups,
        representatives,
    })
}

/// Normalized MI of aligned windows starting at 0, step, 2·step, … up to the
/// last full window.
pub fn sliding_mi(
    run_a: &SymbolStream,
    run_b: &SymbolStream,
    window_len: usize,
    step: usize,
) -> Result<Vec<f64>> {
    check_nibbles(run_a)?;
    check_nibbles(run_b)?;
    Ok(sliding_mi_symbols(&run_a.symbols, &run_b.symbols, window_len, step)?.0)
}

fn sliding_mi_symbols(
    a: &[u8],
    b: &[u8],
    window_len: usize,
    step: usize,
) -> Result<(Vec<f64>, usize)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if window_len == 0 || step == 0 {
        return Err(Error::InvalidParameter(
            "window length and step must be positive".into(),
        ));
    }
    if window_len > a.len() {
        return Err(Error::WindowTooLong {
            window: window_len,
            len: a.len(),
        });
    }
    let mut clamped = 0;
    let series = (0..=a.len() - window_len)
        .step_by(step)
        .map(|start| {
            let end = start + window_len;
            let e = mi_of_symbols(&a[start..end], &b[start..end])?;
            clamped += usize::from(e.clamped);
            Ok(e.normalized())
        })
        .collect::<Result<_>>()?;
    Ok((series, clamped))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobustnessClass {
    Upper,
    Lower,
}

impl RobustnessClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RobustnessClass::Upper => "upper",
            RobustnessClass::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessSeries {
    pub counter_id: String,
    pub window_len: usize,
    pub step: usize,
    pub threshold: f64,
    /// Run pairs (0,1), (0,2), (1,2).
    pub per_pair_series: [Vec<f64>; 3],
    /// Window-averaged normalized MI per pair.
    pub pair_means: [f64; 3],
    pub min_series: Vec<f64>,
    pub avg_series: Vec<f64>,
    pub max_series: Vec<f64>,
    pub classification: RobustnessClass,
    /// All three runs were identical.
    pub degenerate: bool,
}

pub const RUN_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Cross-run windowed MI for one counter observed in three runs. The counter
/// is `Upper` when every pair's window-averaged normalized MI reaches
/// `threshold`, otherwise `Lower`.
pub fn classify_robustness(
    counter_id: &str,
    runs: &[SymbolStream],
    window_len: usize,
    step: usize,
    threshold: f64,
) -> Result<(RobustnessSeries, Vec<Diagnostic>)> {
    if runs.len() != 3 {
        return Err(Error::RunCount(runs.len()));
    }
    for r in runs {
        check_nibbles(r)?;
    }
    let mut diags = Vec::new();
    let mut clamped = 0;
    let mut per_pair: Vec<Vec<f64>> = Vec::with_capacity(3);
    for (i, j) in RUN_PAIRS {
        let (s, c) = sliding_mi_symbols(&runs[i].symbols, &runs[j].symbols, window_len, step)?;
        clamped += c;
        per_pair.push(s);
    }
    if clamped > 0 {
        diags.push(Diagnostic::NegativeMiClamped { count: clamped });
    }
    let per_pair_series: [Vec<f64>; 3] = per_pair.try_into().expect("three pairs");
    let n = per_pair_series[0].len();
    let mut min_series = Vec::with_capacity(n);
    let mut avg_series = Vec::with_capacity(n);
    let mut max_series = Vec::with_capacity(n);
    #[allow(clippy::needless_range_loop)]
    for t in 0..n {
        let v = [
            per_pair_series[0][t],
            per_pair_series[1][t],
            per_pair_series[2][t],
        ];
        let lo = v[0].min(v[1]).min(v[2]);
        let hi = v[0].max(v[1]).max(v[2]);
        min_series.push(lo);
        avg_series.push(((v[0] + v[1] + v[2]) / 3.0).clamp(lo, hi));
        max_series.push(hi);
    }
    let pair_means = per_pair_series
        .each_ref()
        .map(|s| s.iter().sum::<f64>() / s.len() as f64);
    let classification = if pair_means.iter().all(|&m| m >= threshold) {
        RobustnessClass::Upper
    } else {
        RobustnessClass::Lower
    };
    let degenerate = runs[0].symbols == runs[1].symbols && runs[1].symbols == runs[2].symbols;
    if degenerate {
        diags.push(Diagnostic::DegenerateCorrelation {
            counter_id: counter_id.to_owned(),
        });
    }
    Ok((
        RobustnessSeries {
            counter_id: counter_id.to_owned(),
            window_len,
            step,
            threshold,
            per_pair_series,
            pair_means,
            min_series,
            avg_series,
            max_series,
            classification,
            degenerate,
        },
        diags,
    ))
}
