use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_counter-entropy"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn counter-entropy")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_spec(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const THREE: &str = r#"
run_id = "three"
length = 1000
run_seed = 5

[[counter]]
id = "noise"
kind = "uniform64"
seed = 1

[[counter]]
id = "tick"
kind = "incremental"
start = 100
step = 3

[[counter]]
id = "flat"
kind = "constant"
value = 42
"#;

fn many(n: usize, length: usize, run_seed: u64) -> String {
    let mut s = format!("run_id = \"many\"\nlength = {length}\nrun_seed = {run_seed}\n");
    for i in 0..n {
        s.push_str(&format!(
            "\n[[counter]]\nid = \"c{i:02}\"\nkind = \"uniform64\"\nseed = {i}\n"
        ));
    }
    s
}

fn synth(dir: &Path, spec_text: &str, name: &str) -> PathBuf {
    let spec = write_spec(dir, &format!("{name}.toml"), spec_text);
    let out = dir.join(format!("{name}.csv"));
    ok(&["synth", "--spec", p(&spec), "--out", p(&out)]);
    out
}

fn occurrences(path: &Path, needle: &str) -> usize {
    fs::read_to_string(path).unwrap().matches(needle).count()
}

#[test]
fn synth_writes_header_plus_rows() {
    let dir = TempDir::new().unwrap();
    let csv = synth(dir.path(), THREE, "run");
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1001);
    assert_eq!(lines[0], "t_ms,noise,tick,flat");
    assert!(lines[1].ends_with(",100,42"));
}

#[test]
fn synth_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = fs::read(synth(dir.path(), THREE, "a")).unwrap();
    let b = fs::read(synth(dir.path(), THREE, "b")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn synth_rejects_invalid_spec() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(
        dir.path(),
        "bad.toml",
        "length = 10\n[[counter]]\nid = \"x\"\nkind = \"no_such_kind\"\n",
    );
    let out = run(&[
        "synth",
        "--spec",
        p(&spec),
        "--out",
        p(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn assess_constant_counter_reports_zero() {
    let dir = TempDir::new().unwrap();
    let csv = synth(dir.path(), THREE, "run");
    let report = dir.path().join("a.json");
    ok(&["assess", p(&csv), "--json", p(&report)]);
    let text = fs::read_to_string(&report).unwrap();
    for id in ["flat", "tick"] {
        let record = record_of(&text, id);
        assert!(
            record.contains("\"combined_bits_per_bit\": 0.000000"),
            "{record}"
        );
    }
    assert!(!record_of(&text, "noise").contains("\"combined_bits_per_bit\": 0.000000"));
}

/// The slice of a JSON report holding one assessment record.
fn record_of<'a>(text: &'a str, id: &str) -> &'a str {
    let start = text.find(&format!("\"counter_id\": \"{id}\"")).unwrap();
    let rest = &text[start + 1..];
    let end = rest
        .find("\"counter_id\"")
        .map_or(text.len(), |e| start + 1 + e);
    &text[start..end]
}

#[test]
fn assess_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let csv = synth(dir.path(), THREE, "run");
    let a = ok(&["assess", p(&csv)]).stdout;
    let b = ok(&["assess", p(&csv)]).stdout;
    assert_eq!(a, b);
}

#[test]
fn empty_csv_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("empty.csv");
    fs::write(&csv, "").unwrap();
    assert_eq!(run(&["assess", p(&csv)]).status.code(), Some(3));
    fs::write(&csv, "t_ms,a,b\n").unwrap();
    assert_eq!(run(&["assess", p(&csv)]).status.code(), Some(3));
}

#[test]
fn missing_file_is_an_io_error() {
    let out = run(&["assess", "/definitely/not/here.csv"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn bad_flag_is_a_usage_error() {
    assert_eq!(run(&["assess", "--bogus"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let csv = synth(dir.path(), THREE, "run");
    assert_eq!(
        run(&["assess", p(&csv), "--alpha-set", "3"]).status.code(),
        Some(2)
    );
}

#[test]
fn rank_top_19_lists_19_entries() {
    let dir = TempDir::new().unwrap();
    let csv = synth(dir.path(), &many(25, 400, 3), "many");
    let report = dir.path().join("r.json");
    ok(&["rank", p(&csv), "--top", "19", "--json", p(&report)]);
    assert_eq!(occurrences(&report, "\"rank\":"), 19);
}

#[test]
fn mi_matrix_is_square_over_selected_counters() {
    let dir = TempDir::new().unwrap();
    let csv = synth(dir.path(), &many(21, 600, 4), "many");
    let matrix = dir.path().join("mi.csv");
    let report = dir.path().join("mi.json");
    let out = ok(&[
        "mi",
        p(&csv),
        "--top",
        "19",
        "--matrix",
        p(&matrix),
        "--json",
        p(&report),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let text = fs::read_to_string(&matrix).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.split(',').count() == 20));
    for (i, row) in rows[1..].iter().enumerate() {
        let diag = row.split(',').nth(i + 1).unwrap();
        assert_ne!(diag, "0.000000", "diagonal holds each stream's entropy");
    }
    assert_eq!(occurrences(&report, "\"selected\""), 1);
}

#[test]
fn robust_requires_exactly_three_runs() {
    let dir = TempDir::new().unwrap();
    let csv = synth(dir.path(), THREE, "run");
    let out = run(&["robust", p(&csv), p(&csv)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly 3 runs required"));
}

#[test]
fn robust_classifies_three_runs() {
    let dir = TempDir::new().unwrap();
    let runs: Vec<PathBuf> = (0..3)
        .map(|i| synth(dir.path(), &many(2, 4000, 10 + i), &format!("r{i}")))
        .collect();
    let report = dir.path().join("rob.json");
    ok(&[
        "robust",
        p(&runs[0]),
        p(&runs[1]),
        p(&runs[2]),
        "--window",
        "800",
        "--step",
        "100",
        "--json",
        p(&report),
    ]);
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(occurrences(&report, "\"classification\""), 2);
    assert!(text.contains("\"window_nibbles\": 800"));
}

#[test]
fn budget_reports_bits_per_second() {
    let dir = TempDir::new().unwrap();
    let csv = synth(dir.path(), THREE, "run");
    let report = dir.path().join("b.json");
    ok(&[
        "budget",
        p(&csv),
        "--counters",
        "noise,flat",
        "--collect-ms",
        "5",
        "--json",
        p(&report),
    ]);
    let text = fs::read_to_string(&report).unwrap();
    // alpha 1 yields one byte per 8 rounds of 25 ms
    assert!(text.contains("\"cycle_ms\": 200.000000"), "{text}");
    assert_eq!(
        run(&["budget", p(&csv), "--counters", "nope", "--collect-ms", "5"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn plot_draws_one_marker_per_counter() {
    let dir = TempDir::new().unwrap();
    let csv = synth(dir.path(), THREE, "run");
    let report = dir.path().join("a.json");
    let svg = dir.path().join("a.svg");
    ok(&["assess", p(&csv), "--json", p(&report)]);
    ok(&["plot", p(&report), "--out", p(&svg)]);
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("class=\"marker\"").count(), 3);
}

#[test]
fn plot_rejects_non_report_json() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"hello\": 1}").unwrap();
    let out = run(&["plot", p(&bad), "--out", p(&dir.path().join("x.svg"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eliminate_stages_constant_counters() {
    let dir = TempDir::new().unwrap();
    let short = synth(
        dir.path(),
        &THREE.replace("length = 1000", "length = 200"),
        "short",
    );
    let long = synth(dir.path(), THREE, "long");
    let report = dir.path().join("e.json");
    ok(&[
        "eliminate",
        "--short",
        p(&short),
        "--long",
        p(&long),
        "--json",
        p(&report),
    ]);
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("\"noise\""));
    assert!(text.contains("constant_short_run"));
    assert!(text.contains("constant_delta"));
}

#[cfg(target_os = "linux")]
#[test]
fn sample_three_rounds_writes_four_lines() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("host.csv");
    let out = run(&[
        "sample",
        "--interval-ms",
        "1",
        "--rounds",
        "3",
        "--out",
        p(&csv),
    ]);
    if out.status.code() == Some(5) {
        // no /proc in this environment
        return;
    }
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("t_ms,"));
    let meta = fs::read_to_string(dir.path().join("host.csv.meta")).unwrap();
    assert!(meta.contains("rounds=3\n"));
    assert!(meta.contains("collect_ms_mean="));
}
