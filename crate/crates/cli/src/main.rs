use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use counter_entropy::dependence::{
    build_mi_matrix, classify_robustness, dependency_groups, DEFAULT_MI_THRESHOLD,
    DEFAULT_ROBUST_THRESHOLD, DEFAULT_STEP, DEFAULT_WINDOW,
};
use counter_entropy::entropy::EntropyAssessment;
use counter_entropy::pipeline::{
    assess_run, budget, eliminate, rank, select_final, DEFAULT_SLEEP_MS, DEFAULT_TOP,
};
use counter_entropy::plot::{scatter_svg, ScatterPoint};
use counter_entropy::preprocess::{preprocess_counter, to_nibbles, PIPELINE_ALPHAS};
use counter_entropy::report::{AssessmentReportFile, DependencySection, RobustnessRecord, RunInfo};
use counter_entropy::synth::SynthFile;
use counter_entropy::trace::{parse_wide_csv, write_wide_csv};
use counter_entropy::{Alpha, CounterTrace, Diagnostic, SymbolStream, TraceRun};

mod sampler;

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  2  usage error (bad flags or arguments)
  3  input contract violation (malformed CSV, spec or report; invalid data)
  4  I/O failure
  5  unsupported platform (sample)";

#[derive(Parser)]
#[command(name = "counter-entropy", version, about = "Entropy assessment of system counter traces", after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic run from a TOML spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-counter Shannon and min-entropy assessment.
    Assess {
        input: PathBuf,
        /// Fold widths to evaluate in addition to 1,2,4,8 (16 and 32 allowed).
        #[arg(
            long = "alpha-set",
            alias = "alphas",
            value_delimiter = ',',
            default_value = "1,2,4,8"
        )]
        alphas: Vec<u32>,
        #[command(flatten)]
        out: JsonOut,
    },
    /// Staged elimination of constant counters.
    Eliminate {
        #[arg(long)]
        short: PathBuf,
        #[arg(long)]
        long: PathBuf,
        #[arg(
            long = "alpha-set",
            alias = "alphas",
            value_delimiter = ',',
            default_value = "1,2,4,8"
        )]
        alphas: Vec<u32>,
        #[command(flatten)]
        out: JsonOut,
    },
    /// Rank counters by combined per-bit entropy.
    Rank {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOP)]
        top: usize,
        #[command(flatten)]
        out: JsonOut,
    },
    /// Pairwise mutual information, dependency groups and final selection.
    Mi {
        input: PathBuf,
        /// Restrict to the top-ranked counters.
        #[arg(long)]
        top: Option<usize>,
        #[arg(long, default_value = "1")]
        alpha: u32,
        #[arg(long, default_value_t = DEFAULT_MI_THRESHOLD)]
        mi_threshold: f64,
        /// Matrix CSV destination (stdout when omitted).
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Also write the JSON report with groups and selection.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Cross-run robustness over three runs of the same counters.
    Robust {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: usize,
        #[arg(long, default_value_t = DEFAULT_ROBUST_THRESHOLD)]
        robust_threshold: f64,
        #[arg(long, default_value = "1")]
        alpha: u32,
        /// Counters to analyse (default: all).
        #[arg(long, value_delimiter = ',')]
        counters: Vec<String>,
        #[command(flatten)]
        out: JsonOut,
    },
    /// Entropy gathered per byte-producing sampling cycle.
    Budget {
        input: PathBuf,
        /// Counters to include (default: all).
        #[arg(long, value_delimiter = ',')]
        counters: Vec<String>,
        #[arg(long, default_value = "1")]
        alpha: u32,
        #[arg(long, default_value_t = DEFAULT_SLEEP_MS)]
        sleep_ms: f64,
        /// Time spent reading all counters in one round.
        #[arg(long)]
        collect_ms: f64,
        #[command(flatten)]
        out: JsonOut,
    },
    /// SVG scatter of per-bit H1 against Hinf from a JSON report.
    Plot {
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample host counters into a wide CSV (Linux /proc only).
    Sample {
        #[arg(long, default_value_t = 20)]
        interval_ms: u64,
        #[arg(long)]
        rounds: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct JsonOut {
    /// JSON report destination (stdout when omitted).
    #[arg(long)]
    json: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Input(String),
    Io(String),
    Unsupported(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
            Failure::Io(_) => 4,
            Failure::Unsupported(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Io(m) | Failure::Unsupported(m) => m,
        }
    }
}

impl From<counter_entropy::Error> for Failure {
    fn from(e: counter_entropy::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Synth { spec, out } => cmd_synth(&spec, &out),
        Command::Assess { input, alphas, out } => cmd_assess(&input, &alphas, &out),
        Command::Eliminate {
            short,
            long,
            alphas,
            out,
        } => cmd_eliminate(&short, &long, &alphas, &out),
        Command::Rank { input, top, out } => cmd_rank(&input, top, &out),
        Command::Mi {
            input,
            top,
            alpha,
            mi_threshold,
            matrix,
            json,
        } => cmd_mi(
            &input,
            top,
            alpha,
            mi_threshold,
            matrix.as_deref(),
            json.as_deref(),
        ),
        Command::Robust {
            runs,
            window,
            step,
            robust_threshold,
            alpha,
            counters,
            out,
        } => cmd_robust(
            &runs,
            window,
            step,
            robust_threshold,
            alpha,
            &counters,
            &out,
        ),
        Command::Budget {
            input,
            counters,
            alpha,
            sleep_ms,
            collect_ms,
            out,
        } => cmd_budget(&input, &counters, alpha, sleep_ms, collect_ms, &out),
        Command::Plot { report, out } => cmd_plot(&report, &out),
        Command::Sample {
            interval_ms,
            rounds,
            out,
        } => cmd_sample(interval_ms, rounds, &out),
    }
}

fn warn(diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("warning: {d}");
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn load_run(path: &Path) -> Result<TraceRun, Failure> {
    let bytes = read_bytes(path)?;
    let run_id = path
        .file_stem()
        .map_or_else(|| "run".to_owned(), |s| s.to_string_lossy().into_owned());
    let (run, diags) = parse_wide_csv(&bytes, &run_id)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    warn(&diags);
    if run.rounds() == 0 {
        return Err(Failure::Input(format!("{}: no samples", path.display())));
    }
    Ok(run)
}

fn parse_alphas(values: &[u32]) -> Result<Vec<Alpha>, Failure> {
    values
        .iter()
        .map(|&a| Alpha::new(a).map_err(|e| Failure::Usage(e.to_string())))
        .collect()
}

fn pipeline_alpha(bits: u32) -> Result<Alpha, Failure> {
    PIPELINE_ALPHAS
        .iter()
        .copied()
        .find(|a| a.bits() == bits)
        .ok_or_else(|| Failure::Usage(format!("--alpha must be 1, 2, 4 or 8, got {bits}")))
}

fn assess(run: &TraceRun, extra: &[Alpha]) -> Result<Vec<EntropyAssessment>, Failure> {
    let assessments = assess_run(run, extra)?;
    for c in run.counters() {
        if let Ok(d) = counter_entropy::preprocess::delta(c) {
            if d.overflow_count > 0 {
                warn(&[Diagnostic::DeltaOverflow {
                    counter_id: c.counter_id.clone(),
                    count: d.overflow_count,
                }]);
            }
        }
    }
    Ok(assessments)
}

fn emit(report: &AssessmentReportFile, out: &JsonOut) -> CmdResult {
    write_output(out.json.as_deref(), report.to_json()?.as_bytes())
}

fn cmd_synth(spec: &Path, out: &Path) -> CmdResult {
    let text = String::from_utf8(read_bytes(spec)?)
        .map_err(|_| Failure::Input(format!("{}: not UTF-8", spec.display())))?;
    let file = SynthFile::parse(&text)?;
    let run = file.generate()?;
    write_output(Some(out), &write_wide_csv(&run)?)
}

fn cmd_assess(input: &Path, alphas: &[u32], out: &JsonOut) -> CmdResult {
    let extra = parse_alphas(alphas)?;
    let run = load_run(input)?;
    let assessments = assess(&run, &extra)?;
    emit(
        &AssessmentReportFile::new(RunInfo::of(&run), &assessments),
        out,
    )
}

fn cmd_eliminate(short: &Path, long: &Path, alphas: &[u32], out: &JsonOut) -> CmdResult {
    let alphas = parse_alphas(alphas)?;
    let run_short = load_run(short)?;
    let run_long = load_run(long)?;
    let elim = eliminate(&run_short, &run_long, &alphas)?;
    let mut report = AssessmentReportFile::new(RunInfo::of(&run_long), &[]);
    report.elimination = Some((&elim).into());
    emit(&report, out)
}

fn cmd_rank(input: &Path, top: usize, out: &JsonOut) -> CmdResult {
    let run = load_run(input)?;
    let assessments = assess(&run, &[])?;
    let (ranking, diags) = rank(&assessments, top)?;
    warn(&diags);
    let mut report = AssessmentReportFile::new(RunInfo::of(&run), &assessments);
    report.ranking = Some((&ranking).into());
    emit(&report, out)
}

fn nibbles_of(trace: &CounterTrace, alpha: Alpha) -> Result<SymbolStream, Failure> {
    Ok(to_nibbles(&preprocess_counter(trace, alpha)?)?)
}

fn cmd_mi(
    input: &Path,
    top: Option<usize>,
    alpha: u32,
    threshold: f64,
    matrix_out: Option<&Path>,
    json_out: Option<&Path>,
) -> CmdResult {
    let alpha = pipeline_alpha(alpha)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Failure::Usage("--mi-threshold must lie in (0, 1)".into()));
    }
    let run = load_run(input)?;
    let assessments = assess(&run, &[])?;
    let (ranking, diags) = rank(&assessments, top.unwrap_or(assessments.len()).max(1))?;
    warn(&diags);
    // Matrix order follows the input file; the selection follows the ranking.
    let chosen: std::collections::BTreeSet<&str> = ranking.ids().into_iter().collect();
    let streams = run
        .counters()
        .iter()
        .filter(|c| chosen.contains(c.counter_id.as_str()))
        .map(|c| Ok((c.counter_id.clone(), nibbles_of(c, alpha)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let (matrix, diags) = build_mi_matrix(&streams)?;
    warn(&diags);
    write_output(matrix_out, matrix.to_csv().as_bytes())?;

    if let Some(path) = json_out {
        let metrics: BTreeMap<String, f64> = assessments
            .iter()
            .map(|a| (a.counter_id.clone(), a.combined_per_bit))
            .collect();
        let dep = dependency_groups(matrix, threshold, &metrics)?;
        let selected = select_final(&ranking, &dep)?;
        let kept: Vec<EntropyAssessment> = assessments
            .into_iter()
            .filter(|a| chosen.contains(a.counter_id.as_str()))
            .collect();
        let mut report = AssessmentReportFile::new(RunInfo::of(&run), &kept);
        report.ranking = Some((&ranking).into());
        report.dependency = Some(DependencySection::new(&dep, alpha.bits(), selected));
        write_output(Some(path), report.to_json()?.as_bytes())?;
    }
    Ok(())
}

fn cmd_robust(
    paths: &[PathBuf],
    window: usize,
    step: usize,
    threshold: f64,
    alpha: u32,
    counters: &[String],
    out: &JsonOut,
) -> CmdResult {
    if paths.len() != 3 {
        return Err(Failure::Usage(format!(
            "exactly 3 runs required, got {}",
            paths.len()
        )));
    }
    let alpha = pipeline_alpha(alpha)?;
    let runs = paths
        .iter()
        .map(|p| load_run(p))
        .collect::<Result<Vec<_>, _>>()?;
    let ids: Vec<String> = if counters.is_empty() {
        runs[0].ids().into_iter().map(str::to_owned).collect()
    } else {
        counters.to_vec()
    };
    let mut records = Vec::with_capacity(ids.len());
    for id in &ids {
        let streams = runs
            .iter()
            .map(|r| {
                let trace = r.counter(id).ok_or_else(|| {
                    Failure::Input(format!("counter `{id}` missing from run `{}`", r.run_id))
                })?;
                nibbles_of(trace, alpha)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (series, diags) = classify_robustness(id, &streams, window, step, threshold)?;
        warn(&diags);
        records.push(RobustnessRecord::from(&series));
    }
    let mut report = AssessmentReportFile::new(RunInfo::of(&runs[0]), &[]);
    report.robustness = Some(records);
    emit(&report, out)
}

fn cmd_budget(
    input: &Path,
    counters: &[String],
    alpha: u32,
    sleep_ms: f64,
    collect_ms: f64,
    out: &JsonOut,
) -> CmdResult {
    let alpha = pipeline_alpha(alpha)?;
    let run = load_run(input)?;
    let mut assessments = assess(&run, &[])?;
    if !counters.is_empty() {
        for id in counters {
            if run.counter(id).is_none() {
                return Err(Failure::Input(format!("unknown counter `{id}`")));
            }
        }
        assessments.retain(|a| counters.contains(&a.counter_id));
    }
    let b = budget(&assessments, alpha, sleep_ms, collect_ms)?;
    let mut report = AssessmentReportFile::new(RunInfo::of(&run), &assessments);
    report.budget = Some((&b).into());
    emit(&report, out)
}

fn cmd_plot(report: &Path, out: &Path) -> CmdResult {
    let text = String::from_utf8(read_bytes(report)?)
        .map_err(|_| Failure::Input(format!("{}: not UTF-8", report.display())))?;
    let report_file = AssessmentReportFile::from_json(&text)?;
    let points: Vec<ScatterPoint> = report_file
        .assessments
        .iter()
        .map(|a| ScatterPoint {
            label: a.counter_id.clone(),
            h1_per_bit: a.h1_bits_per_bit.value(),
            hinf_per_bit: a.hinf_bits_per_bit.value(),
        })
        .collect();
    let title = format!("{}: {} counters", report_file.run.run_id, points.len());
    write_output(Some(out), scatter_svg(&points, &title).as_bytes())
}

#[cfg(target_os = "linux")]
fn cmd_sample(interval_ms: u64, rounds: usize, out: &Path) -> CmdResult {
    if rounds == 0 {
        return Err(Failure::Usage("--rounds must be positive".into()));
    }
    let Some(mut source) = sampler::HostCounters::open() else {
        return Err(Failure::Unsupported(
            "unsupported platform: no enumerable counters under /proc".into(),
        ));
    };
    use sampler::CounterSource;
    let names = source.names().to_vec();
    let (timestamps, columns, stats) =
        sampler::sample(&mut source, rounds, Duration::from_millis(interval_ms));
    let counters = names
        .into_iter()
        .zip(columns)
        .map(|(n, s)| CounterTrace::new(n, s))
        .collect();
    let run = TraceRun::new("sample", counters, Some(timestamps))?.with_interval_ms(interval_ms);
    write_output(Some(out), &write_wide_csv(&run)?)?;

    let meta = format!(
        "rounds={rounds}\ninterval_ms={interval_ms}\ncollect_ms_mean={:.6}\ncollect_ms_max={:.6}\nread_failures={}\n",
        stats.mean_collect_ms(),
        stats.max_collect_ms(),
        stats.read_failures
    );
    let mut meta_path = out.as_os_str().to_owned();
    meta_path.push(".meta");
    write_output(Some(Path::new(&meta_path)), meta.as_bytes())?;
    eprintln!(
        "sampled {} counters x {rounds} rounds; mean collection {:.3} ms; {} failed reads",
        run.counters().len(),
        stats.mean_collect_ms(),
        stats.read_failures
    );
    Ok(())
}

#[cfg(not(target_os = "linux"))]
fn cmd_sample(_interval_ms: u64, _rounds: usize, _out: &Path) -> CmdResult {
    Err(Failure::Unsupported(
        "unsupported platform: counter sampling is only implemented for Linux".into(),
    ))
}
