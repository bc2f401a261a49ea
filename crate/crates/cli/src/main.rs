//! Benchmark CLI for stream deduplication filters.
//!
//! Subcommands: `plan` sizes a filter bank from a memory budget, `gen`
//! writes synthetic streams, `run` replays a stream through one filter and
//! reports windowed accuracy as CSV, `predict` prints the closed-form
//! error bounds, and `compare` sweeps all three filters across a memory
//! grid. Exit codes: 0 on success, 2 on validation errors, 3 on I/O
//! errors.

mod report;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rsbf_core::baselines::{ClassicBloom, SbfBank};
use rsbf_core::harness::{
    evaluate, expected_distinct_fraction, open_binary, open_lines, solve_universe, ElementSource,
    GeneratedStream, MetricsWindow, StreamSpec, Universe,
};
use rsbf_core::hashing::HASH_FAMILY;
use rsbf_core::rsbf::{plan, plan_low_fpr, FilterBank};
use rsbf_core::theory;
use rsbf_core::DedupFilter;

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "rsbf",
    version,
    about = "Stream deduplication filters and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Size a filter bank from a memory budget and target FPR.
    Plan {
        #[arg(long)]
        memory_bits: u64,
        /// Target false positive rate threshold.
        #[arg(long)]
        fpr: f64,
        #[arg(long, default_value_t = 0.03)]
        p_star: f64,
    },
    /// Generate a binary stream file of 8-byte records plus a sidecar
    /// describing it.
    Gen {
        #[arg(long)]
        length: u64,
        /// Desired distinct fraction; 1.0 means every record is unique.
        #[arg(long, conflicts_with = "universe")]
        distinct: Option<f64>,
        /// Universe size to draw from, as an alternative to --distinct.
        #[arg(long)]
        universe: Option<u64>,
        #[arg(long, env = "RSBF_SEED", default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a stream through one filter and write a windowed CSV report.
    Run {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        memory_bits: u64,
        #[arg(long)]
        fpr: f64,
        #[arg(long, default_value_t = 0.03)]
        p_star: f64,
        #[arg(long, env = "RSBF_SEED", default_value_t = 42)]
        seed: u64,
        /// Records per metrics window.
        #[arg(long, default_value_t = 1000)]
        window: u64,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        tuning: TuningArgs,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the closed-form FPR/FNR bounds for a layout.
    Predict {
        /// Stream length m.
        #[arg(long)]
        stream_length: u64,
        /// Bits per filter s.
        #[arg(long)]
        filter_bits: u64,
        /// Filter count k.
        #[arg(long)]
        num_filters: u32,
        /// Universe size U.
        #[arg(long)]
        universe: u64,
    },
    /// Run rsbf, sbf and bloom over a memory grid on one input.
    Compare {
        /// Comma-separated list of memory budgets in bits.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        memory_bits: Vec<u64>,
        #[arg(long)]
        fpr: f64,
        #[arg(long, default_value_t = 0.03)]
        p_star: f64,
        #[arg(long, env = "RSBF_SEED", default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        window: u64,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        tuning: TuningArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Rsbf,
    Bloom,
    Sbf,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Rsbf => "rsbf",
            Algo::Bloom => "bloom",
            Algo::Sbf => "sbf",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    /// Consecutive 8-byte records.
    Binary,
    /// Newline-delimited records.
    Lines,
}

#[derive(Args)]
struct InputArgs {
    /// Stream file to replay.
    #[arg(
        long,
        required_unless_present = "gen_length",
        conflicts_with = "gen_length"
    )]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = InputFormat::Binary)]
    input_format: InputFormat,
    /// Generate the stream on the fly instead of reading a file.
    #[arg(long)]
    gen_length: Option<u64>,
    /// Distinct fraction for the generated stream.
    #[arg(long, conflicts_with = "gen_universe", requires = "gen_length")]
    gen_distinct: Option<f64>,
    /// Universe size for the generated stream.
    #[arg(long, requires = "gen_length")]
    gen_universe: Option<u64>,
}

/// Baseline-filter knobs; every constant lands in the report header.
#[derive(Args)]
struct TuningArgs {
    /// Hash count for the classic Bloom baseline (default: the planned k).
    #[arg(long)]
    bloom_k: Option<u32>,
    /// Hash count for the SBF baseline (default: the planned k).
    #[arg(long)]
    sbf_k: Option<u32>,
    /// Bits per SBF counter cell.
    #[arg(long, default_value_t = 3)]
    sbf_counter_bits: u8,
    /// Cells decremented per element (default: k * Max, balancing the
    /// counter mass each element writes).
    #[arg(long)]
    sbf_decrements: Option<u64>,
}

enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<rsbf_core::rsbf::PlanError> for CliError {
    fn from(e: rsbf_core::rsbf::PlanError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<rsbf_core::harness::HarnessError> for CliError {
    fn from(e: rsbf_core::harness::HarnessError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Plan {
            memory_bits,
            fpr,
            p_star,
        } => cmd_plan(memory_bits, fpr, p_star),
        Command::Gen {
            length,
            distinct,
            universe,
            seed,
            out,
        } => cmd_gen(length, distinct, universe, seed, &out),
        Command::Run {
            algo,
            memory_bits,
            fpr,
            p_star,
            seed,
            window,
            input,
            tuning,
            report,
        } => cmd_run(
            algo,
            memory_bits,
            fpr,
            p_star,
            seed,
            window,
            &input,
            &tuning,
            report.as_deref(),
        ),
        Command::Predict {
            stream_length,
            filter_bits,
            num_filters,
            universe,
        } => cmd_predict(stream_length, filter_bits, num_filters, universe),
        Command::Compare {
            memory_bits,
            fpr,
            p_star,
            seed,
            window,
            input,
            tuning,
            report,
        } => cmd_compare(
            &memory_bits,
            fpr,
            p_star,
            seed,
            window,
            &input,
            &tuning,
            report.as_deref(),
        ),
    }
}

fn cmd_plan(memory_bits: u64, fpr: f64, p_star: f64) -> Result<(), CliError> {
    let balanced = plan(memory_bits, fpr, p_star)?;
    let k_raw = theory::plan_k_raw(fpr);
    println!("memory_bits={memory_bits} fpr_threshold={fpr} p_star={p_star}");
    println!("k_raw={k_raw}");
    println!(
        "balanced: k={} s={}",
        balanced.num_filters(),
        balanced.filter_bits()
    );
    println!("low-fnr override: k=1 s={memory_bits}");
    match plan_low_fpr(memory_bits, fpr, p_star) {
        Ok(low_fpr) => {
            println!(
                "low-fpr override: k={} s={}",
                low_fpr.num_filters(),
                low_fpr.filter_bits()
            )
        }
        Err(e) => println!("low-fpr override: unavailable ({e})"),
    }
    Ok(())
}

fn resolve_universe(
    length: u64,
    distinct: Option<f64>,
    universe: Option<u64>,
) -> Result<Universe, CliError> {
    match (distinct, universe) {
        (Some(d), None) => Ok(solve_universe(length, d)?),
        (None, Some(u)) if u >= 1 => Ok(Universe::Uniform(u)),
        (None, Some(u)) => Err(CliError::Validation(format!("universe {u} must be >= 1"))),
        (None, None) => Err(CliError::Validation(
            "pass either --distinct or --universe".into(),
        )),
        (Some(_), Some(_)) => Err(CliError::Validation(
            "--distinct and --universe are mutually exclusive".into(),
        )),
    }
}

fn cmd_gen(
    length: u64,
    distinct: Option<f64>,
    universe: Option<u64>,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    if length < 1 {
        return Err(CliError::Validation("length must be >= 1".into()));
    }
    let universe = resolve_universe(length, distinct, universe)?;
    let spec = StreamSpec {
        length,
        universe,
        seed,
    };

    let mut writer = BufWriter::new(File::create(out)?);
    let mut stream = GeneratedStream::new(spec);
    while let Some(element) = stream.next_element()? {
        writer.write_all(element)?;
    }
    writer.flush()?;

    let expected = match universe {
        Universe::Uniform(u) => expected_distinct_fraction(u, length),
        Universe::AllDistinct => 1.0,
    };
    let sidecar_path = sidecar_for(out);
    let mut sidecar = BufWriter::new(File::create(&sidecar_path)?);
    writeln!(sidecar, "length={length}")?;
    writeln!(sidecar, "universe={universe}")?;
    writeln!(sidecar, "seed={seed}")?;
    writeln!(sidecar, "expected_distinct_fraction={expected}")?;
    sidecar.flush()?;

    eprintln!(
        "wrote {} records ({} bytes) to {}, sidecar {}",
        length,
        length * 8,
        out.display(),
        sidecar_path.display()
    );
    Ok(())
}

fn sidecar_for(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".meta");
    PathBuf::from(name)
}

struct BuiltFilter {
    filter: Box<dyn DedupFilter>,
    /// (key, value) pairs describing the effective configuration.
    params: Vec<(&'static str, String)>,
}

fn build_filter(
    algo: Algo,
    memory_bits: u64,
    fpr: f64,
    p_star: f64,
    seed: u64,
    tuning: &TuningArgs,
) -> Result<BuiltFilter, CliError> {
    let layout = plan(memory_bits, fpr, p_star)?;
    let filter: Box<dyn DedupFilter> = match algo {
        Algo::Rsbf => Box::new(FilterBank::new(layout, seed)),
        Algo::Bloom => {
            let k = tuning.bloom_k.unwrap_or(layout.num_filters());
            if k < 1 {
                return Err(CliError::Validation("--bloom-k must be >= 1".into()));
            }
            Box::new(ClassicBloom::new(memory_bits, k, seed))
        }
        Algo::Sbf => {
            let d = tuning.sbf_counter_bits;
            if !(1..=8).contains(&d) {
                return Err(CliError::Validation(
                    "--sbf-counter-bits must lie in 1..=8".into(),
                ));
            }
            let k = tuning.sbf_k.unwrap_or(layout.num_filters());
            if k < 1 {
                return Err(CliError::Validation("--sbf-k must be >= 1".into()));
            }
            let cells = memory_bits / d as u64;
            if cells < 1 {
                return Err(CliError::Validation(format!(
                    "{memory_bits} bits cannot hold a single {d}-bit cell"
                )));
            }
            let decrements = tuning
                .sbf_decrements
                .unwrap_or_else(|| SbfBank::default_decrements(k, d));
            if decrements > cells {
                return Err(CliError::Validation(format!(
                    "--sbf-decrements {decrements} exceeds the {cells} available cells"
                )));
            }
            Box::new(SbfBank::new(memory_bits, k, d, decrements, seed))
        }
    };
    let params = filter.params();
    Ok(BuiltFilter { filter, params })
}

fn open_source(input: &InputArgs, seed: u64) -> Result<(Box<dyn ElementSource>, String), CliError> {
    if let Some(path) = &input.input {
        let source: Box<dyn ElementSource> = match input.input_format {
            InputFormat::Binary => Box::new(open_binary(path)?),
            InputFormat::Lines => Box::new(open_lines(path)?),
        };
        let describe = format!(
            "file:{} format={}",
            path.display(),
            match input.input_format {
                InputFormat::Binary => "binary",
                InputFormat::Lines => "lines",
            }
        );
        Ok((source, describe))
    } else {
        let length = input.gen_length.expect("clap enforces gen_length");
        if length < 1 {
            return Err(CliError::Validation("--gen-length must be >= 1".into()));
        }
        let universe = resolve_universe(length, input.gen_distinct, input.gen_universe).map_err(
            |e| match e {
                CliError::Validation(msg) if msg.starts_with("pass either") => {
                    CliError::Validation(
                        "pass either --gen-distinct or --gen-universe with --gen-length".into(),
                    )
                }
                other => other,
            },
        )?;
        let spec = StreamSpec {
            length,
            universe,
            seed,
        };
        let describe = format!("generated length={length} universe={universe}");
        Ok((Box::new(GeneratedStream::new(spec)), describe))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    algo: Algo,
    memory_bits: u64,
    fpr: f64,
    p_star: f64,
    seed: u64,
    window: u64,
    input: &InputArgs,
    tuning: &TuningArgs,
    report_path: Option<&Path>,
) -> Result<(), CliError> {
    if window < 1 {
        return Err(CliError::Validation("--window must be >= 1".into()));
    }
    let mut built = build_filter(algo, memory_bits, fpr, p_star, seed, tuning)?;
    let (mut source, input_desc) = open_source(input, seed)?;

    let rows = evaluate(built.filter.as_mut(), source.as_mut(), window, seed)?;
    let summary = *rows.last().expect("evaluate always emits a summary row");

    let mut header = base_header(algo.name(), fpr, p_star, seed, window);
    header.push(("memory_bits".into(), memory_bits.to_string()));
    header.push(("input".into(), input_desc));
    for (key, value) in &built.params {
        header.push(((*key).to_string(), value.clone()));
    }

    match report_path {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            report::write_header(&mut out, &header)?;
            report::write_windows(&mut out, &rows)?;
            out.flush()?;
            println!("{}", report::summary_line(&summary));
        }
        None => {
            let stdout = io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            report::write_header(&mut out, &header)?;
            report::write_windows(&mut out, &rows)?;
            out.flush()?;
            eprintln!("{}", report::summary_line(&summary));
        }
    }
    Ok(())
}

fn base_header(algo: &str, fpr: f64, p_star: f64, seed: u64, window: u64) -> Vec<(String, String)> {
    vec![
        ("tool".into(), format!("rsbf {TOOL_VERSION}")),
        ("hash_family".into(), HASH_FAMILY.into()),
        ("algo".into(), algo.into()),
        ("fpr_threshold".into(), fpr.to_string()),
        ("p_star".into(), p_star.to_string()),
        ("seed".into(), seed.to_string()),
        ("window_size".into(), window.to_string()),
    ]
}

fn cmd_predict(
    stream_length: u64,
    filter_bits: u64,
    num_filters: u32,
    universe: u64,
) -> Result<(), CliError> {
    if filter_bits < 1 || num_filters < 1 {
        return Err(CliError::Validation(
            "filter_bits and num_filters must be >= 1".into(),
        ));
    }
    if stream_length < filter_bits {
        return Err(CliError::Validation(
            "stream_length must be at least filter_bits (the fill phase)".into(),
        ));
    }
    if universe < 2 {
        return Err(CliError::Validation("universe must be >= 2".into()));
    }
    let fpr = theory::rsbf_fpr_bound(stream_length, filter_bits, num_filters, universe);
    let fnr = theory::rsbf_fnr_bound(stream_length, filter_bits, num_filters, universe);
    let initial = theory::initial_fpr_components(filter_bits, num_filters);
    println!("layout: m={stream_length} s={filter_bits} k={num_filters} U={universe}");
    println!("fpr_bound={} valid={}", fpr.value, fpr.valid);
    println!("fnr_bound={} valid={}", fnr.value, fnr.valid);
    println!("fnr_asymptote={}", fnr.asymptote);
    println!("initial_fpr_exact={}", initial.exact);
    println!("initial_fpr_approx={}", initial.approx);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    memory_grid: &[u64],
    fpr: f64,
    p_star: f64,
    seed: u64,
    window: u64,
    input: &InputArgs,
    tuning: &TuningArgs,
    report_path: Option<&Path>,
) -> Result<(), CliError> {
    if memory_grid.is_empty() {
        return Err(CliError::Validation(
            "--memory-bits needs at least one entry".into(),
        ));
    }

    // Each grid cell opens the source afresh, so every cell replays the
    // identical stream (files are re-read, generated streams re-seeded).
    let mut input_desc = String::new();
    let mut lines = Vec::new();
    for &memory_bits in memory_grid {
        for algo in [Algo::Rsbf, Algo::Sbf, Algo::Bloom] {
            let mut built = build_filter(algo, memory_bits, fpr, p_star, seed, tuning)?;
            let (mut source, desc) = open_source(input, seed)?;
            input_desc = desc;
            let rows = evaluate(built.filter.as_mut(), source.as_mut(), window, seed)?;
            let s: MetricsWindow = *rows.last().unwrap();
            let mut line = String::new();
            write!(
                line,
                "{},{},{},{},{},{},{},{}",
                memory_bits,
                algo.name(),
                s.window_true_distinct,
                s.window_true_duplicate,
                s.window_fp,
                s.window_fn,
                s.cum_fpr,
                s.cum_fnr
            )
            .expect("write to string");
            lines.push(line);
        }
    }

    let mut header = base_header("rsbf,sbf,bloom", fpr, p_star, seed, window);
    header.push((
        "memory_grid".into(),
        memory_grid
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(" "),
    ));
    header.push(("input".into(), input_desc));

    let write_all = |out: &mut dyn Write| -> io::Result<()> {
        report::write_header(out, &header)?;
        writeln!(
            out,
            "memory_bits,algo,true_distinct,true_duplicate,fp,fn,cum_fpr,cum_fnr"
        )?;
        for line in &lines {
            writeln!(out, "{line}")?;
        }
        Ok(())
    };

    match report_path {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            write_all(&mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            write_all(&mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}
