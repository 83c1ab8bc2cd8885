//! `v2i-sim`: runs one scenario or a parameter sweep and writes the metric
//! table as CSV.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use v2i_core::metrics::PercentileMode;
use v2i_core::sweep::{run_sweep_with_progress, SweepError, SweepOptions, SweepSpec};
use v2i_core::trace::TraceKind;
use v2i_core::ScenarioConfig;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "v2i-sim", version, about = "LTE vs. mmWave vehicle-to-infrastructure simulator")]
struct Args {
    /// Scenario config (JSON). Missing fields take the scenario defaults.
    #[arg(long, conflicts_with = "sweep")]
    config: Option<PathBuf>,

    /// Sweep spec (JSON) describing a grid of campaigns.
    #[arg(long)]
    sweep: Option<PathBuf>,

    /// Result CSV. Defaults to the sweep's `out`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Runs per campaign, overriding the files.
    #[arg(long)]
    runs: Option<u32>,

    /// Master seed, overriding the files.
    #[arg(long)]
    seed: Option<u64>,

    /// Per-run trace written next to the output, under `<out>.traces/`.
    #[arg(long, default_value = "none", value_parser = parse_trace)]
    trace: TraceKind,

    /// Worker threads for the runs of each campaign.
    #[arg(long, default_value_t = 1)]
    parallel: usize,

    /// Lower-tail throughput per run instead of pooled over runs.
    #[arg(long)]
    per_run_percentiles: bool,

    /// Suppress progress on stderr.
    #[arg(long, short)]
    quiet: bool,
}

fn parse_trace(s: &str) -> Result<TraceKind, String> {
    s.parse()
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn load_spec(args: &Args) -> Result<SweepSpec, Failure> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())));
    let mut spec = match (&args.sweep, &args.config) {
        (Some(p), _) => SweepSpec::from_json_str(&read(p)?).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        (None, Some(p)) => {
            let cfg = ScenarioConfig::from_json_str(&read(p)?)
                .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            SweepSpec::single(&cfg)
        }
        (None, None) => return Err(Failure::Config("one of --config or --sweep is required".into())),
    };
    if args.runs.is_some() {
        spec.n_runs = args.runs;
    }
    if args.seed.is_some() {
        spec.seed = args.seed;
    }
    Ok(spec)
}

fn trace_dir(out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => {
            let mut s = p.as_os_str().to_owned();
            s.push(".traces");
            PathBuf::from(s)
        }
        None => PathBuf::from("v2i-sim.traces"),
    }
}

fn run(args: &Args) -> Result<(), Failure> {
    let spec = load_spec(args)?;
    let jobs = spec.jobs().map_err(|e| Failure::Config(e.to_string()))?;
    let out = args.out.clone().or_else(|| spec.out.clone());
    let options = SweepOptions {
        parallel: args.parallel,
        percentile_mode: if args.per_run_percentiles {
            PercentileMode::PerRun
        } else {
            PercentileMode::Pooled
        },
        trace: args.trace,
        trace_dir: (args.trace != TraceKind::None).then(|| trace_dir(out.as_deref())),
    };

    let started = Instant::now();
    let quiet = args.quiet;
    if !quiet {
        eprintln!("v2i-sim: {} campaign(s)", jobs.len());
    }
    let table = run_sweep_with_progress(&spec, &options, |p| {
        if !quiet {
            eprintln!(
                "[{}/{}] {} ({} runs) {:.1}s",
                p.done,
                p.total,
                p.job.label(),
                p.job.config.n_runs,
                started.elapsed().as_secs_f64()
            );
        }
    })
    .map_err(|e: SweepError| {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    })?;

    match out {
        Some(path) => table.write_csv_file(&path).map_err(|e| Failure::Runtime(e.to_string())),
        None => {
            let mut stdout = io::stdout().lock();
            table
                .write_csv(&mut stdout)
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Runtime(format!("stdout: {e}")))
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("v2i-sim: configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("v2i-sim: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
