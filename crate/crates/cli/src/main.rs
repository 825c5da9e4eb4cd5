use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aging_core::netsim::{parse_blif, probability_run, Source};
use aging_core::sim::{self, ExperimentConfig, SimError, StressReport};
use aging_core::trace::{write_trace, ProfileKind, SyntheticTrace, WorkloadProfile};
use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aging-bench", version, about = "BTI static-stress experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic trace.
    Gen {
        #[arg(long, value_parser = parse_profile)]
        profile: ProfileKind,
        /// Number of events; scientific notation such as 1e6 is accepted.
        #[arg(long, value_parser = parse_count)]
        len: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; defaults to the config's output.report, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for histogram CSVs.
        #[arg(long)]
        histograms: Option<PathBuf>,
    },
    /// Percentage deltas between two reports of the same trace.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-net signal probability of a combinational BLIF netlist.
    Netsim {
        #[arg(long)]
        blif: PathBuf,
        #[arg(long, value_enum, default_value_t = SourceArg::Lfsr)]
        source: SourceArg,
        #[arg(long, value_parser = parse_count, default_value = "1000000")]
        vectors: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Input pattern for the constant source (bit i drives input i).
        #[arg(long, value_parser = parse_u64, default_value = "0")]
        pattern: u64,
        /// Nets overridden with PRBS bits, comma separated.
        #[arg(long, value_delimiter = ',')]
        force: Vec<String>,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Per-net CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Histogram CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Lfsr,
    Exhaustive,
    Constant,
}

fn parse_profile(s: &str) -> Result<ProfileKind, String> {
    s.parse()
}

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if f < 0.0 || f.fract() != 0.0 || f > u64::MAX as f64 {
        return Err(format!("`{s}` is not a whole non-negative count"));
    }
    Ok(f as u64)
}

fn parse_u64(s: &str) -> Result<u64, String> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    }
    .map_err(|e| format!("`{s}`: {e}"))
}

/// An error paired with the process exit code it maps to.
struct Failure(u8, anyhow::Error);

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure(e.exit_code() as u8, e.into())
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure(1, e.into())
}

fn io_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure(3, e.into())
}

fn write_to(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let file = File::create(p)
                .with_context(|| format!("creating {}", p.display()))
                .map_err(io_err)?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| Ok(w.flush()?)).map_err(io_err)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(io_err)
        }
    }
}

fn read_report(path: &Path) -> Result<StressReport, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(config_err)?;
    serde_json::from_str(&text)
        .with_context(|| format!("{} is not a report", path.display()))
        .map_err(config_err)
}

fn dispatch(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Gen {
            profile,
            len,
            seed,
            out,
        } => {
            let trace = SyntheticTrace::new(&WorkloadProfile::preset(profile, len, seed))
                .map_err(config_err)?;
            write_to(Some(&out), |w| {
                write_trace(w, trace)?;
                Ok(())
            })
        }
        Cmd::Run {
            config,
            seed,
            out,
            histograms,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading config {}", config.display()))
                .map_err(config_err)?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = sim::run(&cfg)?;
            let mut outputs = cfg.output.clone();
            if out.is_some() {
                outputs.report = out;
            }
            if histograms.is_some() {
                outputs.histogram_dir = histograms;
            }
            if outputs.report.is_none() {
                print!("{}", report.to_json());
            }
            sim::write_outputs(&report, &outputs)?;
            Ok(())
        }
        Cmd::Compare { a, b, out } => {
            let (ra, rb) = (read_report(&a)?, read_report(&b)?);
            let cmp = sim::compare(&ra, &rb)?;
            write_to(out.as_deref(), |w| {
                serde_json::to_writer_pretty(&mut *w, &cmp)?;
                writeln!(w)?;
                Ok(())
            })
        }
        Cmd::Netsim {
            blif,
            source,
            vectors,
            seed,
            pattern,
            force,
            bins,
            out,
            histogram,
        } => {
            let text = fs::read_to_string(&blif)
                .with_context(|| format!("reading {}", blif.display()))
                .map_err(config_err)?;
            let mut net = parse_blif(&text)
                .with_context(|| blif.display().to_string())
                .map_err(config_err)?;
            net.set_forced_injection_nets(&force).map_err(config_err)?;
            let src = match source {
                SourceArg::Lfsr => Source::Lfsr { seed },
                SourceArg::Exhaustive => Source::Exhaustive,
                SourceArg::Constant => Source::Constant { pattern },
            };
            let report = probability_run(&net, src, vectors, bins).map_err(config_err)?;
            write_to(out.as_deref(), |w| Ok(report.write_nets_csv(w)?))?;
            if let Some(h) = histogram {
                write_to(Some(&h), |w| Ok(report.histogram.write_csv(w)?))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, e)) => {
            eprintln!("aging-bench: {:#}", anyhow!(e));
            ExitCode::from(code)
        }
    }
}
