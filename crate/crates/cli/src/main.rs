use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chebdos::config::{describe_keys, Config};
use chebdos::error::CliError;
use chebdos::exec::resolve_threads;
use chebdos::jobs::{self, Format, Job, Outcome};
use chebdos::settings::Settings;

#[derive(Parser)]
#[command(name = "chebdos", version, about = "Randomized Chebyshev spectral density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to $CHEBDOS_THREADS, then the core count.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Extra `key=value` overrides applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the smoothed spectral density on a grid.
    Estimate(Common),
    /// Compare an estimate against a known spectrum.
    Validate(Common),
    /// Write the reference spectrum of the configured operator.
    Spectrum(Common),
    /// Estimate the negative-eigenvalue fraction across mixture weights.
    IndexCurve(Common),
    /// List every configuration key with its default.
    Keys,
}

fn load(common: &Common) -> Result<(Config, Settings, usize), CliError> {
    let mut config = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config(format!("`--set {kv}`: expected KEY=VALUE")))?;
        config.set(k.trim(), v)?;
    }
    if let Some(seed) = common.seed {
        config.set("seed", &seed.to_string())?;
    }
    let settings = Settings::from_config(&config)?;
    let threads = resolve_threads(common.threads)?;
    Ok((config, settings, threads))
}

type JobFn = fn(&Job) -> Result<Outcome, CliError>;

fn run(cli: Cli) -> Result<bool, CliError> {
    let (common, job_fn): (&Common, JobFn) = match &cli.command {
        Command::Keys => {
            print!("{}", describe_keys());
            return Ok(true);
        }
        Command::Estimate(c) => (c, jobs::estimate),
        Command::Validate(c) => (c, jobs::validate),
        Command::Spectrum(c) => (c, jobs::spectrum),
        Command::IndexCurve(c) => (c, jobs::index_curve),
    };
    let (config, settings, threads) = load(common)?;
    let format = match common.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let job = Job { config: &config, settings: &settings, out: &common.out, format, threads };
    let outcome = job_fn(&job)?;
    let written: Vec<PathBuf> = outcome.files.paths().map(PathBuf::from).collect();
    outcome.files.commit()?;
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("chebdos: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
