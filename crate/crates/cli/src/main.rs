// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rhev_core::RhevError;

use config::{Format, RunConfig};

#[derive(Parser)]
#[command(
    name = "rhev",
    version,
    about = "Time-modulation phased-array calibration simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed (overrides `experiment.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated artifact formats, e.g. `csv,svg`.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<FormatArg>>,
    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Two-channel delay sweep of the +1st-harmonic power.
    SweepDelay,
    /// Full calibration of one array, one row per channel.
    Calibrate,
    /// Monte Carlo RMSE over the configured sweep axis.
    MonteCarlo,
    /// RHEV and REV RMSE side by side over the sweep axis.
    CompareRev,
    /// Beam patterns before and after compensation.
    Pattern,
    /// Harmonic power spectrum of one modulated record.
    Spectrum,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum FormatArg {
    Csv,
    Svg,
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn threads_from_env() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("RHEV_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
        Failure::Config(format!("RHEV_THREADS must be an integer >= 1, got {raw:?}"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    threads_from_env()?;
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Config(e.0))?,
        None => RunConfig::default(),
    };
    if let Some(dir) = cli.out {
        cfg.output.dir = dir;
    }
    if let Some(f) = cli.format {
        cfg.output.formats = f
            .into_iter()
            .map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Svg => Format::Svg,
            })
            .collect();
    }
    let seed = cli.seed.unwrap_or(cfg.experiment.seed);

    let artifact = match cli.command {
        Command::SweepDelay => commands::sweep_delay(&cfg, seed),
        Command::Calibrate => commands::calibrate(&cfg, seed),
        Command::MonteCarlo => commands::monte_carlo(&cfg, seed),
        Command::CompareRev => commands::compare_rev(&cfg, seed),
        Command::Pattern => commands::pattern(&cfg, seed),
        Command::Spectrum => commands::spectrum_dump(&cfg, seed),
    }
    .map_err(|e| match e {
        RhevError::Config(m) => Failure::Config(m),
        other => Failure::Runtime(other.to_string()),
    })?;

    let dir = &cfg.output.dir;
    let io = |e: std::io::Error| Failure::Runtime(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut written = Vec::new();
    // CSV is always written; it is the source of truth for any chart.
    let csv = dir.join(format!("{}.csv", artifact.name));
    artifact.table.write_csv(&csv).map_err(io)?;
    written.push(csv);
    if cfg.output.formats.contains(&Format::Svg) {
        let svg = dir.join(format!("{}.svg", artifact.name));
        std::fs::write(&svg, artifact.chart.render()).map_err(io)?;
        written.push(svg);
    }
    if !cli.quiet {
        for line in &artifact.summary {
            println!("{line}");
        }
        for p in written {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: config: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
