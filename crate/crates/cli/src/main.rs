use std::error::Error as _;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spad_ofdm::experiment::{
    apply_preset, load_config, run_sweep, write_csv, write_outputs, Mode, SweepSpec, PRESETS,
};
use spad_ofdm::validation::run_checks;
use spad_ofdm::{Error, Result};

/// Analytic and Monte Carlo sweeps for SPAD-receiver ACO-OFDM links.
#[derive(Debug, Parser)]
#[command(name = "spad-ofdm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration; missing fields take the default device parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for Monte Carlo runs.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// CSV output path; a `<out>.manifest.json` is written next to it.
    /// Without it the CSV goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// analytic, montecarlo or both.
    #[arg(long, global = true)]
    mode: Option<Mode>,

    /// Maximum Monte Carlo frames per point.
    #[arg(long, global = true)]
    frames: Option<usize>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form sweep over the received-power grid.
    Analyze,
    /// Monte Carlo sweep (with analytic columns unless --mode montecarlo).
    Simulate,
    /// Sweep reproducing one of the standard figures.
    Figure {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
    },
    /// Check the models against their oracles.
    Validate,
}

fn base_spec(cli: &Cli) -> Result<SweepSpec> {
    let mut spec = match &cli.config {
        Some(path) => load_config(path)?,
        None => SweepSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.mc.seed = seed;
    }
    if let Some(frames) = cli.frames {
        spec.mc.frames = frames;
    }
    Ok(spec)
}

fn sweep(cli: &Cli, spec: SweepSpec) -> Result<()> {
    let result = run_sweep(&spec)?;
    match &cli.out {
        Some(path) => {
            let manifest = write_outputs(&result, path)?;
            eprintln!(
                "wrote {} rows to {} (manifest {})",
                result.table.len(),
                path.display(),
                manifest.display()
            );
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&result, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn validate() -> Result<bool> {
    let mut all = true;
    for c in run_checks()? {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        all &= c.passed;
    }
    Ok(all)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Analyze => {
            if cli.mode.is_some_and(|m| m != Mode::Analytic) {
                return Err(Error::InvalidConfig(
                    "analyze is analytic only; use simulate for Monte Carlo".into(),
                ));
            }
            let mut spec = base_spec(cli)?;
            spec.mode = Mode::Analytic;
            sweep(cli, spec)?;
        }
        Command::Simulate => {
            let mut spec = base_spec(cli)?;
            spec.mode = cli.mode.unwrap_or(Mode::Both);
            sweep(cli, spec)?;
        }
        Command::Figure { name } => {
            let mut spec = apply_preset(name, &base_spec(cli)?)?;
            if let Some(mode) = cli.mode {
                spec.mode = mode;
            }
            sweep(cli, spec)?;
        }
        Command::Validate => return validate(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(2)
        }
    }
}
