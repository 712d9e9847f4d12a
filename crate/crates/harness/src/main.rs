use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use fcqn_harness::config::OutputFormat;
use fcqn_harness::report::write_runtime;
use fcqn_harness::{run, validate_config_with, write_outputs, Overrides, Scenario};

/// Simulates entanglement distribution and certification on a
/// frequency-multiplexed quantum network.
#[derive(Parser, Debug)]
#[command(name = "fcqn", version)]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table file format; overrides the file.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Suppress the terminal tables.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Pair generation rate and CAR against pump power.
    SourceSweep,
    /// Per-link maximum-likelihood state reconstruction.
    Tomography,
    /// Per-link witness from correlator counts.
    Witness,
    /// Witness with and without the basis-selective delay attack.
    Attack,
    /// Per-link measurement-device-independent witness.
    Mdi,
    /// MDI lower bound and trace-distance entanglement against θ.
    ThetaScan,
    /// Channel-pair and user allocation tables.
    Allocate,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Format {
    Csv,
    Json,
}

impl Command {
    fn scenario(self) -> Scenario {
        match self {
            Command::SourceSweep => Scenario::SourceSweep,
            Command::Tomography => Scenario::Tomography,
            Command::Witness => Scenario::Witness,
            Command::Attack => Scenario::Attack,
            Command::Mdi => Scenario::Mdi,
            Command::ThetaScan => Scenario::ThetaScan,
            Command::Allocate => Scenario::Allocate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let raw = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(1);
            }
        },
        None => String::new(),
    };
    let overrides = Overrides {
        scenario: Some(cli.command.scenario()),
        seed: cli.seed,
        output_dir: cli.out.clone(),
        format: cli.format.map(|f| match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }),
    };
    let config = match validate_config_with(&raw, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error:\n{e}");
            return ExitCode::from(1);
        }
    };
    let start = Instant::now();
    let outputs = match run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {} failed: {e}", config.scenario);
            return ExitCode::from(2);
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let written = write_outputs(&config.output_dir, &config, &outputs)
        .and_then(|_| write_runtime(&config.output_dir, &config, elapsed));
    if let Err(e) = written {
        eprintln!("error: writing to {}: {e}", config.output_dir.display());
        return ExitCode::from(2);
    }
    if !cli.quiet {
        // a closed pipe only ends the listing; results are already on disk
        let mut out = std::io::stdout().lock();
        for t in &outputs.tables {
            if writeln!(out, "{}", t.render()).is_err() {
                return ExitCode::SUCCESS;
            }
        }
        let _ = writeln!(out, "wrote {}", config.output_dir.display());
    }
    ExitCode::SUCCESS
}
