use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use seqprobe::experiment::{order_table, run_experiment};
use seqprobe::output::{emit_csv, write_metadata, Metadata};
use seqprobe::verify::verify;
use seqprobe::{parse_config, CliError, Result};

#[derive(Parser)]
#[command(name = "seqprobe", version, about = "Sequential probing policy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print indices and probing orders without simulating.
    Order(Common),
    /// Run one experiment at the configuration's base point.
    Simulate(Common),
    /// Run the experiment at every point of the [sweep] section.
    Sweep(Common),
    /// Check order optimality by brute force and test error rates.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Replaces the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the trial count in the config file.
    #[arg(long)]
    trials: Option<u64>,
}

fn run(cli: Cli) -> Result<()> {
    let (name, args) = match &cli.command {
        Command::Order(a) => ("order", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Verify(a) => ("verify", a),
    };
    let cfg = parse_config(&args.config, args.seed, args.trials)?;
    let started = Instant::now();
    let (table, failed) = match cli.command {
        Command::Order(_) => (order_table(&cfg, cfg.sweep.is_some())?, 0),
        Command::Simulate(_) => (run_experiment(&cfg, false)?, 0),
        Command::Sweep(_) => (run_experiment(&cfg, true)?, 0),
        Command::Verify(_) => verify(&cfg)?,
    };
    emit_csv(&table, &args.out)?;
    let meta = Metadata {
        name: cfg.name.clone(),
        command: name.to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed()?,
        trials: cfg.trials,
        version: env!("CARGO_PKG_VERSION").to_string(),
        rows: table.rows.len(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_metadata(&meta, &args.out)?;
    if failed > 0 {
        return Err(CliError::Verification {
            failed,
            total: table.rows.len(),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
