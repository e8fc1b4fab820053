use anyhow::Context;
use bb84aes_sim::batches::{
    attacks_to_csv, attacks_to_json, run_attacks, run_table1, table1_to_csv, table1_to_json,
};
use bb84aes_sim::sweep::{sweep_to_csv, sweep_to_json, sweep_xi};
use bb84aes_sim::{emit_report, run_scenario, ScenarioConfig};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Parser)]
#[command(
    name = "bb84aes-sim",
    about = "Discrete-event simulator for BB84-AES: confidential per-basis authentication tags, adversary harness, resource sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario and emit its metrics report.
    Run {
        /// Scenario file (sectioned key = value text); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Root seed override (shorthand for --set rng.seed=N).
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides of the form section.key=value; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Emit the closed-form resource table over the dense group size.
    Sweep {
        #[arg(long, default_value_t = 2)]
        xi_min: u8,
        #[arg(long, default_value_t = 20)]
        xi_max: u8,
        /// Comma-separated tag widths.
        #[arg(long, default_value = "64,128")]
        tag_bits: String,
        #[arg(long, default_value_t = 1.153e9)]
        clock_hz: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Reproduce the blind-tag-flip outcome table (8 cells).
    Table1 {
        #[arg(long, default_value_t = 100_000)]
        pulses_per_cell: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run the attack comparison batch (fake-user probes, photon splitting,
    /// intercept-resend) against the relevant defenders.
    Attacks {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            mut set,
            out,
            format,
        } => {
            if let Some(seed) = seed {
                set.push(format!("rng.seed={seed}"));
            }
            let cfg = match config {
                Some(path) => ScenarioConfig::from_file(&path, &set)
                    .with_context(|| format!("loading {}", path.display()))?,
                None => ScenarioConfig::from_text("", &set)?,
            };
            let report = run_scenario(&cfg)?;
            let content = match format {
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv(),
            };
            emit_report(&content, out.as_deref()).context("writing report")?;
        }
        Command::Sweep {
            xi_min,
            xi_max,
            tag_bits,
            clock_hz,
            out,
            format,
        } => {
            let widths: Vec<u32> = tag_bits
                .split(',')
                .map(|s| s.trim().parse::<u32>().context("parsing --tag-bits"))
                .collect::<Result<_, _>>()?;
            let rows = sweep_xi(xi_min, xi_max, &widths, clock_hz)?;
            let content = match format {
                Format::Json => sweep_to_json(&rows),
                Format::Csv => sweep_to_csv(&rows),
            };
            emit_report(&content, out.as_deref()).context("writing sweep")?;
        }
        Command::Table1 {
            pulses_per_cell,
            seed,
            out,
            format,
        } => {
            let rows = run_table1(pulses_per_cell, seed)?;
            let content = match format {
                Format::Json => table1_to_json(&rows),
                Format::Csv => table1_to_csv(&rows),
            };
            emit_report(&content, out.as_deref()).context("writing table")?;
        }
        Command::Attacks { seed, out, format } => {
            let rows = run_attacks(seed)?;
            let content = match format {
                Format::Json => attacks_to_json(&rows),
                Format::Csv => attacks_to_csv(&rows),
            };
            emit_report(&content, out.as_deref()).context("writing attack batch")?;
        }
    }
    Ok(())
}
