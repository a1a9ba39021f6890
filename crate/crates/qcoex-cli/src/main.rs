//! `qcoex` — evaluate QKD/classical coexistence scenarios, run sweeps and
//! reproduction suites, and distill keys end to end.
//!
//! Exit codes: 0 ok/feasible, 2 infeasible, 3 input error,
//! 4 reproduction-check failure.

use clap::{Parser, Subcommand, ValueEnum};
use qcoex_cli::{commands, scenario_file, EXIT_INPUT};
use qcoex_core::scenario::SrsModel;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qcoex", version, about = "QKD / classical coexistence simulator")]
struct Cli {
    /// Scenario file (required by evaluate, sweeps, distill).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Seed override; defaults to the scenario's seed (or 42).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// CSV output path; stdout gets a human-readable summary either way.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// SRS model override.
    #[arg(long, global = true, value_enum)]
    srs_model: Option<SrsModelArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SrsModelArg {
    Paper,
    Physical,
}

impl From<SrsModelArg> for SrsModel {
    fn from(v: SrsModelArg) -> Self {
        match v {
            SrsModelArg::Paper => SrsModel::Paper,
            SrsModelArg::Physical => SrsModel::Physical,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReproduceTarget {
    Table2,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrationDirArg {
    Co,
    Counter,
    Averaged,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one scenario point into a key-rate report.
    Evaluate,
    /// Evaluate the scenario across launch powers.
    SweepPower {
        /// Comma-separated dBm list; default 8..=21 step 1.
        #[arg(long)]
        powers: Option<String>,
    },
    /// Evaluate the scenario across fiber lengths (physical SRS model).
    SweepDistance {
        /// Comma-separated km list; default 40..=170 step 5.
        #[arg(long)]
        lengths: Option<String>,
    },
    /// Run a published-result reproduction suite with its ordering checks.
    Reproduce {
        #[arg(value_enum)]
        target: ReproduceTarget,
    },
    /// Fit the physical SRS coefficient against a fiber preset's beta.
    Calibrate {
        #[arg(long)]
        fiber: String,
        #[arg(long, value_enum, default_value = "averaged")]
        direction: CalibrationDirArg,
    },
    /// Simulate and distill key blocks end to end; write a per-block ledger.
    Distill {
        /// Number of blocks to process.
        #[arg(long, default_value_t = 20)]
        blocks: u64,
        /// Sifted bits per block; defaults to the protocol block size.
        #[arg(long)]
        block_bits: Option<u64>,
        /// Directory for raw block dumps (optional).
        #[arg(long)]
        dump_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            EXIT_INPUT
        }
    };
    ExitCode::from(code)
}

fn load_scenario(cli: &Cli) -> anyhow::Result<qcoex_core::scenario::CoexistenceScenario> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("this command needs --scenario <file>"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    let mut scenario = scenario_file::parse_scenario(&text)?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(model) = cli.srs_model {
        scenario.srs_model = model.into();
    }
    Ok(scenario)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match &cli.command {
        Command::Evaluate => {
            let scenario = load_scenario(&cli)?;
            commands::evaluate(&scenario, cli.out.as_deref())
        }
        Command::SweepPower { powers } => {
            let scenario = load_scenario(&cli)?;
            let powers = match powers {
                Some(list) => parse_list(list)?,
                None => (8..=21).map(|p| p as f64).collect(),
            };
            commands::sweep_power(&scenario, &powers, cli.out.as_deref())
        }
        Command::SweepDistance { lengths } => {
            let scenario = load_scenario(&cli)?;
            let lengths = match lengths {
                Some(list) => parse_list(list)?,
                None => (8..=34).map(|i| (i * 5) as f64).collect(),
            };
            commands::sweep_distance(&scenario, &lengths, cli.out.as_deref())
        }
        Command::Reproduce { target } => {
            let out = cli.out.as_deref();
            match target {
                ReproduceTarget::Table2 => commands::reproduce_table2(out),
                ReproduceTarget::Fig2 => commands::reproduce_fig2(out),
                ReproduceTarget::Fig3 => commands::reproduce_fig3(out),
                ReproduceTarget::Fig4 => commands::reproduce_fig4(out),
                ReproduceTarget::Fig5 => commands::reproduce_fig5(out, cli.seed.unwrap_or(42)),
            }
        }
        Command::Calibrate { fiber, direction } => {
            let dir = match direction {
                CalibrationDirArg::Co => qcoex_core::channel::CalibrationDirection::Co,
                CalibrationDirArg::Counter => {
                    qcoex_core::channel::CalibrationDirection::Counter
                }
                CalibrationDirArg::Averaged => {
                    qcoex_core::channel::CalibrationDirection::Averaged
                }
            };
            commands::calibrate(fiber, dir, cli.out.as_deref())
        }
        Command::Distill { blocks, block_bits, dump_dir } => {
            let scenario = load_scenario(&cli)?;
            commands::distill(
                &scenario,
                *blocks,
                *block_bits,
                dump_dir.as_deref(),
                cli.out.as_deref(),
            )
        }
    }
}

fn parse_list(list: &str) -> anyhow::Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| anyhow::anyhow!("`{s}` is not a number"))
        })
        .collect()
}
