use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ecbc_cli::commands::{self, parse_faulty, parse_q_range, RunOverrides};
use ecbc_core::bcast::BroadcastCostModel;
use ecbc_core::simnet::{Algorithm, QRange, SweepSpec};
use ecbc_core::ProcessorId;

#[derive(Parser)]
#[command(
    name = "ecbc",
    version,
    about = "Simulator for coded Byzantine agreement on long values"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        alg: Option<Algorithm>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        l_bits: Option<u64>,
        #[arg(long)]
        d_bits: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated faulty processor ids.
        #[arg(long, value_parser = parse_faulty)]
        faulty: Option<BTreeSet<ProcessorId>>,
        /// Adversary script (JSON) replacing the scenario's own.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Any scenario field as `key=value` (value parsed as JSON).
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Random adversary sweep; writes summary.csv and failing replays.
    Sweep {
        #[arg(long, default_value = "alg1")]
        alg: Algorithm,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        t: usize,
        /// Single value or range such as `3..5`.
        #[arg(long, value_parser = parse_q_range)]
        q: Option<QRange>,
        #[arg(long, default_value_t = 2400)]
        l_bits: u64,
        #[arg(long)]
        d_bits: Option<u64>,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_faulty)]
        faulty: Option<BTreeSet<ProcessorId>>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run the acceptance criteria and print a pass/fail table.
    Acceptance {
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-run a serialized configuration and script.
    Replay {
        file: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let status = match Cli::parse().command {
        Command::Run {
            scenario,
            alg,
            n,
            t,
            q,
            l_bits,
            d_bits,
            seed,
            faulty,
            script,
            overrides,
            out_dir,
        } => {
            let o = RunOverrides {
                algorithm: alg,
                n,
                t,
                q,
                l_bits,
                d_bits,
                seed,
                faulty,
                script,
                assignments: overrides,
            };
            commands::cmd_run(&scenario, &o, &out_dir)
        }
        Command::Sweep {
            alg,
            n,
            t,
            q,
            l_bits,
            d_bits,
            trials,
            seed,
            faulty,
            out_dir,
        } => {
            let q = match (alg, q) {
                (Algorithm::QValidity, None) => Some(QRange {
                    lo: t + 1,
                    hi: n.saturating_sub(t),
                }),
                (_, q) => q,
            };
            let spec = SweepSpec {
                algorithm: alg,
                n,
                t,
                q,
                l_bits,
                d_bits,
                trials,
                seed,
                cost_model: BroadcastCostModel::default(),
                faulty,
            };
            commands::cmd_sweep(&spec, &out_dir)
        }
        Command::Acceptance { quick, out_dir } => {
            commands::cmd_acceptance(quick, out_dir.as_deref()).0
        }
        Command::Replay { file, out_dir } => commands::cmd_replay(&file, &out_dir),
    };
    ExitCode::from(status.code() as u8)
}
