use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use velocity_cli::{load_ticks, replay, walk};
use velocity_core::harness::DEMO_START;
use velocity_core::ledger::Genesis;
use velocity_core::pricefeed::{PricePoint, RandomWalk};

#[derive(Parser)]
#[command(name = "pricefeed", version, about = "Replay and generate exchange tick files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Publish a tick file into a fresh price history, one feed per block.
    Replay {
        #[arg(long)]
        ticks: PathBuf,
        #[arg(long)]
        genesis: PathBuf,
        /// Forward-fill gaps instead of rejecting them.
        #[arg(long)]
        lenient: bool,
        /// Stop at this height even if ticks remain.
        #[arg(long)]
        blocks: Option<u64>,
        /// JSON-lines event log.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded geometric random walk as tick CSV.
    GenWalk {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        seconds: u64,
        /// Starting price for every pair, e.g. 75.05.
        #[arg(long)]
        start: PricePoint,
        /// Per-second log-return standard deviation.
        #[arg(long)]
        vol: f64,
        #[arg(long, default_value_t = DEMO_START)]
        start_time: u64,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Replay {
            ticks,
            genesis,
            lenient,
            blocks,
            out,
        } => {
            let store = load_ticks(&ticks, lenient)?;
            let genesis = Genesis::load(&genesis).with_context(|| format!("loading {}", genesis.display()))?;
            let (summary, ledger) = replay(store, &genesis, blocks)?;
            if let Some(out) = out {
                fs::write(&out, ledger.log().to_jsonl()).with_context(|| format!("writing {}", out.display()))?;
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(if summary.faithful() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::GenWalk {
            seed,
            seconds,
            start,
            vol,
            start_time,
            out,
        } => {
            let store = walk(&RandomWalk {
                seed,
                start_time,
                seconds,
                start,
                vol,
            })?;
            match out {
                Some(path) => {
                    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    store.write_csv(file)?;
                }
                None => {
                    let mut stdout = std::io::stdout().lock();
                    store.write_csv(&mut stdout)?;
                    stdout.flush()?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
