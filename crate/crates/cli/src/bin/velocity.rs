use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{ArgGroup, Parser, Subcommand};
use velocity_cli::run_scenario_file;
use velocity_core::harness::{run_attack, AttackConfig, FixtureKind};

#[derive(Parser)]
#[command(name = "velocity", version, about = "Run velocity market scenarios and attack fixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON scenario and write its event log.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Tick CSV replacing the scenario's tick source.
        #[arg(long)]
        ticks: Option<PathBuf>,
        /// Seed for a random-walk tick source.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON-lines event log.
        #[arg(long)]
        out: PathBuf,
        /// Print the full outcome as JSON instead of one line per check.
        #[arg(long)]
        json: bool,
    },
    /// Settle a winning option held by a hostile receiver.
    #[command(group(ArgGroup::new("variant").required(true).args(["vulnerable", "patched"])))]
    Attack {
        /// reentrant, throwing or gashog, optionally with `:N`.
        #[arg(long)]
        fixture: FixtureKind,
        /// Reentry depth for the reentrant fixture.
        #[arg(long)]
        depth: Option<u32>,
        /// Release escrow after paying out.
        #[arg(long)]
        vulnerable: bool,
        /// Release escrow before paying out.
        #[arg(long)]
        patched: bool,
        /// Gas forwarded with value transfers.
        #[arg(long)]
        stipend: Option<u64>,
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
        Command::Run {
            scenario,
            ticks,
            seed,
            out,
            json,
        } => {
            let outcome = run_scenario_file(&scenario, ticks, seed)?;
            fs::write(&out, &outcome.log).with_context(|| format!("writing {}", out.display()))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&outcome)?);
            } else {
                for c in &outcome.checks {
                    let verdict = if c.passed { "PASS" } else { "FAIL" };
                    println!("{verdict} {:?}: {}", c.check, c.detail);
                }
                let failed = outcome.actions.iter().filter(|a| a.reason.is_some()).count();
                println!(
                    "{} actions ({failed} rejected), {} sweeps, log {}",
                    outcome.actions.len(),
                    outcome.sweeps.len(),
                    out.display()
                );
            }
            Ok(if outcome.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Attack {
            fixture,
            depth,
            vulnerable,
            patched: _,
            stipend,
        } => {
            let fixture = match (fixture, depth) {
                (FixtureKind::ReentrantReceiver { .. }, Some(depth)) => FixtureKind::ReentrantReceiver { depth },
                (_, Some(_)) => anyhow::bail!("--depth only applies to the reentrant fixture"),
                (f, None) => f,
            };
            let mut cfg = AttackConfig::new(fixture, vulnerable);
            cfg.send_stipend = stipend;
            let outcome = run_attack(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&outcome)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
