use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use pdtn_core::config::{ExperimentConfig, SCENARIOS};
use pdtn_core::scenarios::{run_scenario, write_outputs};
use pdtn_core::Error;

#[derive(Parser)]
#[command(name = "pdtn", version, about = "Partial DtN experiments for -Δu + V(x,u) = 0")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario named in the config and write its artifacts.
    Run { config: PathBuf },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// Print the available scenario names.
    ListScenarios,
}

fn report(kind: &str, err: &Error) {
    eprintln!("{}", json!({ "status": "error", "kind": kind, "message": err.to_string() }));
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for s in SCENARIOS {
                println!("{s}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                println!("{}", json!({ "status": "ok", "scenario": cfg.scenario }));
                ExitCode::SUCCESS
            }
            Err(e) => {
                report("config", &e);
                ExitCode::from(2)
            }
        },
        Command::Run { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    report("config", &e);
                    return ExitCode::from(2);
                }
            };
            let dir = cfg.resolved_output_dir();
            let result = run_scenario(&cfg).and_then(|out| {
                write_outputs(&dir, &out)?;
                Ok(out)
            });
            match result {
                Ok(out) => {
                    println!(
                        "{}",
                        json!({
                            "status": "ok",
                            "scenario": cfg.scenario,
                            "output_dir": dir,
                            "summary": out.summary,
                        })
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    report("scenario", &e);
                    ExitCode::from(1)
                }
            }
        }
    }
}
