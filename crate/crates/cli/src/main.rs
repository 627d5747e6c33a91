use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use optosync::{run_scenario, Scenario, ScenarioName, SolverChoice};
use optosync_core::config::ConfigMap;

#[derive(Parser)]
#[command(name = "optosync", version = optosync::report::VERSION, about = "Squeezing and synchronization of two mirrors in a driven optomechanical cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its tables, plots and report.
    Run {
        scenario: ScenarioName,
        /// Flat `key = value` or JSON config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a single key; may be repeated.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "gaussian")]
        solver: SolverChoice,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            config,
            set,
            out,
            solver,
        } => {
            let mut cfg = match &config {
                Some(p) => ConfigMap::from_file(p)?,
                None => ConfigMap::new(),
            };
            for a in &set {
                cfg.insert_assignment(a)?;
            }
            let s = Scenario::from_config(scenario, solver, out, cfg)?;
            let report = run_scenario(&s).with_context(|| format!("scenario {scenario} failed"))?;
            for n in &report.notes {
                eprintln!("note: {n}");
            }
            for (k, v) in &report.summary {
                println!("{k} = {v}");
            }
            println!("wrote {} files to {}", report.outputs.len(), s.output_dir.display());
        }
    }
    Ok(())
}
