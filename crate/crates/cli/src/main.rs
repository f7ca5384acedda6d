use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rulenav::gateway::BackendEndpoint;
use rulenav::instruction::PromptSet;
use rulenav::runner::{self, RunError};
use rulenav::scenario::{self, BackendMode};
use rulenav::Exec;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "rulenav", version, about = "Instruction-following local navigation in a 2D simulator")]
struct Cli {
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write run.jsonl, summary.json and timing.json.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Sets the sim, optimizer and noise seeds at once.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        backend: Option<BackendMode>,
        /// Dotted override, e.g. `planner.w_behav=0`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Recompute the summary of a run log.
    Replay {
        log: PathBuf,
        /// Override the per-segment compliance threshold.
        #[arg(long)]
        u_threshold: Option<f64>,
    },
    /// Export a run log's trajectory.
    Export {
        log: PathBuf,
        /// CSV output path.
        #[arg(long)]
        csv: PathBuf,
    },
    /// Write a language fixture for a scenario from the offline decomposer.
    RecordFixtures {
        scenario: PathBuf,
        /// Defaults to the scenario's `backends.language_fixture`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a landmark detector endpoint on a JSONL dataset.
    EvalLandmarks {
        dataset: PathBuf,
        /// JSON file holding the detector endpoint.
        #[arg(long)]
        endpoint: PathBuf,
    },
}

fn overrides(seed: Option<u64>, backend: Option<BackendMode>, set: &[String]) -> Result<Vec<(String, Value)>, RunError> {
    let mut out = Vec::new();
    if let Some(s) = seed {
        for k in ["seeds.sim", "seeds.optimizer", "seeds.noise"] {
            out.push((k.to_string(), Value::from(s)));
        }
    }
    if let Some(b) = backend {
        out.push(("backends.mode".to_string(), serde_json::to_value(b).expect("mode serializes")));
    }
    for s in set {
        out.push(scenario::parse_override(s)?);
    }
    Ok(out)
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializes"));
}

fn execute(cli: Cli) -> Result<(), RunError> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match cli.command {
        Command::Run {
            scenario: path,
            out,
            seed,
            backend,
            set,
        } => {
            let sc = scenario::load(&path, &overrides(seed, backend, &set)?)?;
            let result = runner::run(&sc, exec)?;
            result.write(&out)?;
            log::info!("{:?} after {} ticks", result.footer.reason, result.footer.ticks);
            print_json(&result.summary);
        }
        Command::Replay { log, u_threshold } => print_json(&runner::replay(&log, u_threshold)?),
        Command::Export { log, csv } => runner::export_traj(&log, &csv)?,
        Command::RecordFixtures { scenario: path, out } => {
            let sc = scenario::load(&path, &[])?;
            let out = out
                .or_else(|| runner::language_fixture_path(&sc))
                .ok_or_else(|| RunError::InvalidScenario("no --out and no backends.language_fixture".into()))?;
            let n = runner::record_language_fixture(&sc, &out)?;
            println!("wrote {n} records to {}", out.display());
        }
        Command::EvalLandmarks { dataset, endpoint } => {
            let text = std::fs::read_to_string(&endpoint).map_err(|e| RunError::Io(format!("{}: {e}", endpoint.display())))?;
            let ep: BackendEndpoint =
                serde_json::from_str(&text).map_err(|e| RunError::InvalidScenario(format!("{}: {e}", endpoint.display())))?;
            print_json(&runner::eval_landmarks(&dataset, ep, &PromptSet::with_instruction(""))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
