use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jcas::cmd::{self, CliError, PatternSource};
use jcas::config::{CliConfig, Overrides, TaskMode};
use jcas::core::agents::AgentKind;

#[derive(Parser)]
#[command(name = "jcas", version, about = "Causally-aware beam codebook learning for joint communication and sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; keys it omits keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene JSON and a channel file.
    GenScenario {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        users: Option<usize>,
    },
    /// Train agents on a scenario and write a run directory.
    Train {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        agent: Option<AgentKind>,
        /// Directory with scene.json and channels.txt.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        parallel_agents: Option<usize>,
        #[arg(long, value_enum)]
        tasks: Option<TaskMode>,
    },
    /// Greedy evaluation of an agent checkpoint; writes a metrics JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a normalized beam pattern CSV.
    Beampattern {
        #[arg(long, conflicts_with = "codebook", required_unless_present = "codebook")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        codebook: Option<PathBuf>,
        /// Codebook entry to plot.
        #[arg(long, default_value_t = 0)]
        beam: usize,
        #[arg(long, default_value_t = 361)]
        grid_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize and compare run directories.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Also write the summary as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(common: &ConfigArgs, mut flags: Overrides) -> Result<CliConfig, CliError> {
    let file = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    flags.seed = common.seed;
    flags.out.clone_from(&common.out);
    CliConfig::resolve(file, &flags).map_err(CliError::Usage)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenScenario { common, users } => {
            let config = resolve(&common, Overrides { users, ..Overrides::default() })?;
            cmd::cmd_gen_scenario(&config).map(drop)
        }
        Command::Train {
            common,
            agent,
            scenario,
            parallel_agents,
            tasks,
        } => {
            let flags = Overrides {
                agent,
                scenario,
                parallel_agents,
                tasks,
                ..Overrides::default()
            };
            cmd::cmd_train(&resolve(&common, flags)?).map(drop)
        }
        Command::Eval {
            checkpoint,
            scenario,
            seed,
            out,
        } => cmd::cmd_eval(&checkpoint, scenario.as_deref(), seed, out.as_deref()).map(drop),
        Command::Beampattern {
            checkpoint,
            codebook,
            beam,
            grid_points,
            out,
        } => {
            let source = match (&checkpoint, &codebook) {
                (Some(dir), _) => PatternSource::Checkpoint(dir),
                (None, Some(path)) => PatternSource::Codebook(path, beam),
                (None, None) => unreachable!("clap requires one source"),
            };
            cmd::cmd_beampattern(source, grid_points, out.as_deref()).map(drop)
        }
        Command::Compare { runs, threshold, out } => {
            cmd::cmd_compare(&runs, threshold, out.as_deref()).map(drop)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
