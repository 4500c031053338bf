//! The subcommands, callable without going through a process.
//!
//! Run directory layout written by [`cmd_train`]:
//!
//! ```text
//! config.json                 resolved configuration
//! summary.json                per-agent results, partition, targets
//! codebook.json               exported quantized beams
//! agents/<name>/episodes.csv  per-episode records
//! agents/<name>/manifest.json + network files   checkpoint
//! ```
//!
//! Agent names are `comm-<n>` and `sense-<i>`.

use std::fs;
use std::path::{Path, PathBuf};

use jcas_core::agents::AgentKind;
use jcas_core::env::{BeamEnv, BeamTask};
use jcas_core::metrics::{area_under_curve, compare_runs, ComparisonSummary, EpisodeRecord, RunRecord};
use jcas_core::pipeline::{
    evaluate_policy, run_comm_pipeline, run_sense_targets, Codebook, EvalRecord, Runner,
    SerialRunner, Trainer, TrainedBeam,
};
use jcas_core::radio::{angle_grid, beam_pattern, pattern_peak, ArrayGeometry, BeamVector, ChannelVector};
use jcas_core::scenario::{generate_scene, sensing_targets, synth_channels, Scene, SensingTarget};
use serde::{Deserialize, Serialize};

use crate::channels::{load_channels, save_channels};
use crate::checkpoint::{load_agent, save_agent, CheckpointMeta, TaskSource};
use crate::codebook::{load_codebook, save_codebook};
use crate::config::CliConfig;
use crate::error::FormatError;
use crate::records::{load_episodes, pattern_to_csv, save_episodes};
use crate::runner::ThreadRunner;
use crate::scene::{load_scene, save_scene};

pub const SCENE_FILE: &str = "scene.json";
pub const CHANNEL_FILE: &str = "channels.txt";
pub const CONFIG_FILE: &str = "config.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CODEBOOK_FILE: &str = "codebook.json";
pub const EPISODE_FILE: &str = "episodes.csv";
pub const AGENT_DIR: &str = "agents";

/// Failure of a subcommand, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, configuration or inputs; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Failure while running, including numerical blow-ups and corrupt
    /// checkpoints; exit code 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn usage(context: &str) -> impl FnOnce(FormatError) -> CliError + '_ {
    move |e| CliError::Usage(format!("{context}: {e}"))
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

/// Missing inputs are usage errors, anything else a runtime failure.
fn checkpoint_error(e: FormatError) -> CliError {
    if e.is_not_found() {
        CliError::Usage(format!("checkpoint: {e}"))
    } else {
        CliError::Runtime(format!("checkpoint: {e}"))
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn geometry(config: &CliConfig) -> Result<ArrayGeometry, CliError> {
    ArrayGeometry::half_wavelength(config.run.num_antennas(), config.wavelength)
        .map_err(|e| CliError::Usage(format!("array geometry: {e}")))
}

/// Writes `scene.json` and `channels.txt` (one channel per user) into the
/// output directory, `scenario` by default.
pub fn cmd_gen_scenario(config: &CliConfig) -> Result<PathBuf, CliError> {
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("scenario"));
    let scene = generate_scene(&config.scene, config.seed)
        .map_err(|e| CliError::Usage(format!("scene: {e}")))?;
    let channels = synth_channels(
        &geometry(config)?,
        &config.channel_model,
        &scene.user_positions,
        scene.bs_position,
    )
    .map_err(|e| CliError::Usage(format!("channels: {e}")))?;
    create_dir(&out)?;
    save_scene(&scene, &out.join(SCENE_FILE)).map_err(usage("scene"))?;
    save_channels(&channels, &out.join(CHANNEL_FILE)).map_err(usage("channels"))?;
    println!(
        "wrote {} users, {} snapshots, {}-antenna channels to {}",
        scene.user_positions.len(),
        scene.snapshots.len(),
        config.run.num_antennas(),
        out.display()
    );
    Ok(out)
}

pub fn load_scenario(dir: &Path) -> Result<(Scene, Vec<ChannelVector>), CliError> {
    let scene = load_scene(&dir.join(SCENE_FILE)).map_err(usage("scene"))?;
    let channels = load_channels(&dir.join(CHANNEL_FILE)).map_err(usage("channels"))?;
    Ok((scene, channels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResult {
    pub name: String,
    pub episodes: usize,
    pub final_avg_gain: f64,
    pub auc: f64,
    /// Mean over the last half of the episodes; absent without a selector.
    pub late_tpr: Option<f64>,
    pub late_selected_count: Option<f64>,
    pub eval: EvalRecord,
    pub beam_gain: f64,
    pub task_source: TaskSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    /// Cluster id per channel.
    pub assignments: Vec<usize>,
    pub distortion: f64,
    /// Final cluster of each communication agent.
    pub agent_clusters: Vec<usize>,
    /// Agent-to-cluster permutation chosen before each later round.
    pub reassignments: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub agent: AgentKind,
    pub seed: u64,
    pub num_antennas: usize,
    pub num_redundant: usize,
    pub agents: Vec<AgentResult>,
    pub partition: Option<PartitionSummary>,
    pub targets: Vec<SensingTarget>,
}

/// Mean of the given column over the last half of the episodes.
fn late_mean(records: &[EpisodeRecord], field: fn(&EpisodeRecord) -> Option<f64>) -> Option<f64> {
    let tail = &records[records.len() / 2..];
    let values: Option<Vec<f64>> = tail.iter().map(field).collect();
    values
        .filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

fn finish_agent(
    dir: &Path,
    config: &CliConfig,
    name: String,
    trainer: &Trainer,
    beam: &TrainedBeam,
    task_source: TaskSource,
) -> Result<AgentResult, CliError> {
    let agent_dir = dir.join(AGENT_DIR).join(&name);
    create_dir(&agent_dir)?;
    let records = trainer.records();
    save_episodes(records, &agent_dir.join(EPISODE_FILE)).map_err(usage("episodes"))?;
    let meta = CheckpointMeta {
        name: name.clone(),
        seed: trainer.seed(),
        env: trainer.env().config().clone(),
        task_source: task_source.clone(),
        beam: beam.beam.phases().to_vec(),
        beam_gain: beam.gain,
    };
    save_agent(trainer.agent(), &meta, &agent_dir, config.checkpoint_format).map_err(usage("checkpoint"))?;
    let gains: Vec<f64> = records.iter().map(|r| r.avg_gain).collect();
    Ok(AgentResult {
        name,
        episodes: records.len(),
        final_avg_gain: gains.last().copied().unwrap_or(f64::NAN),
        auc: area_under_curve(&gains),
        late_tpr: late_mean(records, |r| r.tpr),
        late_selected_count: late_mean(records, |r| r.selected_count),
        eval: beam.eval.clone(),
        beam_gain: beam.gain,
        task_source,
    })
}

fn progress_line(name: &str, r: &EpisodeRecord) {
    let mut line = format!(
        "[{name}] episode {} avg_gain {:.4} beta {:.4}",
        r.episode, r.avg_gain, r.beta
    );
    if let (Some(tpr), Some(sel)) = (r.tpr, r.selected_count) {
        line.push_str(&format!(" tpr {tpr:.1} selected {sel:.2}"));
    }
    println!("{line}");
}

/// Trains the configured communication and sensing agents and writes a run
/// directory (see the module docs). Returns the directory.
pub fn cmd_train(config: &CliConfig) -> Result<PathBuf, CliError> {
    config.validate().map_err(CliError::Usage)?;
    let scenario = config
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Usage("no scenario given (--scenario or \"scenario\")".into()))?;
    let (scene, channels) = load_scenario(scenario)?;
    let run = &config.run;
    let m = run.num_antennas();
    if let Some(h) = channels.iter().find(|h| h.len() != m) {
        return Err(CliError::Usage(format!(
            "channel file has {}-antenna channels, config expects {m}",
            h.len()
        )));
    }
    if config.tasks.comm() && channels.len() < run.num_comm_beams {
        return Err(CliError::Usage(format!(
            "{} channels cannot form {} clusters",
            channels.len(),
            run.num_comm_beams
        )));
    }
    let targets = if config.tasks.sense() {
        sensing_targets(&scene, run.num_sense_beams).map_err(|e| CliError::Usage(format!("sensing targets: {e}")))?
    } else {
        Vec::new()
    };
    let geom = geometry(config)?;
    let out = config.out.clone().unwrap_or_else(|| {
        PathBuf::from("runs").join(format!("{}-seed{}", run.agent.kind, config.seed))
    });
    create_dir(&out)?;
    write_json(config, &out.join(CONFIG_FILE))?;

    let runner: Box<dyn Runner> = if config.parallel_agents > 1 {
        Box::new(ThreadRunner::new(config.parallel_agents))
    } else {
        Box::new(SerialRunner)
    };
    let mut agents = Vec::new();
    let mut comm_beams = Vec::new();
    let mut sense_beams = Vec::new();
    let mut partition = None;

    if config.tasks.comm() {
        let outcome = run_comm_pipeline(&channels, &geom, run, runner.as_ref(), &|job, r| {
            progress_line(&format!("comm-{job}"), r)
        })
        .map_err(runtime("communication training"))?;
        for (n, (t, b)) in outcome.trainers.iter().zip(&outcome.beams).enumerate() {
            let source = TaskSource::Comm {
                channel_indices: outcome.partition.members(outcome.agent_clusters[n]),
            };
            agents.push(finish_agent(&out, config, format!("comm-{n}"), t, b, source)?);
            comm_beams.push((n, b.beam.clone()));
        }
        partition = Some(PartitionSummary {
            assignments: outcome.partition.assignments.clone(),
            distortion: outcome.partition.distortion,
            agent_clusters: outcome.agent_clusters.clone(),
            reassignments: outcome.assignments.iter().map(|a| a.permutation.clone()).collect(),
        });
    }
    if config.tasks.sense() {
        let outcome = run_sense_targets(targets.clone(), &geom, run, runner.as_ref(), &|job, r| {
            progress_line(&format!("sense-{job}"), r)
        })
        .map_err(runtime("sensing training"))?;
        for (i, (t, b)) in outcome.trainers.iter().zip(&outcome.beams).enumerate() {
            let source = TaskSource::Sense { target_index: i };
            agents.push(finish_agent(&out, config, format!("sense-{i}"), t, b, source)?);
            sense_beams.push((i, b.beam.clone()));
        }
    }

    let codomain = run.codomain().map_err(|e| CliError::Usage(e.to_string()))?;
    let codebook = Codebook::assemble(codomain, m, &comm_beams, &sense_beams)
        .map_err(runtime("codebook"))?;
    save_codebook(&codebook, &out.join(CODEBOOK_FILE)).map_err(usage("codebook"))?;
    let summary = RunSummary {
        agent: run.agent.kind,
        seed: config.seed,
        num_antennas: m,
        num_redundant: run.agent.num_redundant,
        agents,
        partition,
        targets,
    };
    write_json(&summary, &out.join(SUMMARY_FILE))?;
    for a in &summary.agents {
        println!(
            "{}: final avg_gain {:.4}, eval {:.4}, exported beam gain {:.4}",
            a.name, a.final_avg_gain, a.eval.avg_gain, a.beam_gain
        );
    }
    println!("run written to {}", out.display());
    Ok(out)
}

/// Greedy evaluation of a checkpoint. With a scenario directory the task is
/// rebuilt from its files; otherwise the task stored in the checkpoint is
/// used. `seed` defaults to the checkpoint's own seed.
pub fn cmd_eval(
    checkpoint: &Path,
    scenario: Option<&Path>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<EvalRecord, CliError> {
    let (manifest, agent) = load_agent(checkpoint).map_err(checkpoint_error)?;
    let mut env_config = manifest.env.clone();
    if let Some(dir) = scenario {
        let (scene, channels) = load_scenario(dir)?;
        env_config.task = match (&manifest.task_source, &env_config.task) {
            (TaskSource::Comm { channel_indices }, _) => BeamTask::Comm {
                channels: channel_indices
                    .iter()
                    .map(|&i| {
                        channels.get(i).cloned().ok_or_else(|| {
                            CliError::Usage(format!("scenario has no channel {i}"))
                        })
                    })
                    .collect::<Result<_, _>>()?,
            },
            (TaskSource::Sense { target_index }, BeamTask::Sense { geometry, .. }) => {
                let targets = sensing_targets(&scene, target_index + 1)
                    .map_err(|e| CliError::Usage(format!("sensing targets: {e}")))?;
                BeamTask::Sense {
                    geometry: geometry.clone(),
                    aoa: targets[*target_index].aoa,
                }
            }
            (TaskSource::Sense { .. }, BeamTask::Comm { .. }) => {
                return Err(CliError::Runtime("checkpoint task and source disagree".into()))
            }
        };
    }
    let env = BeamEnv::new(env_config).map_err(|e| CliError::Usage(format!("environment: {e}")))?;
    let record = evaluate_policy(&env, &agent, seed.unwrap_or(manifest.seed))
        .map_err(runtime("evaluation"))?;
    let out = out.map_or_else(|| PathBuf::from("eval.json"), Path::to_path_buf);
    write_json(&record, &out)?;
    println!(
        "{}: eval avg_gain {:.6} final beta {:.6} -> {}",
        manifest.name,
        record.avg_gain,
        record.final_beta,
        out.display()
    );
    Ok(record)
}

pub enum PatternSource<'a> {
    /// The exported beam of an agent checkpoint.
    Checkpoint(&'a Path),
    /// Entry `index` of a codebook file.
    Codebook(&'a Path, usize),
}

/// Normalized sensing pattern of one beam over `grid_points` angles. The
/// array is taken as half-wavelength spaced, which fixes the pattern
/// regardless of the carrier.
pub fn cmd_beampattern(
    source: PatternSource<'_>,
    grid_points: usize,
    out: Option<&Path>,
) -> Result<Vec<(f64, f64)>, CliError> {
    let beam: BeamVector = match source {
        PatternSource::Checkpoint(dir) => {
            let (manifest, _) = load_agent(dir).map_err(checkpoint_error)?;
            BeamVector::new(manifest.beam).map_err(runtime("checkpoint beam"))?
        }
        PatternSource::Codebook(path, index) => {
            let book = load_codebook(path).map_err(usage("codebook"))?;
            book.entries()
                .get(index)
                .ok_or_else(|| {
                    CliError::Usage(format!("codebook has {} beams, no index {index}", book.len()))
                })?
                .beam
                .clone()
        }
    };
    if grid_points == 0 {
        return Err(CliError::Usage("grid needs at least one point".into()));
    }
    let geom = ArrayGeometry::half_wavelength(beam.num_antennas(), 1.0)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let pattern = beam_pattern(&beam, &geom, &angle_grid(grid_points)).map_err(runtime("pattern"))?;
    let out = out.map_or_else(|| PathBuf::from("pattern.csv"), Path::to_path_buf);
    let bytes = pattern_to_csv(&pattern).map_err(usage("pattern"))?;
    fs::write(&out, bytes).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
    let peak = pattern_peak(&pattern).expect("nonempty pattern");
    println!(
        "peak {:.4} rad ({:.4}) -> {}",
        pattern[peak].0,
        pattern[peak].1,
        out.display()
    );
    Ok(pattern)
}

/// Loads every agent of every run and summarizes them grouped by
/// `<agent kind>/<agent name>`. The threshold defaults to `0.7·M` of the
/// first run.
pub fn cmd_compare(
    runs: &[PathBuf],
    threshold: Option<f64>,
    out: Option<&Path>,
) -> Result<ComparisonSummary, CliError> {
    let mut records = Vec::new();
    let mut default_threshold = None;
    for dir in runs {
        let text = fs::read_to_string(dir.join(SUMMARY_FILE))
            .map_err(|e| CliError::Usage(format!("{}: {e}", dir.join(SUMMARY_FILE).display())))?;
        let summary: RunSummary = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
        default_threshold.get_or_insert(0.7 * summary.num_antennas as f64);
        for a in &summary.agents {
            let episodes = load_episodes(&dir.join(AGENT_DIR).join(&a.name).join(EPISODE_FILE))
                .map_err(usage("episodes"))?;
            records.push(RunRecord {
                label: format!("{}/{}", summary.agent, a.name),
                seed: summary.seed,
                episodes,
            });
        }
    }
    let threshold = threshold.or(default_threshold).unwrap_or(0.0);
    let comparison = compare_runs(&records, threshold).map_err(|e| CliError::Usage(format!("compare: {e}")))?;
    println!("{}", format_comparison(&comparison));
    if let Some(path) = out {
        write_json(&comparison, path)?;
    }
    Ok(comparison)
}

pub fn format_comparison(c: &ComparisonSummary) -> String {
    let mut s = format!(
        "{:<28} {:>6} {:>12} {:>12}  episodes to {:.3}\n",
        "agent", "seeds", "median AUC", "final gain", c.threshold
    );
    for a in &c.agents {
        let reach: Vec<String> = a
            .episodes_to_threshold
            .iter()
            .map(|e| e.map_or_else(|| "-".into(), |v| v.to_string()))
            .collect();
        s.push_str(&format!(
            "{:<28} {:>6} {:>12.3} {:>12.4}  {}\n",
            a.label,
            a.seeds.len(),
            a.median_auc,
            a.median_final_gain,
            reach.join(",")
        ));
    }
    s.pop();
    s
}
