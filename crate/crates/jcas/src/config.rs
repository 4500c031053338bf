//! The CLI configuration: one JSON document covering the run, the scene
//! generator and the output locations.
//!
//! Resolution order: built-in defaults, then the config file (deep-merged, so
//! a file may set only the keys it cares about), then command-line flags.
//! A few keys are derived from others unless the file sets them explicitly;
//! see [`CliConfig::resolve`].

use std::path::PathBuf;

use jcas_core::agents::AgentKind;
use jcas_core::pipeline::RunConfig;
use jcas_core::scenario::{ChannelModelParams, SceneParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checkpoint::NetFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaskMode {
    Comm,
    Sense,
    Jcas,
}

impl TaskMode {
    pub fn comm(self) -> bool {
        matches!(self, TaskMode::Comm | TaskMode::Jcas)
    }

    pub fn sense(self) -> bool {
        matches!(self, TaskMode::Sense | TaskMode::Jcas)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub seed: u64,
    pub tasks: TaskMode,
    /// Carrier wavelength in meters; elements sit half a wavelength apart.
    pub wavelength: f64,
    /// Trainers run on this many threads; 1 runs them in sequence.
    pub parallel_agents: usize,
    pub checkpoint_format: NetFormat,
    pub out: Option<PathBuf>,
    /// Directory holding `scene.json` and `channels.txt`.
    pub scenario: Option<PathBuf>,
    pub scene: SceneParams,
    pub channel_model: ChannelModelParams,
    pub run: RunConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            seed: 0,
            tasks: TaskMode::Jcas,
            wavelength: 0.1,
            parallel_agents: 1,
            checkpoint_format: NetFormat::Binary,
            out: None,
            scenario: None,
            scene: SceneParams::default(),
            channel_model: ChannelModelParams::default(),
            run: RunConfig::desk(AgentKind::Td3Invase, 8, 16),
        }
    }
}

/// Flag values; `None` leaves the config key alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub agent: Option<AgentKind>,
    pub out: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub parallel_agents: Option<usize>,
    pub users: Option<usize>,
    pub tasks: Option<TaskMode>,
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

fn has(file: &Value, pointer: &str) -> bool {
    file.pointer(pointer).is_some()
}

impl CliConfig {
    /// Builds the effective configuration.
    ///
    /// Derived keys, recomputed unless the file sets them:
    /// `run.seed` and `channel_model.rng_seed` follow `seed`; the curriculum
    /// horizon is `epochs - buffering_epochs`; `p_r_end` is `M / (M + M_Red)`
    /// and `p_r_start` is `max(0.9, p_r_end)`; the replay buffer holds every
    /// step of the run.
    pub fn resolve(file: Option<Value>, flags: &Overrides) -> Result<CliConfig, String> {
        let mut doc = serde_json::to_value(CliConfig::default()).expect("defaults serialize");
        let file = file.unwrap_or(Value::Object(Default::default()));
        if !file.is_object() {
            return Err("config file must hold a JSON object".into());
        }
        merge(&mut doc, file.clone());
        let mut c: CliConfig = serde_json::from_value(doc).map_err(|e| format!("config: {e}"))?;

        if let Some(seed) = flags.seed {
            c.seed = seed;
        }
        if flags.seed.is_some() || !has(&file, "/run/seed") {
            c.run.seed = c.seed;
        }
        if flags.seed.is_some() || !has(&file, "/channel_model/rng_seed") {
            c.channel_model.rng_seed = c.seed;
        }
        if let Some(kind) = flags.agent {
            c.run.agent.kind = kind;
        }
        if let Some(out) = &flags.out {
            c.out = Some(out.clone());
        }
        if let Some(dir) = &flags.scenario {
            c.scenario = Some(dir.clone());
        }
        if let Some(n) = flags.parallel_agents {
            c.parallel_agents = n;
        }
        if let Some(n) = flags.users {
            c.scene.num_users = n;
        }
        if let Some(t) = flags.tasks {
            c.tasks = t;
        }

        let run = &mut c.run;
        let curriculum = &mut run.agent.curriculum;
        if !has(&file, "/run/agent/curriculum/total_steps") {
            curriculum.total_steps = run.epochs.saturating_sub(run.buffering_epochs);
        }
        let d = run.agent.num_antennas + run.agent.num_redundant;
        if d > 0 && !has(&file, "/run/agent/curriculum/p_r_end") {
            curriculum.p_r_end = run.agent.num_antennas as f64 / d as f64;
        }
        if !has(&file, "/run/agent/curriculum/p_r_start") {
            curriculum.p_r_start = curriculum.p_r_end.max(0.9);
        }
        if !has(&file, "/run/agent/replay_capacity") {
            run.agent.replay_capacity = run.epochs.max(1) as usize;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.run.validate().map_err(|e| format!("run config: {e}"))?;
        self.channel_model
            .validate()
            .map_err(|e| format!("channel model: {e}"))?;
        if self.scene.num_users == 0 {
            return Err("scene needs at least one user".into());
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err("wavelength must be positive".into());
        }
        if self.parallel_agents == 0 {
            return Err("parallel_agents must be at least 1".into());
        }
        if self.tasks.comm() && self.run.num_comm_beams == 0 {
            return Err("communication tasks need num_comm_beams >= 1".into());
        }
        if self.tasks.sense() && self.run.num_sense_beams == 0 {
            return Err("sensing tasks need num_sense_beams >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_resolve() {
        let c = CliConfig::resolve(None, &Overrides::default()).unwrap();
        assert_eq!(c.run.agent.curriculum.total_steps, c.run.epochs - c.run.buffering_epochs);
        assert!((c.run.agent.curriculum.p_r_end - 8.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn file_then_flags() {
        let file = json!({"seed": 4, "run": {"epochs": 500, "buffering_epochs": 100, "agent": {"num_antennas": 4, "num_redundant": 4}}});
        let flags = Overrides {
            seed: Some(9),
            agent: Some(AgentKind::Ddpg),
            ..Overrides::default()
        };
        let c = CliConfig::resolve(Some(file), &flags).unwrap();
        assert_eq!((c.seed, c.run.seed, c.channel_model.rng_seed), (9, 9, 9));
        assert_eq!(c.run.agent.kind, AgentKind::Ddpg);
        assert_eq!(c.run.agent.curriculum.total_steps, 400);
        assert_eq!(c.run.agent.curriculum.p_r_end, 0.5);
        assert_eq!(c.run.agent.curriculum.p_r_start, 0.9);
        assert_eq!(c.run.agent.replay_capacity, 500);
    }

    #[test]
    fn explicit_derived_keys_kept() {
        let file = json!({"run": {"seed": 3, "agent": {"curriculum": {"p_r_end": 0.25}}}});
        let c = CliConfig::resolve(Some(file), &Overrides::default()).unwrap();
        assert_eq!(c.run.seed, 3);
        assert_eq!(c.run.agent.curriculum.p_r_end, 0.25);
    }

    #[test]
    fn unknown_and_invalid_rejected() {
        assert!(CliConfig::resolve(Some(json!({"bogus": 1})), &Overrides::default()).is_err());
        assert!(CliConfig::resolve(Some(json!({"run": {"agent": {"gama": 0.5}}})), &Overrides::default()).is_err());
        assert!(CliConfig::resolve(Some(json!({"scene": {"bs_position": {"x": 0, "y": 0, "z": 1}}})), &Overrides::default()).is_err());
        assert!(CliConfig::resolve(Some(json!([1])), &Overrides::default()).is_err());
        let users = Overrides {
            users: Some(0),
            ..Overrides::default()
        };
        assert!(CliConfig::resolve(None, &users).is_err());
    }

    #[test]
    fn resolved_config_is_a_fixed_point() {
        let c = CliConfig::resolve(Some(json!({"seed": 11})), &Overrides::default()).unwrap();
        let again = CliConfig::resolve(Some(serde_json::to_value(&c).unwrap()), &Overrides::default()).unwrap();
        assert_eq!(again, c);
    }
}
