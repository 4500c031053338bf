//! The beam-learning environment: states are phase vectors, the action is the
//! next phase vector, and the reward compares the new gain against an adaptive
//! threshold and the previous gain.
//!
//! The action space has `M + M_Red` dimensions. Only the first `M` drive the
//! array; the remaining redundant dimensions are carried along in the state
//! but never touch the gain or the reward.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::math::{uniform_phase, wrap_angle};
use crate::radio::{
    avg_comm_gain, comm_gain, quantize, sensing_gain, ArrayGeometry, BeamVector, ChannelVector,
    PhaseCodomain,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BeamTask {
    Comm { channels: Vec<ChannelVector> },
    Sense { geometry: ArrayGeometry, aoa: f64 },
}

impl BeamTask {
    pub fn gain(&self, beam: &BeamVector) -> Result<f64> {
        match self {
            BeamTask::Comm { channels } => avg_comm_gain(beam, channels),
            BeamTask::Sense { geometry, aoa } => sensing_gain(beam, geometry, *aoa),
        }
    }

    fn num_antennas(&self) -> Option<usize> {
        match self {
            BeamTask::Comm { channels } => channels.first().map(|h| h.len()),
            BeamTask::Sense { geometry, .. } => Some(geometry.num_antennas()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamEnvConfig {
    pub num_antennas: usize,
    pub num_redundant: usize,
    pub task: BeamTask,
    pub quantize_in_loop: bool,
    pub codomain: PhaseCodomain,
    pub episode_length: usize,
}

impl BeamEnvConfig {
    pub fn action_dim(&self) -> usize {
        self.num_antennas + self.num_redundant
    }

    /// Ground-truth relevance: the first `M` dimensions.
    pub fn relevant_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.num_antennas];
        mask.resize(self.action_dim(), false);
        mask
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(Error::InvalidArgument("need at least one antenna".into()));
        }
        if self.episode_length == 0 {
            return Err(Error::InvalidArgument("episode length must be positive".into()));
        }
        match self.task.num_antennas() {
            Some(m) => check_len("task antennas", self.num_antennas, m),
            None => Err(Error::Empty("channel set")),
        }?;
        if let BeamTask::Comm { channels } = &self.task {
            for h in channels {
                check_len("channel", self.num_antennas, h.len())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub phases: Vec<f64>,
    pub beta: f64,
    pub prev_gain: f64,
    pub step_in_episode: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reward {
    /// New best gain of the episode.
    Improved,
    /// Better than the previous step, not better than the threshold.
    Progress,
    Regressed,
}

impl Reward {
    pub fn value(self) -> f64 {
        match self {
            Reward::Improved => 1.0,
            Reward::Progress => 0.0,
            Reward::Regressed => -1.0,
        }
    }
}

/// The three-case reward and the threshold that follows it.
pub fn reward(gain: f64, beta: f64, prev_gain: f64) -> (Reward, f64) {
    if gain > beta {
        (Reward::Improved, gain)
    } else if gain > prev_gain {
        (Reward::Progress, beta)
    } else {
        (Reward::Regressed, beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: Reward,
    pub gain: f64,
    pub relevant_mask: Vec<bool>,
}

impl StepOutcome {
    pub fn done(&self, episode_length: usize) -> bool {
        self.next_state.step_in_episode >= episode_length
    }
}

#[derive(Debug, Clone)]
pub struct BeamEnv {
    config: BeamEnvConfig,
}

impl BeamEnv {
    pub fn new(config: BeamEnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(BeamEnv { config })
    }

    pub fn config(&self) -> &BeamEnvConfig {
        &self.config
    }

    pub fn action_dim(&self) -> usize {
        self.config.action_dim()
    }

    /// Swaps the channel set or target without touching the dimensions.
    pub fn set_task(&mut self, task: BeamTask) -> Result<()> {
        let mut config = self.config.clone();
        config.task = task;
        config.validate()?;
        self.config = config;
        Ok(())
    }

    /// Beam formed by the first `M` phases, quantized if configured.
    pub fn beam_of(&self, phases: &[f64]) -> Result<BeamVector> {
        let beam = BeamVector::from_slice(&phases[..self.config.num_antennas])?;
        Ok(if self.config.quantize_in_loop {
            quantize(&beam, &self.config.codomain)
        } else {
            beam
        })
    }

    pub fn gain(&self, phases: &[f64]) -> Result<f64> {
        check_len("phase vector", self.action_dim(), phases.len())?;
        self.config.task.gain(&self.beam_of(phases)?)
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<EnvState> {
        let phases: Vec<f64> = (0..self.action_dim()).map(|_| uniform_phase(rng)).collect();
        let prev_gain = self.gain(&phases)?;
        Ok(EnvState {
            phases,
            beta: 0.0,
            prev_gain,
            step_in_episode: 0,
        })
    }

    /// The action becomes the next state; the reward depends on the gain of
    /// its first `M` phases only.
    pub fn step(&self, state: &EnvState, action: &[f64]) -> Result<StepOutcome> {
        check_len("action", self.action_dim(), action.len())?;
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("action"));
        }
        let phases: Vec<f64> = action.iter().map(|&a| wrap_angle(a)).collect();
        let gain = self.gain(&phases)?;
        let (reward, beta) = reward(gain, state.beta, state.prev_gain);
        Ok(StepOutcome {
            next_state: EnvState {
                phases,
                beta,
                prev_gain: gain,
                step_in_episode: state.step_in_episode + 1,
            },
            reward,
            gain,
            relevant_mask: self.config.relevant_mask(),
        })
    }

    /// Closed-form maximum gain, available for sensing and single-channel
    /// communication tasks.
    pub fn oracle_max_gain(&self) -> Result<f64> {
        oracle_max_gain(&self.config)
    }
}

pub fn oracle_max_gain(config: &BeamEnvConfig) -> Result<f64> {
    match &config.task {
        BeamTask::Sense { geometry, .. } => Ok(geometry.num_antennas() as f64),
        BeamTask::Comm { channels } if channels.len() == 1 => {
            let h = &channels[0];
            let s: f64 = h.entries().iter().map(|c| c.norm()).sum();
            Ok(s * s / h.len() as f64)
        }
        BeamTask::Comm { .. } => Err(Error::InvalidArgument(
            "no closed-form maximum for a multi-channel set".into(),
        )),
    }
}

/// Gain-maximizing beam for a single channel: phases equal to `arg(h_m)`.
pub fn matched_channel_beam(channel: &ChannelVector) -> Result<BeamVector> {
    BeamVector::new(channel.entries().iter().map(|c| c.arg()).collect())
}

#[doc(hidden)]
pub fn single_channel_gain(beam: &BeamVector, channel: &ChannelVector) -> Result<f64> {
    comm_gain(beam, channel)
}
