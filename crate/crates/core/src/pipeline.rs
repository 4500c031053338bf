//! End-to-end codebook construction.
//!
//! Communication: probe gains, features, K-means, one agent per cluster, and
//! between training rounds a re-clustering followed by a cluster-to-agent
//! assignment. Sensing: one agent per target angle. Every trained beam is then
//! fine-tuned in the quantized codomain.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentConfig, AgentKind, InputEncoding, MaskMode, ReplayBuffer};
use crate::clustering::{
    assign, assignment_cost, feature_matrix, kmeans, probe_beams, probe_gains, Assignment,
    Partition,
};
use crate::env::{BeamEnv, BeamEnvConfig, BeamTask, EnvState};
use crate::error::{check_len, Error, Result};
use crate::math::{derive_seed, mean};
use crate::metrics::{tpr, tpr_literal, EpisodeRecord};
use crate::radio::{quantize, ArrayGeometry, BeamVector, ChannelVector, PhaseCodomain};
use crate::scenario::{sensing_targets, Scene, SensingTarget};

const TAG_ENV: u64 = 30;
const TAG_EVAL: u64 = 31;
const TAG_COMM_AGENT: u64 = 100;
const TAG_SENSE_AGENT: u64 = 200;
const TAG_KMEANS: u64 = 300;
const TAG_FINE_TUNE: u64 = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `N_C`.
    pub num_comm_beams: usize,
    /// `N_S`.
    pub num_sense_beams: usize,
    /// `C`.
    pub probe_count: usize,
    /// Environment steps per agent, buffering included.
    pub epochs: u64,
    /// Leading steps with uniform random actions and no updates.
    pub buffering_epochs: u64,
    /// `E`.
    pub episode_length: usize,
    /// Communication training is split into this many rounds with a
    /// re-clustering and re-assignment between consecutive rounds.
    pub recluster_rounds: usize,
    pub phase_bits: u32,
    pub quantize_in_loop: bool,
    pub fine_tune_iterations: usize,
    pub fine_tune_noise_std: f64,
    pub agent: AgentConfig,
    pub seed: u64,
}

impl RunConfig {
    /// Full-scale settings.
    pub fn new(kind: AgentKind, m: usize, m_red: usize) -> Self {
        let (epochs, buffering) = (200_000, 50_000);
        RunConfig {
            num_comm_beams: 2,
            num_sense_beams: 1,
            probe_count: 16,
            epochs,
            buffering_epochs: buffering,
            episode_length: 200,
            recluster_rounds: 1,
            phase_bits: 4,
            quantize_in_loop: false,
            fine_tune_iterations: 200,
            fine_tune_noise_std: 0.05,
            agent: AgentConfig::new(kind, m, m_red, epochs - buffering),
            seed: 0,
        }
    }

    /// Settings sized for a single CPU core: 100 episodes of 100 steps,
    /// narrow networks, small batches, periodic inputs and a myopic target
    /// (the threshold is not part of the state, so long horizons reward
    /// creeping rather than reaching the best beam).
    pub fn desk(kind: AgentKind, m: usize, m_red: usize) -> Self {
        let (epochs, buffering) = (10_000, 1_000);
        let mut agent = AgentConfig::new(kind, m, m_red, epochs - buffering);
        agent.actor_hidden = vec![64; 2];
        agent.critic_hidden = vec![64; 2];
        agent.selector_hidden = vec![64; 2];
        agent.batch_size = 32;
        agent.replay_capacity = epochs as usize;
        agent.input_encoding = InputEncoding::Periodic;
        agent.gamma = 0.0;
        agent.selector_lr = 3e-4;
        agent.curriculum.lambda_end = 0.1;
        RunConfig {
            epochs,
            buffering_epochs: buffering,
            episode_length: 100,
            agent,
            ..RunConfig::new(kind, m, m_red)
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.agent.num_antennas
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        if self.buffering_epochs > self.epochs {
            return Err(Error::InvalidArgument(
                "buffering epochs exceed total epochs".into(),
            ));
        }
        if self.episode_length == 0 || self.recluster_rounds == 0 {
            return Err(Error::InvalidArgument(
                "episode length and round count must be positive".into(),
            ));
        }
        if self.epochs < self.recluster_rounds as u64 {
            return Err(Error::InvalidArgument("fewer epochs than rounds".into()));
        }
        if !(self.fine_tune_noise_std.is_finite() && self.fine_tune_noise_std >= 0.0) {
            return Err(Error::InvalidArgument(
                "fine-tune noise must be nonnegative".into(),
            ));
        }
        PhaseCodomain::new(self.phase_bits)?;
        Ok(())
    }

    pub fn codomain(&self) -> Result<PhaseCodomain> {
        PhaseCodomain::new(self.phase_bits)
    }

    pub fn env_config(&self, task: BeamTask) -> Result<BeamEnvConfig> {
        let config = BeamEnvConfig {
            num_antennas: self.agent.num_antennas,
            num_redundant: self.agent.num_redundant,
            task,
            quantize_in_loop: self.quantize_in_loop,
            codomain: self.codomain()?,
            episode_length: self.episode_length,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Noise-free policy rollout of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub avg_gain: f64,
    pub final_beta: f64,
    pub gains: Vec<f64>,
    pub final_phases: Vec<f64>,
}

/// Runs one greedy episode from a start state drawn with `seed`.
pub fn evaluate_policy(env: &BeamEnv, agent: &Agent, seed: u64) -> Result<EvalRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_EVAL));
    let mut state = env.reset(&mut rng)?;
    let mut gains = Vec::with_capacity(env.config().episode_length);
    for _ in 0..env.config().episode_length {
        let action = agent.policy(&state.phases)?;
        let outcome = env.step(&state, &action)?;
        gains.push(outcome.gain);
        state = outcome.next_state;
    }
    Ok(EvalRecord {
        avg_gain: mean(&gains),
        final_beta: state.beta,
        gains,
        final_phases: state.phases,
    })
}

#[derive(Debug, Clone, Default)]
struct EpisodeAccumulator {
    gains: Vec<f64>,
    tpr: Vec<f64>,
    tpr_literal: Vec<f64>,
    selected: Vec<f64>,
}

/// One agent interacting with one environment; training can be advanced in
/// slices so that the task may change between them.
#[derive(Debug, Clone)]
pub struct Trainer {
    env: BeamEnv,
    agent: Agent,
    buffer: ReplayBuffer,
    state: EnvState,
    env_rng: ChaCha8Rng,
    seed: u64,
    step: u64,
    buffering_epochs: u64,
    current: EpisodeAccumulator,
    records: Vec<EpisodeRecord>,
    best: Option<(BeamVector, f64)>,
}

impl Trainer {
    pub fn new(env: BeamEnv, agent: Agent, buffering_epochs: u64, seed: u64) -> Result<Self> {
        check_len("agent dimension", env.action_dim(), agent.dim())?;
        let buffer = ReplayBuffer::new(agent.config().replay_capacity, agent.dim())?;
        let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_ENV));
        let state = env.reset(&mut env_rng)?;
        Ok(Trainer {
            env,
            agent,
            buffer,
            state,
            env_rng,
            seed,
            step: 0,
            buffering_epochs,
            current: EpisodeAccumulator::default(),
            records: Vec::new(),
            best: None,
        })
    }

    pub fn env(&self) -> &BeamEnv {
        &self.env
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn records(&self) -> &[EpisodeRecord] {
        &self.records
    }

    /// Best beam seen so far and its gain on the current task.
    pub fn best(&self) -> Option<(&BeamVector, f64)> {
        self.best.as_ref().map(|(b, g)| (b, *g))
    }

    pub fn into_agent(self) -> Agent {
        self.agent
    }

    /// Switches the task and re-scores the best beam on it.
    pub fn set_task(&mut self, task: BeamTask) -> Result<()> {
        self.env.set_task(task)?;
        if let Some((beam, gain)) = &mut self.best {
            *gain = self.env.config().task.gain(beam)?;
        }
        Ok(())
    }

    /// Advances training by `steps` environment steps, calling `on_episode`
    /// after each completed episode.
    pub fn run(&mut self, steps: u64, on_episode: &mut dyn FnMut(&EpisodeRecord)) -> Result<()> {
        let relevant = self.env.config().relevant_mask();
        let has_selector = self.agent.kind() == AgentKind::Td3Invase;
        for _ in 0..steps {
            let buffering = self.step < self.buffering_epochs;
            let action = if buffering {
                self.agent.random_action()
            } else {
                self.agent.act(&self.state.phases, true)?
            };
            let outcome = self.env.step(&self.state, &action)?;
            self.buffer.push(
                &self.state.phases,
                &action,
                outcome.reward.value(),
                &outcome.next_state.phases,
            )?;
            if has_selector {
                let mask = self
                    .agent
                    .select_mask(&self.state.phases, &action, MaskMode::Eval)?;
                let acc = &mut self.current;
                acc.tpr.push(tpr(&mask.bits, &relevant)?);
                acc.tpr_literal.push(tpr_literal(&mask.bits, &relevant)?);
                acc.selected.push(mask.selected_count() as f64);
            }
            if self.best.as_ref().is_none_or(|(_, g)| outcome.gain > *g) {
                self.best = Some((self.env.beam_of(&action)?, outcome.gain));
            }
            if !buffering && self.buffer.len() >= self.agent.config().batch_size {
                self.agent.train_step(&self.buffer)?;
            }
            self.current.gains.push(outcome.gain);
            let done = outcome.done(self.env.config().episode_length);
            self.state = outcome.next_state;
            self.step += 1;
            if done {
                let acc = core::mem::take(&mut self.current);
                let opt_mean = |v: &[f64]| (!v.is_empty()).then(|| mean(v));
                let record = EpisodeRecord {
                    episode: self.records.len(),
                    avg_gain: mean(&acc.gains),
                    beta: self.state.beta,
                    tpr: opt_mean(&acc.tpr),
                    tpr_literal: opt_mean(&acc.tpr_literal),
                    selected_count: opt_mean(&acc.selected),
                };
                on_episode(&record);
                self.records.push(record);
                self.state = self.env.reset(&mut self.env_rng)?;
            }
        }
        Ok(())
    }

    /// Greedy episode of the current policy, seeded by the trainer seed.
    pub fn evaluate(&self) -> Result<EvalRecord> {
        evaluate_policy(&self.env, &self.agent, self.seed)
    }
}

/// Executes independent trainers; implementations may run them in parallel
/// but must leave each trainer exactly as a serial run would.
pub trait Runner {
    fn advance(
        &self,
        trainers: &mut [Trainer],
        steps: u64,
        progress: &(dyn Fn(usize, &EpisodeRecord) + Sync),
    ) -> Result<()>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SerialRunner;

impl Runner for SerialRunner {
    fn advance(
        &self,
        trainers: &mut [Trainer],
        steps: u64,
        progress: &(dyn Fn(usize, &EpisodeRecord) + Sync),
    ) -> Result<()> {
        for (job, t) in trainers.iter_mut().enumerate() {
            t.run(steps, &mut |r| progress(job, r))?;
        }
        Ok(())
    }
}

/// Greedy hill-climb in the quantized codomain: perturb, quantize, keep the
/// candidate only if the task gain strictly improves.
pub fn fine_tune<R: Rng + ?Sized>(
    beam: &BeamVector,
    evaluator: &BeamTask,
    codomain: &PhaseCodomain,
    iterations: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<(BeamVector, f64)> {
    let mut best = quantize(beam, codomain);
    let mut best_gain = evaluator.gain(&best)?;
    for _ in 0..iterations {
        let phases: Vec<f64> = best
            .phases()
            .iter()
            .map(|&p| {
                let z: f64 = rng.sample(StandardNormal);
                p + noise_std * z
            })
            .collect();
        let candidate = quantize(&BeamVector::new(phases)?, codomain);
        let gain = evaluator.gain(&candidate)?;
        if gain > best_gain {
            best = candidate;
            best_gain = gain;
        }
    }
    Ok((best, best_gain))
}

/// A quantized beam produced by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedBeam {
    pub beam: BeamVector,
    /// Task gain of the exported beam.
    pub gain: f64,
    pub eval: EvalRecord,
}

fn finish_beams(
    trainers: &[Trainer],
    config: &RunConfig,
    seed_tag: u64,
) -> Result<Vec<TrainedBeam>> {
    let codomain = config.codomain()?;
    trainers
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (best, _) = t.best().ok_or(Error::Empty("training history"))?;
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(config.seed, seed_tag + i as u64));
            let (beam, gain) = fine_tune(
                best,
                &t.env().config().task,
                &codomain,
                config.fine_tune_iterations,
                config.fine_tune_noise_std,
                &mut rng,
            )?;
            Ok(TrainedBeam {
                beam,
                gain,
                eval: t.evaluate()?,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CommOutcome {
    /// Partition used in the final round.
    pub partition: Partition,
    /// Assignments made between rounds (empty for a single cluster or round).
    pub assignments: Vec<Assignment>,
    /// Final cluster index of each agent.
    pub agent_clusters: Vec<usize>,
    pub beams: Vec<TrainedBeam>,
    pub trainers: Vec<Trainer>,
}

fn cluster_channels(
    partition: &Partition,
    channels: &[ChannelVector],
) -> Vec<Vec<ChannelVector>> {
    (0..partition.num_clusters())
        .map(|k| {
            partition
                .members(k)
                .into_iter()
                .map(|i| channels[i].clone())
                .collect()
        })
        .collect()
}

fn split_steps(total: u64, rounds: usize) -> Vec<u64> {
    let base = total / rounds as u64;
    let extra = total % rounds as u64;
    (0..rounds as u64)
        .map(|r| base + u64::from(r < extra))
        .collect()
}

pub fn run_comm_pipeline(
    channels: &[ChannelVector],
    geometry: &ArrayGeometry,
    config: &RunConfig,
    runner: &dyn Runner,
    progress: &(dyn Fn(usize, &EpisodeRecord) + Sync),
) -> Result<CommOutcome> {
    config.validate()?;
    let n_c = config.num_comm_beams;
    if n_c == 0 {
        return Err(Error::InvalidArgument("need at least one communication beam".into()));
    }
    if channels.len() < n_c {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} channels cannot form {n_c} clusters",
            channels.len()
        )));
    }
    check_len("array size", config.num_antennas(), geometry.num_antennas())?;
    let codomain = config.codomain()?;
    let probes = probe_beams(geometry, &codomain, config.probe_count)?;
    let features = feature_matrix(&probe_gains(&probes, channels)?)?;
    let mut partition = kmeans(&features, n_c, derive_seed(config.seed, TAG_KMEANS))?;
    let mut clusters = cluster_channels(&partition, channels);

    let mut trainers = (0..n_c)
        .map(|n| {
            let seed = derive_seed(config.seed, TAG_COMM_AGENT + n as u64);
            let env = BeamEnv::new(config.env_config(BeamTask::Comm {
                channels: clusters[n].clone(),
            })?)?;
            Trainer::new(
                env,
                Agent::new(config.agent.clone(), seed)?,
                config.buffering_epochs,
                seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut agent_clusters: Vec<usize> = (0..n_c).collect();
    let mut assignments = Vec::new();

    for (round, steps) in split_steps(config.epochs, config.recluster_rounds)
        .into_iter()
        .enumerate()
    {
        if round > 0 && n_c > 1 {
            partition = kmeans(
                &features,
                n_c,
                derive_seed(config.seed, TAG_KMEANS + round as u64),
            )?;
            clusters = cluster_channels(&partition, channels);
            let beams = trainers
                .iter()
                .map(|t| t.best().map(|(b, _)| b.clone()))
                .collect::<Option<Vec<_>>>()
                .ok_or(Error::Empty("training history"))?;
            let a = assign(&assignment_cost(&beams, &clusters)?)?;
            for (n, t) in trainers.iter_mut().enumerate() {
                t.set_task(BeamTask::Comm {
                    channels: clusters[a.permutation[n]].clone(),
                })?;
            }
            agent_clusters.clone_from(&a.permutation);
            assignments.push(a);
        }
        runner.advance(&mut trainers, steps, progress)?;
    }

    let beams = finish_beams(&trainers, config, TAG_FINE_TUNE)?;
    Ok(CommOutcome {
        partition,
        assignments,
        agent_clusters,
        beams,
        trainers,
    })
}

#[derive(Debug, Clone)]
pub struct SenseOutcome {
    pub targets: Vec<SensingTarget>,
    pub beams: Vec<TrainedBeam>,
    pub trainers: Vec<Trainer>,
}

pub fn run_sense_pipeline(
    scene: &Scene,
    geometry: &ArrayGeometry,
    config: &RunConfig,
    runner: &dyn Runner,
    progress: &(dyn Fn(usize, &EpisodeRecord) + Sync),
) -> Result<SenseOutcome> {
    config.validate()?;
    check_len("array size", config.num_antennas(), geometry.num_antennas())?;
    let targets = sensing_targets(scene, config.num_sense_beams)?;
    run_sense_targets(targets, geometry, config, runner, progress)
}

/// Sensing training for explicit targets.
pub fn run_sense_targets(
    targets: Vec<SensingTarget>,
    geometry: &ArrayGeometry,
    config: &RunConfig,
    runner: &dyn Runner,
    progress: &(dyn Fn(usize, &EpisodeRecord) + Sync),
) -> Result<SenseOutcome> {
    config.validate()?;
    let mut trainers = targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let seed = derive_seed(config.seed, TAG_SENSE_AGENT + i as u64);
            let env = BeamEnv::new(config.env_config(BeamTask::Sense {
                geometry: geometry.clone(),
                aoa: t.aoa,
            })?)?;
            Trainer::new(
                env,
                Agent::new(config.agent.clone(), seed)?,
                config.buffering_epochs,
                seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    runner.advance(&mut trainers, config.epochs, progress)?;
    let beams = finish_beams(&trainers, config, TAG_FINE_TUNE + 1000)?;
    Ok(SenseOutcome {
        targets,
        beams,
        trainers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamRole {
    Comm,
    Sense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookEntry {
    pub role: BeamRole,
    /// Cluster index for communication beams, target index for sensing.
    pub id: usize,
    pub beam: BeamVector,
}

/// Communication beams first, then sensing beams; every phase lies in the
/// codomain.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    codomain: PhaseCodomain,
    num_antennas: usize,
    entries: Vec<CodebookEntry>,
}

impl Codebook {
    pub fn new(codomain: PhaseCodomain, num_antennas: usize, entries: Vec<CodebookEntry>) -> Result<Self> {
        let mut seen_sense = false;
        for e in &entries {
            check_len("codebook beam", num_antennas, e.beam.num_antennas())?;
            if !e.beam.phases().iter().all(|&p| codomain.contains(p)) {
                return Err(Error::InvalidArgument(
                    "codebook phase outside the codomain".into(),
                ));
            }
            match e.role {
                BeamRole::Sense => seen_sense = true,
                BeamRole::Comm if seen_sense => {
                    return Err(Error::InvalidArgument(
                        "communication beams must precede sensing beams".into(),
                    ))
                }
                BeamRole::Comm => {}
            }
        }
        Ok(Codebook {
            codomain,
            num_antennas,
            entries,
        })
    }

    /// Quantizes and assembles trained beams.
    pub fn assemble(
        codomain: PhaseCodomain,
        num_antennas: usize,
        comm: &[(usize, BeamVector)],
        sense: &[(usize, BeamVector)],
    ) -> Result<Self> {
        let entries = comm
            .iter()
            .map(|(id, b)| (BeamRole::Comm, *id, b))
            .chain(sense.iter().map(|(id, b)| (BeamRole::Sense, *id, b)))
            .map(|(role, id, b)| CodebookEntry {
                role,
                id,
                beam: quantize(b, &codomain),
            })
            .collect();
        Codebook::new(codomain, num_antennas, entries)
    }

    pub fn codomain(&self) -> &PhaseCodomain {
        &self.codomain
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn entries(&self) -> &[CodebookEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Codebook indices of the communication beams.
    pub fn comm_indices(&self) -> Vec<usize> {
        self.indices(BeamRole::Comm)
    }

    pub fn sense_indices(&self) -> Vec<usize> {
        self.indices(BeamRole::Sense)
    }

    fn indices(&self, role: BeamRole) -> Vec<usize> {
        (0..self.entries.len())
            .filter(|&i| self.entries[i].role == role)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::{angle_grid, beam_pattern, pattern_peak};
    use crate::scenario::Point;
    use num_complex::Complex64;

    fn tiny(kind: AgentKind, m: usize, m_red: usize) -> RunConfig {
        let mut c = RunConfig::desk(kind, m, m_red);
        c.epochs = 400;
        c.buffering_epochs = 100;
        c.episode_length = 20;
        c.agent.actor_hidden = vec![8];
        c.agent.critic_hidden = vec![8];
        c.agent.selector_hidden = vec![8];
        c.agent.batch_size = 8;
        c.agent.replay_capacity = 400;
        c.agent.curriculum.total_steps = 300;
        c
    }

    fn noop(_: usize, _: &EpisodeRecord) {}

    #[test]
    fn fine_tune_zero_iterations_quantizes() {
        let cd = PhaseCodomain::new(3).unwrap();
        let geom = ArrayGeometry::half_wavelength(4, 0.1).unwrap();
        let task = BeamTask::Sense { geometry: geom, aoa: 0.2 };
        let b = BeamVector::new(vec![0.1, 0.5, -1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, g) = fine_tune(&b, &task, &cd, 0, 0.05, &mut rng).unwrap();
        assert_eq!(out, quantize(&b, &cd));
        assert_eq!(g, task.gain(&out).unwrap());
        let (_, g2) = fine_tune(&b, &task, &cd, 50, 0.5, &mut rng).unwrap();
        assert!(g2 >= g);
    }

    #[test]
    fn codebook_rejects_unquantized() {
        let cd = PhaseCodomain::new(2).unwrap();
        let bad = CodebookEntry {
            role: BeamRole::Comm,
            id: 0,
            beam: BeamVector::new(vec![0.1]).unwrap(),
        };
        assert!(Codebook::new(cd, 1, vec![bad]).is_err());
        let cb = Codebook::assemble(
            cd,
            1,
            &[(0, BeamVector::new(vec![0.1]).unwrap())],
            &[(0, BeamVector::new(vec![3.0]).unwrap())],
        )
        .unwrap();
        assert_eq!(cb.comm_indices(), vec![0]);
        assert_eq!(cb.sense_indices(), vec![1]);
    }

    #[test]
    fn single_cluster_comm_is_deterministic() {
        let geom = ArrayGeometry::half_wavelength(4, 0.1).unwrap();
        let channels: Vec<ChannelVector> = (0..4)
            .map(|k| {
                ChannelVector::new(
                    (0..4)
                        .map(|m| Complex64::from_polar(1.0, 0.3 * (k * m) as f64))
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let mut c = tiny(AgentKind::Td3, 4, 2);
        c.num_comm_beams = 1;
        let a = run_comm_pipeline(&channels, &geom, &c, &SerialRunner, &noop).unwrap();
        let b = run_comm_pipeline(&channels, &geom, &c, &SerialRunner, &noop).unwrap();
        assert!(a.assignments.is_empty());
        assert_eq!(a.beams, b.beams);
        assert_eq!(a.trainers[0].records(), b.trainers[0].records());
        assert_eq!(a.trainers[0].records().len(), 20);
    }

    #[test]
    fn sense_pipeline_beam_count() {
        let geom = ArrayGeometry::half_wavelength(4, 0.1).unwrap();
        let targets = (0..2)
            .map(|i| SensingTarget {
                time_index: i,
                vehicle: 0,
                position: Point::new(1.0, 0.0),
                aoa: 0.1 * i as f64,
            })
            .collect();
        let mut c = tiny(AgentKind::Td3Invase, 4, 2);
        c.fine_tune_iterations = 300;
        c.fine_tune_noise_std = 0.5;
        let out = run_sense_targets(targets, &geom, &c, &SerialRunner, &noop).unwrap();
        assert_eq!(out.beams.len(), 2);
        let rec = &out.trainers[0].records()[0];
        assert!(rec.tpr.is_some() && rec.selected_count.is_some());
        let grid = angle_grid(361);
        let pattern = beam_pattern(&out.beams[0].beam, &geom, &grid).unwrap();
        assert!(pattern_peak(&pattern).is_some());
    }

    #[test]
    fn split_steps_sums() {
        assert_eq!(split_steps(10, 3), vec![4, 3, 3]);
        assert_eq!(split_steps(5, 1), vec![5]);
    }
}
