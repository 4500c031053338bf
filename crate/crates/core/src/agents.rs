//! DDPG, TD3 and TD3-INVASE agents.
//!
//! All three share the actor and the first critic layout, and derive every
//! network and noise stream from one seed through per-role tags, so agents of
//! different kinds built from the same seed start from identical actor and
//! critic weights and draw identical smoothing noise.
//!
//! TD3-INVASE adds twin baselines that see raw actions, a selector that masks
//! the action fed to the critics, and a curriculum on the selection penalty
//! and the target selection ratio.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

// Unused when std is in the dependency graph (its float methods take over).
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::math::{derive_seed, uniform_phase, wrap_angle};
use crate::nn::{soft_update, Activation, Adam, DenseNet};

const PROB_FLOOR: f64 = 1e-6;

const TAG_ACTOR: u64 = 1;
const TAG_CRITIC: u64 = 2;
const TAG_BASELINE: u64 = 5;
const TAG_SELECTOR: u64 = 8;
const TAG_SMOOTHING: u64 = 20;
const TAG_MASK: u64 = 21;
const TAG_EXPLORE: u64 = 22;
const TAG_SAMPLING: u64 = 23;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Ddpg,
    Td3,
    Td3Invase,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Ddpg, AgentKind::Td3, AgentKind::Td3Invase];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Ddpg => "ddpg",
            AgentKind::Td3 => "td3",
            AgentKind::Td3Invase => "td3-invase",
        }
    }

    fn num_critics(self) -> usize {
        match self {
            AgentKind::Ddpg => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown agent kind `{s}`")))
    }
}

/// Piecewise-linear ramps: `λ` rises from `lambda_start` to `lambda_end` and
/// `p_r` falls from `p_r_start` to `p_r_end` over the first
/// `ramp_fraction * total_steps` updates, then both hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSchedule {
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub p_r_start: f64,
    pub p_r_end: f64,
    pub ramp_fraction: f64,
    pub total_steps: u64,
    pub n_rounds: usize,
}

impl CurriculumSchedule {
    /// Defaults for `m` relevant and `m_red` redundant dimensions: the ratio
    /// ends at the relevant fraction.
    pub fn new(m: usize, m_red: usize, total_steps: u64) -> Self {
        let p_r_end = m as f64 / (m + m_red).max(1) as f64;
        CurriculumSchedule {
            lambda_start: 0.0,
            lambda_end: 1.0,
            p_r_start: p_r_end.max(0.9),
            p_r_end,
            ramp_fraction: 0.5,
            total_steps,
            n_rounds: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.lambda_start,
            self.lambda_end,
            self.p_r_start,
            self.p_r_end,
            self.ramp_fraction,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("curriculum"));
        }
        if self.lambda_end < self.lambda_start || self.lambda_start < 0.0 {
            return Err(Error::InvalidArgument(
                "penalty must start nonnegative and not decrease".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_r_end)
            || !(0.0..=1.0).contains(&self.p_r_start)
            || self.p_r_start < self.p_r_end
        {
            return Err(Error::InvalidArgument(
                "selection ratio must lie in [0, 1] and not increase".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.ramp_fraction) {
            return Err(Error::InvalidArgument("ramp fraction must lie in [0, 1]".into()));
        }
        if self.n_rounds == 0 {
            return Err(Error::InvalidArgument("need at least one selection round".into()));
        }
        Ok(())
    }

    fn progress(&self, step: u64) -> f64 {
        let ramp = (self.ramp_fraction * self.total_steps as f64).ceil();
        if ramp <= 0.0 {
            1.0
        } else {
            (step as f64 / ramp).min(1.0)
        }
    }

    pub fn lambda(&self, step: u64) -> f64 {
        let t = self.progress(step);
        self.lambda_start + t * (self.lambda_end - self.lambda_start)
    }

    pub fn p_r(&self, step: u64) -> f64 {
        let t = self.progress(step);
        self.p_r_start + t * (self.p_r_end - self.p_r_start)
    }
}

/// How phases are presented to the networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputEncoding {
    /// One input per phase, in radians; masked entries are zero.
    #[default]
    Raw,
    /// `(cos, sin)` per phase, so `-π` and `π` coincide; masked entries are
    /// `(0, 0)`.
    Periodic,
}

impl InputEncoding {
    /// Network inputs per phase.
    pub fn width(self) -> usize {
        match self {
            InputEncoding::Raw => 1,
            InputEncoding::Periodic => 2,
        }
    }

    /// Encoding implied by a network input of `inputs` values for
    /// `per_row` phases.
    pub fn infer(inputs: usize, per_row: usize) -> Option<Self> {
        [InputEncoding::Raw, InputEncoding::Periodic]
            .into_iter()
            .find(|e| e.width() * per_row == inputs)
    }

    /// Encodes a flat buffer of phases; `mask` (if given) is repeated over
    /// the buffer.
    pub fn encode(self, values: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
        let keep = |i: usize| mask.is_none_or(|m| m[i % m.len()]);
        match self {
            InputEncoding::Raw => values
                .iter()
                .enumerate()
                .map(|(i, &v)| if keep(i) { v } else { 0.0 })
                .collect(),
            InputEncoding::Periodic => {
                let mut out = Vec::with_capacity(2 * values.len());
                for (i, &v) in values.iter().enumerate() {
                    if keep(i) {
                        out.push(v.cos());
                        out.push(v.sin());
                    } else {
                        out.extend_from_slice(&[0.0, 0.0]);
                    }
                }
                out
            }
        }
    }

    /// Chains a gradient with respect to the encoding back to the phases.
    fn chain(self, values: &[f64], grad: &[f64], mask: &[bool]) -> Vec<f64> {
        match self {
            InputEncoding::Raw => values
                .iter()
                .enumerate()
                .map(|(i, _)| if mask[i % mask.len()] { grad[i] } else { 0.0 })
                .collect(),
            InputEncoding::Periodic => values
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if mask[i % mask.len()] {
                        -v.sin() * grad[2 * i] + v.cos() * grad[2 * i + 1]
                    } else {
                        0.0
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub num_antennas: usize,
    pub num_redundant: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub selector_hidden: Vec<usize>,
    #[serde(default)]
    pub input_encoding: InputEncoding,
    /// Subtract the batch mean from the selector weights before the
    /// likelihood step; the expected gradient is unchanged.
    #[serde(default = "default_true")]
    pub center_selector_weights: bool,
    pub gamma: f64,
    pub tau: f64,
    pub smoothing_std: f64,
    pub smoothing_clip: f64,
    pub explore_std: f64,
    pub policy_delay: u32,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub selector_lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub curriculum: CurriculumSchedule,
}

fn default_true() -> bool {
    true
}

impl AgentConfig {
    /// Full-size layout: actor hidden `2 × 16M`, critics and baselines
    /// `2 × 32M`, selector `2 × 100`.
    pub fn new(kind: AgentKind, m: usize, m_red: usize, total_steps: u64) -> Self {
        AgentConfig {
            kind,
            num_antennas: m,
            num_redundant: m_red,
            actor_hidden: vec![16 * m; 2],
            critic_hidden: vec![32 * m; 2],
            selector_hidden: vec![100; 2],
            input_encoding: InputEncoding::Raw,
            center_selector_weights: true,
            gamma: 0.99,
            tau: 0.005,
            smoothing_std: 0.2,
            smoothing_clip: 0.5,
            explore_std: 0.1 * PI,
            policy_delay: 2,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            selector_lr: 1e-3,
            batch_size: 1024,
            replay_capacity: total_steps.max(1) as usize,
            curriculum: CurriculumSchedule::new(m, m_red, total_steps),
        }
    }

    /// Action (and state) dimension `d = M + M_Red`.
    pub fn dim(&self) -> usize {
        self.num_antennas + self.num_redundant
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(Error::InvalidArgument("need at least one antenna".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidArgument("gamma and tau must lie in [0, 1]".into()));
        }
        let nonneg = [self.smoothing_std, self.smoothing_clip, self.explore_std];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("noise scales must be nonnegative".into()));
        }
        let rates = [self.actor_lr, self.critic_lr, self.selector_lr];
        if rates.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("learning rates must be positive".into()));
        }
        if self.policy_delay == 0 || self.batch_size == 0 || self.replay_capacity == 0 {
            return Err(Error::InvalidArgument(
                "policy delay, batch size and replay capacity must be positive".into(),
            ));
        }
        self.curriculum.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// A minibatch stored as flat row-major buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
}

impl Batch {
    pub fn from_transitions(items: &[Transition]) -> Result<Self> {
        let first = items.first().ok_or(Error::Empty("batch"))?;
        let dim = first.state.len();
        let mut batch = Batch {
            size: items.len(),
            dim,
            states: Vec::with_capacity(items.len() * dim),
            actions: Vec::with_capacity(items.len() * dim),
            rewards: Vec::with_capacity(items.len()),
            next_states: Vec::with_capacity(items.len() * dim),
        };
        for t in items {
            check_len("state", dim, t.state.len())?;
            check_len("action", dim, t.action.len())?;
            check_len("next state", dim, t.next_state.len())?;
            batch.states.extend_from_slice(&t.state);
            batch.actions.extend_from_slice(&t.action);
            batch.rewards.push(t.reward);
            batch.next_states.extend_from_slice(&t.next_state);
        }
        Ok(batch)
    }
}

/// Fixed-capacity ring of transitions; once full, the oldest is overwritten.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    dim: usize,
    len: usize,
    head: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "replay capacity and dimension must be positive".into(),
            ));
        }
        Ok(ReplayBuffer {
            capacity,
            dim,
            len: 0,
            head: 0,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, state: &[f64], action: &[f64], reward: f64, next_state: &[f64]) -> Result<()> {
        let d = self.dim;
        check_len("state", d, state.len())?;
        check_len("action", d, action.len())?;
        check_len("next state", d, next_state.len())?;
        if self.len < self.capacity {
            self.states.extend_from_slice(state);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.next_states.extend_from_slice(next_state);
            self.len += 1;
        } else {
            let i = self.head;
            self.states[i * d..(i + 1) * d].copy_from_slice(state);
            self.actions[i * d..(i + 1) * d].copy_from_slice(action);
            self.rewards[i] = reward;
            self.next_states[i * d..(i + 1) * d].copy_from_slice(next_state);
        }
        self.head = (self.head + 1) % self.capacity;
        Ok(())
    }

    pub fn get(&self, i: usize) -> Option<Transition> {
        (i < self.len).then(|| {
            let d = self.dim;
            Transition {
                state: self.states[i * d..(i + 1) * d].to_vec(),
                action: self.actions[i * d..(i + 1) * d].to_vec(),
                reward: self.rewards[i],
                next_state: self.next_states[i * d..(i + 1) * d].to_vec(),
            }
        })
    }

    /// Uniform sampling with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Batch> {
        if size == 0 {
            return Err(Error::Empty("batch"));
        }
        if self.len < size {
            return Err(Error::InsufficientBuffer {
                needed: size,
                have: self.len,
            });
        }
        let d = self.dim;
        let mut batch = Batch {
            size,
            dim: d,
            states: Vec::with_capacity(size * d),
            actions: Vec::with_capacity(size * d),
            rewards: Vec::with_capacity(size),
            next_states: Vec::with_capacity(size * d),
        };
        for _ in 0..size {
            let i = rng.random_range(0..self.len);
            batch.states.extend_from_slice(&self.states[i * d..(i + 1) * d]);
            batch.actions.extend_from_slice(&self.actions[i * d..(i + 1) * d]);
            batch.rewards.push(self.rewards[i]);
            batch.next_states.extend_from_slice(&self.next_states[i * d..(i + 1) * d]);
        }
        Ok(batch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    /// Bernoulli sampling from the selection probabilities.
    Train,
    /// Threshold at 0.5.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMask {
    /// Combined mask after all rounds.
    pub bits: Vec<bool>,
    /// First-round selection probabilities.
    pub probs: Vec<f64>,
    /// Combined mask after each round; each is a subset of the previous one.
    pub rounds: Vec<Vec<bool>>,
}

impl SelectionMask {
    pub fn selected_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

fn draw_bits<R: Rng + ?Sized>(probs: &[f64], mode: MaskMode, rng: &mut R) -> Vec<bool> {
    match mode {
        MaskMode::Eval => probs.iter().map(|&p| p >= 0.5).collect(),
        MaskMode::Train => probs
            .iter()
            .map(|&p| rng.random::<f64>() < p)
            .collect(),
    }
}

/// Interleaves `batch` rows of widths `da` and `db`.
fn concat_rows(a: &[f64], b: &[f64], batch: usize, da: usize, db: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * (da + db));
    for n in 0..batch {
        out.extend_from_slice(&a[n * da..(n + 1) * da]);
        out.extend_from_slice(&b[n * db..(n + 1) * db]);
    }
    out
}

/// Batched coarse-to-fine selection. Round `i + 1` feeds the selector the
/// action masked by the combined mask of round `i`; masks AND together.
/// Returns the combined mask and, per round, the input and the round's own
/// bits (needed for the likelihood gradient).
#[allow(clippy::too_many_arguments)]
fn select_batch<R: Rng + ?Sized>(
    selector: &DenseNet,
    encoding: InputEncoding,
    states: &[f64],
    actions: &[f64],
    batch: usize,
    mode: MaskMode,
    n_rounds: usize,
    rng: &mut R,
) -> Result<(Vec<bool>, Vec<Round>)> {
    let d = actions.len() / batch;
    let w = d * encoding.width();
    let encoded_states = encoding.encode(states, None);
    let mut combined = vec![true; batch * d];
    let mut rounds = Vec::with_capacity(n_rounds);
    for _ in 0..n_rounds {
        let masked = encoding.encode(actions, Some(&combined));
        let input = concat_rows(&encoded_states, &masked, batch, w, w);
        let probs = selector.predict(&input, batch)?;
        let bits = draw_bits(&probs, mode, rng);
        for (c, &b) in combined.iter_mut().zip(&bits) {
            *c &= b;
        }
        rounds.push(Round { input, probs, bits });
    }
    Ok((combined, rounds))
}

struct Round {
    input: Vec<f64>,
    probs: Vec<f64>,
    bits: Vec<bool>,
}

/// Selection mask of a single `(state, action)` pair.
pub fn select_mask<R: Rng + ?Sized>(
    selector: &DenseNet,
    state: &[f64],
    action: &[f64],
    mode: MaskMode,
    n_rounds: usize,
    rng: &mut R,
) -> Result<SelectionMask> {
    check_len("state", action.len(), state.len())?;
    let d = action.len();
    let encoding = InputEncoding::infer(selector.input_dim(), 2 * d).ok_or(Error::Dimension {
        what: "selector input",
        expected: 2 * d,
        found: selector.input_dim(),
    })?;
    let w = d * encoding.width();
    let mut bits = vec![true; d];
    let mut probs = Vec::new();
    let mut rounds = Vec::with_capacity(n_rounds);
    for r in 0..n_rounds.max(1) {
        let masked = encoding.encode(action, Some(&bits));
        let input = concat_rows(&encoding.encode(state, None), &masked, 1, w, w);
        let p = selector.predict(&input, 1)?;
        let round_bits = draw_bits(&p, mode, rng);
        for (c, &b) in bits.iter_mut().zip(&round_bits) {
            *c &= b;
        }
        if r == 0 {
            probs = p;
        }
        rounds.push(bits.clone());
    }
    Ok(SelectionMask {
        bits,
        probs,
        rounds,
    })
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// `Σ_i [m_i log p_i + (1 - m_i) log(1 - p_i)]` with probabilities clamped
/// away from 0 and 1.
pub fn mask_log_likelihood(probs: &[f64], bits: &[bool]) -> f64 {
    probs
        .iter()
        .zip(bits)
        .map(|(&p, &m)| {
            let p = clamp_prob(p);
            if m {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum()
}

/// Gradient of [`mask_log_likelihood`] with respect to the probabilities;
/// zero where the clamp is active.
pub fn mask_log_likelihood_grad(probs: &[f64], bits: &[bool]) -> Vec<f64> {
    probs
        .iter()
        .zip(bits)
        .map(|(&p, &m)| {
            if !(PROB_FLOOR..=1.0 - PROB_FLOOR).contains(&p) {
                0.0
            } else if m {
                1.0 / p
            } else {
                -1.0 / (1.0 - p)
            }
        })
        .collect()
}

/// A live network with its target copy and optimizer.
#[derive(Debug, Clone)]
pub struct NetSlot {
    pub net: DenseNet,
    pub target: DenseNet,
    optimizer: Adam,
}

impl NetSlot {
    fn new(net: DenseNet, learning_rate: f64) -> Self {
        let optimizer = Adam::new(&net, learning_rate);
        NetSlot {
            target: net.clone(),
            net,
            optimizer,
        }
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    /// One MSE step towards `targets`; returns the predictions made before
    /// the step.
    fn regress(&mut self, input: &[f64], batch: usize, targets: &[f64]) -> Result<Vec<f64>> {
        let pred = self.net.forward_batch(input, batch)?;
        let scale = 2.0 / batch as f64;
        let upstream: Vec<f64> = pred
            .iter()
            .zip(targets)
            .map(|(q, y)| scale * (q - y))
            .collect();
        let back = self.net.backward(&upstream)?;
        if !back.params.is_finite() {
            return Err(Error::NonFinite("regression gradient"));
        }
        self.optimizer.apply_update(&mut self.net, &back.params)?;
        Ok(pred)
    }

    fn sync_target(&mut self, tau: f64) -> Result<()> {
        soft_update(&mut self.target, &self.net, tau)
    }
}

/// Losses measured before the update they drive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossReport {
    /// Mean squared TD error, averaged over the critics.
    pub critic_loss: f64,
    pub baseline_loss: Option<f64>,
    /// Mean of `weight * log-likelihood` over the batch.
    pub selector_objective: Option<f64>,
    /// Negated mean critic value of the actor's actions; present on steps
    /// that update the actor.
    pub actor_objective: Option<f64>,
    pub critic_targets: Vec<f64>,
    pub baseline_targets: Vec<f64>,
    /// Per-sample selector weights `(l_c - l_b) + λ |Σm - d p_r|`.
    pub selector_weights: Vec<f64>,
    /// Mean size of the sampled training masks.
    pub mean_selected: Option<f64>,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        self.critic_loss.is_finite()
            && self.baseline_loss.is_none_or(f64::is_finite)
            && self.selector_objective.is_none_or(f64::is_finite)
            && self.actor_objective.is_none_or(f64::is_finite)
    }
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    actor: NetSlot,
    critics: Vec<NetSlot>,
    baselines: Vec<NetSlot>,
    selector: Option<NetSlot>,
    updates: u64,
    smoothing_rng: ChaCha8Rng,
    mask_rng: ChaCha8Rng,
    explore_rng: ChaCha8Rng,
    sampling_rng: ChaCha8Rng,
    mask_override: Option<Vec<bool>>,
}

fn role_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

impl Agent {
    pub fn new(config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.dim();
        let w = d * config.input_encoding.width();
        let actor = DenseNet::mlp(
            w,
            &config.actor_hidden,
            d,
            Activation::TanhScaled,
            PI,
            &mut role_rng(seed, TAG_ACTOR),
        )?;
        let value_net = |tag: u64| {
            DenseNet::mlp(
                2 * w,
                &config.critic_hidden,
                1,
                Activation::Linear,
                1.0,
                &mut role_rng(seed, tag),
            )
        };
        let critics = (0..config.kind.num_critics() as u64)
            .map(|i| Ok(NetSlot::new(value_net(TAG_CRITIC + i)?, config.critic_lr)))
            .collect::<Result<Vec<_>>>()?;
        let (baselines, selector) = if config.kind == AgentKind::Td3Invase {
            let baselines = (0..2)
                .map(|i| Ok(NetSlot::new(value_net(TAG_BASELINE + i)?, config.critic_lr)))
                .collect::<Result<Vec<_>>>()?;
            let mut selector = DenseNet::mlp(
                2 * w,
                &config.selector_hidden,
                d,
                Activation::Sigmoid,
                1.0,
                &mut role_rng(seed, TAG_SELECTOR),
            )?;
            // Output bias starts at the logit of the initial selection ratio.
            let p0 = clamp_prob(config.curriculum.p_r_start);
            let mut params = selector.flat_params();
            let tail = params.len() - d;
            params[tail..].fill((p0 / (1.0 - p0)).ln());
            selector.set_flat_params(&params)?;
            (baselines, Some(NetSlot::new(selector, config.selector_lr)))
        } else {
            (Vec::new(), None)
        };
        Ok(Agent {
            actor: NetSlot::new(actor, config.actor_lr),
            critics,
            baselines,
            selector,
            updates: 0,
            smoothing_rng: role_rng(seed, TAG_SMOOTHING),
            mask_rng: role_rng(seed, TAG_MASK),
            explore_rng: role_rng(seed, TAG_EXPLORE),
            sampling_rng: role_rng(seed, TAG_SAMPLING),
            mask_override: None,
            config,
        })
    }

    /// Reassembles an agent from saved live and target networks. Optimizer
    /// moments restart from zero.
    pub fn from_networks(
        config: AgentConfig,
        seed: u64,
        networks: &[(NetRole, DenseNet, DenseNet)],
        updates: u64,
    ) -> Result<Self> {
        let mut agent = Agent::new(config, seed)?;
        for (role, net, target) in networks {
            let slot = agent
                .slot_mut(*role)
                .ok_or(Error::ArchitectureMismatch)?;
            if !slot.net.same_architecture(net) || !slot.net.same_architecture(target) {
                return Err(Error::ArchitectureMismatch);
            }
            slot.net = net.clone();
            slot.target = target.clone();
        }
        agent.updates = updates;
        Ok(agent)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn kind(&self) -> AgentKind {
        self.config.kind
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn update_count(&self) -> u64 {
        self.updates
    }

    /// Current `(λ, p_r)` of the curriculum.
    pub fn curriculum_state(&self) -> (f64, f64) {
        let c = &self.config.curriculum;
        (c.lambda(self.updates), c.p_r(self.updates))
    }

    pub fn roles(&self) -> Vec<NetRole> {
        let mut roles = vec![NetRole::Actor];
        roles.extend((0..self.critics.len()).map(NetRole::Critic));
        roles.extend((0..self.baselines.len()).map(NetRole::Baseline));
        if self.selector.is_some() {
            roles.push(NetRole::Selector);
        }
        roles
    }

    pub fn slot(&self, role: NetRole) -> Option<&NetSlot> {
        match role {
            NetRole::Actor => Some(&self.actor),
            NetRole::Critic(i) => self.critics.get(i),
            NetRole::Baseline(i) => self.baselines.get(i),
            NetRole::Selector => self.selector.as_ref(),
        }
    }

    pub fn slot_mut(&mut self, role: NetRole) -> Option<&mut NetSlot> {
        match role {
            NetRole::Actor => Some(&mut self.actor),
            NetRole::Critic(i) => self.critics.get_mut(i),
            NetRole::Baseline(i) => self.baselines.get_mut(i),
            NetRole::Selector => self.selector.as_mut(),
        }
    }

    /// Forces every selector mask (live and target, train and eval) to the
    /// given bits. Test hook.
    pub fn set_mask_override(&mut self, mask: Option<Vec<bool>>) -> Result<()> {
        if let Some(m) = &mask {
            check_len("mask override", self.dim(), m.len())?;
        }
        self.mask_override = mask;
        Ok(())
    }

    /// Actor output, plus Gaussian exploration noise if `explore`, wrapped
    /// into `(-π, π]`.
    pub fn act(&mut self, state: &[f64], explore: bool) -> Result<Vec<f64>> {
        let mut action = self.raw_policy(state)?;
        if explore {
            let std = self.config.explore_std;
            for a in &mut action {
                let z: f64 = self.explore_rng.sample(StandardNormal);
                *a += std * z;
            }
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("actor output"));
        }
        Ok(action.into_iter().map(wrap_angle).collect())
    }

    /// Noise-free action; identical to `act(state, false)`.
    pub fn policy(&self, state: &[f64]) -> Result<Vec<f64>> {
        let action = self.raw_policy(state)?;
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("actor output"));
        }
        Ok(action.into_iter().map(wrap_angle).collect())
    }

    fn raw_policy(&self, state: &[f64]) -> Result<Vec<f64>> {
        check_len("state", self.dim(), state.len())?;
        let enc = self.config.input_encoding;
        self.actor.net.predict(&enc.encode(state, None), 1)
    }

    /// Uniform random action, used while the replay buffer is being filled.
    pub fn random_action(&mut self) -> Vec<f64> {
        (0..self.dim())
            .map(|_| uniform_phase(&mut self.explore_rng))
            .collect()
    }

    /// Selection mask for one `(state, action)` pair; all ones for agents
    /// without a selector.
    pub fn select_mask(
        &mut self,
        state: &[f64],
        action: &[f64],
        mode: MaskMode,
    ) -> Result<SelectionMask> {
        let d = self.dim();
        check_len("action", d, action.len())?;
        if let Some(m) = &self.mask_override {
            return Ok(SelectionMask {
                bits: m.clone(),
                probs: m.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
                rounds: vec![m.clone()],
            });
        }
        match &self.selector {
            Some(sel) => select_mask(
                &sel.net,
                state,
                action,
                mode,
                self.config.curriculum.n_rounds,
                &mut self.mask_rng,
            ),
            None => Ok(SelectionMask {
                bits: vec![true; d],
                probs: vec![1.0; d],
                rounds: vec![vec![true; d]],
            }),
        }
    }

    fn batch_mask(
        &mut self,
        target: bool,
        states: &[f64],
        actions: &[f64],
        batch: usize,
        mode: MaskMode,
    ) -> Result<(Vec<bool>, Vec<Round>)> {
        if let Some(m) = &self.mask_override {
            let combined: Vec<bool> = m.iter().copied().cycle().take(batch * m.len()).collect();
            return Ok((combined, Vec::new()));
        }
        let sel = self.selector.as_ref().ok_or(Error::ArchitectureMismatch)?;
        let net = if target { &sel.target } else { &sel.net };
        select_batch(
            net,
            self.config.input_encoding,
            states,
            actions,
            batch,
            mode,
            self.config.curriculum.n_rounds,
            &mut self.mask_rng,
        )
    }

    /// Samples a batch from `buffer` and runs the update rule of this agent's
    /// kind.
    pub fn train_step(&mut self, buffer: &ReplayBuffer) -> Result<LossReport> {
        let batch = buffer.sample(self.config.batch_size, &mut self.sampling_rng)?;
        self.update(&batch)
    }

    pub fn update(&mut self, batch: &Batch) -> Result<LossReport> {
        match self.config.kind {
            AgentKind::Ddpg => self.ddpg_update(batch),
            AgentKind::Td3 => self.td3_update(batch),
            AgentKind::Td3Invase => self.td_swar_update(batch),
        }
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        let d = self.dim();
        if batch.size == 0 {
            return Err(Error::Empty("batch"));
        }
        check_len("batch dimension", d, batch.dim)?;
        check_len("batch states", batch.size * d, batch.states.len())?;
        check_len("batch actions", batch.size * d, batch.actions.len())?;
        check_len("batch rewards", batch.size, batch.rewards.len())?;
        check_len("batch next states", batch.size * d, batch.next_states.len())
    }

    /// Target-policy action with clipped Gaussian smoothing, clamped into
    /// `[-π, π]` and wrapped.
    fn smoothed_target_action(&mut self, next_states: &[f64], batch: usize) -> Result<Vec<f64>> {
        let enc = self.config.input_encoding;
        let mut a = self.actor.target.predict(&enc.encode(next_states, None), batch)?;
        let (std, clip) = (self.config.smoothing_std, self.config.smoothing_clip);
        for v in &mut a {
            let z: f64 = self.smoothing_rng.sample(StandardNormal);
            *v = wrap_angle((*v + (std * z).clamp(-clip, clip)).clamp(-PI, PI));
        }
        Ok(a)
    }

    fn twin_min_target(
        slots: &[NetSlot],
        input: &[f64],
        batch: usize,
        rewards: &[f64],
        gamma: f64,
    ) -> Result<Vec<f64>> {
        let mut q = slots[0].target.predict(input, batch)?;
        for s in &slots[1..] {
            let q2 = s.target.predict(input, batch)?;
            for (a, b) in q.iter_mut().zip(q2) {
                *a = a.min(b);
            }
        }
        Ok(rewards
            .iter()
            .zip(&q)
            .map(|(r, q)| r + gamma * q)
            .collect())
    }

    /// Regresses every slot onto `targets`; returns per-sample squared
    /// errors averaged over the slots.
    fn regress_all(
        slots: &mut [NetSlot],
        input: &[f64],
        batch: usize,
        targets: &[f64],
    ) -> Result<Vec<f64>> {
        let mut per_sample = vec![0.0; batch];
        for slot in slots.iter_mut() {
            let pred = slot.regress(input, batch, targets)?;
            for ((e, q), y) in per_sample.iter_mut().zip(&pred).zip(targets) {
                *e += (q - y) * (q - y);
            }
        }
        let k = slots.len() as f64;
        per_sample.iter_mut().for_each(|e| *e /= k);
        Ok(per_sample)
    }

    /// Deterministic policy gradient through the first critic on
    /// `(s, m ⊙ π(s))`, where `m` is the evaluation-mode mask (all ones for
    /// agents without a selector).
    fn actor_step(&mut self, states: &[f64], batch: usize) -> Result<f64> {
        let d = self.dim();
        let enc = self.config.input_encoding;
        let w = d * enc.width();
        let actions = self
            .actor
            .net
            .forward_batch(&enc.encode(states, None), batch)?;
        let mask = if self.selector.is_some() || self.mask_override.is_some() {
            self.batch_mask(false, states, &actions, batch, MaskMode::Eval)?.0
        } else {
            vec![true; batch * d]
        };
        let input = self.value_input(states, &actions, Some(&mask), batch);
        let critic = &mut self.critics[0].net;
        let q = critic.forward_batch(&input, batch)?;
        let upstream = vec![-1.0 / batch as f64; batch];
        let back = critic.backward(&upstream)?;
        let mut grad_encoded = Vec::with_capacity(batch * w);
        for n in 0..batch {
            grad_encoded.extend_from_slice(&back.input[n * 2 * w + w..(n + 1) * 2 * w]);
        }
        let grad_a = enc.chain(&actions, &grad_encoded, &mask);
        let actor_back = self.actor.net.backward(&grad_a)?;
        if !actor_back.params.is_finite() {
            return Err(Error::NonFinite("actor gradient"));
        }
        self.actor
            .optimizer
            .apply_update(&mut self.actor.net, &actor_back.params)?;
        Ok(-q.iter().sum::<f64>() / batch as f64)
    }

    /// Value-network input rows `enc(s) ‖ enc(m ⊙ a)`.
    fn value_input(&self, states: &[f64], actions: &[f64], mask: Option<&[bool]>, batch: usize) -> Vec<f64> {
        let enc = self.config.input_encoding;
        let w = self.dim() * enc.width();
        concat_rows(
            &enc.encode(states, None),
            &enc.encode(actions, mask),
            batch,
            w,
            w,
        )
    }

    fn sync_targets(&mut self) -> Result<()> {
        let tau = self.config.tau;
        self.actor.sync_target(tau)?;
        for s in self
            .critics
            .iter_mut()
            .chain(self.baselines.iter_mut())
            .chain(self.selector.iter_mut())
        {
            s.sync_target(tau)?;
        }
        Ok(())
    }

    fn finish(&mut self, report: &mut LossReport, states: &[f64], batch: usize) -> Result<()> {
        let delay = match self.config.kind {
            AgentKind::Ddpg => 1,
            _ => self.config.policy_delay as u64,
        };
        self.updates += 1;
        if self.updates.is_multiple_of(delay) {
            report.actor_objective = Some(self.actor_step(states, batch)?);
            self.sync_targets()?;
        }
        if !report.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        Ok(())
    }

    /// Single critic, no target smoothing, actor and targets every call.
    pub fn ddpg_update(&mut self, batch: &Batch) -> Result<LossReport> {
        self.check_batch(batch)?;
        let n = batch.size;
        let enc = self.config.input_encoding;
        let a2 = self
            .actor
            .target
            .predict(&enc.encode(&batch.next_states, None), n)?;
        let x2 = self.value_input(&batch.next_states, &a2, None, n);
        let y = Self::twin_min_target(
            &self.critics[..1],
            &x2,
            n,
            &batch.rewards,
            self.config.gamma,
        )?;
        let x = self.value_input(&batch.states, &batch.actions, None, n);
        let err = Self::regress_all(&mut self.critics[..1], &x, n, &y)?;
        let mut report = LossReport {
            critic_loss: err.iter().sum::<f64>() / n as f64,
            critic_targets: y,
            ..LossReport::default()
        };
        self.finish(&mut report, &batch.states, n)?;
        Ok(report)
    }

    /// Twin critics with clipped double-Q targets and target smoothing.
    pub fn td3_update(&mut self, batch: &Batch) -> Result<LossReport> {
        self.check_batch(batch)?;
        if self.critics.len() < 2 {
            return Err(Error::ArchitectureMismatch);
        }
        let n = batch.size;
        let a2 = self.smoothed_target_action(&batch.next_states, n)?;
        let x2 = self.value_input(&batch.next_states, &a2, None, n);
        let y = Self::twin_min_target(&self.critics, &x2, n, &batch.rewards, self.config.gamma)?;
        let x = self.value_input(&batch.states, &batch.actions, None, n);
        let err = Self::regress_all(&mut self.critics, &x, n, &y)?;
        let mut report = LossReport {
            critic_loss: err.iter().sum::<f64>() / n as f64,
            critic_targets: y,
            ..LossReport::default()
        };
        self.finish(&mut report, &batch.states, n)?;
        Ok(report)
    }

    /// TD3 with a selector: critics see masked actions, baselines raw
    /// actions, and the loss gap drives the selector by policy gradient.
    pub fn td_swar_update(&mut self, batch: &Batch) -> Result<LossReport> {
        self.check_batch(batch)?;
        if self.selector.is_none() || self.baselines.len() < 2 || self.critics.len() < 2 {
            return Err(Error::ArchitectureMismatch);
        }
        let (n, d) = (batch.size, self.dim());
        let gamma = self.config.gamma;
        let (lambda, p_r) = self.curriculum_state();

        let a2 = self.smoothed_target_action(&batch.next_states, n)?;
        let (m2, _) = self.batch_mask(true, &batch.next_states, &a2, n, MaskMode::Eval)?;
        let xc2 = self.value_input(&batch.next_states, &a2, Some(&m2), n);
        let xb2 = self.value_input(&batch.next_states, &a2, None, n);
        let y_c = Self::twin_min_target(&self.critics, &xc2, n, &batch.rewards, gamma)?;
        let y_b = Self::twin_min_target(&self.baselines, &xb2, n, &batch.rewards, gamma)?;

        let (m, rounds) = self.batch_mask(false, &batch.states, &batch.actions, n, MaskMode::Train)?;
        let xc = self.value_input(&batch.states, &batch.actions, Some(&m), n);
        let xb = self.value_input(&batch.states, &batch.actions, None, n);
        let l_c = Self::regress_all(&mut self.critics, &xc, n, &y_c)?;
        let l_b = Self::regress_all(&mut self.baselines, &xb, n, &y_b)?;

        let counts: Vec<f64> = m
            .chunks(d)
            .map(|row| row.iter().filter(|&&b| b).count() as f64)
            .collect();
        let target_count = d as f64 * p_r;
        let weights: Vec<f64> = (0..n)
            .map(|i| (l_c[i] - l_b[i]) + lambda * (counts[i] - target_count).abs())
            .collect();

        let objective = self.selector_step(&rounds, &weights, n, d)?;

        let mut report = LossReport {
            critic_loss: l_c.iter().sum::<f64>() / n as f64,
            baseline_loss: Some(l_b.iter().sum::<f64>() / n as f64),
            selector_objective: Some(objective),
            critic_targets: y_c,
            baseline_targets: y_b,
            selector_weights: weights,
            mean_selected: Some(counts.iter().sum::<f64>() / n as f64),
            ..LossReport::default()
        };
        self.finish(&mut report, &batch.states, n)?;
        Ok(report)
    }

    /// Descends `mean_n w_n · log G(m_n)` summed over the selection rounds.
    fn selector_step(&mut self, rounds: &[Round], weights: &[f64], n: usize, d: usize) -> Result<f64> {
        let offset = if self.config.center_selector_weights {
            weights.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let sel = self.selector.as_mut().ok_or(Error::ArchitectureMismatch)?;
        let mut objective = 0.0;
        let mut total: Option<crate::nn::Gradients> = None;
        for round in rounds {
            sel.net.forward_batch(&round.input, n)?;
            let mut upstream = Vec::with_capacity(n * d);
            for (i, &weight) in weights.iter().enumerate().take(n) {
                let p = &round.probs[i * d..(i + 1) * d];
                let b = &round.bits[i * d..(i + 1) * d];
                let w = (weight - offset) / n as f64;
                objective += w * mask_log_likelihood(p, b);
                upstream.extend(mask_log_likelihood_grad(p, b).into_iter().map(|g| w * g));
            }
            let back = sel.net.backward(&upstream)?;
            match &mut total {
                Some(t) => t.accumulate(&back.params)?,
                None => total = Some(back.params),
            }
        }
        if let Some(grads) = total {
            if !grads.is_finite() {
                return Err(Error::NonFinite("selector gradient"));
            }
            sel.optimizer.apply_update(&mut sel.net, &grads)?;
        }
        Ok(objective)
    }
}

/// Role of a network inside an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "role", content = "index")]
pub enum NetRole {
    Actor,
    Critic(usize),
    Baseline(usize),
    Selector,
}

impl NetRole {
    /// Stable file-name stem, e.g. `critic1`.
    pub fn name(self) -> String {
        match self {
            NetRole::Actor => "actor".into(),
            NetRole::Critic(i) => alloc::format!("critic{}", i + 1),
            NetRole::Baseline(i) => alloc::format!("baseline{}", i + 1),
            NetRole::Selector => "selector".into(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let indexed = |prefix: &str| {
            name.strip_prefix(prefix)
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|&i| i >= 1)
                .map(|i| i - 1)
        };
        match name {
            "actor" => Some(NetRole::Actor),
            "selector" => Some(NetRole::Selector),
            _ => indexed("critic")
                .map(NetRole::Critic)
                .or_else(|| indexed("baseline").map(NetRole::Baseline)),
        }
    }
}
