//! Learned lane-change decision: a Q-network over {keep lane, initiate}.
//!
//! Only the decision is learned; longitudinal control stays IDM. An
//! `initiate` decision commits to the whole maneuver, so it is stored as a
//! single transition whose reward is the discounted reward of the maneuver
//! and whose successor is terminal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ego_longitudinal, EgoMode};
use crate::neural::{adam_step, soft_update, Activation, AdamState, Mlp};
use crate::replay::ReplayBuffer;
use crate::scenario::{
    sample_initial_conditions, scale_observation, step, AdversaryController, EgoAction, EgoController, EnvConfig,
    Observation, Outcome, ScenarioConfig, ScenarioError, ScenarioState, STATE_DIM,
};
use crate::seed::{self, Stream};

pub const KEEP: usize = 0;
pub const INITIATE: usize = 1;

pub const Q_ACTIVATIONS: [Activation; 3] = [Activation::Relu, Activation::Relu, Activation::Identity];

pub fn q_shape() -> Vec<usize> {
    vec![STATE_DIM, 64, 64, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct DqnHyper {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_size: usize,
    /// Decisions collected before the first update.
    pub warmup: usize,
    /// Soft target-update rate applied after every update.
    pub tau: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Episodes over which epsilon anneals linearly.
    pub eps_episodes: usize,
    pub max_episodes: usize,
    /// Greedy evaluation episodes in the moving success rate.
    pub success_window: usize,
    pub success_target: f64,
    /// Fresh greedy episodes the frozen network must also pass at
    /// `success_target` before training stops.
    pub confirm_episodes: usize,
    /// Largest crash rate tolerated over the confirmation episodes.
    pub confirm_max_crash: f64,
    pub reward_scale: f64,
}

impl Default for DqnHyper {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            lr: 1e-3,
            batch_size: 64,
            buffer_size: 20_000,
            warmup: 500,
            tau: 0.01,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_episodes: 300,
            max_episodes: 2000,
            success_window: 50,
            success_target: 0.99,
            confirm_episodes: 1000,
            confirm_max_crash: 0.002,
            reward_scale: 0.01,
        }
    }
}

impl DqnHyper {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) || !(self.lr > 0.0) || !(self.reward_scale > 0.0) {
            return Err("tau must lie in (0, 1]; lr and reward_scale must be positive".into());
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_size {
            return Err("batch_size must be positive and at most buffer_size".into());
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return Err("epsilon bounds must lie in [0, 1]".into());
        }
        if self.max_episodes == 0 || self.success_window == 0 {
            return Err("max_episodes and success_window must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.confirm_max_crash) {
            return Err("confirm_max_crash must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.eps_episodes == 0 || episode >= self.eps_episodes {
            return self.eps_end;
        }
        let frac = episode as f64 / self.eps_episodes as f64;
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn greedy(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnPolicy {
    pub q_network: Mlp,
}

impl DqnPolicy {
    pub fn q_values(&self, obs: &Observation) -> [f64; 2] {
        let q = self.q_network.forward(&scale_observation(obs)).expect("q shape");
        [q[0], q[1]]
    }

    pub fn decide(&self, state: &ScenarioState) -> usize {
        greedy(&self.q_values(&state.observation()))
    }
}

fn command(state: &ScenarioState, decision: usize, cfg: &ScenarioConfig) -> EgoAction {
    if state.lane_change.is_some() {
        EgoAction { accel: ego_longitudinal(state, EgoMode::Changing, cfg), initiate: false }
    } else {
        EgoAction { accel: ego_longitudinal(state, EgoMode::Waiting, cfg), initiate: decision == INITIATE }
    }
}

impl EgoController for DqnPolicy {
    fn act(&mut self, state: &ScenarioState, cfg: &ScenarioConfig) -> EgoAction {
        let decision = if state.lane_change.is_some() { KEEP } else { self.decide(state) };
        command(state, decision, cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    pub terminal: bool,
}

/// `y = r` for terminal decisions, `r + γ max_a Q'(s', a)` otherwise.
pub fn q_targets(batch: &[&DecisionRecord], target: &Mlp, gamma: f64) -> Vec<f64> {
    let n = batch.len();
    let next: Vec<f64> = batch.iter().flat_map(|d| scale_observation(&d.next_state)).collect();
    let q_next = target.forward_batch(&next, n).expect("q shape");
    batch
        .iter()
        .zip(q_next.chunks_exact(2))
        .map(|(d, q)| if d.terminal { d.reward } else { d.reward + gamma * q[0].max(q[1]) })
        .collect()
}

/// One Adam step on the squared error of the taken actions; returns the pre-step loss.
pub fn q_update(net: &mut Mlp, batch: &[&DecisionRecord], targets: &[f64], opt: &mut AdamState) -> f64 {
    let n = batch.len();
    let states: Vec<f64> = batch.iter().flat_map(|d| scale_observation(&d.state)).collect();
    let cache = net.forward_cached(&states, n).expect("q shape");
    let mut upstream = vec![0.0; 2 * n];
    let mut loss = 0.0;
    for (i, (d, y)) in batch.iter().zip(targets).enumerate() {
        let r = cache.output()[2 * i + d.action] - y;
        loss += r * r;
        upstream[2 * i + d.action] = 2.0 * r / n as f64;
    }
    let grads = net.backward(&cache, &upstream).expect("fresh cache").params;
    adam_step(net, &grads, opt);
    loss / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnEpisode {
    pub episode: usize,
    pub epsilon: f64,
    pub train_outcome: Outcome,
    pub greedy_outcome: Outcome,
    /// Success rate of the last `success_window` greedy episodes.
    pub moving_success: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnTraining {
    /// The converged network or, on budget exhaustion, the best seen: ranked
    /// by confirmation `success − crash` when any confirmation ran, else by
    /// moving success.
    pub policy: DqnPolicy,
    pub curve: Vec<DqnEpisode>,
    pub converged: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum DqnError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invalid DQN hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("non-finite Q-network parameters after update")]
    NonFinite,
    /// The cap was reached first; carries the best-so-far policy.
    #[error("episode budget exhausted before the success target was met")]
    TrainingBudgetExceeded(Box<DqnTraining>),
}

/// Run one greedy episode, returning its outcome.
pub fn greedy_episode<A: AdversaryController + ?Sized>(
    policy: &DqnPolicy,
    env: &EnvConfig,
    adversary: &mut A,
    episode_seed: u64,
) -> Result<Outcome, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
    let mut ego = policy.clone();
    let summary = crate::scenario::run_episode(&env.scenario, &env.reward, &mut ego, adversary, &mut rng, 1.0, |_| {})?;
    Ok(summary.outcome)
}

/// Q-learning against a fixed adversary (normally naturalistic traffic).
/// After each training episode one greedy episode on a separate seed stream
/// feeds the moving success rate that decides convergence.
/// Greedy success and crash rates over `confirm_episodes` starts disjoint
/// from the per-episode greedy checks.
fn confirm_success<A: AdversaryController + Clone>(
    policy: &DqnPolicy,
    env: &EnvConfig,
    adversary: &A,
    hyper: &DqnHyper,
    seed: u64,
) -> Result<(f64, f64), DqnError> {
    if hyper.confirm_episodes == 0 {
        return Ok((1.0, 0.0));
    }
    let (mut success, mut crash) = (0usize, 0usize);
    for k in 0..hyper.confirm_episodes {
        let s = seed::derive(seed, Stream::Evaluation, CONFIRM_OFFSET + k as u64);
        match greedy_episode(policy, env, &mut adversary.clone(), s)? {
            Outcome::Success => success += 1,
            Outcome::Crash => crash += 1,
            _ => {}
        }
    }
    let n = hyper.confirm_episodes as f64;
    Ok((success as f64 / n, crash as f64 / n))
}

const CONFIRM_OFFSET: u64 = 1 << 32;

pub fn dqn_train<A: AdversaryController + Clone>(
    env: &EnvConfig,
    adversary: &A,
    hyper: &DqnHyper,
    seed: u64,
) -> Result<DqnTraining, DqnError> {
    hyper.validate().map_err(DqnError::InvalidHyper)?;
    env.validate()?;
    let cfg = &env.scenario;
    let mut net = Mlp::init(&q_shape(), &Q_ACTIVATIONS, seed::derive(seed, Stream::CriticInit, 0)).expect("q shape");
    let mut target = net.clone();
    let mut opt = AdamState::for_net(&net, hyper.lr);
    let mut buffer: ReplayBuffer<DecisionRecord> = ReplayBuffer::new(hyper.buffer_size);
    let mut explore = seed::rng(seed, Stream::Exploration, 0);
    let mut batch_rng = seed::rng(seed, Stream::Minibatch, 0);
    let warmup = hyper.warmup.max(hyper.batch_size);

    let mut curve = Vec::new();
    let mut window: std::collections::VecDeque<bool> = Default::default();
    let mut best = ((0u8, f64::NEG_INFINITY), net.clone());

    for episode in 0..hyper.max_episodes {
        let eps = hyper.epsilon(episode);
        let mut rng = seed::rng(seed, Stream::Episode, episode as u64);
        let mut state = sample_initial_conditions(cfg, &mut rng)?;
        let mut adv = adversary.clone();
        // DecisionRecord awaiting its reward: (state, action, accumulated reward, discount).
        let mut pending: Option<(Observation, usize, f64, f64)> = None;
        while !state.done() {
            let deciding = state.lane_change.is_none();
            let decision = if !deciding {
                KEEP
            } else if explore.gen::<f64>() < eps {
                explore.gen_range(0..2)
            } else {
                greedy(&net.forward(&scale_observation(&state.observation())).expect("q shape"))
            };
            if deciding {
                pending = Some((state.observation(), decision, 0.0, 1.0));
            }
            let a_adv = adv.act(&state, cfg);
            let tr = step(&state, command(&state, decision, cfg), a_adv, cfg, &env.reward)?;
            let p = pending.as_mut().expect("a decision precedes every step");
            p.2 += p.3 * tr.r_ego * hyper.reward_scale;
            p.3 *= hyper.gamma;
            // Keep decisions close after one step; initiate closes at episode end.
            if tr.terminal || p.1 == KEEP {
                let (s, a, r, _) = pending.take().expect("pending decision");
                buffer.push(DecisionRecord { state: s, action: a, reward: r, next_state: tr.s_next.observation(), terminal: tr.terminal });
                if buffer.len() >= warmup {
                    let batch = buffer.sample(hyper.batch_size, &mut batch_rng);
                    let y = q_targets(&batch, &target, hyper.gamma);
                    q_update(&mut net, &batch, &y, &mut opt);
                    soft_update(&mut target, &net, hyper.tau);
                    if !net.params().iter().all(|v| v.is_finite()) {
                        return Err(DqnError::NonFinite);
                    }
                }
            }
            state = tr.s_next;
        }
        let policy = DqnPolicy { q_network: net.clone() };
        let greedy_seed = seed::derive(seed, Stream::Evaluation, episode as u64);
        let greedy_outcome = greedy_episode(&policy, env, &mut adversary.clone(), greedy_seed)?;
        window.push_back(greedy_outcome == Outcome::Success);
        if window.len() > hyper.success_window {
            window.pop_front();
        }
        let moving_success = window.iter().filter(|&&s| s).count() as f64 / window.len() as f64;
        curve.push(DqnEpisode { episode, epsilon: eps, train_outcome: state.outcome, greedy_outcome, moving_success });
        if window.len() == hyper.success_window && (0, moving_success) > best.0 {
            best = ((0, moving_success), net.clone());
        }
        if window.len() == hyper.success_window && moving_success >= hyper.success_target {
            let (success, crash) = confirm_success(&policy, env, adversary, hyper, seed)?;
            if (1, success - crash) > best.0 {
                best = ((1, success - crash), net.clone());
            }
            log::info!(
                "DQN moving success {moving_success:.3} after {} episodes, confirmation success {success:.3} crash {crash:.3}",
                episode + 1
            );
            if success >= hyper.success_target && crash <= hyper.confirm_max_crash {
                return Ok(DqnTraining { policy, curve, converged: true });
            }
        }
    }
    let result = DqnTraining { policy: DqnPolicy { q_network: best.1 }, curve, converged: false };
    Err(DqnError::TrainingBudgetExceeded(Box::new(result)))
}
