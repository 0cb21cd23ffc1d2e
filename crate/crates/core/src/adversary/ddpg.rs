//! Deterministic policy-gradient updates for the joint adversary.

use serde::{Deserialize, Serialize};

use crate::replay::ReplayBuffer;
use crate::neural::{actor_shape, adam_step, critic_shape, soft_update, AdamState, Mlp, ACTOR_ACTIVATIONS, CRITIC_ACTIVATIONS};
use crate::scenario::{scale_observation, AdversaryAction, AdversaryController, Observation, ScenarioConfig, ScenarioState, ADV_ACTION_DIM, STATE_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgHyper {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_size: usize,
    /// Number of independently initialised ensemble members.
    pub ensemble_size: usize,
    /// Discounted episode return at which a member is declared challenging enough.
    pub stop_boundary: f64,
    pub max_episodes: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    /// Episodes inspected by the plateau test.
    pub plateau_window: usize,
    /// Factor applied to rewards before they enter the replay buffer.
    pub reward_scale: f64,
    /// Weight of the squared pre-tanh actor output in the actor loss.
    pub preactivation_penalty: f64,
}

impl Default for DdpgHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            actor_lr: 0.005,
            critic_lr: 0.01,
            tau: 0.01,
            batch_size: 128,
            buffer_size: 10_000,
            ensemble_size: 8,
            stop_boundary: super::DEFAULT_STOP_BOUNDARY,
            max_episodes: 300,
            warmup: 500,
            plateau_window: 20,
            reward_scale: 0.05,
            preactivation_penalty: 0.01,
        }
    }
}

impl DdpgHyper {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_size {
            return Err("batch_size must be positive and at most buffer_size".into());
        }
        if !(self.preactivation_penalty >= 0.0) {
            return Err("preactivation_penalty must be non-negative".into());
        }
        if !(self.reward_scale > 0.0) {
            return Err(format!("reward_scale must be positive, got {}", self.reward_scale));
        }
        if self.actor_lr <= 0.0 || self.critic_lr <= 0.0 {
            return Err("learning rates must be positive".into());
        }
        if self.ensemble_size == 0 || self.max_episodes == 0 || self.plateau_window < 2 {
            return Err("ensemble_size and max_episodes must be positive, plateau_window at least 2".into());
        }
        Ok(())
    }
}

/// One stored adversary transition (raw observations).
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Observation,
    pub action: AdversaryAction,
    pub reward: f64,
    pub next_state: Observation,
    pub terminal: bool,
}

/// Minibatch in network layout: scaled states, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub terminals: Vec<bool>,
}

impl Batch {
    pub fn from_experiences<'a>(items: impl IntoIterator<Item = &'a Experience>) -> Self {
        let mut b = Batch { states: vec![], actions: vec![], rewards: vec![], next_states: vec![], terminals: vec![] };
        for e in items {
            b.states.extend(scale_observation(&e.state));
            b.actions.extend(e.action);
            b.rewards.push(e.reward);
            b.next_states.extend(scale_observation(&e.next_state));
            b.terminals.push(e.terminal);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Row-wise `[state ‖ action]`.
pub fn critic_input(states: &[f64], actions: &[f64], batch: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * (STATE_DIM + ADV_ACTION_DIM));
    for (s, a) in states.chunks_exact(STATE_DIM).zip(actions.chunks_exact(ADV_ACTION_DIM)) {
        out.extend_from_slice(s);
        out.extend_from_slice(a);
    }
    out
}

/// `y = r` for terminal transitions, `r + γ Q'(s', μ'(s'))` otherwise.
pub fn critic_target(batch: &Batch, actor_target: &Mlp, critic_target: &Mlp, gamma: f64) -> Vec<f64> {
    let n = batch.len();
    let next_actions = actor_target.forward_batch(&batch.next_states, n).expect("actor shape");
    let q_next = critic_target
        .forward_batch(&critic_input(&batch.next_states, &next_actions, n), n)
        .expect("critic shape");
    batch
        .rewards
        .iter()
        .zip(&batch.terminals)
        .zip(&q_next)
        .map(|((&r, &terminal), &q)| if terminal { r } else { r + gamma * q })
        .collect()
}

/// Mean squared error between the critic and `targets`, and its parameter gradient.
pub fn critic_loss_gradient(critic: &Mlp, batch: &Batch, targets: &[f64]) -> (f64, Vec<f64>) {
    let n = batch.len();
    let cache = critic.forward_cached(&critic_input(&batch.states, &batch.actions, n), n).expect("critic shape");
    let residuals: Vec<f64> = cache.output().iter().zip(targets).map(|(q, y)| q - y).collect();
    let loss = residuals.iter().map(|r| r * r).sum::<f64>() / n as f64;
    let upstream: Vec<f64> = residuals.iter().map(|r| 2.0 * r / n as f64).collect();
    let grads = critic.backward(&cache, &upstream).expect("fresh cache").params;
    (loss, grads)
}

/// One Adam step on the critic's squared TD error; returns the pre-step loss.
pub fn critic_update(critic: &mut Mlp, batch: &Batch, targets: &[f64], opt: &mut AdamState) -> f64 {
    let (loss, grads) = critic_loss_gradient(critic, batch, targets);
    adam_step(critic, &grads, opt);
    loss
}

/// Action-value function the actor ascends.
pub trait ActionValue {
    /// `Q(s_i, a_i)` for every row and `∂(Σ_i w_i Q(s_i, a_i)) / ∂a` row-major.
    fn value_and_action_grad(&self, states: &[f64], actions: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>);
}

impl ActionValue for Mlp {
    fn value_and_action_grad(&self, states: &[f64], actions: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = weights.len();
        let cache = self.forward_cached(&critic_input(states, actions, n), n).expect("critic shape");
        let dq_dinput = self.backward_input(&cache, weights).expect("fresh cache");
        let dq_daction = dq_dinput
            .chunks_exact(STATE_DIM + ADV_ACTION_DIM)
            .flat_map(|row| row[STATE_DIM..].iter().copied())
            .collect();
        (cache.output().to_vec(), dq_daction)
    }
}

/// Batch-mean `Q(s, μ(s))` and its gradient with respect to the actor's
/// parameters, chained through the critic's action input.
pub fn actor_objective_gradient<Q: ActionValue + ?Sized>(actor: &Mlp, critic: &Q, batch: &Batch) -> (f64, Vec<f64>) {
    actor_gradient(actor, critic, batch, 0.0)
}

/// As [`actor_objective_gradient`], with `penalty · mean Σ z²` subtracted from
/// the objective, `z` being the pre-tanh output activations.
fn actor_gradient<Q: ActionValue + ?Sized>(actor: &Mlp, critic: &Q, batch: &Batch, penalty: f64) -> (f64, Vec<f64>) {
    let n = batch.len();
    let actor_cache = actor.forward_cached(&batch.states, n).expect("actor shape");
    let (q, mut upstream) = critic.value_and_action_grad(&batch.states, actor_cache.output(), &vec![1.0 / n as f64; n]);
    let objective = q.iter().sum::<f64>() / n as f64;
    if penalty > 0.0 {
        // d(z²)/dy = 2z / (1 − y²); the tanh backward pass multiplies by 1 − y² again.
        for (g, &y) in upstream.iter_mut().zip(actor_cache.output()) {
            *g -= 2.0 * penalty * y.atanh() / (n as f64 * (1.0 - y * y));
        }
    }
    let grads = actor.backward(&actor_cache, &upstream).expect("fresh cache").params;
    (objective, grads)
}

/// One Adam ascent step on `E[Q(s, μ(s))] − penalty · E[Σ z²]` with the
/// critic held fixed; returns the pre-step `E[Q]`.
pub fn actor_update<Q: ActionValue + ?Sized>(
    actor: &mut Mlp,
    critic: &Q,
    batch: &Batch,
    penalty: f64,
    opt: &mut AdamState,
) -> f64 {
    let (objective, grads) = actor_gradient(actor, critic, batch, penalty);
    let descent: Vec<f64> = grads.iter().map(|g| -g).collect();
    adam_step(actor, &descent, opt);
    objective
}

/// Deterministic actor used as an adversary controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorAdversary {
    pub actor: Mlp,
}

impl ActorAdversary {
    pub fn action(actor: &Mlp, obs: &Observation) -> AdversaryAction {
        let out = actor.forward(&scale_observation(obs)).expect("actor shape");
        [out[0], out[1], out[2]]
    }
}

impl AdversaryController for ActorAdversary {
    fn act(&mut self, state: &ScenarioState, _cfg: &ScenarioConfig) -> AdversaryAction {
        Self::action(&self.actor, &state.observation())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum UpdateError {
    #[error("non-finite value in {0} after update")]
    NonFinite(&'static str),
}

/// Output-layer weight bound at initialisation.
pub const OUTPUT_INIT_BOUND: f64 = 3e-3;

/// Actor, critic, their targets, optimisers and replay memory of one member.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: AdamState,
    critic_opt: AdamState,
    pub buffer: ReplayBuffer<Experience>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

impl DdpgAgent {
    pub fn new(hyper: &DdpgHyper, actor_seed: u64, critic_seed: u64) -> Self {
        let actor = Mlp::init_small_output(
            &actor_shape(STATE_DIM, ADV_ACTION_DIM),
            &ACTOR_ACTIVATIONS,
            actor_seed,
            OUTPUT_INIT_BOUND,
        )
        .expect("actor shape");
        let critic = Mlp::init_small_output(
            &critic_shape(STATE_DIM, ADV_ACTION_DIM),
            &CRITIC_ACTIVATIONS,
            critic_seed,
            OUTPUT_INIT_BOUND,
        )
        .expect("critic shape");
        Self {
            actor_opt: AdamState::for_net(&actor, hyper.actor_lr),
            critic_opt: AdamState::for_net(&critic, hyper.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(hyper.buffer_size),
        }
    }

    pub fn act(&self, obs: &Observation) -> AdversaryAction {
        ActorAdversary::action(&self.actor, obs)
    }

    /// Critic step, actor step, then soft target updates on one sampled batch.
    pub fn update<R: rand::Rng + ?Sized>(&mut self, hyper: &DdpgHyper, rng: &mut R) -> Result<UpdateStats, UpdateError> {
        let batch = Batch::from_experiences(self.buffer.sample(hyper.batch_size, rng));
        let targets = critic_target(&batch, &self.actor_target, &self.critic_target, hyper.gamma);
        let critic_loss = critic_update(&mut self.critic, &batch, &targets, &mut self.critic_opt);
        let actor_objective =
            actor_update(&mut self.actor, &self.critic, &batch, hyper.preactivation_penalty, &mut self.actor_opt);
        soft_update(&mut self.critic_target, &self.critic, hyper.tau);
        soft_update(&mut self.actor_target, &self.actor, hyper.tau);
        if !critic_loss.is_finite() || !self.critic.params().iter().all(|p| p.is_finite()) {
            return Err(UpdateError::NonFinite("critic"));
        }
        if !actor_objective.is_finite() || !self.actor.params().iter().all(|p| p.is_finite()) {
            return Err(UpdateError::NonFinite("actor"));
        }
        Ok(UpdateStats { critic_loss, actor_objective })
    }
}
