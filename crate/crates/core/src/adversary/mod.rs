//! Joint adversary for the three surrounding vehicles, trained with DDPG and
//! no exploration noise so that independently seeded runs settle into
//! different local optima.

mod ddpg;
pub mod store;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ddpg::{
    actor_objective_gradient, actor_update, critic_input, critic_loss_gradient, critic_target, critic_update,
    ActionValue, ActorAdversary, Batch, DdpgAgent, DdpgHyper, Experience, UpdateError, UpdateStats,
};
pub use crate::replay::ReplayBuffer;

use crate::neural::Mlp;
use crate::scenario::{
    run_episode, sample_initial_conditions, step, AdversaryAction, AdversaryController, EgoController, EnvConfig,
    NaturalisticAdversary, Outcome, ScenarioConfig, ScenarioError, ScenarioState,
};
use crate::seed::{self, Stream};

/// Mean return over the plateau window at which training stops early.
pub const DEFAULT_STOP_BOUNDARY: f64 = 0.0;

#[derive(Debug, thiserror::Error)]
pub enum AdversaryError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("policy store: {0}")]
    Store(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Plateau,
    Boundary,
    Cap,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Plateau => "plateau",
            StopReason::Boundary => "boundary",
            StopReason::Cap => "cap",
        }
    }
}

/// One training episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Undiscounted adversary return.
    #[serde(rename = "return")]
    pub ret: f64,
    pub outcome: Outcome,
    pub steps: u32,
    /// At least one update happened during the episode.
    pub trained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryPolicy {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    pub seed: u64,
    pub curve: Vec<EpisodeRecord>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Initial-condition seed of the last training episode.
    pub final_eval_seed: u64,
    /// Return of the frozen actor replayed on `final_eval_seed`.
    pub final_return: f64,
    pub hyper: DdpgHyper,
}

impl AdversaryPolicy {
    pub fn controller(&self) -> ActorAdversary {
        ActorAdversary { actor: self.actor.clone() }
    }

    /// Replay the frozen actor on one recorded initial-condition seed.
    pub fn replay_return<E: EgoController + ?Sized>(
        actor: &Mlp,
        env: &EnvConfig,
        ego: &mut E,
        episode_seed: u64,
    ) -> Result<f64, ScenarioError> {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let mut adv = ActorAdversary { actor: actor.clone() };
        let summary = run_episode(&env.scenario, &env.reward, ego, &mut adv, &mut rng, 1.0, |_| {})?;
        Ok(summary.adv_return)
    }
}

/// Surrounding traffic: naturalistic IDM or a trained actor.
#[derive(Debug, Clone, PartialEq)]
pub enum Traffic {
    Naturalistic,
    Learned(ActorAdversary),
}

impl AdversaryController for Traffic {
    fn act(&mut self, state: &ScenarioState, cfg: &ScenarioConfig) -> AdversaryAction {
        match self {
            Traffic::Naturalistic => NaturalisticAdversary.act(state, cfg),
            Traffic::Learned(a) => a.act(state, cfg),
        }
    }
}

/// True iff the standard deviation of the last `window` returns is below
/// `max(1, 0.05·|mean|)`.
pub fn detect_plateau(returns: &[f64], window: usize) -> bool {
    if window == 0 || returns.len() < window {
        return false;
    }
    let tail = &returns[returns.len() - window..];
    let mean = tail.iter().sum::<f64>() / window as f64;
    let var = tail.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / window as f64;
    var.sqrt() < (0.05 * mean.abs()).max(1.0)
}

fn boundary_reached(returns: &[f64], window: usize, boundary: f64) -> bool {
    if returns.is_empty() {
        return false;
    }
    let tail = &returns[returns.len().saturating_sub(window)..];
    tail.iter().sum::<f64>() / tail.len() as f64 >= boundary
}

/// Seed of the initial conditions of training episode `episode`.
pub fn episode_seed(member_seed: u64, episode: usize) -> u64 {
    seed::derive(member_seed, Stream::Episode, episode as u64)
}

/// Train one adversary against a frozen ego.
///
/// Stopping rules are evaluated only on episodes during which the networks
/// were updated: the boundary on the mean of the last `plateau_window` such
/// returns (fewer while the window fills), the plateau once the window is full.
pub fn train_single<E: EgoController + Clone>(
    env: &EnvConfig,
    ego: &E,
    hyper: &DdpgHyper,
    seed: u64,
) -> Result<AdversaryPolicy, AdversaryError> {
    hyper.validate().map_err(AdversaryError::InvalidHyper)?;
    env.validate()?;
    let cfg = &env.scenario;
    let mut agent = DdpgAgent::new(
        hyper,
        seed::derive(seed, Stream::ActorInit, 0),
        seed::derive(seed, Stream::CriticInit, 0),
    );
    let mut batch_rng = seed::rng(seed, Stream::Minibatch, 0);
    let mut ego = ego.clone();
    let mut curve = Vec::new();
    let mut trained_returns = Vec::new();
    let warmup = hyper.warmup.max(hyper.batch_size);
    let mut stop_reason = StopReason::Cap;

    for episode in 0..hyper.max_episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(seed, episode));
        let mut state = sample_initial_conditions(cfg, &mut rng)?;
        ego.reset();
        let mut ret = 0.0;
        let mut trained = false;
        while !state.done() {
            let obs = state.observation();
            let a_ego = ego.act(&state, cfg);
            let a_adv = agent.act(&obs);
            let tr = step(&state, a_ego, a_adv, cfg, &env.reward)?;
            ret += tr.r_adv;
            agent.buffer.push(Experience {
                state: obs,
                action: a_adv,
                reward: tr.r_adv * hyper.reward_scale,
                next_state: tr.s_next.observation(),
                terminal: tr.terminal,
            });
            if agent.buffer.len() >= warmup {
                agent.update(hyper, &mut batch_rng)?;
                trained = true;
            }
            state = tr.s_next;
        }
        curve.push(EpisodeRecord { episode, ret, outcome: state.outcome, steps: state.steps, trained });
        if trained {
            trained_returns.push(ret);
            if boundary_reached(&trained_returns, hyper.plateau_window, hyper.stop_boundary) {
                stop_reason = StopReason::Boundary;
                break;
            }
            if detect_plateau(&trained_returns, hyper.plateau_window) {
                stop_reason = StopReason::Plateau;
                break;
            }
        }
    }

    let final_eval_seed = episode_seed(seed, curve.len() - 1);
    let final_return = AdversaryPolicy::replay_return(&agent.actor, env, &mut ego, final_eval_seed)?;
    log::debug!("member seed {seed}: {} episodes, stop {:?}, final return {final_return:.2}", curve.len(), stop_reason);
    Ok(AdversaryPolicy {
        actor: agent.actor,
        critic: agent.critic,
        actor_target: agent.actor_target,
        critic_target: agent.critic_target,
        seed,
        curve,
        converged: stop_reason != StopReason::Cap,
        stop_reason,
        final_eval_seed,
        final_return,
        hyper: hyper.clone(),
    })
}

pub type MemberResult = Result<AdversaryPolicy, AdversaryError>;

/// Train `hyper.ensemble_size` members with seeds `base_seed + i` on a pool of
/// `jobs` workers. `on_member` runs as each member finishes, in completion
/// order; the returned list is in member order.
pub fn train_ensemble<E, F>(
    env: &EnvConfig,
    ego: &E,
    hyper: &DdpgHyper,
    base_seed: u64,
    jobs: usize,
    on_member: F,
) -> Result<Vec<MemberResult>, AdversaryError>
where
    E: EgoController + Clone + Sync,
    F: Fn(usize, &MemberResult) + Sync,
{
    let all: Vec<usize> = (0..hyper.ensemble_size).collect();
    train_members(env, ego, hyper, base_seed, &all, jobs, on_member)
}

/// As [`train_ensemble`], restricted to the member indices in `members`.
pub fn train_members<E, F>(
    env: &EnvConfig,
    ego: &E,
    hyper: &DdpgHyper,
    base_seed: u64,
    members: &[usize],
    jobs: usize,
    on_member: F,
) -> Result<Vec<MemberResult>, AdversaryError>
where
    E: EgoController + Clone + Sync,
    F: Fn(usize, &MemberResult) + Sync,
{
    use rayon::prelude::*;
    hyper.validate().map_err(AdversaryError::InvalidHyper)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| AdversaryError::InvalidHyper(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        members
            .par_iter()
            .map(|&i| {
                let result = train_single(env, ego, hyper, member_seed(base_seed, i));
                if let Err(e) = &result {
                    log::warn!("ensemble member {i} failed: {e}");
                }
                on_member(i, &result);
                result
            })
            .collect()
    }))
}

/// Seed of ensemble member `index`.
pub fn member_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add(index as u64)
}
