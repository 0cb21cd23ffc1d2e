use rand::Rng;

use super::{
    accel_to_action, idm_in_lane, sample_initial_conditions, step, AdversaryAction, EgoAction, Outcome,
    RewardConfig, Role, ScenarioConfig, ScenarioError, ScenarioState, Transition,
};

/// Policy of the ego vehicle under test.
pub trait EgoController {
    /// Reset any per-episode state.
    fn reset(&mut self) {}
    fn act(&mut self, state: &ScenarioState, cfg: &ScenarioConfig) -> EgoAction;
}

/// Joint longitudinal policy of the three surrounding vehicles.
pub trait AdversaryController {
    fn act(&mut self, state: &ScenarioState, cfg: &ScenarioConfig) -> AdversaryAction;
}

impl<T: EgoController + ?Sized> EgoController for &mut T {
    fn reset(&mut self) {
        (**self).reset()
    }
    fn act(&mut self, state: &ScenarioState, cfg: &ScenarioConfig) -> EgoAction {
        (**self).act(state, cfg)
    }
}

impl<T: AdversaryController + ?Sized> AdversaryController for &mut T {
    fn act(&mut self, state: &ScenarioState, cfg: &ScenarioConfig) -> AdversaryAction {
        (**self).act(state, cfg)
    }
}

/// Naturalistic traffic: every surrounding vehicle runs IDM against the
/// nearest vehicle ahead of it in its own lane, the ego included once its
/// footprint crosses into that lane.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaturalisticAdversary;

impl AdversaryController for NaturalisticAdversary {
    fn act(&mut self, state: &ScenarioState, cfg: &ScenarioConfig) -> AdversaryAction {
        [Role::Leader, Role::Follow, Role::Target].map(|role| {
            let acc = idm_in_lane(state, role, role.home_lane(), cfg);
            accel_to_action(acc, cfg)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub outcome: Outcome,
    pub steps: u32,
    /// Undiscounted sum of ego rewards.
    pub ego_return: f64,
    /// Undiscounted sum of adversary rewards.
    pub adv_return: f64,
    /// `sum_{t=1}^T gamma^t r_adv,t` for the `gamma` passed to [`run_episode`].
    pub adv_discounted: f64,
}

/// Run one episode from freshly sampled initial conditions. `on_transition`
/// sees every transition in order.
pub fn run_episode<R, E, A, F>(
    cfg: &ScenarioConfig,
    rcfg: &RewardConfig,
    ego: &mut E,
    adversary: &mut A,
    rng: &mut R,
    gamma: f64,
    mut on_transition: F,
) -> Result<EpisodeSummary, ScenarioError>
where
    R: Rng + ?Sized,
    E: EgoController + ?Sized,
    A: AdversaryController + ?Sized,
    F: FnMut(&Transition),
{
    let mut state = sample_initial_conditions(cfg, rng)?;
    ego.reset();
    let mut summary = EpisodeSummary {
        outcome: Outcome::Running,
        steps: 0,
        ego_return: 0.0,
        adv_return: 0.0,
        adv_discounted: 0.0,
    };
    let mut discount = gamma;
    while !state.done() {
        let a_ego = ego.act(&state, cfg);
        let a_adv = adversary.act(&state, cfg);
        let tr = step(&state, a_ego, a_adv, cfg, rcfg)?;
        summary.ego_return += tr.r_ego;
        summary.adv_return += tr.r_adv;
        summary.adv_discounted += discount * tr.r_adv;
        discount *= gamma;
        on_transition(&tr);
        state = tr.s_next;
    }
    summary.outcome = state.outcome;
    summary.steps = state.steps;
    Ok(summary)
}
