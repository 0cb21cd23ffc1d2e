//! Lane-change controllers under test.

pub mod dqn;
mod gap;
mod trajectory;

pub use gap::{decide_from_gaps, gap_accept_decide, measure_gaps, Decision, GapAcceptance, GapThresholds, Gaps};
pub use dqn::{DqnHyper, DqnPolicy};
pub use trajectory::LaneChangeTrajectory;

use crate::scenario::{geometry, idm_behind, EgoAction, EgoController, Role, ScenarioConfig, ScenarioState};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EgoError {
    #[error("trajectory time {elapsed} outside [0, {duration}]")]
    OutOfRange { elapsed: f64, duration: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgoMode {
    Waiting,
    Changing,
}

/// IDM longitudinal control for the ego. While waiting it follows the own-lane
/// leader; while changing it follows whichever leader, own lane or target
/// lane, is nearer.
pub fn ego_longitudinal(s: &ScenarioState, mode: EgoMode, cfg: &ScenarioConfig) -> f64 {
    let ego = s.ego();
    let ahead_in = |lane: usize| {
        s.vehicles[1..]
            .iter()
            .filter(|v| v.x > ego.x && geometry::occupies_lane(v, lane, cfg))
            .min_by(|a, b| a.x.total_cmp(&b.x))
    };
    let leader = match mode {
        EgoMode::Waiting => ahead_in(0),
        EgoMode::Changing => match (ahead_in(0), ahead_in(1)) {
            (Some(a), Some(b)) => Some(if a.x <= b.x { a } else { b }),
            (a, b) => a.or(b),
        },
    };
    debug_assert!(leader.is_none_or(|l| l.role != Role::Ego));
    idm_behind(&cfg.ego_idm, ego, leader, cfg)
}

/// Either of the two controllers under test.
#[derive(Debug, Clone, PartialEq)]
pub enum EgoPolicy {
    Gap(GapAcceptance),
    Dqn(DqnPolicy),
}

impl EgoPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            EgoPolicy::Gap(_) => "gap",
            EgoPolicy::Dqn(_) => "dqn",
        }
    }
}

impl EgoController for EgoPolicy {
    fn reset(&mut self) {
        match self {
            EgoPolicy::Gap(g) => g.reset(),
            EgoPolicy::Dqn(d) => d.reset(),
        }
    }

    fn act(&mut self, state: &ScenarioState, cfg: &ScenarioConfig) -> EgoAction {
        match self {
            EgoPolicy::Gap(g) => g.act(state, cfg),
            EgoPolicy::Dqn(d) => d.act(state, cfg),
        }
    }
}
