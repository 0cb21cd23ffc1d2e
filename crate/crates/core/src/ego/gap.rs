//! Rule-based gap-acceptance lane-change controller.

use serde::{Deserialize, Serialize};

use super::{ego_longitudinal, EgoMode};
use crate::scenario::{geometry, EgoAction, EgoController, Role, ScenarioConfig, ScenarioState};

/// Minimum acceptable gaps follow an IDM-style headway `s0 + T·v`, scaled by `margin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GapThresholds {
    pub s0: f64,
    #[serde(rename = "T")]
    pub time_headway: f64,
    pub margin: f64,
}

impl Default for GapThresholds {
    fn default() -> Self {
        Self { s0: 2.0, time_headway: 1.5, margin: 1.0 }
    }
}

impl GapThresholds {
    pub fn lead_gap_min(&self, v_ego: f64) -> f64 {
        self.s0 + self.time_headway * v_ego
    }

    pub fn lag_gap_min(&self, v_lag: f64) -> f64 {
        self.s0 + self.time_headway * v_lag
    }

    pub fn front_gap_min(&self, v_ego: f64) -> f64 {
        self.s0 + self.time_headway * v_ego
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Initiate,
    Wait,
}

/// Bumper-to-bumper gaps seen by the ego. Missing vehicles give infinite gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaps {
    /// To the nearest target-lane vehicle ahead.
    pub lead: f64,
    /// To the nearest target-lane vehicle behind.
    pub lag: f64,
    /// Speed of that lag vehicle.
    pub lag_speed: f64,
    /// To the own-lane leader.
    pub front: f64,
    pub ego_speed: f64,
}

pub fn measure_gaps(s: &ScenarioState, cfg: &ScenarioConfig) -> Gaps {
    let ego = s.ego();
    let len = cfg.veh_length;
    let mut gaps = Gaps {
        lead: f64::INFINITY,
        lag: f64::INFINITY,
        lag_speed: 0.0,
        front: f64::INFINITY,
        ego_speed: ego.v,
    };
    for v in &s.vehicles[1..] {
        let dx = v.x - ego.x;
        if v.role == Role::Leader {
            if dx >= 0.0 {
                gaps.front = gaps.front.min(dx - len);
            }
            continue;
        }
        debug_assert!(geometry::occupies_lane(v, 1, cfg));
        if dx >= 0.0 {
            gaps.lead = gaps.lead.min(dx - len);
        } else if -dx - len < gaps.lag {
            gaps.lag = -dx - len;
            gaps.lag_speed = v.v;
        }
    }
    gaps
}

pub fn decide_from_gaps(g: &Gaps, th: &GapThresholds) -> Decision {
    let ok = g.lead >= th.margin * th.lead_gap_min(g.ego_speed)
        && g.lag >= th.margin * th.lag_gap_min(g.lag_speed)
        && g.front >= th.margin * th.front_gap_min(g.ego_speed);
    if ok {
        Decision::Initiate
    } else {
        Decision::Wait
    }
}

pub fn gap_accept_decide(s: &ScenarioState, th: &GapThresholds, cfg: &ScenarioConfig) -> Decision {
    decide_from_gaps(&measure_gaps(s, cfg), th)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GapAcceptance {
    pub thresholds: GapThresholds,
}

impl GapAcceptance {
    pub fn new(thresholds: GapThresholds) -> Self {
        Self { thresholds }
    }
}

impl EgoController for GapAcceptance {
    fn act(&mut self, state: &ScenarioState, cfg: &ScenarioConfig) -> EgoAction {
        if state.lane_change.is_some() {
            return EgoAction { accel: ego_longitudinal(state, EgoMode::Changing, cfg), initiate: false };
        }
        let initiate = gap_accept_decide(state, &self.thresholds, cfg) == Decision::Initiate;
        EgoAction { accel: ego_longitudinal(state, EgoMode::Waiting, cfg), initiate }
    }
}
