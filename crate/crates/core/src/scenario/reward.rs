use serde::{Deserialize, Serialize};

use super::geometry::fully_in_lane;
use super::{Outcome, RewardConfig, Role, ScenarioConfig, Transition};

/// Traffic-rule violation attributed to the adversaries for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    None,
    /// An adversary drove into the back of a vehicle that was keeping its lane.
    AdvRearEnd,
    AdvSpeeding,
}

pub fn ego_reward(tr: &Transition, rcfg: &RewardConfig) -> f64 {
    match tr.s_next.outcome {
        Outcome::Crash => rcfg.r_crash,
        Outcome::Success => rcfg.r_success,
        Outcome::Running | Outcome::Timeout => rcfg.speed_coef * tr.s_next.ego().v,
    }
}

/// Fault attribution: an adversary is at fault when it strikes the ego from
/// behind while the ego is entirely inside one lane, or when it hits another
/// adversary (adversaries only drive straight, so one of them rear-ended the
/// other). Speeds above `v_limit` are flagged when no collision is at fault.
pub fn detect_rule_violation(tr: &Transition, cfg: &ScenarioConfig) -> Violation {
    let next = &tr.s_next;
    if let Some((a, b)) = tr.collision {
        let at_fault = if a == Role::Ego {
            let ego = next.ego();
            let adv = next.vehicle(b);
            let ego_in_lane = fully_in_lane(ego, 0, cfg) || fully_in_lane(ego, 1, cfg);
            ego_in_lane && adv.x < ego.x
        } else {
            true
        };
        if at_fault {
            return Violation::AdvRearEnd;
        }
    }
    if next.vehicles[1..].iter().any(|v| v.v > cfg.v_limit) {
        Violation::AdvSpeeding
    } else {
        Violation::None
    }
}

/// `-r_ego + beta * r_rule`.
pub fn adversary_reward(tr: &Transition, rcfg: &RewardConfig) -> f64 {
    let rule = if tr.violation == Violation::None { 0.0 } else { rcfg.r_rule_penalty };
    -tr.r_ego + rcfg.beta * rule
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{step, EgoAction, ScenarioState, VehicleState};

    fn world(ego_y: f64, ego_yaw: f64, follow: (f64, f64, f64), target: (f64, f64)) -> ScenarioState {
        let w = 3.2;
        ScenarioState::from_vehicles([
            VehicleState { x: 0.0, y: ego_y, v: 10.0, yaw: ego_yaw, role: Role::Ego },
            VehicleState { x: 80.0, y: 0.0, v: 10.0, yaw: 0.0, role: Role::Leader },
            VehicleState { x: follow.0, y: follow.1, v: follow.2, yaw: 0.0, role: Role::Follow },
            VehicleState { x: target.0, y: w, v: target.1, yaw: 0.0, role: Role::Target },
        ])
    }

    fn idle() -> EgoAction {
        EgoAction { accel: 0.0, initiate: false }
    }

    #[test]
    fn ego_reward_cases() {
        let cfg = ScenarioConfig::default();
        let rcfg = RewardConfig::default();
        let running = step(&world(0.0, 0.0, (-50.0, 3.2, 10.0), (50.0, 10.0)), idle(), [0.0; 3], &cfg, &rcfg).unwrap();
        assert!((running.r_ego - 1.0).abs() < 1e-12);
        assert!((running.r_adv + 1.0).abs() < 1e-12);

        let success = step(&world(3.2, 0.0, (-50.0, 3.2, 10.0), (50.0, 10.0)), idle(), [0.0; 3], &cfg, &rcfg).unwrap();
        assert_eq!(success.s_next.outcome, Outcome::Success);
        assert_eq!(success.r_ego, 100.0);
    }

    #[test]
    fn follow_rear_ending_in_lane_ego_is_violation() {
        let cfg = ScenarioConfig::default();
        let rcfg = RewardConfig::default();
        // follow vehicle placed behind the ego in the ego's own lane
        let s = world(0.0, 0.0, (-4.5, 0.0, 20.0), (50.0, 10.0));
        let tr = step(&s, idle(), [1.0, 1.0, 0.0], &cfg, &rcfg).unwrap();
        assert_eq!(tr.collision, Some((Role::Ego, Role::Follow)));
        assert_eq!(tr.r_ego, -50.0);
        assert_eq!(tr.violation, Violation::AdvRearEnd);
        assert_eq!(tr.r_adv, 0.0);
    }

    #[test]
    fn straddling_ego_at_fault() {
        let cfg = ScenarioConfig::default();
        let rcfg = RewardConfig::default();
        // ego half-way across the marking clips the target vehicle just ahead
        let s = world(1.6, 0.1, (-50.0, 3.2, 10.0), (4.0, 10.0));
        let tr = step(&s, idle(), [0.0; 3], &cfg, &rcfg).unwrap();
        assert_eq!(tr.collision, Some((Role::Ego, Role::Target)));
        assert_eq!(tr.violation, Violation::None);
        assert_eq!(tr.r_adv, 50.0);
    }

    #[test]
    fn speeding_flagged() {
        let cfg = ScenarioConfig::default();
        let rcfg = RewardConfig::default();
        let s = world(0.0, 0.0, (-50.0, 3.2, 20.0), (50.0, 10.0));
        let tr = step(&s, idle(), [0.0; 3], &cfg, &rcfg).unwrap();
        assert_eq!(tr.violation, Violation::AdvSpeeding);
        assert!((tr.r_adv - (-1.0 - 50.0)).abs() < 1e-12);
    }

    #[test]
    fn reward_identity_holds_for_beta() {
        let cfg = ScenarioConfig::default();
        for beta in [0.0, 0.1, 1.0, 2.0] {
            let rcfg = RewardConfig { beta, ..RewardConfig::default() };
            let s = world(0.0, 0.0, (-50.0, 3.2, 20.0), (50.0, 10.0));
            let tr = step(&s, idle(), [0.0; 3], &cfg, &rcfg).unwrap();
            assert!((tr.r_adv + tr.r_ego - beta * rcfg.r_rule_penalty).abs() < 1e-12);
        }
    }
}
