//! Four-vehicle lane-change world.
//!
//! The ego starts centred in lane 0 at `x = 0` and tries to move left into
//! lane 1. The leader drives ahead of it in lane 0; the follow and target
//! vehicles drive in lane 1, the target ahead of the follow. Only the ego
//! moves laterally. One [`step`] advances every vehicle by `dt` with explicit
//! Euler integration, then checks collision, success, distance and time
//! limits in that order.

mod config;
mod episode;
pub mod geometry;
mod reward;
pub mod trace;

use serde::{Deserialize, Serialize};

use crate::ego::LaneChangeTrajectory;

pub use config::{EnvConfig, IdmParams, RangeDist, RewardConfig, ScenarioConfig, MAX_BRAKE};
pub use episode::{run_episode, AdversaryController, EgoController, EpisodeSummary, NaturalisticAdversary};
pub use geometry::{check_collision, lane_change_complete};
pub use reward::{adversary_reward, detect_rule_violation, ego_reward, Violation};

/// Dimension of the observation vector shared by every policy.
pub const STATE_DIM: usize = 9;
/// Dimension of the joint adversary action.
pub const ADV_ACTION_DIM: usize = 3;

pub type Observation = [f64; STATE_DIM];
pub type AdversaryAction = [f64; ADV_ACTION_DIM];

/// Per-component divisors bringing observations to roughly unit range before
/// they enter a network.
pub const OBSERVATION_SCALE: Observation = [50.0, 50.0, 50.0, 10.0, 10.0, 10.0, 10.0, 0.2, 3.2];

pub fn scale_observation(obs: &Observation) -> Observation {
    std::array::from_fn(|i| obs[i] / OBSERVATION_SCALE[i])
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario configuration: {0}")]
    InvalidConfig(String),
    #[error("no overlap-free initial condition after {0} attempts")]
    InfeasibleStart(usize),
    #[error("gap must be positive for IDM, got {0}")]
    NonPositiveGap(f64),
    #[error("step called on a terminated episode")]
    SteppedTerminal,
    #[error("adversary action {0:?} outside [-1, 1]")]
    ActionOutOfRange(AdversaryAction),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ego,
    Leader,
    Follow,
    Target,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Ego, Role::Leader, Role::Follow, Role::Target];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Lane a non-ego vehicle drives in.
    pub fn home_lane(self) -> usize {
        match self {
            Role::Ego | Role::Leader => 0,
            Role::Follow | Role::Target => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub yaw: f64,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Running,
    Success,
    Crash,
    Timeout,
}

/// Command issued by an ego controller for one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoAction {
    /// Longitudinal acceleration (m/s²).
    pub accel: f64,
    /// Start the lane change this step. Ignored once a maneuver is under way.
    pub initiate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneChangeProgress {
    pub trajectory: LaneChangeTrajectory,
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioState {
    /// Indexed by [`Role::index`]: ego, leader, follow, target.
    pub vehicles: [VehicleState; 4],
    pub t: f64,
    pub steps: u32,
    pub outcome: Outcome,
    pub lane_change: Option<LaneChangeProgress>,
}

impl ScenarioState {
    pub fn from_vehicles(vehicles: [VehicleState; 4]) -> Self {
        Self { vehicles, t: 0.0, steps: 0, outcome: Outcome::Running, lane_change: None }
    }

    pub fn done(&self) -> bool {
        self.outcome != Outcome::Running
    }

    pub fn vehicle(&self, role: Role) -> &VehicleState {
        &self.vehicles[role.index()]
    }

    pub fn ego(&self) -> &VehicleState {
        &self.vehicles[0]
    }

    /// `[x_leader, x_follow, x_target, v_leader, v_follow, v_target, v_ego, yaw_ego, y_ego]`,
    /// positions as adversary-minus-ego offsets.
    pub fn observation(&self) -> Observation {
        let [ego, leader, follow, target] = &self.vehicles;
        [
            leader.x - ego.x,
            follow.x - ego.x,
            target.x - ego.x,
            leader.v,
            follow.v,
            target.v,
            ego.v,
            ego.yaw,
            ego.y,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: ScenarioState,
    pub a_ego: EgoAction,
    pub a_adv: AdversaryAction,
    pub s_next: ScenarioState,
    pub collision: Option<(Role, Role)>,
    pub r_ego: f64,
    pub r_adv: f64,
    pub terminal: bool,
    pub violation: Violation,
}

/// Draw an overlap-free initial configuration.
pub fn sample_initial_conditions<R: rand::Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<ScenarioState, ScenarioError> {
    const MAX_ATTEMPTS: usize = 100;
    for _ in 0..MAX_ATTEMPTS {
        let x_leader = cfg.range_dist.sample(rng);
        let gap_target_follow = cfg.range_dist.sample(rng);
        let x_follow = ScenarioConfig::gaussian(cfg.mu_x, cfg.sigma_x, rng);
        let x_target = x_follow + gap_target_follow;
        let mut speed = || ScenarioConfig::gaussian(cfg.mu_v, cfg.sigma_v, rng).clamp(0.0, 2.0 * cfg.mu_v);
        let speeds = [speed(), speed(), speed(), speed()];
        let w = cfg.lane_width;
        let vehicles = [
            VehicleState { x: 0.0, y: 0.0, v: speeds[0], yaw: 0.0, role: Role::Ego },
            VehicleState { x: x_leader, y: 0.0, v: speeds[1], yaw: 0.0, role: Role::Leader },
            VehicleState { x: x_follow, y: w, v: speeds[2], yaw: 0.0, role: Role::Follow },
            VehicleState { x: x_target, y: w, v: speeds[3], yaw: 0.0, role: Role::Target },
        ];
        if check_collision(&vehicles, cfg).is_none() && recoverable(&vehicles, cfg) {
            return Ok(ScenarioState::from_vehicles(vehicles));
        }
    }
    Err(ScenarioError::InfeasibleStart(MAX_ATTEMPTS))
}

/// Deceleration budget a same-lane follower may need to avoid its leader
/// at the initial instant.
const START_BRAKE_BUDGET: f64 = 0.5 * MAX_BRAKE;

/// Every same-lane follower can cancel its closing speed within its bumper
/// gap using half the physical brake authority.
fn recoverable(vehicles: &[VehicleState; 4], cfg: &ScenarioConfig) -> bool {
    let pairs = [(0, 1), (2, 3)];
    pairs.iter().all(|&(a, b)| {
        let (back, front) = if vehicles[a].x <= vehicles[b].x {
            (&vehicles[a], &vehicles[b])
        } else {
            (&vehicles[b], &vehicles[a])
        };
        let gap = front.x - back.x - cfg.veh_length;
        let closing = (back.v - front.v).max(0.0);
        gap > closing * closing / (2.0 * START_BRAKE_BUDGET)
    })
}

/// IDM acceleration for speed `v`, approach rate `dv` (own minus leader speed)
/// and bumper gap `s`, clamped to `[-MAX_BRAKE, a_max]`.
pub fn idm_acceleration(p: &IdmParams, v: f64, dv: f64, s: f64) -> Result<f64, ScenarioError> {
    if !(s > 0.0) {
        return Err(ScenarioError::NonPositiveGap(s));
    }
    let s_star = p.s0 + v * p.time_headway + v * dv / (2.0 * (p.a_max * p.b_comf).sqrt());
    let acc = p.a_max * (1.0 - (v / p.v0).powf(p.delta) - (s_star / s).powi(2));
    Ok(acc.clamp(-MAX_BRAKE, p.a_max))
}

/// IDM against the nearest vehicle ahead of `me` that occupies `lane`.
/// Returns `-MAX_BRAKE` when that vehicle already overlaps longitudinally.
pub(crate) fn idm_in_lane(state: &ScenarioState, me: Role, lane: usize, cfg: &ScenarioConfig) -> f64 {
    let own = state.vehicle(me);
    let leader = state
        .vehicles
        .iter()
        .filter(|v| v.role != me && v.x > own.x && geometry::occupies_lane(v, lane, cfg))
        .min_by(|a, b| a.x.total_cmp(&b.x));
    idm_behind(&cfg.idm, own, leader, cfg)
}

pub(crate) fn idm_behind(p: &IdmParams, own: &VehicleState, leader: Option<&VehicleState>, cfg: &ScenarioConfig) -> f64 {
    match leader {
        None => idm_acceleration(p, own.v, 0.0, f64::INFINITY).expect("infinite gap"),
        Some(l) => {
            let gap = l.x - own.x - cfg.veh_length;
            idm_acceleration(p, own.v, own.v - l.v, gap).unwrap_or(-MAX_BRAKE)
        }
    }
}

/// Map a normalised adversary action onto an acceleration.
pub fn action_to_accel(a: f64, cfg: &ScenarioConfig) -> f64 {
    if a >= 0.0 {
        a * cfg.throttle_accel
    } else {
        a * cfg.brake_decel
    }
}

/// Inverse of [`action_to_accel`], clamped into `[-1, 1]`.
pub fn accel_to_action(acc: f64, cfg: &ScenarioConfig) -> f64 {
    let a = if acc >= 0.0 { acc / cfg.throttle_accel } else { acc / cfg.brake_decel };
    a.clamp(-1.0, 1.0)
}

/// Advance the world by one time step.
pub fn step(
    s: &ScenarioState,
    a_ego: EgoAction,
    a_adv: AdversaryAction,
    cfg: &ScenarioConfig,
    rcfg: &RewardConfig,
) -> Result<Transition, ScenarioError> {
    if s.done() {
        return Err(ScenarioError::SteppedTerminal);
    }
    if a_adv.iter().any(|a| !(-1.0..=1.0).contains(a)) {
        return Err(ScenarioError::ActionOutOfRange(a_adv));
    }
    let dt = cfg.dt;
    let mut next = s.clone();

    for (i, &a) in a_adv.iter().enumerate() {
        let veh = &mut next.vehicles[i + 1];
        let acc = action_to_accel(a, cfg);
        veh.x += veh.v * dt;
        veh.v = (veh.v + acc * dt).max(0.0);
    }

    {
        let ego = &mut next.vehicles[0];
        let acc = a_ego.accel.clamp(-cfg.brake_decel, cfg.throttle_accel);
        ego.x += ego.v * ego.yaw.cos() * dt;
        ego.v = (ego.v + acc * dt).max(0.0);
    }
    if next.lane_change.is_none() && a_ego.initiate {
        next.lane_change = Some(LaneChangeProgress {
            trajectory: LaneChangeTrajectory::new(cfg.lane_change_duration, cfg.lane_width, s.ego().v),
            elapsed: 0.0,
        });
    }
    if let Some(progress) = next.lane_change.as_mut() {
        progress.elapsed = (progress.elapsed + dt).min(progress.trajectory.duration);
        let (y, yaw) = progress.trajectory.evaluate(progress.elapsed).expect("elapsed clamped to duration");
        next.vehicles[0].y = y;
        next.vehicles[0].yaw = yaw;
    }

    next.steps = s.steps + 1;
    next.t = next.steps as f64 * dt;

    let collision = check_collision(&next.vehicles, cfg);
    next.outcome = if collision.is_some() {
        Outcome::Crash
    } else if lane_change_complete(next.ego(), cfg) {
        Outcome::Success
    } else if next.ego().x >= cfg.x_lim || next.steps >= cfg.max_steps() {
        Outcome::Timeout
    } else {
        Outcome::Running
    };

    let mut tr = Transition {
        s: s.clone(),
        a_ego,
        a_adv,
        terminal: next.done(),
        s_next: next,
        collision,
        r_ego: 0.0,
        r_adv: 0.0,
        violation: Violation::None,
    };
    tr.r_ego = ego_reward(&tr, rcfg);
    tr.violation = detect_rule_violation(&tr, cfg);
    tr.r_adv = adversary_reward(&tr, rcfg);
    Ok(tr)
}
