use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::ScenarioError;

/// Physical brake limit applied to every longitudinal command (m/s²).
pub const MAX_BRAKE: f64 = 8.0;

/// Default desired speed of the ego, below that of the surrounding traffic.
pub const EGO_DESIRED_SPEED: f64 = 7.0;

/// Intelligent Driver Model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct IdmParams {
    /// Desired velocity (m/s).
    pub v0: f64,
    /// Safe time headway (s).
    #[serde(rename = "T")]
    pub time_headway: f64,
    /// Maximum acceleration (m/s²).
    pub a_max: f64,
    /// Comfortable deceleration (m/s²).
    pub b_comf: f64,
    /// Acceleration exponent.
    pub delta: f64,
    /// Minimum distance (m).
    pub s0: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            v0: 10.0,
            time_headway: 1.5,
            a_max: 1.0,
            b_comf: 1.67,
            delta: 4.0,
            s0: 2.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let ok = self.v0 > 0.0
            && self.time_headway > 0.0
            && self.a_max > 0.0
            && self.b_comf > 0.0
            && self.s0 > 0.0
            && self.delta >= 1.0;
        if ok {
            Ok(())
        } else {
            Err(ScenarioError::InvalidConfig(format!("IDM parameters out of range: {self:?}")))
        }
    }
}

/// Distribution of the initial longitudinal range (center-to-center, m)
/// used for both the ego-leader offset and the follow-target gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RangeDist {
    /// Lognormal with the given median, truncated to `[min, max]` by rejection.
    LogNormal { median: f64, sigma_log: f64, min: f64, max: f64 },
    Uniform { min: f64, max: f64 },
    Fixed { value: f64 },
}

impl Default for RangeDist {
    fn default() -> Self {
        RangeDist::LogNormal { median: 30.0, sigma_log: 0.5, min: 2.0, max: 150.0 }
    }
}

impl RangeDist {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let ok = match *self {
            RangeDist::LogNormal { median, sigma_log, min, max } => {
                median > 0.0 && sigma_log >= 0.0 && min > 0.0 && max >= min
            }
            RangeDist::Uniform { min, max } => min > 0.0 && max >= min,
            RangeDist::Fixed { value } => value > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ScenarioError::InvalidConfig(format!("bad range distribution: {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RangeDist::LogNormal { median, sigma_log, min, max } => {
                if sigma_log == 0.0 {
                    return median.clamp(min, max);
                }
                let dist = LogNormal::new(median.ln(), sigma_log).expect("validated lognormal");
                for _ in 0..1000 {
                    let x: f64 = dist.sample(rng);
                    if (min..=max).contains(&x) {
                        return x;
                    }
                }
                median.clamp(min, max)
            }
            RangeDist::Uniform { min, max } => {
                if max == min {
                    min
                } else {
                    rng.gen_range(min..max)
                }
            }
            RangeDist::Fixed { value } => value,
        }
    }
}

/// World geometry, episode limits and initial-condition distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub lane_width: f64,
    pub veh_width: f64,
    pub veh_length: f64,
    pub x_lim: f64,
    pub t_lim: f64,
    pub dt: f64,
    pub mu_x: f64,
    pub sigma_x: f64,
    pub mu_v: f64,
    pub sigma_v: f64,
    pub range_dist: RangeDist,
    pub v_limit: f64,
    /// Car-following law of the surrounding vehicles.
    pub idm: IdmParams,
    /// Longitudinal law of the ego while it waits for or executes a lane change.
    pub ego_idm: IdmParams,
    /// Acceleration commanded by a full-throttle adversary action (m/s²).
    pub throttle_accel: f64,
    /// Deceleration commanded by a full-brake adversary action (m/s²).
    pub brake_decel: f64,
    /// Duration of the ego lane-change maneuver (s).
    pub lane_change_duration: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            lane_width: 3.2,
            veh_width: 1.85,
            veh_length: 4.83,
            x_lim: 300.0,
            t_lim: 30.0,
            dt: 0.1,
            mu_x: 0.0,
            sigma_x: 5.0,
            mu_v: 10.0,
            sigma_v: 4.0,
            range_dist: RangeDist::default(),
            v_limit: 16.7,
            idm: IdmParams::default(),
            ego_idm: IdmParams { v0: EGO_DESIRED_SPEED, ..IdmParams::default() },
            throttle_accel: 3.0,
            brake_decel: MAX_BRAKE,
            lane_change_duration: 3.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("lane_width", self.lane_width),
            ("veh_width", self.veh_width),
            ("veh_length", self.veh_length),
            ("x_lim", self.x_lim),
            ("t_lim", self.t_lim),
            ("v_limit", self.v_limit),
            ("throttle_accel", self.throttle_accel),
            ("brake_decel", self.brake_decel),
            ("lane_change_duration", self.lane_change_duration),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ScenarioError::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.dt > 0.0 && self.dt <= 0.5) {
            return Err(ScenarioError::InvalidConfig(format!("dt must lie in (0, 0.5], got {}", self.dt)));
        }
        if self.sigma_x < 0.0 || self.sigma_v < 0.0 {
            return Err(ScenarioError::InvalidConfig("standard deviations must be non-negative".into()));
        }
        if self.mu_v < 0.0 {
            return Err(ScenarioError::InvalidConfig("mu_v must be non-negative".into()));
        }
        if self.veh_width >= self.lane_width {
            return Err(ScenarioError::InvalidConfig("vehicles must be narrower than a lane".into()));
        }
        self.idm.validate()?;
        self.ego_idm.validate()?;
        self.range_dist.validate()
    }

    /// Number of steps after which the episode times out.
    pub fn max_steps(&self) -> u32 {
        (self.t_lim / self.dt).round() as u32
    }

    pub(crate) fn gaussian<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
        if sd == 0.0 {
            mean
        } else {
            Normal::new(mean, sd).expect("validated gaussian").sample(rng)
        }
    }
}

/// World dynamics plus reward shaping: everything an episode needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub reward: RewardConfig,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.scenario.validate()?;
        self.reward.validate()
    }
}

/// Reward shaping constants shared by the ego and adversary rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub r_success: f64,
    pub r_crash: f64,
    pub speed_coef: f64,
    pub r_rule_penalty: f64,
    /// Rationality weight on the rule penalty.
    pub beta: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { r_success: 100.0, r_crash: -50.0, speed_coef: 0.1, r_rule_penalty: -50.0, beta: 1.0 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.r_success > 0.0 && self.r_crash < 0.0 && self.r_rule_penalty < 0.0 && self.beta >= 0.0 {
            Ok(())
        } else {
            Err(ScenarioError::InvalidConfig(format!("reward constants out of range: {self:?}")))
        }
    }
}
