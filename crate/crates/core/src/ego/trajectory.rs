use super::EgoError;

/// Open-loop lateral maneuver: quintic offset from 0 to `lane_width` with
/// zero lateral velocity and acceleration at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneChangeTrajectory {
    pub duration: f64,
    pub lane_width: f64,
    /// Longitudinal speed used to turn lateral velocity into a heading.
    pub ref_speed: f64,
}

/// Speeds below this are lifted so the heading stays well inside ±π/2.
const MIN_REF_SPEED: f64 = 1.0;

impl LaneChangeTrajectory {
    pub fn new(duration: f64, lane_width: f64, speed: f64) -> Self {
        Self { duration, lane_width, ref_speed: speed.max(MIN_REF_SPEED) }
    }

    /// Normalised quintic `10τ³ − 15τ⁴ + 6τ⁵` and its derivative in τ.
    fn shape(tau: f64) -> (f64, f64) {
        let t2 = tau * tau;
        let t3 = t2 * tau;
        let pos = t3 * (10.0 - 15.0 * tau + 6.0 * t2);
        let vel = 30.0 * t2 * (1.0 - tau) * (1.0 - tau);
        (pos, vel)
    }

    /// Lateral offset and heading after `elapsed` seconds.
    pub fn evaluate(&self, elapsed: f64) -> Result<(f64, f64), EgoError> {
        if !(0.0..=self.duration).contains(&elapsed) {
            return Err(EgoError::OutOfRange { elapsed, duration: self.duration });
        }
        if elapsed == self.duration {
            return Ok((self.lane_width, 0.0));
        }
        let (pos, vel) = Self::shape(elapsed / self.duration);
        let y_dot = self.lane_width * vel / self.duration;
        Ok((self.lane_width * pos, (y_dot / self.ref_speed).atan()))
    }

    /// Lateral velocity and acceleration, for smoothness checks.
    pub fn lateral_rates(&self, elapsed: f64) -> (f64, f64) {
        let tau = elapsed / self.duration;
        let vel = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau);
        let acc = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau);
        (
            self.lane_width * vel / self.duration,
            self.lane_width * acc / (self.duration * self.duration),
        )
    }
}
