//! Oriented-rectangle footprints and the separating-axis overlap test.

use super::{Role, ScenarioConfig, VehicleState};

pub type Point = [f64; 2];

/// Corners of a `width × length` rectangle centred at `(x, y)` and rotated
/// by `yaw`, in the order front-left, front-right, rear-right, rear-left.
pub fn footprint(x: f64, y: f64, yaw: f64, width: f64, length: f64) -> [Point; 4] {
    let (s, c) = yaw.sin_cos();
    let hl = 0.5 * length;
    let hw = 0.5 * width;
    let local = [[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]];
    local.map(|[lx, ly]| [x + lx * c - ly * s, y + lx * s + ly * c])
}

pub fn vehicle_footprint(v: &VehicleState, cfg: &ScenarioConfig) -> [Point; 4] {
    footprint(v.x, v.y, v.yaw, cfg.veh_width, cfg.veh_length)
}

fn project(corners: &[Point; 4], axis: Point) -> (f64, f64) {
    corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p[0] * axis[0] + p[1] * axis[1];
        (lo.min(d), hi.max(d))
    })
}

/// Separating-axis test for two convex quadrilaterals with pairwise-parallel
/// edges. Touching boundaries count as intersecting.
pub fn rectangles_intersect(a: &[Point; 4], b: &[Point; 4]) -> bool {
    for rect in [a, b] {
        for i in 0..2 {
            let p = rect[i];
            let q = rect[i + 1];
            let axis = [-(q[1] - p[1]), q[0] - p[0]];
            let (a_lo, a_hi) = project(a, axis);
            let (b_lo, b_hi) = project(b, axis);
            if a_hi < b_lo || b_hi < a_lo {
                return false;
            }
        }
    }
    true
}

/// Fixed role order in which colliding pairs are reported.
pub const PAIR_ORDER: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// First intersecting pair of vehicles in [`PAIR_ORDER`], if any.
pub fn check_collision(vehicles: &[VehicleState; 4], cfg: &ScenarioConfig) -> Option<(Role, Role)> {
    let prints = vehicles.each_ref().map(|v| vehicle_footprint(v, cfg));
    PAIR_ORDER
        .iter()
        .find(|&&(i, j)| rectangles_intersect(&prints[i], &prints[j]))
        .map(|&(i, j)| (vehicles[i].role, vehicles[j].role))
}

/// Lateral interval `[lo, hi]` of lane `lane` (0 = ego's starting lane, 1 = target lane).
pub fn lane_bounds(lane: usize, cfg: &ScenarioConfig) -> (f64, f64) {
    let center = lane as f64 * cfg.lane_width;
    (center - 0.5 * cfg.lane_width, center + 0.5 * cfg.lane_width)
}

fn lateral_extent(v: &VehicleState, cfg: &ScenarioConfig) -> (f64, f64) {
    vehicle_footprint(v, cfg)
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])))
}

/// True iff every footprint corner lies inside lane `lane`.
pub fn fully_in_lane(v: &VehicleState, lane: usize, cfg: &ScenarioConfig) -> bool {
    let (lo, hi) = lane_bounds(lane, cfg);
    let (min_y, max_y) = lateral_extent(v, cfg);
    min_y >= lo && max_y <= hi
}

/// True iff the footprint overlaps lane `lane` laterally.
pub fn occupies_lane(v: &VehicleState, lane: usize, cfg: &ScenarioConfig) -> bool {
    let (lo, hi) = lane_bounds(lane, cfg);
    let (min_y, max_y) = lateral_extent(v, cfg);
    max_y > lo && min_y < hi
}

/// Whole-body lane-change success: all corners inside the target lane.
pub fn lane_change_complete(ego: &VehicleState, cfg: &ScenarioConfig) -> bool {
    fully_in_lane(ego, 1, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn veh(role: Role, x: f64, y: f64, yaw: f64) -> VehicleState {
        VehicleState { x, y, v: 10.0, yaw, role }
    }

    #[test]
    fn identical_pose_collides() {
        let cfg = ScenarioConfig::default();
        let a = vehicle_footprint(&veh(Role::Ego, 3.0, 1.0, 0.3), &cfg);
        assert!(rectangles_intersect(&a, &a));
    }

    #[test]
    fn adjacent_lanes_do_not_collide() {
        let cfg = ScenarioConfig::default();
        let vehicles = [
            veh(Role::Ego, 0.0, 0.0, 0.0),
            veh(Role::Leader, 100.0, 0.0, 0.0),
            veh(Role::Follow, -100.0, 3.2, 0.0),
            veh(Role::Target, 0.0, 3.2, 0.0),
        ];
        assert_eq!(check_collision(&vehicles, &cfg), None);
    }

    #[test]
    fn reports_first_pair_in_role_order() {
        let cfg = ScenarioConfig::default();
        let vehicles = [
            veh(Role::Ego, 0.0, 0.0, 0.0),
            veh(Role::Leader, 100.0, 0.0, 0.0),
            veh(Role::Follow, 102.0, 0.0, 0.0),
            veh(Role::Target, 1.0, 0.5, 0.0),
        ];
        assert_eq!(check_collision(&vehicles, &cfg), Some((Role::Ego, Role::Target)));
    }

    #[test]
    fn rotated_corner_contact() {
        // a 45° rectangle whose corner pokes into an axis-aligned one
        let a = footprint(0.0, 0.0, 0.0, 2.0, 2.0);
        let d = 1.0 + std::f64::consts::SQRT_2;
        let touching = footprint(d - 0.01, 0.0, std::f64::consts::FRAC_PI_4, 2.0, 2.0);
        let apart = footprint(d + 0.01, 0.0, std::f64::consts::FRAC_PI_4, 2.0, 2.0);
        assert!(rectangles_intersect(&a, &touching));
        assert!(!rectangles_intersect(&a, &apart));
    }

    #[test]
    fn lane_change_completion() {
        let cfg = ScenarioConfig::default();
        assert!(lane_change_complete(&veh(Role::Ego, 0.0, 3.2, 0.0), &cfg));
        assert!(!lane_change_complete(&veh(Role::Ego, 0.0, 1.6, 0.0), &cfg));

        // Lowest corner at yaw 0.2 sits at y - (L/2 sin + W/2 cos); place it 2 cm below the marking.
        let yaw: f64 = 0.2;
        let drop = 0.5 * cfg.veh_length * yaw.sin() + 0.5 * cfg.veh_width * yaw.cos();
        let y = 1.6 - 0.02 + drop;
        assert!(y > 1.6 && y < 4.8);
        assert!(!lane_change_complete(&veh(Role::Ego, 0.0, y, yaw), &cfg));
        assert!(lane_change_complete(&veh(Role::Ego, 0.0, y + 0.04, yaw), &cfg));
    }

    #[test]
    fn lane_occupancy_while_straddling() {
        let cfg = ScenarioConfig::default();
        let ego = veh(Role::Ego, 0.0, 1.6, 0.0);
        assert!(occupies_lane(&ego, 0, &cfg));
        assert!(occupies_lane(&ego, 1, &cfg));
        assert!(!fully_in_lane(&ego, 0, &cfg));
        assert!(fully_in_lane(&veh(Role::Ego, 0.0, 0.0, 0.0), 0, &cfg));
    }
}
