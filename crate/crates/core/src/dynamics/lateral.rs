//! Lateral kinematics driven by yaw acceleration.

use crate::world::VehicleState;

/// Environment bound on the commanded yaw acceleration, rad/s².
pub const MAX_YAW_ACCEL: f64 = 0.5;
/// Yaw-rate saturation, rad/s.
pub const MAX_YAW_RATE: f64 = 0.3;
/// Heading saturation relative to the road axis, rad.
pub const MAX_HEADING: f64 = 0.3;

/// Yaw acceleration command, rad/s². Always within ±[`MAX_YAW_ACCEL`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Action(f64);

impl Action {
    /// Clamps into the admissible range. NaN maps to zero.
    pub fn new(a_yaw: f64) -> Self {
        if a_yaw.is_nan() {
            return Self(0.0);
        }
        Self(a_yaw.clamp(-MAX_YAW_ACCEL, MAX_YAW_ACCEL))
    }

    pub fn yaw_accel(self) -> f64 {
        self.0
    }
}

/// Semi-implicit Euler: yaw rate first, then heading, then lateral position.
/// Longitudinal position is advanced by the world step.
pub fn integrate_lateral(ego: &mut VehicleState, action: Action, dt: f64) {
    ego.omega = (ego.omega + action.yaw_accel() * dt).clamp(-MAX_YAW_RATE, MAX_YAW_RATE);
    ego.theta = (ego.theta + ego.omega * dt).clamp(-MAX_HEADING, MAX_HEADING);
    ego.y += ego.v * ego.theta.sin() * dt;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ego(v: f64) -> VehicleState {
        VehicleState {
            vid: 1,
            lane_index: 0,
            x: 0.0,
            y: 1.875,
            v,
            a: 0.0,
            theta: 0.0,
            omega: 0.0,
            length: 5.0,
            v_limit: 30.0,
        }
    }

    #[test]
    fn null_action_keeps_lane() {
        let mut e = ego(25.0);
        for _ in 0..100 {
            integrate_lateral(&mut e, Action::new(0.0), 0.1);
        }
        assert_eq!(e.y, 1.875);
    }

    #[test]
    fn one_euler_step() {
        let mut e = ego(0.0);
        integrate_lateral(&mut e, Action::new(0.1), 0.1);
        assert!((e.omega - 0.01).abs() < 1e-15);
        assert!((e.theta - 0.001).abs() < 1e-15);
    }

    #[test]
    fn lateral_displacement_uses_updated_heading() {
        let mut e = ego(20.0);
        e.theta = 0.05;
        integrate_lateral(&mut e, Action::new(0.0), 0.1);
        assert!((e.y - 1.875 - 0.099_958_338_541_356_66).abs() < 1e-12);
    }

    #[test]
    fn action_clamp() {
        assert_eq!(Action::new(2.0).yaw_accel(), 0.5);
        assert_eq!(Action::new(-0.7).yaw_accel(), -0.5);
        assert_eq!(Action::new(f64::NAN).yaw_accel(), 0.0);
    }

    proptest! {
        #[test]
        fn saturations_hold(actions in proptest::collection::vec(-1.0f64..1.0, 1..200)) {
            let mut e = ego(30.0);
            for a in actions {
                integrate_lateral(&mut e, Action::new(a), 0.1);
                prop_assert!(e.omega.abs() <= MAX_YAW_RATE);
                prop_assert!(e.theta.abs() <= MAX_HEADING);
            }
        }
    }
}
