//! Longitudinal control: the Intelligent Driver Model, a free-gap variant of
//! it, and the dual-leader rule used while a vehicle changes lanes.

use crate::{Error, Result};

/// Hard physical braking limit applied by the simulator, m/s².
pub const BRAKE_LIMIT: f64 = -8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    /// Maximum acceleration, m/s².
    pub a_max: f64,
    /// Comfortable deceleration, m/s².
    pub b_comf: f64,
    /// Jam distance, m.
    pub s0: f64,
    /// Desired time headway, s.
    pub time_headway: f64,
    /// Free-road exponent.
    pub delta: f64,
    /// Gap multiple of the desired gap beyond which the interaction term is
    /// ignored by [`modified_idm_accel`].
    pub free_gap_factor: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            a_max: 1.5,
            b_comf: 2.0,
            s0: 2.0,
            time_headway: 1.5,
            delta: 4.0,
            free_gap_factor: 5.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a_max", self.a_max),
            ("b_comf", self.b_comf),
            ("s0", self.s0),
            ("time_headway", self.time_headway),
            ("free_gap_factor", self.free_gap_factor),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be positive")));
            }
        }
        if !(self.delta >= 1.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParam("delta must be >= 1".into()));
        }
        Ok(())
    }

    /// Desired dynamical gap s* for speed `v` and approach rate `dv = v - v_lead`.
    pub fn desired_gap(&self, v: f64, dv: f64) -> f64 {
        let dynamic = v * self.time_headway + v * dv / (2.0 * (self.a_max * self.b_comf).sqrt());
        self.s0 + dynamic.max(0.0)
    }

    fn free_term(&self, v: f64, v_limit: f64) -> f64 {
        1.0 - (v / v_limit).powf(self.delta)
    }

    /// Gap at which a vehicle following an equal-speed leader neither
    /// accelerates nor brakes. `None` at or above the speed limit.
    pub fn equilibrium_gap(&self, v: f64, v_limit: f64) -> Option<f64> {
        let free = self.free_term(v, v_limit);
        (free > 0.0).then(|| self.desired_gap(v, 0.0) / free.sqrt())
    }
}

/// Bumper-to-bumper gap and speed of the vehicle ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    pub gap: f64,
    pub speed: f64,
}

fn check_leader(leader: Option<Leader>) -> Result<()> {
    match leader {
        Some(l) if !(l.gap > 0.0) => Err(Error::NonPositiveGap { gap: l.gap }),
        _ => Ok(()),
    }
}

/// Plain IDM acceleration. Without a leader only the free-road term remains.
pub fn idm_accel(params: &IdmParams, v: f64, v_limit: f64, leader: Option<Leader>) -> Result<f64> {
    check_leader(leader)?;
    let free = params.free_term(v, v_limit);
    let interaction = match leader {
        Some(l) => (params.desired_gap(v, v - l.speed) / l.gap).powi(2),
        None => 0.0,
    };
    Ok(params.a_max * (free - interaction))
}

/// IDM with the interaction term dropped once the gap exceeds
/// `free_gap_factor * s*`, so that lightly constrained vehicles settle at
/// their own speed limit.
pub fn modified_idm_accel(
    params: &IdmParams,
    v: f64,
    v_limit: f64,
    leader: Option<Leader>,
) -> Result<f64> {
    check_leader(leader)?;
    let leader = leader.filter(|l| {
        let s_star = params.desired_gap(v, v - l.speed);
        l.gap <= params.free_gap_factor * s_star
    });
    idm_accel(params, v, v_limit, leader)
}

/// Acceleration while balancing between the leader in the ego lane and the
/// leader in the target lane: the smaller of the two.
pub fn dual_leader_accel(
    params: &IdmParams,
    v: f64,
    v_limit: f64,
    ego_lane: Option<Leader>,
    target_lane: Option<Leader>,
) -> Result<f64> {
    let mut accel = None::<f64>;
    for leader in [ego_lane, target_lane].into_iter().flatten() {
        let a = modified_idm_accel(params, v, v_limit, Some(leader))?;
        accel = Some(accel.map_or(a, |prev| prev.min(a)));
    }
    match accel {
        Some(a) => Ok(a),
        None => modified_idm_accel(params, v, v_limit, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> IdmParams {
        IdmParams::default()
    }

    #[test]
    fn free_flow_equilibrium_and_start() {
        assert_eq!(idm_accel(&p(), 30.0, 30.0, None).unwrap(), 0.0);
        assert_eq!(idm_accel(&p(), 0.0, 30.0, None).unwrap(), 1.5);
    }

    #[test]
    fn substitution_example() {
        // v=20, v0=33.33.., dv=0, s*=32, gap=32 -> 1.5 * (1 - 0.6^4 - 1)
        let v0 = 100.0 / 3.0;
        let a = idm_accel(&p(), 20.0, v0, Some(Leader { gap: 32.0, speed: 20.0 })).unwrap();
        assert!((a - (-0.1944)).abs() < 1e-12, "{a}");
    }

    #[test]
    fn nonpositive_gap_rejected() {
        let err = idm_accel(&p(), 10.0, 30.0, Some(Leader { gap: 0.0, speed: 5.0 }));
        assert!(matches!(err, Err(Error::NonPositiveGap { .. })));
        let err = modified_idm_accel(&p(), 10.0, 30.0, Some(Leader { gap: -1.0, speed: 5.0 }));
        assert!(err.is_err());
    }

    #[test]
    fn free_gap_gate() {
        let params = p();
        let (v, v0) = (20.0, 30.0);
        let s_star = params.desired_gap(v, 0.0);
        let far = Leader { gap: 10.0 * s_star, speed: v };
        let a = modified_idm_accel(&params, v, v0, Some(far)).unwrap();
        let free = params.a_max * (1.0 - (v / v0).powf(4.0));
        assert_eq!(a, free);

        // gate inactive at gap = s*: same as plain IDM, -a_max at v = v_limit
        let s_star = params.desired_gap(v0, 0.0);
        let near = Leader { gap: s_star, speed: v0 };
        let a = modified_idm_accel(&params, v0, v0, Some(near)).unwrap();
        assert!((a + params.a_max).abs() < 1e-12);
        assert_eq!(a, idm_accel(&params, v0, v0, Some(near)).unwrap());

        for v in [0.0, 5.0, 20.0, 35.0] {
            assert_eq!(
                modified_idm_accel(&params, v, v0, None).unwrap(),
                idm_accel(&params, v, v0, None).unwrap()
            );
        }
    }

    #[test]
    fn dual_leader_takes_minimum() {
        let params = p();
        let (v, v0) = (25.0, 30.0);
        let close = Leader { gap: 20.0, speed: 22.0 };
        let open = Leader { gap: 60.0, speed: 28.0 };
        let a_close = modified_idm_accel(&params, v, v0, Some(close)).unwrap();
        let a_open = modified_idm_accel(&params, v, v0, Some(open)).unwrap();
        let dual = dual_leader_accel(&params, v, v0, Some(close), Some(open)).unwrap();
        assert_eq!(dual, a_close.min(a_open));
        assert_eq!(dual_leader_accel(&params, v, v0, None, Some(open)).unwrap(), a_open);
        assert_eq!(dual_leader_accel(&params, v, v0, Some(open), Some(open)).unwrap(), a_open);
        assert_eq!(
            dual_leader_accel(&params, v, v0, None, None).unwrap(),
            modified_idm_accel(&params, v, v0, None).unwrap()
        );
    }

    /// Bisection on the acceleration as a function of gap.
    fn equilibrium_by_bisection(params: &IdmParams, v: f64, v0: f64) -> f64 {
        let f = |gap: f64| idm_accel(params, v, v0, Some(Leader { gap, speed: v })).unwrap();
        let (mut lo, mut hi) = (1e-3, 1e4);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn equilibrium_gap_matches_root_finder() {
        let params = p();
        let v0 = 30.0;
        for ratio in [0.5, 0.8, 0.9] {
            let v = ratio * v0;
            let closed = params.equilibrium_gap(v, v0).unwrap();
            let root = equilibrium_by_bisection(&params, v, v0);
            assert!((closed - root).abs() < 1e-6, "ratio {ratio}: {closed} vs {root}");
        }
        assert!(params.equilibrium_gap(v0, v0).is_none());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_speed_and_gap(
                v in 0.0f64..40.0, dv_speed in 0.0f64..10.0,
                gap in 0.5f64..200.0, dgap in 0.0f64..50.0,
                v_lead in 0.0f64..40.0, v0 in 20.0f64..40.0,
            ) {
                let params = IdmParams::default();
                let l = Some(Leader { gap, speed: v_lead });
                let base = idm_accel(&params, v, v0, l).unwrap();
                let faster = idm_accel(&params, v + dv_speed, v0, l).unwrap();
                let wider = idm_accel(&params, v, v0, Some(Leader { gap: gap + dgap, speed: v_lead })).unwrap();
                prop_assert!(faster <= base + 1e-9);
                prop_assert!(wider >= base - 1e-9);
                prop_assert!(base <= params.a_max);
                prop_assert!(modified_idm_accel(&params, v, v0, l).unwrap() <= params.a_max);
            }

            #[test]
            fn dual_never_exceeds_single(
                v in 0.0f64..40.0, g1 in 0.5f64..200.0, g2 in 0.5f64..200.0,
                s1 in 0.0f64..40.0, s2 in 0.0f64..40.0,
            ) {
                let params = IdmParams::default();
                let l1 = Leader { gap: g1, speed: s1 };
                let l2 = Leader { gap: g2, speed: s2 };
                let dual = dual_leader_accel(&params, v, 30.0, Some(l1), Some(l2)).unwrap();
                let a1 = modified_idm_accel(&params, v, 30.0, Some(l1)).unwrap();
                let a2 = modified_idm_accel(&params, v, 30.0, Some(l2)).unwrap();
                prop_assert_eq!(dual, a1.min(a2));
            }
        }
    }
}
