//! Gap acceptance for lane-change initiation and the per-step safety guard.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyParams {
    /// Minimum bumper-to-bumper distance, m.
    pub d_min: f64,
    /// Braking capability assumed when absorbing a speed difference, m/s².
    pub b_max: f64,
}

impl Default for SafetyParams {
    fn default() -> Self {
        Self { d_min: 2.0, b_max: 3.0 }
    }
}

/// A target-lane vehicle as seen from the ego: bumper gap and speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub gap: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapAssessment {
    pub lead_gap: f64,
    pub lag_gap: f64,
    pub lead_required: f64,
    pub lag_required: f64,
    pub accepted: bool,
}

/// Distance needed to absorb a closing speed `v_closing_sq = v_back² - v_front²`
/// at `b_max`, plus the minimum distance.
fn required_gap(params: &SafetyParams, v_back: f64, v_front: f64) -> f64 {
    params.d_min + ((v_back * v_back - v_front * v_front) / (2.0 * params.b_max)).max(0.0)
}

pub fn assess_gap(
    ego_speed: f64,
    lead: Option<Neighbor>,
    lag: Option<Neighbor>,
    params: &SafetyParams,
) -> GapAssessment {
    let (lead_gap, lead_required) = match lead {
        Some(n) => (n.gap, required_gap(params, ego_speed, n.speed)),
        None => (f64::INFINITY, params.d_min),
    };
    let (lag_gap, lag_required) = match lag {
        Some(n) => (n.gap, required_gap(params, n.speed, ego_speed)),
        None => (f64::INFINITY, params.d_min),
    };
    GapAssessment {
        lead_gap,
        lag_gap,
        lead_required,
        lag_required,
        accepted: lead_gap >= lead_required && lag_gap >= lag_required,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardDecision {
    Continue,
    Abort,
}

/// Past this fraction of the lateral distance the maneuver is committed.
pub const COMMIT_PROGRESS: f64 = 0.5;

/// Abort iff the gap is no longer acceptable and the ego has covered less
/// than half of the lateral distance toward the target lane center.
pub fn guard_decision(assessment: &GapAssessment, lateral_progress: f64) -> GuardDecision {
    if !assessment.accepted && lateral_progress < COMMIT_PROGRESS {
        GuardDecision::Abort
    } else {
        GuardDecision::Continue
    }
}
