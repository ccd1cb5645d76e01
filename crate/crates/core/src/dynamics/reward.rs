//! Per-step cost terms for smoothness (yaw acceleration, yaw rate) and
//! efficiency (remaining lateral deviation).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub w_acce: f64,
    pub w_rate: f64,
    pub w_time: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_acce: -1.0,
            w_rate: -1.0,
            w_time: -0.05,
        }
    }
}

/// Immediate reward and its three parts; `r` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardTerms {
    pub r: f64,
    pub acce: f64,
    pub rate: f64,
    pub time: f64,
}

/// Costs with non-positive weights are always `<= 0`.
pub fn immediate_reward(weights: &RewardWeights, a_yaw: f64, omega: f64, delta_d_lat: f64) -> RewardTerms {
    let acce = weights.w_acce * a_yaw.abs();
    let rate = weights.w_rate * omega.abs();
    let time = weights.w_time * delta_d_lat.abs();
    RewardTerms {
        r: acce + rate + time,
        acce,
        rate,
        time,
    }
}
