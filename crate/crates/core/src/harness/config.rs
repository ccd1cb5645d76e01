//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional and falls
//! back to its default. Speed limits are given in km/h; everything else is SI.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::RewardWeights;
use crate::gap::SafetyParams;
use crate::idm::IdmParams;
use crate::qlearn::{BoundMode, TrainConfig};
use crate::world::{kmh_to_ms, ScenarioConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub train: TrainConfig,
    pub safety: SafetyParams,
    pub idm: IdmParams,
    pub reward: RewardWeights,
}

const KEYS: &[&str] = &[
    "seed",
    "n_lanes",
    "segment_length",
    "lane_width",
    "curvature",
    "dt",
    "departure_interval_min",
    "departure_interval_max",
    "speed_limit_min_kmh",
    "speed_limit_max_kmh",
    "command_x_min",
    "command_x_max",
    "max_sim_steps",
    "total_gradient_steps",
    "gamma",
    "alpha",
    "batch_size",
    "warmup_transitions",
    "target_sync_period",
    "sigma_start",
    "sigma_end",
    "sigma_anneal_steps",
    "replay_capacity",
    "max_grad_norm",
    "b_bound_mode",
    "d_min",
    "b_max",
    "idm_a_max",
    "idm_b_comf",
    "idm_s0",
    "idm_time_headway",
    "idm_delta",
    "idm_free_gap_factor",
    "w_acce",
    "w_rate",
    "w_time",
];

fn float(raw: &str) -> std::result::Result<f64, String> {
    let v: f64 = raw.parse().map_err(|_| format!("`{raw}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{raw}` is not finite"))
    }
}

fn positive(raw: &str) -> std::result::Result<f64, String> {
    let v = float(raw)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn non_negative(raw: &str) -> std::result::Result<f64, String> {
    let v = float(raw)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn non_positive(raw: &str) -> std::result::Result<f64, String> {
    let v = float(raw)?;
    if v <= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be <= 0, got {v}"))
    }
}

fn integer(raw: &str) -> std::result::Result<u64, String> {
    raw.parse().map_err(|_| format!("`{raw}` is not a non-negative integer"))
}

fn count(raw: &str) -> std::result::Result<usize, String> {
    match integer(raw)? {
        0 => Err("must be >= 1".into()),
        n => usize::try_from(n).map_err(|_| format!("{n} is too large")),
    }
}

/// Shortest km/h decimal that converts back to exactly `ms`, if any.
fn kmh_repr(ms: f64) -> Option<f64> {
    // prefer the shortest decimal that converts back exactly
    for digits in 0..16 {
        let candidate: f64 = format!("{:.digits$}", ms * 3.6).parse().ok()?;
        if kmh_to_ms(candidate) == ms {
            return Some(candidate);
        }
    }
    let mut up = ms * 3.6;
    let mut down = up;
    for _ in 0..64 {
        if kmh_to_ms(up) == ms {
            return Some(up);
        }
        if kmh_to_ms(down) == ms {
            return Some(down);
        }
        up = up.next_up();
        down = down.next_down();
    }
    None
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Config::default();
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut last_line = 0;
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return Err(Error::Config {
                    line,
                    msg: format!("`{key}` already set on line {prev}"),
                });
            }
            config.set(key, value).map_err(|msg| Error::Config { line, msg })?;
            last_line = line;
        }
        config.validate().map_err(|e| Error::Config {
            line: last_line,
            msg: e.to_string(),
        })?;
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let s = &mut self.scenario;
        let t = &mut self.train;
        match key {
            "seed" => {
                let seed = integer(value)?;
                s.seed = seed;
                t.seed = seed;
            }
            "n_lanes" => {
                let n = count(value)?;
                if n < 2 {
                    return Err("must be >= 2".into());
                }
                s.road.n_lanes = n;
            }
            "segment_length" => s.road.segment_length = positive(value)?,
            "lane_width" => s.road.lane_width = positive(value)?,
            "curvature" => s.road.curvature = float(value)?,
            "dt" => s.dt = positive(value)?,
            "departure_interval_min" => s.departure_interval.0 = positive(value)?,
            "departure_interval_max" => s.departure_interval.1 = positive(value)?,
            "speed_limit_min_kmh" => s.v_limit_range.0 = kmh_to_ms(positive(value)?),
            "speed_limit_max_kmh" => s.v_limit_range.1 = kmh_to_ms(positive(value)?),
            "speed_limit_min_ms" => s.v_limit_range.0 = positive(value)?,
            "speed_limit_max_ms" => s.v_limit_range.1 = positive(value)?,
            "command_x_min" => s.command_x_range.0 = non_negative(value)?,
            "command_x_max" => s.command_x_range.1 = non_negative(value)?,
            "max_sim_steps" => s.max_sim_steps = integer(value)?,
            "total_gradient_steps" => t.total_gradient_steps = integer(value)?,
            "gamma" => {
                let g = float(value)?;
                if !(0.0..1.0).contains(&g) {
                    return Err(format!("must be in [0, 1), got {g}"));
                }
                t.gamma = g;
            }
            "alpha" => t.alpha = positive(value)?,
            "batch_size" => t.batch_size = count(value)?,
            "warmup_transitions" => t.warmup_transitions = count(value)?,
            "target_sync_period" => t.target_sync_period = count(value)? as u64,
            "sigma_start" => t.sigma_start = non_negative(value)?,
            "sigma_end" => t.sigma_end = non_negative(value)?,
            "sigma_anneal_steps" => t.sigma_anneal_steps = integer(value)?,
            "replay_capacity" => t.replay_capacity = count(value)?,
            "max_grad_norm" => t.max_grad_norm = positive(value)?,
            "b_bound_mode" => {
                t.bound_mode = BoundMode::from_name(value)
                    .ok_or_else(|| format!("unknown bound mode `{value}` (symmetric | literal_max)"))?
            }
            "d_min" => self.safety.d_min = non_negative(value)?,
            "b_max" => self.safety.b_max = positive(value)?,
            "idm_a_max" => self.idm.a_max = positive(value)?,
            "idm_b_comf" => self.idm.b_comf = positive(value)?,
            "idm_s0" => self.idm.s0 = positive(value)?,
            "idm_time_headway" => self.idm.time_headway = positive(value)?,
            "idm_delta" => self.idm.delta = positive(value)?,
            "idm_free_gap_factor" => self.idm.free_gap_factor = positive(value)?,
            "w_acce" => self.reward.w_acce = non_positive(value)?,
            "w_rate" => self.reward.w_rate = non_positive(value)?,
            "w_time" => self.reward.w_time = non_positive(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Cross-field checks not tied to a single key.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.idm.validate()?;
        if self.scenario.seed != self.train.seed {
            return Err(Error::InvalidParam("scenario and training seeds differ".into()));
        }
        if self.train.sigma_end > self.train.sigma_start {
            return Err(Error::InvalidParam("sigma_end must not exceed sigma_start".into()));
        }
        Ok(())
    }

    /// Text form that parses back to an identical configuration.
    pub fn to_text(&self) -> String {
        let s = &self.scenario;
        let t = &self.train;
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        let f = |v: f64| format!("{v:?}");
        for key in KEYS {
            let value = match *key {
                "seed" => s.seed.to_string(),
                "n_lanes" => s.road.n_lanes.to_string(),
                "segment_length" => f(s.road.segment_length),
                "lane_width" => f(s.road.lane_width),
                "curvature" => f(s.road.curvature),
                "dt" => f(s.dt),
                "departure_interval_min" => f(s.departure_interval.0),
                "departure_interval_max" => f(s.departure_interval.1),
                "speed_limit_min_kmh" | "speed_limit_max_kmh" => {
                    let (ms, name) = if *key == "speed_limit_min_kmh" {
                        (s.v_limit_range.0, "speed_limit_min_ms")
                    } else {
                        (s.v_limit_range.1, "speed_limit_max_ms")
                    };
                    match kmh_repr(ms) {
                        Some(kmh) => f(kmh),
                        None => {
                            put(name, f(ms));
                            continue;
                        }
                    }
                }
                "command_x_min" => f(s.command_x_range.0),
                "command_x_max" => f(s.command_x_range.1),
                "max_sim_steps" => s.max_sim_steps.to_string(),
                "total_gradient_steps" => t.total_gradient_steps.to_string(),
                "gamma" => f(t.gamma),
                "alpha" => f(t.alpha),
                "batch_size" => t.batch_size.to_string(),
                "warmup_transitions" => t.warmup_transitions.to_string(),
                "target_sync_period" => t.target_sync_period.to_string(),
                "sigma_start" => f(t.sigma_start),
                "sigma_end" => f(t.sigma_end),
                "sigma_anneal_steps" => t.sigma_anneal_steps.to_string(),
                "replay_capacity" => t.replay_capacity.to_string(),
                "max_grad_norm" => f(t.max_grad_norm),
                "b_bound_mode" => t.bound_mode.name().to_string(),
                "d_min" => f(self.safety.d_min),
                "b_max" => f(self.safety.b_max),
                "idm_a_max" => f(self.idm.a_max),
                "idm_b_comf" => f(self.idm.b_comf),
                "idm_s0" => f(self.idm.s0),
                "idm_time_headway" => f(self.idm.time_headway),
                "idm_delta" => f(self.idm.delta),
                "idm_free_gap_factor" => f(self.idm.free_gap_factor),
                "w_acce" => f(self.reward.w_acce),
                "w_rate" => f(self.reward.w_rate),
                "w_time" => f(self.reward.w_time),
                other => unreachable!("key {other} has no serializer"),
            };
            put(key, value);
        }
        out
    }

    /// Same configuration with both seeds replaced.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self.train.seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
        assert_eq!(Config::parse("# only a comment\n\n").unwrap(), Config::default());
    }

    #[test]
    fn default_speed_limits_in_kmh() {
        let c = Config::parse("speed_limit_min_kmh = 80\nspeed_limit_max_kmh = 120").unwrap();
        assert_eq!(c.scenario.v_limit_range, Config::default().scenario.v_limit_range);
        assert!((c.scenario.v_limit_range.1 - 33.333_333_333_333_336).abs() < 1e-12);
    }

    #[test]
    fn default_round_trips() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
        assert!(c.to_text().contains("\nspeed_limit_max_kmh = 120.0\n"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("gamma = 0.9\nbogus = 1\n", 2),
            ("\n\ngamma = 1.5\n", 3),
            ("alpha = -0.01", 1),
            ("batch_size = 0", 1),
            ("n_lanes = 1", 1),
            ("w_acce = 0.5", 1),
            ("dt = abc", 1),
            ("no equals sign", 1),
            ("gamma = 0.9\ngamma = 0.8", 2),
            ("b_bound_mode = sideways", 1),
        ];
        for (text, expected) in cases {
            match Config::parse(text) {
                Err(Error::Config { line, .. }) => assert_eq!(line, expected, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn cross_field_errors_are_reported() {
        let err = Config::parse("departure_interval_min = 12\ndeparture_interval_max = 10\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        assert!(Config::parse("sigma_start = 0.01\nsigma_end = 0.1").is_err());
    }

    #[test]
    fn inline_comments() {
        let c = Config::parse("gamma = 0.5   # shorter horizon\n").unwrap();
        assert_eq!(c.train.gamma, 0.5);
    }
}
