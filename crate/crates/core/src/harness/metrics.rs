//! Per-gradient-step training metrics and their CSV form.

use std::io::{self, Write};

use crate::{Error, Result};

pub const METRICS_HEADER: &str =
    "step,episode_id,loss,r,r_acce,r_rate,r_time,sigma,episodes_done,episodes_aborted,episodes_timeout";

/// One row per gradient step. The reward columns hold the most recently
/// finished episode (zero before the first one finishes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub episode_id: u64,
    pub loss: f64,
    pub r: f64,
    pub r_acce: f64,
    pub r_rate: f64,
    pub r_time: f64,
    pub sigma: f64,
    pub episodes_done: u64,
    pub episodes_aborted: u64,
    pub episodes_timeout: u64,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.episode_id,
            self.loss,
            self.r,
            self.r_acce,
            self.r_rate,
            self.r_time,
            self.sigma,
            self.episodes_done,
            self.episodes_aborted,
            self.episodes_timeout
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 11 {
            return Err(Error::InvalidParam(format!(
                "metrics row has {} fields, expected 11",
                fields.len()
            )));
        }
        let int = |i: usize| -> Result<u64> {
            fields[i]
                .parse()
                .map_err(|_| Error::InvalidParam(format!("bad integer `{}`", fields[i])))
        };
        let float = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| Error::InvalidParam(format!("bad number `{}`", fields[i])))
        };
        Ok(Self {
            step: int(0)?,
            episode_id: int(1)?,
            loss: float(2)?,
            r: float(3)?,
            r_acce: float(4)?,
            r_rate: float(5)?,
            r_time: float(6)?,
            sigma: float(7)?,
            episodes_done: int(8)?,
            episodes_aborted: int(9)?,
            episodes_timeout: int(10)?,
        })
    }
}

pub fn write_metrics<W: Write>(out: &mut W, rows: &[MetricsRow]) -> io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    Ok(())
}

pub fn read_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == METRICS_HEADER => {}
        other => {
            return Err(Error::InvalidParam(format!(
                "metrics header mismatch: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    lines.filter(|l| !l.trim().is_empty()).map(MetricsRow::from_csv).collect()
}
