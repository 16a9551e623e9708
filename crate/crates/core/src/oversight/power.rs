//! Power-on logs and audits of unexplained power-off gaps.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::oversight::OversightError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct PowerInterval {
    pub on_tick: u64,
    pub off_tick: u64,
}

/// A note attached to a power-off period. Accepted at face value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct GapExplanation {
    pub start: u64,
    pub end: u64,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerGap {
    pub start: u64,
    pub end: u64,
}

impl PowerGap {
    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(try_from = "RawPowerLog")]
pub struct PowerLog {
    intervals: Vec<PowerInterval>,
    #[serde(default)]
    explanations: Vec<GapExplanation>,
}

#[derive(Deserialize, JsonSchema)]
struct RawPowerLog {
    intervals: Vec<PowerInterval>,
    #[serde(default)]
    explanations: Vec<GapExplanation>,
}

impl TryFrom<RawPowerLog> for PowerLog {
    type Error = OversightError;

    fn try_from(raw: RawPowerLog) -> Result<Self, Self::Error> {
        let mut log = PowerLog::new(raw.intervals)?;
        log.explanations = raw.explanations;
        Ok(log)
    }
}

impl PowerLog {
    /// Intervals must be sorted, disjoint and non-empty.
    pub fn new(intervals: Vec<PowerInterval>) -> Result<Self, OversightError> {
        for (i, iv) in intervals.iter().enumerate() {
            if iv.off_tick <= iv.on_tick {
                return Err(OversightError::MalformedPowerLog(format!(
                    "interval {i} ends at {} before it starts at {}",
                    iv.off_tick, iv.on_tick
                )));
            }
            if i > 0 && intervals[i - 1].off_tick > iv.on_tick {
                return Err(OversightError::MalformedPowerLog(format!(
                    "interval {i} overlaps or precedes interval {}",
                    i - 1
                )));
            }
        }
        Ok(PowerLog {
            intervals,
            explanations: Vec::new(),
        })
    }

    pub fn explain(mut self, start: u64, end: u64, note: impl Into<String>) -> Self {
        self.explanations.push(GapExplanation {
            start,
            end,
            note: note.into(),
        });
        self
    }

    pub fn intervals(&self) -> &[PowerInterval] {
        &self.intervals
    }

    /// Power-off periods between intervals, plus the trailing one if the
    /// device is off at `until`. Clipped to `until`.
    pub fn off_gaps(&self, until: u64) -> Vec<PowerGap> {
        let mut gaps = Vec::new();
        for pair in self.intervals.windows(2) {
            let start = pair[0].off_tick;
            let end = pair[1].on_tick.min(until);
            if start < end {
                gaps.push(PowerGap { start, end });
            }
        }
        if let Some(last) = self.intervals.last() {
            if last.off_tick < until {
                gaps.push(PowerGap {
                    start: last.off_tick,
                    end: until,
                });
            }
        }
        gaps
    }

    fn is_explained(&self, gap: &PowerGap) -> bool {
        self.explanations
            .iter()
            .any(|e| e.start <= gap.start && e.end >= gap.end)
    }
}

/// Off-gaps before `inspection_tick` longer than `max_unexplained` and not
/// covered by an explanation.
pub fn audit_power_log(log: &PowerLog, inspection_tick: u64, max_unexplained: u64) -> Vec<PowerGap> {
    log.off_gaps(inspection_tick)
        .into_iter()
        .filter(|g| g.len() > max_unexplained && !log.is_explained(g))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(on: u64, off: u64) -> PowerInterval {
        PowerInterval {
            on_tick: on,
            off_tick: off,
        }
    }

    #[test]
    fn continuous_power_is_clean() {
        let log = PowerLog::new(vec![iv(0, 10_000)]).unwrap();
        assert!(audit_power_log(&log, 5_000, 100).is_empty());
    }

    #[test]
    fn long_gap_flagged() {
        let log = PowerLog::new(vec![iv(0, 100), iv(1100, 5000)]).unwrap();
        assert_eq!(
            audit_power_log(&log, 4000, 100),
            vec![PowerGap { start: 100, end: 1100 }]
        );
    }

    #[test]
    fn explained_gap_not_flagged() {
        let log = PowerLog::new(vec![iv(0, 100), iv(1100, 5000)])
            .unwrap()
            .explain(50, 1200, "scheduled maintenance");
        assert!(audit_power_log(&log, 4000, 100).is_empty());
    }

    #[test]
    fn trailing_off_period_counts() {
        let log = PowerLog::new(vec![iv(0, 100)]).unwrap();
        assert_eq!(
            audit_power_log(&log, 500, 100),
            vec![PowerGap { start: 100, end: 500 }]
        );
        assert!(audit_power_log(&log, 150, 100).is_empty());
    }

    #[test]
    fn gaps_after_inspection_ignored() {
        let log = PowerLog::new(vec![iv(0, 100), iv(1000, 2000)]).unwrap();
        assert!(audit_power_log(&log, 90, 10).is_empty());
    }

    #[test]
    fn malformed_logs_rejected() {
        assert!(PowerLog::new(vec![iv(10, 10)]).is_err());
        assert!(PowerLog::new(vec![iv(0, 10), iv(5, 20)]).is_err());
        assert!(PowerLog::new(vec![iv(20, 30), iv(0, 10)]).is_err());
        assert!(serde_json::from_str::<PowerLog>(r#"{"intervals":[{"on_tick":5,"off_tick":1}]}"#).is_err());
    }
}
