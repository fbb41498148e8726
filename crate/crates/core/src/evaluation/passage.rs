use serde::{Deserialize, Serialize};

use crate::detectors::{Detector, DetectorConfig};
use crate::error::Result;

/// Record levels of a run's statistic: the times at which it first exceeded
/// every previous value above zero.
///
/// A run simulated once with threshold `cap` yields the stopping time for
/// every threshold `b <= cap`: the first record `> b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageProfile {
    levels: Vec<f64>,
    times: Vec<u64>,
    horizon: u64,
    cap: f64,
}

impl PassageProfile {
    /// Runs `config` on `stream` until its statistic exceeds `cap` or
    /// `horizon` steps have passed; the threshold of `config` is ignored.
    pub fn simulate(config: &DetectorConfig<f64>, stream: impl IntoIterator<Item = f64>, horizon: u64, cap: f64) -> Result<Self> {
        let mut det = config.with_threshold(cap).build()?;
        let mut p = Self::record(det.as_mut(), stream, horizon)?;
        p.cap = cap;
        Ok(p)
    }

    pub(crate) fn record(det: &mut dyn Detector<f64>, stream: impl IntoIterator<Item = f64>, horizon: u64) -> Result<Self> {
        let mut levels = Vec::new();
        let mut times = Vec::new();
        let mut best = 0.0;
        for (t, e) in stream.into_iter().take(horizon as usize).enumerate() {
            let alarmed = det.step(e)?.is_some();
            let w = det.statistic();
            if w > best {
                best = w;
                levels.push(w);
                times.push(t as u64 + 1);
            }
            if alarmed {
                break;
            }
        }
        Ok(Self { levels, times, horizon, cap: det.threshold() })
    }

    /// Stopping time at threshold `b <= cap`, `None` if censored at the horizon.
    pub fn stopping_time(&self, b: f64) -> Option<u64> {
        debug_assert!(b <= self.cap);
        let i = self.levels.partition_point(|l| *l <= b);
        self.times.get(i).copied()
    }

    /// Largest threshold the profile answers for.
    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Largest statistic value seen, `0` if it never left zero.
    pub fn max_level(&self) -> f64 {
        self.levels.last().copied().unwrap_or(0.0)
    }

    /// Largest finite record level.
    pub fn max_finite_level(&self) -> f64 {
        self.levels.iter().rev().copied().find(|l| l.is_finite()).unwrap_or(0.0)
    }
}
