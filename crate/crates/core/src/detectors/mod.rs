//! Streaming detectors sharing the [`Detector`] interface.
//!
//! Every detector owns its state, consumes one error per call to
//! [`Detector::step`] and freezes once it raises an [`Alarm`]; re-arming
//! needs an explicit [`Detector::reset`].

mod config;
mod cusum;
mod dcmmd;
mod density;
mod nll;
mod run;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use config::DetectorConfig;
pub use cusum::{Cusum, LlrModel};
pub use dcmmd::{DcMmd, DcMmdConfig, Normalization, DEFAULT_VAR_WINDOW, DEFAULT_VAR_EPS};
pub use density::{Gaussian, GaussianMixture};
pub use nll::NllThreshold;
pub use run::{run_to_alarm, RunOutcome, TracePoint};

/// Raised when the detection statistic exceeds its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alarm<T> {
    /// 1-based time step of the alarm.
    pub stopping_time: u64,
    /// Statistic value that crossed the threshold.
    pub statistic: T,
    /// Completed block count (block-based detectors only).
    pub block_index: Option<u64>,
}

/// Common interface of all streaming detectors.
pub trait Detector<T: Scalar>: Send {
    /// Feeds one observation; returns the alarm raised by it, if any.
    fn step(&mut self, e: T) -> Result<Option<Alarm<T>>>;

    /// Current detection statistic (`W` for CUSUM-type detectors).
    fn statistic(&self) -> T;

    fn threshold(&self) -> T;

    /// Observations consumed so far.
    fn steps(&self) -> u64;

    fn alarm(&self) -> Option<&Alarm<T>>;

    /// Clears all state, including a raised alarm.
    fn reset(&mut self);

    /// Block length when the statistic only moves at block boundaries.
    fn block_len(&self) -> Option<usize> {
        None
    }

    /// Completed blocks, or steps for per-observation detectors.
    fn block_index(&self) -> u64 {
        self.steps()
    }

    fn name(&self) -> &'static str;
}

/// Threshold bookkeeping shared by the concrete detectors.
#[derive(Debug, Clone)]
pub(crate) struct StopRule<T> {
    pub threshold: T,
    pub t: u64,
    pub alarm: Option<Alarm<T>>,
}

impl<T: Scalar> StopRule<T> {
    pub fn new(threshold: T) -> Result<Self> {
        if !(threshold > T::zero()) || threshold.is_infinite() {
            return Err(Error::InvalidInput(format!("threshold must be positive and finite, got {threshold}")));
        }
        Ok(Self { threshold, t: 0, alarm: None })
    }

    /// Starts a step: rejects alarmed detectors and non-finite input.
    pub fn begin(&mut self, e: T) -> Result<()> {
        if let Some(a) = &self.alarm {
            return Err(Error::AlreadyAlarmed(a.stopping_time));
        }
        if !e.is_finite() {
            return Err(Error::NonFinite(format!("observation at step {}", self.t + 1)));
        }
        self.t += 1;
        Ok(())
    }

    pub fn check(&mut self, statistic: T, block_index: Option<u64>) -> Option<Alarm<T>> {
        if statistic > self.threshold {
            let alarm = Alarm { stopping_time: self.t, statistic, block_index };
            self.alarm = Some(alarm);
            Some(alarm)
        } else {
            None
        }
    }

    pub fn reset(&mut self) {
        self.t = 0;
        self.alarm = None;
    }
}
