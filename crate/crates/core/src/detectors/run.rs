use serde::{Deserialize, Serialize};

use super::{Alarm, Detector};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// One entry of a statistic trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint<T> {
    pub step: u64,
    pub block: u64,
    #[serde(rename = "W")]
    pub w: T,
}

/// Result of feeding a stream to a detector.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome<T> {
    /// `None` when the run was censored at `steps`.
    pub alarm: Option<Alarm<T>>,
    pub steps: u64,
    pub max_statistic: T,
    /// Per-block points for block detectors, per-step otherwise.
    pub trace: Vec<TracePoint<T>>,
}

impl<T> RunOutcome<T> {
    pub fn is_censored(&self) -> bool {
        self.alarm.is_none()
    }
}

/// Feeds `stream` to `detector` until it alarms or `max_steps` observations
/// have been consumed. The detector is not reset first.
pub fn run_to_alarm<T: Scalar, D: Detector<T> + ?Sized>(
    detector: &mut D,
    stream: impl IntoIterator<Item = T>,
    max_steps: u64,
    record_trace: bool,
) -> Result<RunOutcome<T>> {
    if max_steps == 0 {
        return Err(invalid("max_steps must be >= 1"));
    }
    let block_len = detector.block_len().map(|m| m as u64);
    let mut trace = Vec::new();
    let mut max_statistic = T::neg_infinity();
    let mut steps = 0;
    let mut alarm = None;
    for e in stream.into_iter().take(max_steps as usize) {
        let a = detector.step(e)?;
        steps += 1;
        let w = detector.statistic();
        if w > max_statistic {
            max_statistic = w;
        }
        let at_boundary = block_len.is_none_or(|m| steps % m == 0);
        if record_trace && at_boundary {
            trace.push(TracePoint { step: steps, block: detector.block_index(), w });
        }
        if a.is_some() {
            alarm = a;
            break;
        }
    }
    Ok(RunOutcome { alarm, steps, max_statistic, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{Cusum, DcMmd, DcMmdConfig, Gaussian};
    use crate::error_model::{ErrorStream, HmmSpec, TransitionMatrix};
    use crate::kernel_mmd::{build_reference, RbfKernel};
    use std::sync::Arc;

    fn dcmmd(b: f64) -> DcMmd<f64> {
        let spec = HmmSpec::gaussian(TransitionMatrix::symmetric(0.2).unwrap(), 0.0, 1.0, 0.5).unwrap();
        let errors: Vec<f64> = ErrorStream::stationary(&spec, 1).take(2_000).collect();
        let r = Arc::new(build_reference(&errors, RbfKernel::new(0.8).unwrap(), 500).unwrap());
        DcMmd::new(DcMmdConfig::new(10, 0.05, b, r)).unwrap()
    }

    #[test]
    fn censored_run() {
        let mut d = dcmmd(1e12);
        let out = run_to_alarm(&mut d, (0..).map(|i| (i as f64).sin()), 95, true).unwrap();
        assert!(out.is_censored());
        assert_eq!(out.steps, 95);
        assert_eq!(out.trace.len(), 9);
        assert!(out.trace.iter().all(|p| p.step % 10 == 0));
    }

    #[test]
    fn deterministic_traces_and_block_alarms() {
        let shifted = |seed| {
            let spec = HmmSpec::gaussian(TransitionMatrix::symmetric(0.2).unwrap(), 2.0, 3.0, 0.5).unwrap();
            ErrorStream::stationary(&spec, seed)
        };
        let a = run_to_alarm(&mut dcmmd(1.0), shifted(9), 10_000, true).unwrap();
        let b = run_to_alarm(&mut dcmmd(1.0), shifted(9), 10_000, true).unwrap();
        assert_eq!(a, b);
        let t = a.alarm.unwrap().stopping_time;
        assert_eq!(t % 10, 0);
        assert_eq!(a.steps, t);
    }

    #[test]
    fn per_step_trace_and_zero_horizon() {
        let mut c = Cusum::gaussian(Gaussian::new(0.0, 1.0).unwrap(), Gaussian::new(1.0, 1.0).unwrap(), 50.0).unwrap();
        let out = run_to_alarm(&mut c, std::iter::repeat(0.0), 20, true).unwrap();
        assert_eq!(out.trace.len(), 20);
        assert!(out.trace.iter().all(|p| p.w == 0.0));
        assert!(run_to_alarm(&mut c, std::iter::repeat(0.0), 0, false).is_err());
    }
}
