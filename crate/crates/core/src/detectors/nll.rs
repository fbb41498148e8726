use super::{Alarm, Detector, GaussianMixture, StopRule};
use crate::error::Result;
use crate::scalar::Scalar;

/// Pointwise negative log-likelihood under the nominal density.
///
/// Stateless: the statistic is `-ln f(e_t)` of the latest observation and an
/// alarm is raised on the first exceedance of `b`.
#[derive(Debug, Clone)]
pub struct NllThreshold<T> {
    density: GaussianMixture<T>,
    score: T,
    stop: StopRule<T>,
}

impl<T: Scalar> NllThreshold<T> {
    pub fn new(density: GaussianMixture<T>, threshold: T) -> Result<Self> {
        Ok(Self { density, score: T::zero(), stop: StopRule::new(threshold)? })
    }

    pub fn density(&self) -> &GaussianMixture<T> {
        &self.density
    }

    pub fn score(&self, e: T) -> T {
        let s = -self.density.ln_pdf(e);
        if s.is_nan() {
            T::infinity()
        } else {
            s
        }
    }
}

impl<T: Scalar> Detector<T> for NllThreshold<T> {
    fn step(&mut self, e: T) -> Result<Option<Alarm<T>>> {
        self.stop.begin(e)?;
        self.score = self.score(e);
        Ok(self.stop.check(self.score, None))
    }

    fn statistic(&self) -> T {
        self.score
    }

    fn threshold(&self) -> T {
        self.stop.threshold
    }

    fn steps(&self) -> u64 {
        self.stop.t
    }

    fn alarm(&self) -> Option<&Alarm<T>> {
        self.stop.alarm.as_ref()
    }

    fn reset(&mut self) {
        self.score = T::zero();
        self.stop.reset();
    }

    fn name(&self) -> &'static str {
        "nll"
    }
}
