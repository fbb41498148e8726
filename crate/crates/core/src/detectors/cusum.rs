use serde::{Deserialize, Serialize};

use super::{Alarm, Detector, Gaussian, GaussianMixture, StopRule};
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Pre/post densities whose log-likelihood ratio drives a Page CUSUM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LlrModel<T> {
    Gaussian { pre: Gaussian<T>, post: Gaussian<T> },
    Mixture { pre: GaussianMixture<T>, post: GaussianMixture<T> },
}

impl<T: Scalar> LlrModel<T> {
    /// `ln g(e) - ln f(e)`.
    pub fn increment(&self, e: T) -> T {
        match self {
            Self::Gaussian { pre, post } => post.ln_pdf(e) - pre.ln_pdf(e),
            Self::Mixture { pre, post } => post.ln_pdf(e) - pre.ln_pdf(e),
        }
    }
}

/// Page's CUSUM: `W <- max(0, W + ln g(e) - ln f(e))`, alarm when `W > b`.
#[derive(Debug, Clone)]
pub struct Cusum<T> {
    model: LlrModel<T>,
    name: &'static str,
    w: T,
    stop: StopRule<T>,
}

impl<T: Scalar> Cusum<T> {
    pub fn new(model: LlrModel<T>, threshold: T) -> Result<Self> {
        let name = match model {
            LlrModel::Gaussian { .. } => "g_cusum",
            LlrModel::Mixture { .. } => "gmm_cusum",
        };
        Ok(Self { model, name, w: T::zero(), stop: StopRule::new(threshold)? })
    }

    /// Gaussian CUSUM against a known (or assumed) post-change density.
    pub fn gaussian(pre: Gaussian<T>, post: Gaussian<T>, threshold: T) -> Result<Self> {
        Self::new(LlrModel::Gaussian { pre, post }, threshold)
    }

    /// Mixture CUSUM with both densities given as Gaussian mixtures.
    pub fn mixture(pre: GaussianMixture<T>, post: GaussianMixture<T>, threshold: T) -> Result<Self> {
        Self::new(LlrModel::Mixture { pre, post }, threshold)
    }

    /// CUSUM against the location surrogate `N(mu0 + kappa sigma0, sigma0^2)`.
    pub fn robust(pre: Gaussian<T>, kappa: T, threshold: T) -> Result<Self> {
        if !(kappa > T::zero()) || !kappa.is_finite() {
            return Err(invalid(format!("kappa must be positive, got {kappa}")));
        }
        let post = Gaussian::new(pre.mean + kappa * pre.std, pre.std)?;
        let mut c = Self::gaussian(pre, post, threshold)?;
        c.name = "robust_cusum";
        Ok(c)
    }

    pub fn model(&self) -> &LlrModel<T> {
        &self.model
    }
}

impl<T: Scalar> Detector<T> for Cusum<T> {
    fn step(&mut self, e: T) -> Result<Option<Alarm<T>>> {
        self.stop.begin(e)?;
        let inc = self.model.increment(e);
        if !inc.is_finite() {
            return Err(Error::NonFinite(format!("log-likelihood ratio at e = {e}")));
        }
        self.w = (self.w + inc).max(T::zero());
        Ok(self.stop.check(self.w, None))
    }

    fn statistic(&self) -> T {
        self.w
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
        self.w = T::zero();
        self.stop.reset();
    }

    fn name(&self) -> &'static str {
        self.name
    }
}
