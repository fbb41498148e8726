use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chain::{stationary_distribution, TransitionMatrix};
use super::{EmissionDist, LatentMode};
use crate::error::{invalid, Error, Result};

/// Two-state hidden-Markov error model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HmmSpecRaw", into = "HmmSpecRaw")]
pub struct HmmSpec {
    transition: TransitionMatrix,
    emission_l: EmissionDist,
    emission_h: EmissionDist,
}

#[derive(Serialize, Deserialize)]
struct HmmSpecRaw {
    transition: TransitionMatrix,
    #[serde(rename = "emission_L")]
    emission_l: EmissionDist,
    #[serde(rename = "emission_H")]
    emission_h: EmissionDist,
}

impl TryFrom<HmmSpecRaw> for HmmSpec {
    type Error = Error;
    fn try_from(raw: HmmSpecRaw) -> Result<Self> {
        Self::new(raw.transition, raw.emission_l, raw.emission_h)
    }
}

impl From<HmmSpec> for HmmSpecRaw {
    fn from(s: HmmSpec) -> Self {
        Self { transition: s.transition, emission_l: s.emission_l, emission_h: s.emission_h }
    }
}

impl HmmSpec {
    pub fn new(transition: TransitionMatrix, emission_l: EmissionDist, emission_h: EmissionDist) -> Result<Self> {
        emission_l.validate()?;
        emission_h.validate()?;
        if emission_l.mean() > emission_h.mean() {
            return Err(invalid(format!(
                "mode labels out of order: mean(L) = {} > mean(H) = {}",
                emission_l.mean(),
                emission_h.mean()
            )));
        }
        Ok(Self { transition, emission_l, emission_h })
    }

    /// Gaussian emissions with a common standard deviation.
    pub fn gaussian(transition: TransitionMatrix, mean_l: f64, mean_h: f64, std: f64) -> Result<Self> {
        Self::new(transition, EmissionDist::gaussian(mean_l, std), EmissionDist::gaussian(mean_h, std))
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.transition
    }

    pub fn emission(&self, mode: LatentMode) -> &EmissionDist {
        match mode {
            LatentMode::L => &self.emission_l,
            LatentMode::H => &self.emission_h,
        }
    }

    pub fn with_transition(&self, transition: TransitionMatrix) -> Self {
        Self { transition, ..*self }
    }

    /// Applies `f` to both emissions; the result is re-validated.
    pub fn map_emissions(&self, mut f: impl FnMut(LatentMode, &EmissionDist) -> EmissionDist) -> Result<Self> {
        Self::new(self.transition, f(LatentMode::L, &self.emission_l), f(LatentMode::H, &self.emission_h))
    }

    pub fn stationary(&self) -> [f64; 2] {
        stationary_distribution(&self.transition)
    }

    /// Mean of the stationary marginal.
    pub fn marginal_mean(&self) -> f64 {
        let pi = self.stationary();
        pi[0] * self.emission_l.mean() + pi[1] * self.emission_h.mean()
    }

    /// Variance of the stationary marginal.
    pub fn marginal_variance(&self) -> f64 {
        let pi = self.stationary();
        let mu = self.marginal_mean();
        pi[0] * (self.emission_l.variance() + (self.emission_l.mean() - mu).powi(2))
            + pi[1] * (self.emission_h.variance() + (self.emission_h.mean() - mu).powi(2))
    }

    /// Stationary `E[exp(e)]` (mean error on the linear scale for log-unit errors).
    pub fn marginal_mean_exp(&self) -> f64 {
        let pi = self.stationary();
        pi[0] * self.emission_l.mean_exp() + pi[1] * self.emission_h.mean_exp()
    }

    pub(crate) fn next_mode<R: Rng + ?Sized>(&self, from: LatentMode, rng: &mut R) -> LatentMode {
        let stay = self.transition.prob(from, from);
        if rng.random::<f64>() < stay {
            from
        } else {
            from.other()
        }
    }

    pub(crate) fn stationary_mode<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentMode {
        if rng.random::<f64>() < self.stationary()[0] {
            LatentMode::L
        } else {
            LatentMode::H
        }
    }
}

/// A simulated error sequence with its latent modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPath {
    pub modes: Vec<LatentMode>,
    pub errors: Vec<f64>,
    pub seed: u64,
}

/// Samples `length` steps of the chain and its emissions.
///
/// Without `init` the first mode is drawn from the stationary distribution.
pub fn sample_path(spec: &HmmSpec, length: usize, seed: u64, init: Option<LatentMode>) -> Result<ErrorPath> {
    if length == 0 {
        return Err(invalid("path length must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mode = init.unwrap_or_else(|| spec.stationary_mode(&mut rng));
    let mut modes = Vec::with_capacity(length);
    let mut errors = Vec::with_capacity(length);
    for t in 0..length {
        if t > 0 {
            mode = spec.next_mode(mode, &mut rng);
        }
        modes.push(mode);
        errors.push(spec.emission(mode).sample(&mut rng));
    }
    Ok(ErrorPath { modes, errors, seed })
}

/// Infinite error stream that switches from `pre` to `post` at a changepoint.
///
/// Time is 1-based: `e_t` for `t >= changepoint` is generated by the
/// post-change model (both the transition into `Z_t` and the emission).
#[derive(Debug, Clone)]
pub struct ErrorStream {
    pre: HmmSpec,
    post: HmmSpec,
    changepoint: u64,
    t: u64,
    mode: LatentMode,
    prefix: Vec<LatentMode>,
    rng: ChaCha8Rng,
}

impl ErrorStream {
    /// Change-free stream started from the stationary distribution.
    pub fn stationary(spec: &HmmSpec, seed: u64) -> Self {
        Self::with_change(spec, spec, u64::MAX, seed)
    }

    /// Stream with a change at `changepoint`, pre-change history started
    /// from stationarity.
    pub fn with_change(pre: &HmmSpec, post: &HmmSpec, changepoint: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = if changepoint <= 1 { post } else { pre };
        let mode = first.stationary_mode(&mut rng);
        let mut s = Self { pre: *pre, post: *post, changepoint, t: 0, mode, prefix: Vec::new(), rng };
        s.prefix.push(mode);
        s
    }

    /// Stream with a change at `changepoint >= 1`, conditioned on the latent
    /// mode at time `changepoint - 1` (for `changepoint = 1` this is the mode
    /// just before the first observation).
    ///
    /// The pre-change modes are drawn backwards from the conditioning mode,
    /// which is exact because every two-state stationary chain is reversible.
    pub fn conditioned(pre: &HmmSpec, post: &HmmSpec, changepoint: u64, mode_before: LatentMode, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let changepoint = changepoint.max(1);
        let pre_len = (changepoint - 1) as usize;
        let mut prefix = vec![mode_before; pre_len];
        for t in (0..pre_len.saturating_sub(1)).rev() {
            prefix[t] = pre.next_mode(prefix[t + 1], &mut rng);
        }
        let mut s = Self { pre: *pre, post: *post, changepoint, t: 0, mode: mode_before, prefix, rng };
        if pre_len == 0 {
            // Z_1 follows from the conditioning mode under the post-change chain.
            let z1 = s.post.next_mode(mode_before, &mut s.rng);
            s.prefix.push(z1);
        }
        s
    }

    pub fn changepoint(&self) -> u64 {
        self.changepoint
    }

    /// Draws the next `(Z_t, e_t)`.
    pub fn next_sample(&mut self) -> (LatentMode, f64) {
        self.t += 1;
        let spec = if self.t >= self.changepoint { &self.post } else { &self.pre };
        let idx = (self.t - 1) as usize;
        self.mode = if idx < self.prefix.len() {
            self.prefix[idx]
        } else {
            spec.next_mode(self.mode, &mut self.rng)
        };
        let e = spec.emission(self.mode).sample(&mut self.rng);
        (self.mode, e)
    }
}

impl Iterator for ErrorStream {
    type Item = f64;
    fn next(&mut self) -> Option<f64> {
        Some(self.next_sample().1)
    }
}
