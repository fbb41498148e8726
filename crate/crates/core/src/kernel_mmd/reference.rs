use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{median_heuristic, pairs, RbfKernel, SecondOrderSample};
use crate::error::{invalid, Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

/// Seed of the uniform subsampling applied when a training sequence yields
/// more pairs than the reference cap.
pub const REFERENCE_SUBSAMPLE_SEED: u64 = 0x5EED_0F1D;

/// Median-heuristic bandwidths are computed on at most this many samples.
const MEDIAN_SAMPLE_CAP: usize = 2000;

/// How the kernel bandwidth of a reference set is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule<T> {
    Fixed(T),
    Median,
}

/// Finite sample of in-distribution pairs standing in for the limiting
/// second-order law, with its kernel self-term cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "ReferenceFile<T>",
    into = "ReferenceFile<T>",
    bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct ReferenceSet<T> {
    kernel: RbfKernel<T>,
    samples: Vec<SecondOrderSample<T>>,
    self_term: T,
    xs: Vec<T>,
    ys: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct ReferenceFile<T> {
    sigma: T,
    samples: Vec<[T; 2]>,
    self_term: T,
}

impl<T: Scalar> TryFrom<ReferenceFile<T>> for ReferenceSet<T> {
    type Error = Error;
    fn try_from(f: ReferenceFile<T>) -> Result<Self> {
        let set = Self::new(f.samples.into_iter().map(SecondOrderSample).collect(), RbfKernel::new(f.sigma)?)?;
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        if (set.self_term - f.self_term).abs() > tol {
            return Err(invalid(format!(
                "stored self_term {} does not match recomputed {}",
                f.self_term, set.self_term
            )));
        }
        Ok(set)
    }
}

impl<T: Scalar> From<ReferenceSet<T>> for ReferenceFile<T> {
    fn from(r: ReferenceSet<T>) -> Self {
        Self { sigma: r.kernel.sigma(), samples: r.samples.iter().map(|s| s.0).collect(), self_term: r.self_term }
    }
}

impl<T: Scalar> ReferenceSet<T> {
    pub fn new(samples: Vec<SecondOrderSample<T>>, kernel: RbfKernel<T>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid(format!("reference needs at least 2 samples, got {}", samples.len())));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("reference sample".into()));
        }
        let xs: Vec<T> = samples.iter().map(|s| s.0[0]).collect();
        let ys: Vec<T> = samples.iter().map(|s| s.0[1]).collect();
        let self_term = kernel_mean(&xs, &ys, &xs, &ys, kernel.gamma());
        Ok(Self { kernel, samples, self_term, xs, ys })
    }

    /// Reference from an in-distribution error sequence.
    pub fn from_errors(errors: &[T], rule: BandwidthRule<T>, max_samples: usize) -> Result<Self> {
        let samples = subsampled_pairs(errors, max_samples)?;
        let sigma = match rule {
            BandwidthRule::Fixed(s) => s,
            BandwidthRule::Median => {
                let stride = samples.len().div_ceil(MEDIAN_SAMPLE_CAP);
                let thinned: Vec<_> = samples.iter().step_by(stride).copied().collect();
                median_heuristic(&thinned)?
            }
        };
        Self::new(samples, RbfKernel::new(sigma)?)
    }

    pub fn kernel(&self) -> &RbfKernel<T> {
        &self.kernel
    }

    pub fn samples(&self) -> &[SecondOrderSample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `k(y_i, y_j)` over all ordered pairs.
    pub fn self_term(&self) -> T {
        self.self_term
    }

    pub(crate) fn columns(&self) -> (&[T], &[T]) {
        (&self.xs, &self.ys)
    }
}

/// Mean kernel value between two point sets given as coordinate columns.
pub(crate) fn kernel_mean<T: Scalar>(ax: &[T], ay: &[T], bx: &[T], by: &[T], gamma: T) -> T {
    let mut acc = CompensatedSum::new();
    for (&x, &y) in ax.iter().zip(ay) {
        acc.add(T::gaussian_row_sum(x, y, bx, by, gamma));
    }
    let n = T::from_usize(ax.len()).unwrap() * T::from_usize(bx.len()).unwrap();
    acc.value() / n
}

fn subsampled_pairs<T: Scalar>(errors: &[T], max_samples: usize) -> Result<Vec<SecondOrderSample<T>>> {
    if errors.len() < 3 {
        return Err(invalid(format!("reference needs at least 3 errors, got {}", errors.len())));
    }
    if max_samples < 2 {
        return Err(invalid("reference cap must be at least 2"));
    }
    let all = pairs(errors);
    if all.len() <= max_samples {
        return Ok(all);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(REFERENCE_SUBSAMPLE_SEED);
    let mut idx = rand::seq::index::sample(&mut rng, all.len(), max_samples).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| all[i]).collect())
}

/// Reference set with an explicit kernel from an error sequence.
pub fn build_reference<T: Scalar>(errors: &[T], kernel: RbfKernel<T>, max_samples: usize) -> Result<ReferenceSet<T>> {
    ReferenceSet::new(subsampled_pairs(errors, max_samples)?, kernel)
}
