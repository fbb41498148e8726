//! Bounded RBF kernel, second-order samples, the in-distribution reference
//! set and the blockwise MMD statistic.

mod mmd;
mod reference;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

pub use mmd::{clamp_events, mmd, mmd_between_samples, mmd_squared};
pub(crate) use mmd::mmd_squared_columns;
pub use reference::{build_reference, BandwidthRule, ReferenceSet, REFERENCE_SUBSAMPLE_SEED};

/// Consecutive error pair `(e_{t-1}, e_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SecondOrderSample<T>(pub [T; 2]);

impl<T: Scalar> SecondOrderSample<T> {
    pub fn new(prev: T, cur: T) -> Self {
        Self([prev, cur])
    }

    pub fn prev(&self) -> T {
        self.0[0]
    }

    pub fn cur(&self) -> T {
        self.0[1]
    }

    fn is_finite(&self) -> bool {
        self.0[0].is_finite() && self.0[1].is_finite()
    }

    fn dist_sq(&self, other: &Self) -> T {
        let dx = self.0[0] - other.0[0];
        let dy = self.0[1] - other.0[1];
        dx * dx + dy * dy
    }
}

/// All consecutive pairs of a sequence.
pub fn pairs<T: Scalar>(errors: &[T]) -> Vec<SecondOrderSample<T>> {
    errors.windows(2).map(|w| SecondOrderSample::new(w[0], w[1])).collect()
}

/// Gaussian RBF kernel `k(x, y) = exp(-|x - y|^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfKernel<T> {
    sigma: T,
}

impl<T: Scalar> RbfKernel<T> {
    pub fn new(sigma: T) -> Result<Self> {
        if !(sigma.is_finite() && sigma > T::zero()) {
            return Err(invalid(format!("kernel bandwidth must be positive and finite, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// `1 / (2 sigma^2)`.
    pub fn gamma(&self) -> T {
        T::one() / (T::lit(2.0) * self.sigma * self.sigma)
    }

    pub fn eval(&self, x: &SecondOrderSample<T>, y: &SecondOrderSample<T>) -> T {
        (-x.dist_sq(y) * self.gamma()).exp()
    }
}

/// Kernel value for a pair of second-order samples.
pub fn rbf_eval<T: Scalar>(x: &SecondOrderSample<T>, y: &SecondOrderSample<T>, sigma: T) -> Result<T> {
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::NonFinite("kernel argument".into()));
    }
    Ok(RbfKernel::new(sigma)?.eval(x, y))
}

/// Median of pairwise Euclidean distances over distinct index pairs.
pub fn median_heuristic<T: Scalar>(samples: &[SecondOrderSample<T>]) -> Result<T> {
    if samples.len() < 2 {
        return Err(invalid("median heuristic needs at least two samples"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("sample coordinate".into()));
    }
    let mut d = Vec::with_capacity(samples.len() * (samples.len() - 1) / 2);
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            d.push(a.dist_sq(b));
        }
    }
    let n = d.len();
    let mid = n / 2;
    let (_, upper, _) = d.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    let upper = upper.sqrt();
    let median = if n % 2 == 1 {
        upper
    } else {
        let lower = d[..mid].iter().copied().fold(T::neg_infinity(), T::max).sqrt();
        (lower + upper) / T::lit(2.0)
    };
    if !(median > T::zero()) {
        return Err(Error::Degenerate("samples are (nearly) all identical; median distance is 0".into()));
    }
    Ok(median)
}

/// Second-order samples of one length-`m` error block (`m - 1` pairs).
#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    samples: Vec<SecondOrderSample<T>>,
}

impl<T: Scalar> Block<T> {
    pub fn from_errors(errors: &[T]) -> Result<Self> {
        if errors.len() < 2 {
            return Err(invalid("a block needs at least two errors"));
        }
        Ok(Self { samples: pairs(errors) })
    }

    pub fn from_samples(samples: Vec<SecondOrderSample<T>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("block must be non-empty"));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[SecondOrderSample<T>] {
        &self.samples
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(a: f64, b: f64) -> SecondOrderSample<f64> {
        SecondOrderSample::new(a, b)
    }

    #[test]
    fn rbf_examples() {
        assert_eq!(rbf_eval(&s(0.3, 0.1), &s(0.3, 0.1), 0.8).unwrap(), 1.0);
        let v = rbf_eval(&s(0.0, 0.0), &s(1.0, 0.0), 0.8).unwrap();
        assert!((v - (-1.0f64 / 1.28).exp()).abs() < 1e-15);
        assert!((v - 0.45783).abs() < 1e-5);
        assert!(rbf_eval(&s(0.0, 0.0), &s(1.0, 0.0), 0.0).is_err());
        assert!(rbf_eval(&s(f64::NAN, 0.0), &s(1.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_heuristic(&[s(0.0, 0.0), s(1.0, 0.0)]).unwrap(), 1.0);
        assert_eq!(median_heuristic(&[s(0.0, 0.0), s(1.0, 0.0), s(2.0, 0.0)]).unwrap(), 1.0);
        assert!(median_heuristic(&[s(1.0, 1.0); 5]).is_err());
        // Even count: distances {1, 2, 3, 1, 2, 1} -> sorted middle pair (1, 2).
        let m = median_heuristic(&[s(0.0, 0.0), s(1.0, 0.0), s(2.0, 0.0), s(3.0, 0.0)]).unwrap();
        assert!((m - 1.5).abs() < 1e-12);
    }

    #[test]
    fn block_pairs_stay_inside() {
        let b = Block::from_errors(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(b.samples(), &[s(1.0, 2.0), s(2.0, 3.0), s(3.0, 4.0)]);
        assert!(Block::<f64>::from_errors(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn kernel_bounded_symmetric(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, d in -5.0f64..5.0, sigma in 0.05f64..5.0) {
            let x = s(a, b);
            let y = s(c, d);
            let k = rbf_eval(&x, &y, sigma).unwrap();
            prop_assert!(k > 0.0 || x.dist_sq(&y) / (sigma * sigma) > 1400.0);
            prop_assert!(k <= 1.0);
            prop_assert_eq!(k, rbf_eval(&y, &x, sigma).unwrap());
        }

        #[test]
        fn kernel_increases_with_bandwidth(a in -3.0f64..3.0, b in -3.0f64..3.0, sigma in 0.2f64..4.0) {
            prop_assume!(a.abs() + b.abs() > 1e-3);
            let x = s(a, b);
            let o = s(0.0, 0.0);
            prop_assert!(rbf_eval(&x, &o, 2.0 * sigma).unwrap() >= rbf_eval(&x, &o, sigma).unwrap());
        }
    }
}
