use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Univariate normal density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Scalar> Gaussian<T> {
    pub fn new(mean: T, std: T) -> Result<Self> {
        if !(mean.is_finite() && std.is_finite() && std > T::zero()) {
            return Err(invalid(format!("invalid Gaussian N({mean}, {std}^2)")));
        }
        Ok(Self { mean, std })
    }

    pub fn ln_pdf(&self, x: T) -> T {
        let z = (x - self.mean) / self.std;
        -T::lit(0.5) * z * z - self.std.ln() - T::lit(0.5 * (2.0 * std::f64::consts::PI).ln())
    }
}

/// Finite Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture<T> {
    pub weights: Vec<T>,
    pub components: Vec<Gaussian<T>>,
}

impl<T: Scalar> GaussianMixture<T> {
    pub fn new(weights: Vec<T>, components: Vec<Gaussian<T>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(invalid("mixture needs one weight per component"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > T::zero())) {
            return Err(invalid("mixture weights must be positive"));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(invalid(format!("mixture weights sum to {total}")));
        }
        for c in &components {
            Gaussian::new(c.mean, c.std)?;
        }
        Ok(Self { weights, components })
    }

    pub fn single(g: Gaussian<T>) -> Self {
        Self { weights: vec![T::one()], components: vec![g] }
    }

    /// Log-density via log-sum-exp.
    pub fn ln_pdf(&self, x: T) -> T {
        let term = |(w, c): (&T, &Gaussian<T>)| w.ln() + c.ln_pdf(x);
        let pairs = || self.weights.iter().zip(&self.components);
        let best = pairs().map(term).fold(T::neg_infinity(), T::max);
        if best == T::neg_infinity() {
            return best;
        }
        let s: T = pairs().map(|p| (term(p) - best).exp()).sum();
        best + s.ln()
    }

    pub fn mean(&self) -> T {
        self.weights.iter().zip(&self.components).map(|(w, c)| *w * c.mean).sum()
    }
}
