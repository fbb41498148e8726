use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

/// Per-mode emission density of the error process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmissionDist {
    Gaussian { mean: f64, std: f64 },
    Laplace { location: f64, scale: f64 },
    /// Location-scale Student-t.
    StudentT { location: f64, scale: f64, dof: f64 },
}

/// Default degrees of freedom for heavy-tailed emissions.
pub const DEFAULT_STUDENT_DOF: f64 = 3.0;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

impl EmissionDist {
    pub fn gaussian(mean: f64, std: f64) -> Self {
        Self::Gaussian { mean, std }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && std > 0.0,
            Self::Laplace { location, scale } => {
                location.is_finite() && scale.is_finite() && scale > 0.0
            }
            Self::StudentT { location, scale, dof } => {
                location.is_finite() && scale.is_finite() && scale > 0.0 && dof.is_finite() && dof > 2.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid emission parameters {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Gaussian { mean, .. } => mean,
            Self::Laplace { location, .. } | Self::StudentT { location, .. } => location,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Gaussian { std, .. } => std * std,
            Self::Laplace { scale, .. } => 2.0 * scale * scale,
            Self::StudentT { scale, dof, .. } => scale * scale * dof / (dof - 2.0),
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `E[exp(X)]`, the mean error on the linear scale when errors are in log units.
    /// Infinite for the Student-t family.
    pub fn mean_exp(&self) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => (mean + 0.5 * std * std).exp(),
            Self::Laplace { location, scale } => {
                if scale < 1.0 {
                    location.exp() / (1.0 - scale * scale)
                } else {
                    f64::INFINITY
                }
            }
            Self::StudentT { .. } => f64::INFINITY,
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => {
                let z = (x - mean) / std;
                -0.5 * z * z - std.ln() - 0.5 * LN_2PI
            }
            Self::Laplace { location, scale } => -(x - location).abs() / scale - (2.0 * scale).ln(),
            Self::StudentT { location, scale, dof } => {
                let z = (x - location) / scale;
                ln_gamma(0.5 * (dof + 1.0))
                    - ln_gamma(0.5 * dof)
                    - 0.5 * (dof * std::f64::consts::PI).ln()
                    - scale.ln()
                    - 0.5 * (dof + 1.0) * (z * z / dof).ln_1p()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            Self::Laplace { location, scale } => {
                // Inverse CDF on u in (-1/2, 1/2).
                let u: f64 = rng.random::<f64>() - 0.5;
                let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                location - scale * u.signum() * tail.ln()
            }
            Self::StudentT { location, scale, dof } => {
                let t = rand_distr::StudentT::new(dof).expect("validated dof").sample(rng);
                location + scale * t
            }
        }
    }

    /// Same family, shifted by `delta_mean` with its scale multiplied by `scale_factor`.
    pub fn shifted(&self, delta_mean: f64, scale_factor: f64) -> Self {
        match *self {
            Self::Gaussian { mean, std } => Self::Gaussian { mean: mean + delta_mean, std: std * scale_factor },
            Self::Laplace { location, scale } => {
                Self::Laplace { location: location + delta_mean, scale: scale * scale_factor }
            }
            Self::StudentT { location, scale, dof } => {
                Self::StudentT { location: location + delta_mean, scale: scale * scale_factor, dof }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn integrate(d: &EmissionDist, lo: f64, hi: f64, n: usize) -> (f64, f64, f64) {
        // Simpson's rule for mass, mean and second central moment.
        let h = (hi - lo) / n as f64;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..=n {
            let x = lo + h * i as f64;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let p = d.ln_pdf(x).exp();
            m0 += w * p;
            m1 += w * p * x;
            m2 += w * p * (x - d.mean()).powi(2);
        }
        (m0 * h / 3.0, m1 * h / 3.0, m2 * h / 3.0)
    }

    #[test]
    fn densities_normalize_with_stated_moments() {
        for d in [
            EmissionDist::gaussian(0.3, 0.7),
            EmissionDist::Laplace { location: -1.0, scale: 0.4 },
            EmissionDist::StudentT { location: 0.5, scale: 0.6, dof: 5.0 },
        ] {
            let (mass, mean, var) = integrate(&d, -60.0, 60.0, 400_000);
            assert!((mass - 1.0).abs() < 1e-6, "{d:?} mass {mass}");
            assert!((mean - d.mean()).abs() < 1e-5, "{d:?} mean {mean}");
            assert!((var - d.variance()).abs() < 2e-3, "{d:?} var {var}");
        }
    }

    #[test]
    fn sample_moments_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [
            EmissionDist::gaussian(1.0, 0.5),
            EmissionDist::Laplace { location: 1.0, scale: 0.5 },
            EmissionDist::StudentT { location: 1.0, scale: 0.5, dof: 6.0 },
        ] {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            assert!((mean - d.mean()).abs() < 0.01, "{d:?} {mean}");
            assert!((var / d.variance() - 1.0).abs() < 0.05, "{d:?} {var}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(EmissionDist::gaussian(0.0, 0.0).validate().is_err());
        assert!(EmissionDist::StudentT { location: 0.0, scale: 1.0, dof: 2.0 }.validate().is_err());
        assert!(EmissionDist::Laplace { location: f64::NAN, scale: 1.0 }.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let j = serde_json::to_value(EmissionDist::gaussian(0.0, 1.0)).unwrap();
        assert_eq!(j["kind"], "gaussian");
        let t: EmissionDist =
            serde_json::from_str(r#"{"kind":"student_t","location":0,"scale":1,"dof":3}"#).unwrap();
        assert_eq!(t, EmissionDist::StudentT { location: 0.0, scale: 1.0, dof: 3.0 });
    }
}
