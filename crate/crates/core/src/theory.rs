//! Analytical delay and false-alarm guarantees of the kernel CUSUM.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::error_model::SpectralGap;
use crate::kernel_mmd::ReferenceSet;
use crate::scalar::Scalar;

/// Points per axis of the bounding-box grid searched by [`estimate_r`].
pub const R_GRID_SIDE: usize = 12;

/// Mixing constant `a = sqrt((2 - 2 delta + 4 r) / ((m - 1)(1 - delta)))`.
pub fn bound_a<T: Scalar>(m: usize, delta: T, r: T) -> Result<T> {
    if m < 2 {
        return Err(invalid(format!("block length must be >= 2, got {m}")));
    }
    if !(delta >= T::zero() && delta < T::one()) {
        return Err(invalid(format!("delta must lie in [0, 1), got {delta}")));
    }
    if !(r >= T::zero() && r <= T::one()) {
        return Err(invalid(format!("R must lie in [0, 1], got {r}")));
    }
    let two = T::lit(2.0);
    let num = two - two * delta + T::lit(4.0) * r;
    let den = T::from_usize(m - 1).unwrap() * (T::one() - delta);
    Ok((num / den).sqrt())
}

/// Inputs of the worst-case delay bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs<T> {
    pub m: usize,
    pub b: T,
    pub zeta: T,
    /// Mixing coefficient entering `a`.
    pub delta: T,
    pub r: T,
    /// Estimated post-change drift `D(post, pre) - zeta`.
    pub d_hat: T,
}

impl<T: Scalar> BoundInputs<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > T::zero()) || !self.b.is_finite() {
            return Err(invalid(format!("threshold must be positive, got {}", self.b)));
        }
        if !(self.zeta >= T::zero()) {
            return Err(invalid(format!("offset must be >= 0, got {}", self.zeta)));
        }
        if !self.d_hat.is_finite() {
            return Err(invalid("drift estimate must be finite"));
        }
        bound_a(self.m, self.delta, self.r).map(|_| ())
    }

    pub fn a(&self) -> Result<T> {
        bound_a(self.m, self.delta, self.r)
    }
}

/// Value of the delay bound, or a marker that it says nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaddBound<T> {
    Finite(T),
    /// The drift does not exceed `a`.
    Vacuous,
}

impl<T: Scalar> WaddBound<T> {
    pub fn value(&self) -> Option<T> {
        match *self {
            Self::Finite(v) => Some(v),
            Self::Vacuous => None,
        }
    }
}

impl<T: Scalar + Serialize> Serialize for WaddBound<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(v) => v.serialize(s),
            Self::Vacuous => s.serialize_str("vacuous"),
        }
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for WaddBound<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Num(T),
            Tag(String),
        }
        match Raw::<T>::deserialize(d)? {
            Raw::Num(v) => Ok(Self::Finite(v)),
            Raw::Tag(s) if s == "vacuous" => Ok(Self::Vacuous),
            Raw::Tag(s) => Err(serde::de::Error::custom(format!("unexpected bound `{s}`"))),
        }
    }
}

/// `m b / (sqrt d - sqrt a)^2 + m sqrt d / (sqrt d - sqrt a)`, in raw steps.
pub fn wadd_upper_bound<T: Scalar>(inputs: &BoundInputs<T>) -> Result<WaddBound<T>> {
    bound_terms(inputs).map(|t| t.map_or(WaddBound::Vacuous, |(main, extra)| WaddBound::Finite(main + extra)))
}

/// Leading term `m b / (sqrt d - sqrt a)^2` only.
pub fn wadd_upper_bound_tight<T: Scalar>(inputs: &BoundInputs<T>) -> Result<WaddBound<T>> {
    bound_terms(inputs).map(|t| t.map_or(WaddBound::Vacuous, |(main, _)| WaddBound::Finite(main)))
}

fn bound_terms<T: Scalar>(inputs: &BoundInputs<T>) -> Result<Option<(T, T)>> {
    inputs.validate()?;
    let a = inputs.a()?;
    let d = inputs.d_hat;
    if d <= a {
        return Ok(None);
    }
    let m = T::from_usize(inputs.m).unwrap();
    let gap = d.sqrt() - a.sqrt();
    Ok(Some((m * inputs.b / (gap * gap), m * d.sqrt() / gap)))
}

/// Kernel second-moment envelope `sup_x mean_i k(x, y_i)^2`.
///
/// The supremum is taken over the reference points together with a
/// `R_GRID_SIDE x R_GRID_SIDE` grid spanning their bounding box.
pub fn estimate_r<T: Scalar>(reference: &ReferenceSet<T>) -> T {
    let samples = reference.samples();
    let (xs, ys): (Vec<T>, Vec<T>) = samples.iter().map(|s| (s.0[0], s.0[1])).unzip();
    // k^2 is the RBF kernel with twice the rate.
    let gamma2 = T::lit(2.0) * reference.kernel().gamma();
    let n = T::from_usize(samples.len()).unwrap();
    let envelope = |px: T, py: T| T::gaussian_row_sum(px, py, &xs, &ys, gamma2) / n;

    let mut best = T::zero();
    for s in samples {
        best = best.max(envelope(s.0[0], s.0[1]));
    }
    let lo = |v: &[T]| v.iter().copied().fold(T::infinity(), T::min);
    let hi = |v: &[T]| v.iter().copied().fold(T::neg_infinity(), T::max);
    let (x0, x1, y0, y1) = (lo(&xs), hi(&xs), lo(&ys), hi(&ys));
    let steps = T::from_usize(R_GRID_SIDE - 1).unwrap();
    for i in 0..R_GRID_SIDE {
        let px = x0 + (x1 - x0) * T::from_usize(i).unwrap() / steps;
        for j in 0..R_GRID_SIDE {
            let py = y0 + (y1 - y0) * T::from_usize(j).unwrap() / steps;
            best = best.max(envelope(px, py));
        }
    }
    best.min(T::one())
}

/// Least-squares fit `ln MTFA ~ intercept + q b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub q: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl ExponentFit {
    /// Increasing log-linear growth with the given goodness of fit.
    pub fn is_exponential(&self, min_r_squared: f64) -> bool {
        self.q > 0.0 && self.r_squared >= min_r_squared
    }
}

/// One threshold of an MTFA sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtfaPoint {
    pub b: f64,
    pub mtfa: f64,
    /// Fraction of runs that reached the horizon without alarm.
    pub censor_rate: f64,
}

/// Largest censor rate accepted by [`fit_mtfa_exponent`].
pub const MAX_FIT_CENSOR_RATE: f64 = 0.5;

/// Fits the exponential growth of MTFA in the threshold.
///
/// Needs at least four points with distinct `b`, positive MTFA and a censor
/// rate below [`MAX_FIT_CENSOR_RATE`].
pub fn fit_mtfa_exponent(points: &[MtfaPoint]) -> Result<ExponentFit> {
    if points.len() < 4 {
        return Err(invalid(format!("need at least 4 points, got {}", points.len())));
    }
    for p in points {
        if !(p.mtfa > 0.0) || !p.mtfa.is_finite() || !p.b.is_finite() {
            return Err(invalid(format!("invalid MTFA point {p:?}")));
        }
        if p.censor_rate >= MAX_FIT_CENSOR_RATE {
            return Err(invalid(format!("point at b = {} is censored ({:.2})", p.b, p.censor_rate)));
        }
    }
    let mut bs: Vec<f64> = points.iter().map(|p| p.b).collect();
    bs.sort_by(f64::total_cmp);
    if bs.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("threshold values must be distinct"));
    }

    let n = points.len() as f64;
    let mb = points.iter().map(|p| p.b).sum::<f64>() / n;
    let my = points.iter().map(|p| p.mtfa.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.b - mb, p.mtfa.ln() - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let q = sxy / sxx;
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { 0.0 };
    Ok(ExponentFit { q, intercept: my - q * mb, r_squared })
}

/// Which reading of the mixing coefficient enters `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeltaReading {
    /// `|lambda_2|`.
    #[default]
    Lambda2,
    /// `1 - |lambda_2|`.
    Gap,
}

/// Bound summary written next to experiment results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub a: f64,
    pub d_hat: f64,
    pub delta_gap: f64,
    pub delta_lambda2: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub bound: WaddBound<f64>,
    pub bound_tight: WaddBound<f64>,
}

impl BoundReport {
    pub fn new(
        m: usize,
        b: f64,
        zeta: f64,
        spectral: SpectralGap,
        r: f64,
        d_hat: f64,
        reading: DeltaReading,
    ) -> Result<Self> {
        let delta = match reading {
            DeltaReading::Lambda2 => spectral.lambda2,
            DeltaReading::Gap => spectral.gap,
        };
        let inputs = BoundInputs { m, b, zeta, delta, r, d_hat };
        Ok(Self {
            a: inputs.a()?,
            d_hat,
            delta_gap: spectral.gap,
            delta_lambda2: spectral.lambda2,
            r,
            bound: wadd_upper_bound(&inputs)?,
            bound_tight: wadd_upper_bound_tight(&inputs)?,
        })
    }
}
