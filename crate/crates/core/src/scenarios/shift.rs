use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::error_model::{EmissionDist, HmmSpec, TransitionMatrix, DEFAULT_STUDENT_DOF};
use crate::evaluation::ScenarioSpec;

/// Emission family with matched mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailFamily {
    Gaussian,
    Laplace,
    StudentT,
}

impl TailFamily {
    /// Same mean and variance as `e`, in this family.
    pub fn matched(self, e: &EmissionDist) -> EmissionDist {
        let (mean, sd) = (e.mean(), e.std());
        match self {
            Self::Gaussian => match *e {
                EmissionDist::Gaussian { .. } => *e,
                _ => EmissionDist::gaussian(mean, sd),
            },
            Self::Laplace => EmissionDist::Laplace { location: mean, scale: sd / 2f64.sqrt() },
            Self::StudentT => {
                let dof = DEFAULT_STUDENT_DOF;
                EmissionDist::StudentT { location: mean, scale: sd * ((dof - 2.0) / dof).sqrt(), dof }
            }
        }
    }
}

/// A post-change modification of an error model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftKind {
    /// Every mode's mean moves by `delta_mu` and its spread scales by `sigma_scale`.
    Emission { delta_mu: f64, sigma_scale: f64 },
    /// Symmetric switching probability `p` replaces the transition matrix.
    Transition { p: f64 },
    /// Emissions swapped to a family with matched moments.
    TailSwap { target: TailFamily },
    Combined { shifts: Vec<ShiftKind> },
}

impl ShiftKind {
    pub fn apply(&self, spec: &HmmSpec) -> Result<HmmSpec> {
        match self {
            Self::Emission { delta_mu, sigma_scale } => {
                if !(*sigma_scale >= 1.0) || !delta_mu.is_finite() {
                    return Err(invalid(format!("emission shift needs sigma_scale >= 1, got {sigma_scale}")));
                }
                spec.map_emissions(|_, e| e.shifted(*delta_mu, *sigma_scale))
            }
            Self::Transition { p } => Ok(spec.with_transition(TransitionMatrix::symmetric(*p)?)),
            Self::TailSwap { target } => spec.map_emissions(|_, e| target.matched(e)),
            Self::Combined { shifts } => shifts.iter().try_fold(*spec, |s, k| k.apply(&s)),
        }
    }

    /// Short label used in scenario names.
    pub fn tag(&self) -> String {
        match self {
            Self::Emission { delta_mu, sigma_scale } => format!("emission({delta_mu:.3},{sigma_scale:.2})"),
            Self::Transition { p } => format!("transition({p})"),
            Self::TailSwap { target } => format!("tails({target:?})").to_lowercase(),
            Self::Combined { shifts } => shifts.iter().map(Self::tag).collect::<Vec<_>>().join("+"),
        }
    }
}

/// Gaussian, Laplace and Student-t versions of `base` (pre and post), with
/// per-mode means and variances unchanged.
pub fn heavy_tail_suite(base: &ScenarioSpec) -> Result<[ScenarioSpec; 3]> {
    let member = |f: TailFamily| -> Result<ScenarioSpec> {
        let swap = ShiftKind::TailSwap { target: f };
        ScenarioSpec::new(
            format!("{}/{}", base.label, format!("{f:?}").to_lowercase()),
            swap.apply(&base.pre)?,
            swap.apply(&base.post)?,
            base.changepoint_grid.clone(),
        )
    };
    Ok([member(TailFamily::Gaussian)?, member(TailFamily::Laplace)?, member(TailFamily::StudentT)?])
}
