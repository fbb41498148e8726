use serde::{Deserialize, Serialize};

use super::{Cusum, DcMmd, DcMmdConfig, Detector, Gaussian, GaussianMixture, NllThreshold};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Serializable description of any detector in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "detector", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub enum DetectorConfig<T> {
    DcMmd(DcMmdConfig<T>),
    GaussCusum { pre: Gaussian<T>, post: Gaussian<T>, threshold: T },
    GmmCusum { pre: GaussianMixture<T>, post: GaussianMixture<T>, threshold: T },
    RobustCusum { pre: Gaussian<T>, kappa: T, threshold: T },
    NllThreshold { density: GaussianMixture<T>, threshold: T },
}

impl<T: Scalar> DetectorConfig<T> {
    pub fn threshold(&self) -> T {
        match self {
            Self::DcMmd(c) => c.threshold,
            Self::GaussCusum { threshold, .. }
            | Self::GmmCusum { threshold, .. }
            | Self::RobustCusum { threshold, .. }
            | Self::NllThreshold { threshold, .. } => *threshold,
        }
    }

    /// Copy of the configuration with threshold `b`.
    pub fn with_threshold(&self, b: T) -> Self {
        let mut c = self.clone();
        match &mut c {
            Self::DcMmd(cfg) => cfg.threshold = b,
            Self::GaussCusum { threshold, .. }
            | Self::GmmCusum { threshold, .. }
            | Self::RobustCusum { threshold, .. }
            | Self::NllThreshold { threshold, .. } => *threshold = b,
        }
        c
    }

    pub fn build(&self) -> Result<Box<dyn Detector<T>>> {
        Ok(match self {
            Self::DcMmd(cfg) => Box::new(DcMmd::new(cfg.clone())?),
            Self::GaussCusum { pre, post, threshold } => Box::new(Cusum::gaussian(*pre, *post, *threshold)?),
            Self::GmmCusum { pre, post, threshold } => {
                Box::new(Cusum::mixture(pre.clone(), post.clone(), *threshold)?)
            }
            Self::RobustCusum { pre, kappa, threshold } => Box::new(Cusum::robust(*pre, *kappa, *threshold)?),
            Self::NllThreshold { density, threshold } => Box::new(NllThreshold::new(density.clone(), *threshold)?),
        })
    }

    /// Short identifier used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            Self::DcMmd(c) if c.normalization != super::Normalization::Off => "dc_mmd_normalized",
            Self::DcMmd(_) => "dc_mmd",
            Self::GaussCusum { .. } => "g_cusum",
            Self::GmmCusum { .. } => "gmm_cusum",
            Self::RobustCusum { .. } => "robust_cusum",
            Self::NllThreshold { .. } => "nll",
        }
    }

    /// Block length of block-based detectors.
    pub fn block_len(&self) -> Option<usize> {
        match self {
            Self::DcMmd(c) => Some(c.m),
            _ => None,
        }
    }

    /// Rejects an offset that leaves no positive post-change drift,
    /// given an estimate of the pre/post discrepancy.
    pub fn check_offset(&self, discrepancy: T) -> Result<()> {
        if let Self::DcMmd(c) = self {
            if !(c.zeta < discrepancy) {
                return Err(invalid(format!(
                    "offset {} is not below the estimated discrepancy {}",
                    c.zeta, discrepancy
                )));
            }
        }
        Ok(())
    }
}
