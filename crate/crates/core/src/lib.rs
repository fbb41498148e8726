//! Quickest change detection on scalar prediction-error streams whose
//! nominal behaviour follows a two-state hidden-Markov model.
//!
//! The centrepiece is [`detectors::DcMmd`], a CUSUM recursion over blockwise
//! kernel discrepancies between consecutive-error pairs and an
//! in-distribution reference. Baseline detectors, analytical delay bounds,
//! Monte-Carlo WADD/MTFA estimation and scenario presets live alongside it.
//!
//! Kernel, detector and bound code is generic over [`Scalar`] (`f32` or
//! `f64`); simulation and evaluation run in `f64`. The aliases below name
//! the `f64` instantiations used throughout the evaluation harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod detectors;
pub mod error;
pub mod error_model;
pub mod evaluation;
pub mod kernel_mmd;
pub mod scalar;
pub mod scenarios;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type RbfKernel64 = kernel_mmd::RbfKernel<f64>;
pub type SecondOrderSample64 = kernel_mmd::SecondOrderSample<f64>;
pub type ReferenceSet64 = kernel_mmd::ReferenceSet<f64>;
pub type Block64 = kernel_mmd::Block<f64>;
pub type DcMmd64 = detectors::DcMmd<f64>;
pub type DcMmdConfig64 = detectors::DcMmdConfig<f64>;
pub type DetectorConfig64 = detectors::DetectorConfig<f64>;
pub type Gaussian64 = detectors::Gaussian<f64>;
pub type GaussianMixture64 = detectors::GaussianMixture<f64>;
pub type BoundInputs64 = theory::BoundInputs<f64>;
pub type WaddBound64 = theory::WaddBound<f64>;
