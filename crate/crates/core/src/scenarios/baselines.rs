use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorConfig, Gaussian, GaussianMixture};
use crate::error::Result;
use crate::error_model::{HmmSpec, LatentMode};
use crate::evaluation::{DcMmdSetup, ScenarioSpec};

/// Shift multiplier of the robust surrogate.
pub const ROBUST_KAPPA: f64 = 2.0;

/// Gaussian with the stationary marginal mean and variance of `spec`.
pub fn marginal_gaussian(spec: &HmmSpec) -> Result<Gaussian<f64>> {
    Gaussian::new(spec.marginal_mean(), spec.marginal_variance().sqrt())
}

/// Stationary two-component mixture of `spec`'s modes, each component
/// moment-matched to its emission.
pub fn stationary_mixture(spec: &HmmSpec) -> Result<GaussianMixture<f64>> {
    let pi = spec.stationary();
    let comps = LatentMode::ALL
        .iter()
        .map(|&m| Gaussian::new(spec.emission(m).mean(), spec.emission(m).std()))
        .collect::<Result<Vec<_>>>()?;
    GaussianMixture::new(pi.to_vec(), comps)
}

/// Gaussian CUSUM with both marginals known.
pub fn gaussian_cusum_known(pre: &HmmSpec, post: &HmmSpec, threshold: f64) -> Result<DetectorConfig<f64>> {
    Ok(DetectorConfig::GaussCusum { pre: marginal_gaussian(pre)?, post: marginal_gaussian(post)?, threshold })
}

/// Gaussian CUSUM against `N(mu0 + kappa sigma0, sigma0^2)`.
pub fn robust_cusum(pre: &HmmSpec, kappa: f64, threshold: f64) -> Result<DetectorConfig<f64>> {
    Ok(DetectorConfig::RobustCusum { pre: marginal_gaussian(pre)?, kappa, threshold })
}

/// Gaussian CUSUM that assumes half of the true marginal mean shift and no
/// change in spread.
pub fn misspecified_gaussian_cusum(pre: &HmmSpec, post: &HmmSpec, threshold: f64) -> Result<DetectorConfig<f64>> {
    let g0 = marginal_gaussian(pre)?;
    let assumed = Gaussian::new(g0.mean + 0.5 * (post.marginal_mean() - g0.mean), g0.std)?;
    Ok(DetectorConfig::GaussCusum { pre: g0, post: assumed, threshold })
}

/// Mixture CUSUM with both stationary mixtures known.
pub fn gmm_cusum_known(pre: &HmmSpec, post: &HmmSpec, threshold: f64) -> Result<DetectorConfig<f64>> {
    Ok(DetectorConfig::GmmCusum { pre: stationary_mixture(pre)?, post: stationary_mixture(post)?, threshold })
}

/// Mixture CUSUM whose post-change mixture moves every component mean by
/// `kappa` of its own standard deviation.
pub fn gmm_cusum_surrogate(pre: &HmmSpec, kappa: f64, threshold: f64) -> Result<DetectorConfig<f64>> {
    let f = stationary_mixture(pre)?;
    let comps = f
        .components
        .iter()
        .map(|c| Gaussian::new(c.mean + kappa * c.std, c.std))
        .collect::<Result<Vec<_>>>()?;
    let g = GaussianMixture::new(f.weights.clone(), comps)?;
    Ok(DetectorConfig::GmmCusum { pre: f, post: g, threshold })
}

/// Pointwise NLL under the stationary pre-change mixture.
pub fn nll_detector(pre: &HmmSpec, threshold: f64) -> Result<DetectorConfig<f64>> {
    Ok(DetectorConfig::NllThreshold { density: stationary_mixture(pre)?, threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDetector {
    pub name: String,
    pub config: DetectorConfig<f64>,
}

/// Detectors compared when the post-change law is unknown to the detector
/// designer. Thresholds are placeholders to be calibrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnknownPostSuite {
    pub scenario: ScenarioSpec,
    pub detectors: Vec<NamedDetector>,
}

/// DC-MMD (built from pre-change data only), robust CUSUM, a Gaussian CUSUM
/// with a wrong post-change mean, and pointwise NLL.
pub fn unknown_postchange_suite(base: &ScenarioSpec, setup: &DcMmdSetup, seed: u64) -> Result<UnknownPostSuite> {
    let dcmmd = DetectorConfig::DcMmd(setup.build(&base.pre, seed)?.config);
    let named = |name: &str, config| NamedDetector { name: name.to_string(), config };
    Ok(UnknownPostSuite {
        scenario: base.clone(),
        detectors: vec![
            named("dc_mmd", dcmmd),
            named("robust_cusum", robust_cusum(&base.pre, ROBUST_KAPPA, 1.0)?),
            named("g_cusum_misspecified", misspecified_gaussian_cusum(&base.pre, &base.post, 1.0)?),
            named("nll", nll_detector(&base.pre, 1.0)?),
        ],
    })
}
