//! Scenario presets for the driving scenes of the error-dynamics study and
//! the suites built on them.
//!
//! Difficulty levels map to numeric emission parameters in `presets.json`,
//! which is compiled into the crate.

mod baselines;
mod shift;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_model::{HmmSpec, TransitionMatrix};
use crate::evaluation::ScenarioSpec;

pub use baselines::{
    gaussian_cusum_known, gmm_cusum_known, gmm_cusum_surrogate, marginal_gaussian, misspecified_gaussian_cusum,
    nll_detector, robust_cusum, stationary_mixture, unknown_postchange_suite, NamedDetector, UnknownPostSuite,
    ROBUST_KAPPA,
};
pub use shift::{heavy_tail_suite, ShiftKind, TailFamily};

/// Block length the default changepoint grid is built for.
pub const DEFAULT_BLOCK_LEN: usize = 50;

const REGISTRY_JSON: &str = include_str!("presets.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyValues {
    pub easy: f64,
    pub moderate: f64,
    pub hard: f64,
}

impl DifficultyValues {
    pub fn get(&self, d: Difficulty) -> f64 {
        match d {
            Difficulty::Easy => self.easy,
            Difficulty::Moderate => self.moderate,
            Difficulty::Hard => self.hard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyMap {
    pub delta_mu: DifficultyValues,
    pub sigma2: DifficultyValues,
}

/// How the tabulated `p` enters the transition matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PReading {
    /// `P_LH = P_HL = p`.
    Switching,
    /// `P_LL = P_HH = p`.
    SelfTransition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefaultShift {
    pub sigma_scale: f64,
    /// Target relative increase of the stationary mean of `exp(e)`.
    pub target_inflation: f64,
}

/// One driving scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePreset {
    pub name: String,
    pub group: String,
    pub sources: Vec<String>,
    pub p: f64,
    pub delta_mu: Difficulty,
    pub sigma2: Difficulty,
}

/// The versioned preset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetRegistry {
    pub version: u32,
    pub units: String,
    pub p_reading: PReading,
    pub mu_low: f64,
    pub difficulty: DifficultyMap,
    pub default_shift: DefaultShift,
    pub scenes: Vec<ScenePreset>,
}

impl PresetRegistry {
    pub fn scene(&self, name: &str) -> Result<&ScenePreset> {
        self.scenes.iter().find(|s| s.name == name).ok_or_else(|| Error::UnknownPreset(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.scenes.iter().map(|s| s.name.as_str())
    }

    /// Pre-change model: Gaussian modes `mu_low` and `mu_low + delta_mu`
    /// with the tabulated within-mode variance.
    pub fn pre_spec(&self, scene: &ScenePreset) -> Result<HmmSpec> {
        self.pre_spec_with(scene, self.p_reading)
    }

    pub fn pre_spec_with(&self, scene: &ScenePreset, reading: PReading) -> Result<HmmSpec> {
        let switching = match reading {
            PReading::Switching => scene.p,
            PReading::SelfTransition => 1.0 - scene.p,
        };
        let dmu = self.difficulty.delta_mu.get(scene.delta_mu);
        let var = self.difficulty.sigma2.get(scene.sigma2);
        HmmSpec::gaussian(TransitionMatrix::symmetric(switching)?, self.mu_low, self.mu_low + dmu, var.sqrt())
    }

    /// Emission shift that scales every mode's spread by `sigma_scale` and
    /// moves every mode's mean by the amount that inflates the mean of `exp(e)` by
    /// `target_inflation`.
    pub fn default_shift(&self, scene: &ScenePreset) -> ShiftKind {
        let s = self.default_shift.sigma_scale;
        let var = self.difficulty.sigma2.get(scene.sigma2);
        // Gaussian modes: E exp(e) scales by exp(delta + (s^2 - 1) var / 2).
        let delta = (1.0 + self.default_shift.target_inflation).ln() - 0.5 * (s * s - 1.0) * var;
        ShiftKind::Emission { delta_mu: delta, sigma_scale: s }
    }

    pub fn preset(&self, name: &str) -> Result<ScenarioSpec> {
        let scene = self.scene(name)?;
        let pre = self.pre_spec(scene)?;
        let post = self.default_shift(scene).apply(&pre)?;
        ScenarioSpec::new(name, pre, post, ScenarioSpec::default_grid(DEFAULT_BLOCK_LEN))
    }

    /// Scene `name` with a custom post-change shift.
    pub fn preset_with_shift(&self, name: &str, shift: &ShiftKind) -> Result<ScenarioSpec> {
        let pre = self.pre_spec(self.scene(name)?)?;
        let post = shift.apply(&pre)?;
        ScenarioSpec::new(format!("{name}+{}", shift.tag()), pre, post, ScenarioSpec::default_grid(DEFAULT_BLOCK_LEN))
    }
}

/// The compiled-in registry.
pub fn registry() -> &'static PresetRegistry {
    static REG: OnceLock<PresetRegistry> = OnceLock::new();
    REG.get_or_init(|| serde_json::from_str(REGISTRY_JSON).expect("bundled presets.json is valid"))
}

/// Scenario for a named scene with its default post-change shift.
pub fn preset(name: &str) -> Result<ScenarioSpec> {
    registry().preset(name)
}

pub fn preset_names() -> Vec<&'static str> {
    registry().names().collect()
}

/// Relative increase of the stationary mean of `exp(e)` from `pre` to `post`.
pub fn mean_error_inflation(pre: &HmmSpec, post: &HmmSpec) -> f64 {
    post.marginal_mean_exp() / pre.marginal_mean_exp() - 1.0
}
