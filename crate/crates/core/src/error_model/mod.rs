//! Two-state hidden-Markov model of prediction errors.

mod chain;
mod emission;
mod fit;
mod hmm;
mod metrics;

use serde::{Deserialize, Serialize};

pub use chain::{
    pair_stationary, second_order_chain, spectral_gap, stationary_distribution, SpectralGap, TransitionMatrix,
};
pub use emission::{EmissionDist, DEFAULT_STUDENT_DOF};
pub use fit::{fit_two_state_hmm, map_mode_assignment, posterior_high, HmmFit, MIN_FITTED_STD};
pub use hmm::{sample_path, ErrorPath, ErrorStream, HmmSpec};
pub use metrics::{compute_ade, compute_fde, compute_rmse, Point2};

/// Latent error mode: nominal (`L`) or elevated (`H`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatentMode {
    L,
    H,
}

impl LatentMode {
    pub const ALL: [LatentMode; 2] = [LatentMode::L, LatentMode::H];

    pub fn index(self) -> usize {
        match self {
            Self::L => 0,
            Self::H => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Self::L => Self::H,
            Self::H => Self::L,
        }
    }
}

impl std::fmt::Display for LatentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::L => "L",
            Self::H => "H",
        })
    }
}
