use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::seeds::{run_seed, Purpose};
use crate::detectors::{DcMmdConfig, Normalization};
use crate::error::{invalid, Error, Result};
use crate::error_model::{ErrorStream, HmmSpec};
use crate::kernel_mmd::{
    median_heuristic, mmd, mmd_between_samples, pairs, BandwidthRule, Block, RbfKernel, ReferenceSet,
};

/// Samples per regime behind the distinguishability check.
pub const GUARD_SAMPLES: usize = 2_000;
/// Smallest discrepancy accepted as a genuine change.
pub const GUARD_MIN_DISCREPANCY: f64 = 1e-9;
const GUARD_SEED: u64 = 0xD157_1A50;

/// A pre/post pair of error models with the changepoints used for WADD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRaw", into = "ScenarioRaw")]
pub struct ScenarioSpec {
    pub label: String,
    pub pre: HmmSpec,
    pub post: HmmSpec,
    pub changepoint_grid: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioRaw {
    label: String,
    pre: HmmSpec,
    post: HmmSpec,
    changepoint_grid: Vec<u64>,
}

impl TryFrom<ScenarioRaw> for ScenarioSpec {
    type Error = Error;
    fn try_from(r: ScenarioRaw) -> Result<Self> {
        Self::new(r.label, r.pre, r.post, r.changepoint_grid)
    }
}

impl From<ScenarioSpec> for ScenarioRaw {
    fn from(s: ScenarioSpec) -> Self {
        Self { label: s.label, pre: s.pre, post: s.post, changepoint_grid: s.changepoint_grid }
    }
}

impl ScenarioSpec {
    /// Validates the grid and rejects post-change models that cannot be told
    /// apart from the pre-change one.
    pub fn new(label: impl Into<String>, pre: HmmSpec, post: HmmSpec, changepoint_grid: Vec<u64>) -> Result<Self> {
        let label = label.into();
        if changepoint_grid.is_empty() || changepoint_grid.contains(&0) {
            return Err(invalid("changepoint grid must be non-empty with entries >= 1"));
        }
        let d = guard_discrepancy(&pre, &post)?;
        if !(d > GUARD_MIN_DISCREPANCY) {
            return Err(Error::Indistinguishable(label, d));
        }
        Ok(Self { label, pre, post, changepoint_grid })
    }

    /// `{1, m + 1, 5m + 1, 10m + 1}`.
    pub fn default_grid(m: usize) -> Vec<u64> {
        let m = m as u64;
        vec![1, m + 1, 5 * m + 1, 10 * m + 1]
    }

    pub fn with_grid(mut self, grid: Vec<u64>) -> Result<Self> {
        if grid.is_empty() || grid.contains(&0) {
            return Err(invalid("changepoint grid must be non-empty with entries >= 1"));
        }
        self.changepoint_grid = grid;
        Ok(self)
    }
}

fn guard_discrepancy(pre: &HmmSpec, post: &HmmSpec) -> Result<f64> {
    let a: Vec<f64> = ErrorStream::stationary(pre, GUARD_SEED).take(GUARD_SAMPLES + 1).collect();
    let sigma = median_heuristic(&pairs(&a)).unwrap_or(1.0);
    estimate_discrepancy(pre, post, RbfKernel::new(sigma)?, GUARD_SAMPLES, GUARD_SEED)
}

/// Kernel discrepancy between the stationary pair laws of two models, from
/// `n` pairs of each. Both streams share `seed`, so identical models give
/// exactly zero.
pub fn estimate_discrepancy(pre: &HmmSpec, post: &HmmSpec, kernel: RbfKernel<f64>, n: usize, seed: u64) -> Result<f64> {
    if n < 2 {
        return Err(invalid("need at least 2 samples per regime"));
    }
    let a: Vec<f64> = ErrorStream::stationary(pre, seed).take(n + 1).collect();
    let b: Vec<f64> = ErrorStream::stationary(post, seed).take(n + 1).collect();
    mmd_between_samples(&pairs(&b), &pairs(&a), kernel)
}

/// How the offset `zeta` of a DC-MMD detector is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetRule {
    Fixed(f64),
    /// Mean block discrepancy on held-out in-distribution blocks, plus `margin`.
    Auto { margin: f64 },
}

/// Recipe for building a DC-MMD detector from a pre-change model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcMmdSetup {
    pub m: usize,
    pub bandwidth: BandwidthRule<f64>,
    /// Reference size.
    pub n_ref: usize,
    /// Length of the in-distribution stream the reference is drawn from.
    pub ref_len: usize,
    pub offset: OffsetRule,
    /// Held-out blocks averaged by [`OffsetRule::Auto`].
    pub offset_blocks: usize,
    pub normalization: Normalization<f64>,
    pub threshold: f64,
}

impl Default for DcMmdSetup {
    fn default() -> Self {
        Self {
            m: 50,
            bandwidth: BandwidthRule::Fixed(0.8),
            n_ref: 2_000,
            ref_len: 20_000,
            offset: OffsetRule::Fixed(0.05),
            offset_blocks: 2_000,
            normalization: Normalization::Off,
            threshold: 1.0,
        }
    }
}

/// Reference, offset and detector parameters built from simulated
/// in-distribution data.
#[derive(Debug, Clone)]
pub struct BuiltDcMmd {
    pub config: DcMmdConfig<f64>,
    /// Held-out block discrepancies behind an automatic offset (empty otherwise).
    pub id_discrepancies: Vec<f64>,
}

impl DcMmdSetup {
    pub fn build(&self, pre: &HmmSpec, seed: u64) -> Result<BuiltDcMmd> {
        if self.m < 2 {
            return Err(invalid("block length must be >= 2"));
        }
        let ref_len = self.ref_len.max(self.n_ref + 1);
        let errors: Vec<f64> = ErrorStream::stationary(pre, run_seed(seed, Purpose::Reference, 0, 0)).take(ref_len).collect();
        let reference = Arc::new(ReferenceSet::from_errors(&errors, self.bandwidth, self.n_ref)?);

        let (zeta, id_discrepancies) = match self.offset {
            OffsetRule::Fixed(z) => (z, Vec::new()),
            OffsetRule::Auto { margin } => {
                let d = id_block_discrepancies(pre, &reference, self.m, self.offset_blocks, seed)?;
                let mean = d.iter().sum::<f64>() / d.len() as f64;
                ((mean + margin).max(0.0), d)
            }
        };
        let mut config = DcMmdConfig::new(self.m, zeta, self.threshold, reference);
        config.normalization = self.normalization;
        config.validate()?;
        Ok(BuiltDcMmd { config, id_discrepancies })
    }
}

/// Discrepancies of `n_blocks` consecutive held-out blocks of a stationary stream.
pub fn id_block_discrepancies(
    pre: &HmmSpec,
    reference: &ReferenceSet<f64>,
    m: usize,
    n_blocks: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_blocks == 0 {
        return Err(invalid("need at least one held-out block"));
    }
    let mut stream = ErrorStream::stationary(pre, run_seed(seed, Purpose::Offset, 0, 0));
    let mut buf = vec![0.0; m];
    (0..n_blocks)
        .map(|_| {
            for v in buf.iter_mut() {
                *v = stream.next_sample().1;
            }
            mmd(&Block::from_errors(&buf)?, reference)
        })
        .collect()
}
