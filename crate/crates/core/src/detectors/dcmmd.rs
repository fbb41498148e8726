use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Alarm, Detector, StopRule};
use crate::error::{invalid, Result};
use crate::kernel_mmd::{mmd_squared_columns, ReferenceSet};
use crate::scalar::Scalar;

/// Rolling window (in blocks) of the variance-normalized variant.
pub const DEFAULT_VAR_WINDOW: usize = 20;
pub const DEFAULT_VAR_EPS: f64 = 1e-6;
const MIN_VAR_BLOCKS: usize = 3;

/// Optional scaling of the block increment `D - zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization<T> {
    Off,
    /// Divide by `sqrt(var + eps)`, `var` the sample variance of the
    /// increments of the previous `window` blocks. Bypassed until three
    /// blocks are available.
    Rolling { window: usize, eps: T },
    /// Divide by the constant `sqrt(variance + eps)`.
    Fixed { variance: T, eps: T },
}

impl<T: Scalar> Normalization<T> {
    pub fn rolling_default() -> Self {
        Self::Rolling { window: DEFAULT_VAR_WINDOW, eps: T::lit(DEFAULT_VAR_EPS) }
    }
}

/// Parameters of the blockwise kernel CUSUM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct DcMmdConfig<T> {
    /// Block length in raw errors; each block yields `m - 1` pairs.
    pub m: usize,
    /// Offset subtracted from every block discrepancy.
    pub zeta: T,
    /// Alarm threshold on `W`.
    pub threshold: T,
    pub reference: Arc<ReferenceSet<T>>,
    pub normalization: Normalization<T>,
}

impl<T: Scalar> DcMmdConfig<T> {
    pub fn new(m: usize, zeta: T, threshold: T, reference: Arc<ReferenceSet<T>>) -> Self {
        Self { m, zeta, threshold, reference, normalization: Normalization::Off }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(invalid(format!("block length must be >= 2, got {}", self.m)));
        }
        if !(self.zeta >= T::zero()) || !self.zeta.is_finite() {
            return Err(invalid(format!("offset must be finite and >= 0, got {}", self.zeta)));
        }
        match self.normalization {
            Normalization::Off => {}
            Normalization::Rolling { window, eps } => {
                if window < MIN_VAR_BLOCKS || !(eps > T::zero()) {
                    return Err(invalid("rolling normalization needs window >= 3 and eps > 0"));
                }
            }
            Normalization::Fixed { variance, eps } => {
                if !(variance >= T::zero()) || !(eps > T::zero()) {
                    return Err(invalid("fixed normalization needs variance >= 0 and eps > 0"));
                }
            }
        }
        Ok(())
    }
}

/// Data-driven cumulative MMD detector.
///
/// Errors are cut into non-overlapping blocks of `m`. When a block is
/// complete its `m - 1` consecutive pairs are compared with the reference,
/// and `W <- max(0, W + D - zeta)`. An alarm is raised at the first block
/// boundary where `W > b`, so stopping times are multiples of `m`.
#[derive(Debug, Clone)]
pub struct DcMmd<T> {
    cfg: DcMmdConfig<T>,
    bx: Vec<T>,
    by: Vec<T>,
    prev: T,
    filled: usize,
    w: T,
    blocks: u64,
    last_discrepancy: Option<T>,
    recent: VecDeque<T>,
    stop: StopRule<T>,
}

impl<T: Scalar> DcMmd<T> {
    pub fn new(cfg: DcMmdConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let stop = StopRule::new(cfg.threshold)?;
        let cap = cfg.m - 1;
        Ok(Self {
            bx: Vec::with_capacity(cap),
            by: Vec::with_capacity(cap),
            prev: T::zero(),
            filled: 0,
            w: T::zero(),
            blocks: 0,
            last_discrepancy: None,
            recent: VecDeque::new(),
            stop,
            cfg,
        })
    }

    pub fn config(&self) -> &DcMmdConfig<T> {
        &self.cfg
    }

    /// Discrepancy of the most recently completed block.
    pub fn last_discrepancy(&self) -> Option<T> {
        self.last_discrepancy
    }

    fn scaled(&mut self, raw: T) -> T {
        match self.cfg.normalization {
            Normalization::Off => raw,
            Normalization::Fixed { variance, eps } => raw / (variance + eps).sqrt(),
            Normalization::Rolling { window, eps } => {
                let k = self.recent.len();
                let out = if k >= MIN_VAR_BLOCKS {
                    let n = T::from_usize(k).unwrap();
                    let mean = self.recent.iter().copied().sum::<T>() / n;
                    let var = self.recent.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / (n - T::one());
                    raw / (var + eps).sqrt()
                } else {
                    raw
                };
                self.recent.push_back(raw);
                if self.recent.len() > window {
                    self.recent.pop_front();
                }
                out
            }
        }
    }
}

impl<T: Scalar> Detector<T> for DcMmd<T> {
    fn step(&mut self, e: T) -> Result<Option<Alarm<T>>> {
        self.stop.begin(e)?;
        if self.filled > 0 {
            self.bx.push(self.prev);
            self.by.push(e);
        }
        self.prev = e;
        self.filled += 1;
        if self.filled < self.cfg.m {
            return Ok(None);
        }

        let d = mmd_squared_columns(&self.bx, &self.by, &self.cfg.reference).sqrt();
        self.last_discrepancy = Some(d);
        let inc = self.scaled(d - self.cfg.zeta);
        self.w = (self.w + inc).max(T::zero());
        self.blocks += 1;
        self.bx.clear();
        self.by.clear();
        self.filled = 0;
        Ok(self.stop.check(self.w, Some(self.blocks)))
    }

    fn statistic(&self) -> T {
        self.w
    }

    fn threshold(&self) -> T {
        self.stop.threshold
    }

    fn steps(&self) -> u64 {
        self.stop.t
    }

    fn alarm(&self) -> Option<&Alarm<T>> {
        self.stop.alarm.as_ref()
    }

    fn reset(&mut self) {
        self.bx.clear();
        self.by.clear();
        self.filled = 0;
        self.w = T::zero();
        self.blocks = 0;
        self.last_discrepancy = None;
        self.recent.clear();
        self.stop.reset();
    }

    fn block_len(&self) -> Option<usize> {
        Some(self.cfg.m)
    }

    fn block_index(&self) -> u64 {
        self.blocks
    }

    fn name(&self) -> &'static str {
        match self.cfg.normalization {
            Normalization::Off => "dc_mmd",
            _ => "dc_mmd_normalized",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::kernel_mmd::{Block, RbfKernel, SecondOrderSample};
    use proptest::prelude::*;

    fn reference() -> Arc<ReferenceSet<f64>> {
        let errors: Vec<f64> = (0..400).map(|i| (i as f64 * 0.61).sin() * 0.5).collect();
        Arc::new(crate::kernel_mmd::build_reference(&errors, RbfKernel::new(0.8).unwrap(), 400).unwrap())
    }

    fn block_d(errors: &[f64], r: &ReferenceSet<f64>) -> f64 {
        crate::kernel_mmd::mmd(&Block::from_errors(errors).unwrap(), r).unwrap()
    }

    #[test]
    fn w_moves_only_at_block_ends_and_matches_recursion() {
        let r = reference();
        let m = 5;
        let mut det = DcMmd::new(DcMmdConfig::new(m, 0.05, 1e9, r.clone())).unwrap();
        let errors: Vec<f64> = (0..53).map(|i| (i as f64 * 0.9).cos() + if i > 25 { 1.0 } else { 0.0 }).collect();
        let mut w = 0.0;
        for (i, &e) in errors.iter().enumerate() {
            let before = det.statistic();
            det.step(e).unwrap();
            let t = i + 1;
            if t % m == 0 {
                let d = block_d(&errors[t - m..t], &r);
                w = f64::max(0.0, w + d - 0.05);
                assert!((det.statistic() - w).abs() < 1e-12);
                assert_eq!(det.block_index(), (t / m) as u64);
            } else {
                assert_eq!(det.statistic(), before);
            }
        }
    }

    #[test]
    fn recursion_examples() {
        // The update is W <- max(0, W + D - zeta); check its arithmetic directly.
        let upd = |w: f64, d: f64, z: f64| f64::max(0.0, w + d - z);
        assert_eq!(upd(0.0, 0.01, 0.05), 0.0);
        assert!((upd(0.30, 0.02, 0.05) - 0.27).abs() < 1e-15);
        assert!((upd(0.90, 0.20, 0.05) - 1.05).abs() < 1e-15);
    }

    #[test]
    fn alarm_at_block_multiple() {
        // Reference concentrated at the origin, constant blocks far away.
        let pts = vec![SecondOrderSample::new(0.0f64, 0.0), SecondOrderSample::new(0.01, 0.0)];
        let r = Arc::new(ReferenceSet::new(pts, RbfKernel::new(0.3).unwrap()).unwrap());
        let self_term: f64 = r.self_term();
        let mut det = DcMmd::new(DcMmdConfig::new(4, 0.05, 2.0, r)).unwrap();
        let mut alarm = None;
        for _ in 0..40 {
            if let Some(a) = det.step(10.0).unwrap() {
                alarm = Some(a);
                break;
            }
        }
        let a = alarm.unwrap();
        // Within-block term is 1 and the cross term underflows to 0.
        let inc = (1.0 + self_term).sqrt() - 0.05;
        let blocks = (2.0 / inc).floor() as u64 + 1;
        assert_eq!(a.block_index, Some(blocks));
        assert_eq!(a.stopping_time, 4 * blocks);
        assert!((a.statistic - inc * blocks as f64).abs() < 1e-12);
        assert!(matches!(det.step(0.0), Err(Error::AlreadyAlarmed(_))));
    }

    #[test]
    fn rejects_bad_config_and_input() {
        let r = reference();
        assert!(DcMmd::new(DcMmdConfig::new(1, 0.05, 1.0, r.clone())).is_err());
        assert!(DcMmd::new(DcMmdConfig::new(5, -0.1, 1.0, r.clone())).is_err());
        assert!(DcMmd::new(DcMmdConfig::new(5, 0.1, 0.0, r.clone())).is_err());
        let mut d = DcMmd::new(DcMmdConfig::new(5, 0.1, 1.0, r)).unwrap();
        assert!(d.step(f64::INFINITY).is_err());
    }

    #[test]
    fn rolling_normalization_bypassed_for_first_blocks() {
        let r = reference();
        let mut cfg = DcMmdConfig::new(4, 0.0, 1e9, r.clone());
        cfg.normalization = Normalization::rolling_default();
        let mut norm = DcMmd::new(cfg).unwrap();
        let mut raw = DcMmd::new(DcMmdConfig::new(4, 0.0, 1e9, r)).unwrap();
        for i in 0..12 {
            let e = (i as f64).sin();
            norm.step(e).unwrap();
            raw.step(e).unwrap();
        }
        assert_eq!(norm.statistic(), raw.statistic());
        for i in 12..16 {
            let e = (i as f64).sin();
            norm.step(e).unwrap();
            raw.step(e).unwrap();
        }
        assert_ne!(norm.statistic(), raw.statistic());
    }

    proptest! {
        #[test]
        fn fixed_normalization_equals_scaled_threshold(
            xs in prop::collection::vec(-2.0f64..3.0, 10..200),
            var in 0.001f64..0.5,
            b in 0.05f64..1.0,
        ) {
            let r = reference();
            let eps = 1e-6;
            let scale = (var + eps).sqrt();
            let mut cfg = DcMmdConfig::new(5, 0.1, b, r.clone());
            cfg.normalization = Normalization::Fixed { variance: var, eps };
            let mut norm = DcMmd::new(cfg).unwrap();
            let mut raw = DcMmd::new(DcMmdConfig::new(5, 0.1, b * scale, r)).unwrap();
            for &x in &xs {
                let a = norm.step(x).unwrap().map(|a| a.stopping_time);
                let c = raw.step(x).unwrap().map(|a| a.stopping_time);
                // Skip near-ties where rounding in the rescaling decides.
                if (raw.statistic() - b * scale).abs() > 1e-9 {
                    prop_assert_eq!(a, c);
                }
                if a.is_some() || c.is_some() { break; }
                prop_assert!((norm.statistic() * scale - raw.statistic()).abs() < 1e-9);
            }
        }

        #[test]
        fn stopping_time_monotone_in_threshold(xs in prop::collection::vec(-1.0f64..3.0, 10..300), b in 0.01f64..1.0) {
            let r = reference();
            let stop = |thr: f64| {
                let mut d = DcMmd::new(DcMmdConfig::new(5, 0.05, thr, r.clone())).unwrap();
                for &x in &xs {
                    if let Some(a) = d.step(x).unwrap() {
                        prop_assert_eq!(a.stopping_time % 5, 0);
                        return Ok(a.stopping_time);
                    }
                    prop_assert!(d.statistic() >= 0.0);
                }
                Ok(u64::MAX)
            };
            prop_assert!(stop(b)? <= stop(b * 2.0)?);
        }
    }
}
