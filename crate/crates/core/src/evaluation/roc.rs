use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::ScenarioSpec;
use super::seeds::{run_seed, Purpose};
use crate::detectors::{run_to_alarm, DetectorConfig};
use crate::error::{invalid, Error, Result};
use crate::error_model::ErrorStream;

/// Scoring window in blocks; every detector in a comparison sees
/// `SCORE_WINDOW_BLOCKS * m` samples.
pub const SCORE_WINDOW_BLOCKS: u64 = 20;

fn check(id: &[f64], ood: &[f64]) -> Result<()> {
    if id.is_empty() || ood.is_empty() {
        return Err(invalid("score arrays must be non-empty"));
    }
    if id.iter().chain(ood).any(|s| s.is_nan()) {
        return Err(Error::NonFinite("score".into()));
    }
    Ok(())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// `P(s_ood > s_id) + P(s_ood = s_id) / 2` over all pairs.
pub fn auroc(id: &[f64], ood: &[f64]) -> Result<f64> {
    check(id, ood)?;
    let ids = sorted(id);
    let mut twice_wins = 0u128;
    for &s in ood {
        let below = ids.partition_point(|v| *v < s);
        let upto = ids.partition_point(|v| *v <= s);
        twice_wins += 2 * below as u128 + (upto - below) as u128;
    }
    Ok(twice_wins as f64 / (2.0 * id.len() as f64 * ood.len() as f64))
}

/// In-distribution false-positive rate at the largest threshold whose
/// out-of-distribution detection rate (`score >= threshold`) is at least `tpr`.
pub fn fpr_at_tpr(id: &[f64], ood: &[f64], tpr: f64) -> Result<f64> {
    check(id, ood)?;
    if !(tpr > 0.0 && tpr <= 1.0) {
        return Err(invalid(format!("target rate must lie in (0, 1], got {tpr}")));
    }
    let desc: Vec<f64> = sorted(ood).into_iter().rev().collect();
    let need = ((tpr * desc.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    let threshold = desc[need.min(desc.len()) - 1];
    let ids = sorted(id);
    let at_or_above = ids.len() - ids.partition_point(|v| *v < threshold);
    Ok(at_or_above as f64 / ids.len() as f64)
}

/// Window-maximum scores of change-free and changed-from-the-start runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub id: Vec<f64>,
    pub ood: Vec<f64>,
}

impl ScoreSet {
    /// Each score is the maximum statistic over the first `window` steps;
    /// the threshold of `config` is ignored. Block detectors need a window
    /// of at least one block.
    pub fn simulate(config: &DetectorConfig<f64>, scenario: &ScenarioSpec, n_runs: usize, window: u64, seed: u64) -> Result<Self> {
        if n_runs == 0 || window == 0 {
            return Err(invalid("scoring needs runs and a positive window"));
        }
        if let Some(m) = config.block_len() {
            if window < m as u64 {
                return Err(invalid(format!("window {window} is shorter than one block of {m}")));
            }
        }
        let open = config.with_threshold(f64::MAX);
        let score = |stream: ErrorStream| -> Result<f64> {
            let mut det = open.build()?;
            Ok(run_to_alarm(det.as_mut(), stream, window, false)?.max_statistic)
        };
        let id = (0..n_runs as u64)
            .into_par_iter()
            .map(|i| score(ErrorStream::stationary(&scenario.pre, run_seed(seed, Purpose::ScoreId, 0, i))))
            .collect::<Result<Vec<_>>>()?;
        let ood = (0..n_runs as u64)
            .into_par_iter()
            .map(|i| {
                let s = run_seed(seed, Purpose::ScoreOod, 0, i);
                score(ErrorStream::with_change(&scenario.pre, &scenario.post, 1, s))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { id, ood })
    }

    pub fn auroc(&self) -> Result<f64> {
        auroc(&self.id, &self.ood)
    }

    pub fn fpr95(&self) -> Result<f64> {
        fpr_at_tpr(&self.id, &self.ood, 0.95)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_auroc(id: &[f64], ood: &[f64]) -> f64 {
        let mut s = 0.0;
        for &o in ood {
            for &i in id {
                s += if o > i { 1.0 } else if o == i { 0.5 } else { 0.0 };
            }
        }
        s / (id.len() * ood.len()) as f64
    }

    fn brute_fpr(id: &[f64], ood: &[f64], tpr: f64) -> f64 {
        // Scan every candidate threshold, keep the largest meeting the rate.
        let mut best = f64::NEG_INFINITY;
        for &t in ood.iter().chain(id) {
            let rate = ood.iter().filter(|&&o| o >= t).count() as f64 / ood.len() as f64;
            if rate >= tpr && t > best {
                best = t;
            }
        }
        id.iter().filter(|&&i| i >= best).count() as f64 / id.len() as f64
    }

    #[test]
    fn examples() {
        assert_eq!(auroc(&[0.1, 0.4], &[0.2, 0.3]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.0, 1.0], &[2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(auroc(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap(), 0.5);
        assert_eq!(fpr_at_tpr(&[0.0, 1.0], &[2.0, 3.0], 0.95).unwrap(), 0.0);
        assert_eq!(fpr_at_tpr(&[0.1, 0.5, 0.7, 0.9], &[0.6], 0.95).unwrap(), 0.5);
        assert!(auroc(&[], &[1.0]).is_err());
        assert!(auroc(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn identical_distributions_fpr_near_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let id: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let ood: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let f = fpr_at_tpr(&id, &ood, 0.95).unwrap();
        assert!((f - 0.95).abs() < 0.01, "{f}");
        assert!((auroc(&id, &ood).unwrap() - 0.5).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn matches_pair_counting(
            id in prop::collection::vec(0u8..20, 1..300),
            ood in prop::collection::vec(0u8..25, 1..300),
        ) {
            // Small integer scores force many ties.
            let id: Vec<f64> = id.into_iter().map(f64::from).collect();
            let ood: Vec<f64> = ood.into_iter().map(f64::from).collect();
            prop_assert_eq!(auroc(&id, &ood).unwrap(), brute_auroc(&id, &ood));
            prop_assert_eq!(fpr_at_tpr(&id, &ood, 0.95).unwrap(), brute_fpr(&id, &ood, 0.95));
        }
    }

    #[test]
    fn pair_counting_at_max_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let id: Vec<f64> = (0..1000).map(|_| (rng.random::<f64>() * 50.0).floor()).collect();
        let ood: Vec<f64> = (0..1000).map(|_| (rng.random::<f64>() * 60.0).floor()).collect();
        assert_eq!(auroc(&id, &ood).unwrap(), brute_auroc(&id, &ood));
        assert_eq!(fpr_at_tpr(&id, &ood, 0.95).unwrap(), brute_fpr(&id, &ood, 0.95));
    }
}
