use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::seeds::{run_seed, Purpose};
use crate::detectors::DetectorConfig;
use crate::error::{invalid, Error, Result};
use crate::error_model::{ErrorStream, HmmSpec};

/// Mean per-step time of one timed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub length: u64,
    pub ns_per_step: f64,
}

/// Regression of per-step latency on stream length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub detector: String,
    pub samples: Vec<LatencySample>,
    /// Nanoseconds per step per additional step of stream length.
    pub slope: f64,
    pub slope_ci95: [f64; 2],
    pub intercept: f64,
    pub mean_ns_per_step: f64,
    /// `m` times the mean per-step time for block detectors.
    pub ns_per_block: Option<f64>,
    /// Percentiles (50, 90, 99) of mean per-step time across runs.
    pub percentiles_ns: [f64; 3],
}

impl PerfReport {
    /// The 95% interval of the slope contains zero.
    pub fn slope_indistinguishable_from_zero(&self) -> bool {
        self.slope_ci95[0] <= 0.0 && 0.0 <= self.slope_ci95[1]
    }
}

/// Times `config` on stationary streams of every length in `lengths`,
/// `reps` times each, with lengths interleaved across repetitions.
///
/// Errors are generated before timing starts, so only detector updates
/// are measured.
pub fn measure_latency(config: &DetectorConfig<f64>, pre: &HmmSpec, lengths: &[u64], reps: usize, seed: u64) -> Result<PerfReport> {
    if lengths.len() < 2 || reps == 0 || lengths.contains(&0) {
        return Err(invalid("need at least two positive lengths and one repetition"));
    }
    if lengths.len() * reps < 3 {
        return Err(invalid("need at least three timed runs"));
    }
    let longest = *lengths.iter().max().unwrap() as usize;
    let errors: Vec<f64> = ErrorStream::stationary(pre, run_seed(seed, Purpose::Timing, 0, 0)).take(longest).collect();
    let open = config.with_threshold(f64::MAX);

    // Warm-up pass over the shortest length.
    let warm = *lengths.iter().min().unwrap() as usize;
    let mut det = open.build()?;
    for &e in &errors[..warm] {
        black_box(det.step(e)?);
    }

    let mut samples = Vec::with_capacity(lengths.len() * reps);
    for _ in 0..reps {
        for &len in lengths {
            let mut det = open.build()?;
            let start = Instant::now();
            for &e in &errors[..len as usize] {
                black_box(det.step(black_box(e))?);
            }
            let dt = start.elapsed().as_nanos() as f64;
            samples.push(LatencySample { length: len, ns_per_step: dt / len as f64 });
        }
    }

    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.length as f64).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.ns_per_step).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for s in &samples {
        let dx = s.length as f64 - mx;
        sxx += dx * dx;
        sxy += dx * (s.ns_per_step - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = samples.iter().map(|s| (s.ns_per_step - intercept - slope * s.length as f64).powi(2)).sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(0.975);

    let mut per_step: Vec<f64> = samples.iter().map(|s| s.ns_per_step).collect();
    per_step.sort_by(f64::total_cmp);
    let pct = |q: f64| per_step[((q * (per_step.len() - 1) as f64).round()) as usize];

    Ok(PerfReport {
        detector: config.label().to_string(),
        slope,
        slope_ci95: [slope - t * se, slope + t * se],
        intercept,
        mean_ns_per_step: my,
        ns_per_block: config.block_len().map(|m| my * m as f64),
        percentiles_ns: [pct(0.5), pct(0.9), pct(0.99)],
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{Gaussian, GaussianMixture};
    use crate::error_model::TransitionMatrix;

    #[test]
    fn report_shape() {
        let pre = HmmSpec::gaussian(TransitionMatrix::symmetric(0.3).unwrap(), 0.0, 0.5, 0.3).unwrap();
        let nll = DetectorConfig::NllThreshold {
            density: GaussianMixture::single(Gaussian::new(0.0, 1.0).unwrap()),
            threshold: 1.0,
        };
        let r = measure_latency(&nll, &pre, &[1_000, 5_000], 3, 1).unwrap();
        assert_eq!(r.samples.len(), 6);
        assert!(r.slope_ci95[0] <= r.slope && r.slope <= r.slope_ci95[1]);
        assert!(r.ns_per_block.is_none());
        assert!(r.percentiles_ns[0] <= r.percentiles_ns[2]);
        assert!(measure_latency(&nll, &pre, &[1_000], 3, 1).is_err());
    }
}
