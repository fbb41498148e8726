use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::passage::PassageProfile;
use super::scenario::ScenarioSpec;
use super::seeds::{run_seed, Purpose};
use crate::detectors::DetectorConfig;
use crate::error::{invalid, Error, Result};
use crate::error_model::{ErrorStream, HmmSpec, LatentMode};
use crate::scalar::compensated_sum;

/// Fewest change-free runs accepted by the MTFA estimator.
pub const MIN_MTFA_RUNS: usize = 50;
/// Largest tolerated fraction of pre-change alarms in a WADD cell.
pub const MAX_PRE_CHANGE_RATE: f64 = 0.5;

/// Monte-Carlo budget shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    /// Change-free runs for MTFA.
    pub n_runs: usize,
    /// Horizon of change-free runs; censored runs count as this value.
    pub max_len: u64,
    /// Runs per (changepoint, latent mode) cell for WADD.
    pub n_runs_per_cell: usize,
    /// Post-change horizon of WADD runs.
    pub max_delay: u64,
    pub seed: u64,
}

impl McSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs < MIN_MTFA_RUNS {
            return Err(invalid(format!("MTFA needs at least {MIN_MTFA_RUNS} runs, got {}", self.n_runs)));
        }
        if self.n_runs_per_cell == 0 || self.max_len == 0 || self.max_delay == 0 {
            return Err(invalid("run counts and horizons must be positive"));
        }
        Ok(())
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean time to false alarm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtfaEstimate {
    pub mtfa: f64,
    pub stderr: f64,
    pub censor_rate: f64,
    pub n_runs: usize,
}

impl MtfaEstimate {
    /// Fewer than half of the runs were censored.
    pub fn is_trustworthy(&self) -> bool {
        self.censor_rate < 0.5
    }
}

/// Change-free passage profiles; evaluates MTFA at any threshold up to `cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtfaProfiles {
    profiles: Vec<PassageProfile>,
    max_len: u64,
    cap: f64,
}

fn check_cap(b: f64, cap: f64) -> Result<()> {
    if b > cap {
        return Err(invalid(format!("threshold {b} lies above the simulated cap {cap}")));
    }
    Ok(())
}

impl MtfaProfiles {
    pub fn simulate(config: &DetectorConfig<f64>, pre: &HmmSpec, n_runs: usize, max_len: u64, cap: f64, seed: u64) -> Result<Self> {
        if n_runs < MIN_MTFA_RUNS {
            return Err(invalid(format!("MTFA needs at least {MIN_MTFA_RUNS} runs, got {n_runs}")));
        }
        if max_len == 0 {
            return Err(invalid("max_len must be >= 1"));
        }
        let profiles = (0..n_runs as u64)
            .into_par_iter()
            .map(|i| {
                let stream = ErrorStream::stationary(pre, run_seed(seed, Purpose::Mtfa, 0, i));
                PassageProfile::simulate(config, stream, max_len, cap)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { profiles, max_len, cap })
    }

    /// Profiles whose cap reaches MTFA `target`, doubling the cap from the
    /// threshold of `config` as needed; returns the calibration as well.
    #[allow(clippy::too_many_arguments)]
    pub fn calibrated(
        config: &DetectorConfig<f64>,
        pre: &HmmSpec,
        n_runs: usize,
        max_len: u64,
        target: f64,
        tol_rel: f64,
        seed: u64,
    ) -> Result<(Self, Calibration)> {
        if !(target > 0.0) || target > max_len as f64 {
            return Err(invalid(format!("target MTFA {target} must lie in (0, max_len]")));
        }
        let mut cap = config.threshold();
        for _ in 0..60 {
            let p = Self::simulate(config, pre, n_runs, max_len, cap, seed)?;
            let top = p.at(cap)?;
            if top.mtfa >= target * (1.0 - tol_rel) || top.censor_rate == 1.0 {
                let c = p.calibrate(target, tol_rel, (cap * 1e-9).min(1e-9), cap)?;
                return Ok((p, c));
            }
            cap *= 2.0;
        }
        Err(Error::Numerical(format!("no threshold reaches MTFA {target}")))
    }

    pub fn at(&self, b: f64) -> Result<MtfaEstimate> {
        check_cap(b, self.cap)?;
        let mut censored = 0usize;
        let times: Vec<f64> = self
            .profiles
            .iter()
            .map(|p| match p.stopping_time(b) {
                Some(t) => t as f64,
                None => {
                    censored += 1;
                    self.max_len as f64
                }
            })
            .collect();
        let (mtfa, stderr) = mean_and_stderr(&times);
        Ok(MtfaEstimate { mtfa, stderr, censor_rate: censored as f64 / times.len() as f64, n_runs: times.len() })
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn max_len(&self) -> u64 {
        self.max_len
    }

    /// Bisection for `b` with `|MTFA(b) - target| <= tol_rel * target`.
    pub fn calibrate(&self, target: f64, tol_rel: f64, b_lo: f64, b_hi: f64) -> Result<Calibration> {
        if !(target > 0.0) || !(tol_rel > 0.0) || !(b_lo > 0.0) || !(b_hi > b_lo) {
            return Err(invalid("calibration needs target > 0, tol > 0 and 0 < b_lo < b_hi"));
        }
        let close = |e: &MtfaEstimate| (e.mtfa - target).abs() <= tol_rel * target;
        let (mut lo, mut hi) = (b_lo, b_hi);
        let (e_lo, e_hi) = (self.at(lo)?, self.at(hi)?);
        if close(&e_lo) {
            return Ok(Calibration { b: lo, mtfa: e_lo, iterations: 0 });
        }
        if close(&e_hi) {
            return Ok(Calibration { b: hi, mtfa: e_hi, iterations: 0 });
        }
        if !(e_lo.mtfa < target && target < e_hi.mtfa) {
            return Err(Error::Bracketing { target, lo: e_lo.mtfa, hi: e_hi.mtfa });
        }
        for it in 1..=200 {
            let mid = 0.5 * (lo + hi);
            let e = self.at(mid)?;
            if close(&e) {
                return Ok(Calibration { b: mid, mtfa: e, iterations: it });
            }
            if e.mtfa < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        Err(Error::Numerical(format!(
            "MTFA jumps across {target} +/- {:.0}% near b = {lo}; use more runs",
            100.0 * tol_rel
        )))
    }
}

/// Threshold reached by calibration and its MTFA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub b: f64,
    pub mtfa: MtfaEstimate,
    pub iterations: usize,
}

/// MTFA of `config` on change-free streams from `pre`.
pub fn estimate_mtfa(config: &DetectorConfig<f64>, pre: &HmmSpec, n_runs: usize, max_len: u64, seed: u64) -> Result<MtfaEstimate> {
    let b = config.threshold();
    MtfaProfiles::simulate(config, pre, n_runs, max_len, b, seed)?.at(b)
}

/// Threshold with MTFA within `tol_rel` of `target`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_threshold(
    config: &DetectorConfig<f64>,
    pre: &HmmSpec,
    target: f64,
    tol_rel: f64,
    b_lo: f64,
    b_hi: f64,
    n_runs: usize,
    max_len: u64,
    seed: u64,
) -> Result<f64> {
    let p = MtfaProfiles::simulate(config, pre, n_runs, max_len, b_hi, seed)?;
    Ok(p.calibrate(target, tol_rel, b_lo, b_hi)?.b)
}

/// Delay statistics of one (changepoint, latent mode) conditioning cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellDelay {
    pub changepoint: u64,
    /// Latent mode at `changepoint - 1`.
    pub mode: LatentMode,
    pub mean_delay: f64,
    pub stderr: f64,
    /// Runs alarming at or after the changepoint.
    pub n_used: usize,
    /// Runs discarded for alarming before the changepoint.
    pub n_pre_change: usize,
    /// Used runs that reached the post-change horizon without alarm.
    pub n_censored: usize,
}

/// Worst-case average detection delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaddEstimate {
    pub wadd: f64,
    /// Standard error of the worst cell.
    pub stderr: f64,
    pub worst_cell: usize,
    pub cells: Vec<CellDelay>,
    pub pre_change_rate: f64,
    pub censor_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CellProfiles {
    changepoint: u64,
    mode: LatentMode,
    profiles: Vec<PassageProfile>,
}

/// Passage profiles of runs with a change; evaluates WADD at any threshold
/// up to `cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaddProfiles {
    cells: Vec<CellProfiles>,
    max_delay: u64,
    cap: f64,
}

impl WaddProfiles {
    pub fn simulate(
        config: &DetectorConfig<f64>,
        scenario: &ScenarioSpec,
        n_runs_per_cell: usize,
        max_delay: u64,
        cap: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_runs_per_cell == 0 || max_delay == 0 {
            return Err(invalid("WADD needs at least one run per cell and a positive horizon"));
        }
        let mut cells = Vec::new();
        for (ci, &cp) in scenario.changepoint_grid.iter().enumerate() {
            for mode in LatentMode::ALL {
                let cell = (2 * ci + mode.index()) as u64;
                let profiles = (0..n_runs_per_cell as u64)
                    .into_par_iter()
                    .map(|i| {
                        let s = run_seed(seed, Purpose::Wadd, cell, i);
                        let stream = ErrorStream::conditioned(&scenario.pre, &scenario.post, cp, mode, s);
                        PassageProfile::simulate(config, stream, cp - 1 + max_delay, cap)
                    })
                    .collect::<Result<Vec<_>>>()?;
                cells.push(CellProfiles { changepoint: cp, mode, profiles });
            }
        }
        Ok(Self { cells, max_delay, cap })
    }

    /// WADD at threshold `b`: the largest cell mean of `tau - tau*` over
    /// runs with `tau >= tau*`.
    pub fn at(&self, b: f64) -> Result<WaddEstimate> {
        check_cap(b, self.cap)?;
        let mut cells = Vec::with_capacity(self.cells.len());
        let (mut total, mut pre_total, mut cens_total) = (0usize, 0usize, 0usize);
        for c in &self.cells {
            let mut delays = Vec::with_capacity(c.profiles.len());
            let (mut pre, mut cens) = (0usize, 0usize);
            for p in &c.profiles {
                match p.stopping_time(b) {
                    Some(t) if t < c.changepoint => pre += 1,
                    Some(t) => delays.push((t - c.changepoint) as f64),
                    None => {
                        cens += 1;
                        delays.push(self.max_delay as f64);
                    }
                }
            }
            let rate = pre as f64 / c.profiles.len() as f64;
            if rate > MAX_PRE_CHANGE_RATE {
                return Err(Error::PreChangeAlarms { changepoint: c.changepoint, rate });
            }
            let (mean_delay, stderr) = mean_and_stderr(&delays);
            total += c.profiles.len();
            pre_total += pre;
            cens_total += cens;
            cells.push(CellDelay {
                changepoint: c.changepoint,
                mode: c.mode,
                mean_delay,
                stderr,
                n_used: delays.len(),
                n_pre_change: pre,
                n_censored: cens,
            });
        }
        let worst_cell = (0..cells.len())
            .max_by(|&i, &j| cells[i].mean_delay.total_cmp(&cells[j].mean_delay))
            .expect("grid is non-empty");
        let used = total - pre_total;
        Ok(WaddEstimate {
            wadd: cells[worst_cell].mean_delay,
            stderr: cells[worst_cell].stderr,
            worst_cell,
            pre_change_rate: pre_total as f64 / total as f64,
            censor_rate: if used > 0 { cens_total as f64 / used as f64 } else { 0.0 },
            cells,
        })
    }
}

/// WADD of `config` (at its own threshold) on `scenario`.
pub fn estimate_wadd(config: &DetectorConfig<f64>, scenario: &ScenarioSpec, n_runs_per_cell: usize, max_delay: u64, seed: u64) -> Result<WaddEstimate> {
    let b = config.threshold();
    WaddProfiles::simulate(config, scenario, n_runs_per_cell, max_delay, b, seed)?.at(b)
}

/// Both headline metrics at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub b: f64,
    pub mtfa: MtfaEstimate,
    pub wadd: WaddEstimate,
}

/// One threshold of a delay/false-alarm trade-off curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub b: f64,
    pub mtfa: f64,
    pub wadd: f64,
    pub mtfa_stderr: f64,
    pub wadd_stderr: f64,
    pub censor_rate: f64,
}

/// Profiles for both metrics of one detector on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mtfa: MtfaProfiles,
    pub wadd: WaddProfiles,
}

impl Evaluation {
    /// Profiles valid for thresholds up to `cap`.
    pub fn simulate(config: &DetectorConfig<f64>, scenario: &ScenarioSpec, s: &McSettings, cap: f64) -> Result<Self> {
        s.validate()?;
        Ok(Self {
            mtfa: MtfaProfiles::simulate(config, &scenario.pre, s.n_runs, s.max_len, cap, s.seed)?,
            wadd: WaddProfiles::simulate(config, scenario, s.n_runs_per_cell, s.max_delay, cap, s.seed)?,
        })
    }

    /// Calibrates to MTFA `target` first, then simulates delays at that threshold.
    pub fn calibrated(config: &DetectorConfig<f64>, scenario: &ScenarioSpec, s: &McSettings, target: f64, tol_rel: f64) -> Result<(Self, Calibration)> {
        s.validate()?;
        let (mtfa, c) = MtfaProfiles::calibrated(config, &scenario.pre, s.n_runs, s.max_len, target, tol_rel, s.seed)?;
        let wadd = WaddProfiles::simulate(config, scenario, s.n_runs_per_cell, s.max_delay, c.b, s.seed)?;
        Ok((Self { mtfa, wadd }, c))
    }

    pub fn at(&self, b: f64) -> Result<RunMetrics> {
        Ok(RunMetrics { b, mtfa: self.mtfa.at(b)?, wadd: self.wadd.at(b)? })
    }

    pub fn frontier(&self, b_grid: &[f64]) -> Result<Vec<FrontierPoint>> {
        check_grid(b_grid)?;
        b_grid
            .iter()
            .map(|&b| {
                let m = self.at(b)?;
                Ok(FrontierPoint {
                    b,
                    mtfa: m.mtfa.mtfa,
                    wadd: m.wadd.wadd,
                    mtfa_stderr: m.mtfa.stderr,
                    wadd_stderr: m.wadd.stderr,
                    censor_rate: m.mtfa.censor_rate,
                })
            })
            .collect()
    }
}

fn check_grid(b_grid: &[f64]) -> Result<()> {
    if b_grid.len() < 3 {
        return Err(invalid(format!("frontier needs at least 3 thresholds, got {}", b_grid.len())));
    }
    if b_grid.iter().any(|b| !(*b > 0.0) || !b.is_finite()) || b_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("thresholds must be positive, finite and strictly increasing"));
    }
    Ok(())
}

/// Delay/false-alarm frontier of `config` over `b_grid`.
pub fn frontier(config: &DetectorConfig<f64>, scenario: &ScenarioSpec, b_grid: &[f64], settings: &McSettings) -> Result<Vec<FrontierPoint>> {
    check_grid(b_grid)?;
    Evaluation::simulate(config, scenario, settings, b_grid[b_grid.len() - 1])?.frontier(b_grid)
}

/// WADD and its standard error at MTFA `target`, interpolated linearly in
/// `ln MTFA` between the two bracketing frontier points.
pub fn wadd_at_mtfa(points: &[FrontierPoint], target: f64) -> Option<(f64, f64)> {
    let lt = target.ln();
    for w in points.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        if p.mtfa == target {
            return Some((p.wadd, p.wadd_stderr));
        }
        if p.mtfa < target && target <= q.mtfa {
            let s = (lt - p.mtfa.ln()) / (q.mtfa.ln() - p.mtfa.ln());
            let lerp = |a: f64, b: f64| a + s * (b - a);
            return Some((lerp(p.wadd, q.wadd), lerp(p.wadd_stderr, q.wadd_stderr)));
        }
    }
    points.last().filter(|p| p.mtfa == target).map(|p| (p.wadd, p.wadd_stderr))
}
