//! Command implementations. Each writes its outputs and a resolved config
//! echo into the run directory and returns the paths it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{DetectorSpec, ExperimentConfig, Resolved, ScenarioSource, ThresholdSetting};
use super::files::{read_errors, write_errors, write_frontier, write_json, write_modes, write_trace, AlarmRecord};
use crate::detectors::{run_to_alarm, DetectorConfig};
use crate::error::{invalid, Result};
use crate::error_model::{
    fit_two_state_hmm, map_mode_assignment, posterior_high, second_order_chain, spectral_gap, ErrorStream, HmmFit,
    LatentMode,
};
use crate::evaluation::seeds::{run_seed, Purpose};
use crate::evaluation::{
    estimate_discrepancy, measure_latency, Evaluation, FrontierPoint, MtfaProfiles, PerfReport, RunMetrics,
    ScenarioSpec, ScoreSet, WaddProfiles, GUARD_SAMPLES, SCORE_WINDOW_BLOCKS,
};
use crate::scenarios::{heavy_tail_suite, unknown_postchange_suite};
use crate::theory::{estimate_r, fit_mtfa_exponent, BoundReport, DeltaReading, ExponentFit, MtfaPoint};

/// Relative tolerance of every threshold calibration.
pub const CALIBRATION_TOL: f64 = 0.05;

const CONFIG_ECHO: &str = "config.resolved.json";

fn prepare(out: &Path, resolved: &Resolved) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let echo = out.join(CONFIG_ECHO);
    write_json(&echo, resolved)?;
    Ok(vec![echo])
}

/// Writes a stationary error stream, or one that switches to the post-change
/// model at `changepoint`.
pub fn simulate(resolved: &Resolved, length: u64, with_modes: bool, changepoint: Option<u64>) -> Result<Vec<PathBuf>> {
    if length == 0 {
        return Err(invalid("length must be >= 1"));
    }
    let out = &resolved.source.out;
    let mut written = prepare(out, resolved)?;
    let sc = &resolved.scenario;
    let seed = run_seed(resolved.source.seed, Purpose::Export, 0, 0);
    let mut stream = match changepoint {
        Some(cp) => ErrorStream::with_change(&sc.pre, &sc.post, cp.max(1), seed),
        None => ErrorStream::stationary(&sc.pre, seed),
    };
    let (modes, errors): (Vec<LatentMode>, Vec<f64>) = (0..length).map(|_| stream.next_sample()).unzip();
    let path = out.join("errors.csv");
    write_errors(&path, &errors, with_modes.then_some(&modes[..]))?;
    written.push(path);
    Ok(written)
}

/// Fits the two-state model to a log; writes the spec, the fit trace and
/// per-step mode assignments.
pub fn fit(input: &Path, out: &Path, max_iters: usize, tol: f64) -> Result<Vec<PathBuf>> {
    let log = read_errors(input)?;
    let fit: HmmFit = fit_two_state_hmm(&log.e, max_iters, tol)?;
    let modes = map_mode_assignment(&log.e, &fit.spec)?;
    let post_h = posterior_high(&log.e, &fit.spec)?;
    fs::create_dir_all(out)?;
    let paths = [out.join("hmm.json"), out.join("fit.json"), out.join("modes.csv")];
    write_json(&paths[0], &fit.spec)?;
    write_json(&paths[1], &fit)?;
    write_modes(&paths[2], &log, &modes, &post_h)?;
    Ok(paths.to_vec())
}

fn threshold_for(resolved: &Resolved, config: &DetectorConfig<f64>) -> Result<f64> {
    match resolved.threshold() {
        ThresholdSetting::Value(b) => Ok(b),
        ThresholdSetting::Calibrate(gamma) => {
            let s = &resolved.settings;
            let pre = &resolved.scenario.pre;
            Ok(MtfaProfiles::calibrated(config, pre, s.n_runs, s.max_len, gamma, CALIBRATION_TOL, s.seed)?.1.b)
        }
    }
}

/// Streams a log through every configured detector; writes a statistic
/// trace and an alarm record per detector.
pub fn detect(resolved: &Resolved, input: &Path) -> Result<Vec<PathBuf>> {
    let log = read_errors(input)?;
    let out = &resolved.source.out;
    let mut written = prepare(out, resolved)?;
    for d in &resolved.detectors {
        let b = threshold_for(resolved, &d.config)?;
        let mut det = d.config.with_threshold(b).build()?;
        let outcome = run_to_alarm(det.as_mut(), log.e.iter().copied(), log.e.len() as u64, true)?;
        let trace = out.join(format!("trace_{}.csv", d.name));
        let alarm = out.join(format!("alarm_{}.json", d.name));
        write_trace(&trace, &outcome.trace)?;
        write_json(&alarm, &AlarmRecord::from_outcome(&outcome))?;
        written.extend([trace, alarm]);
    }
    Ok(written)
}

/// Per-detector result record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultReport {
    pub scenario: String,
    pub detector: String,
    pub b: f64,
    pub mtfa: f64,
    pub mtfa_stderr: f64,
    pub wadd: f64,
    /// Standard error of `wadd`.
    pub stderr: f64,
    pub censor_rate: f64,
    pub pre_change_rate: f64,
    pub auroc: Option<f64>,
    pub fpr95: Option<f64>,
}

fn metrics(resolved: &Resolved, scenario: &ScenarioSpec, config: &DetectorConfig<f64>) -> Result<RunMetrics> {
    let s = &resolved.settings;
    match resolved.threshold() {
        ThresholdSetting::Value(b) => Evaluation::simulate(config, scenario, s, b)?.at(b),
        ThresholdSetting::Calibrate(gamma) => {
            let (ev, c) = Evaluation::calibrated(config, scenario, s, gamma, CALIBRATION_TOL)?;
            ev.at(c.b)
        }
    }
}

fn evaluate(resolved: &Resolved, scenario: &ScenarioSpec, name: &str, config: &DetectorConfig<f64>) -> Result<ResultReport> {
    let r = metrics(resolved, scenario, config)?;
    let window = SCORE_WINDOW_BLOCKS * resolved.source.m as u64;
    let scores = ScoreSet::simulate(config, scenario, resolved.settings.n_runs, window, resolved.settings.seed)?;
    Ok(ResultReport {
        scenario: scenario.label.clone(),
        detector: name.to_string(),
        b: r.b,
        mtfa: r.mtfa.mtfa,
        mtfa_stderr: r.mtfa.stderr,
        wadd: r.wadd.wadd,
        stderr: r.wadd.stderr,
        censor_rate: r.mtfa.censor_rate,
        pre_change_rate: r.wadd.pre_change_rate,
        auroc: Some(scores.auroc()?),
        fpr95: Some(scores.fpr95()?),
    })
}

/// Delay bound for a DC-MMD detector at threshold `b`.
pub fn bound_report(scenario: &ScenarioSpec, config: &DetectorConfig<f64>, b: f64, seed: u64) -> Result<Option<BoundReport>> {
    let DetectorConfig::DcMmd(c) = config else { return Ok(None) };
    let d = estimate_discrepancy(&scenario.pre, &scenario.post, *c.reference.kernel(), GUARD_SAMPLES, seed)?;
    let gap = spectral_gap(&second_order_chain(scenario.pre.transition()))?;
    let r = estimate_r(&c.reference);
    BoundReport::new(c.m, b, c.zeta, gap, r, d - c.zeta, DeltaReading::Lambda2).map(Some)
}

/// Calibrates (or evaluates at the fixed `b`) every detector and writes
/// `report.json`, plus `bound.json` when DC-MMD is configured.
pub fn calibrate(resolved: &Resolved) -> Result<Vec<PathBuf>> {
    let out = &resolved.source.out;
    let mut written = prepare(out, resolved)?;
    let sc = &resolved.scenario;
    let mut reports = Vec::new();
    for d in &resolved.detectors {
        let rep = evaluate(resolved, sc, &d.name, &d.config)?;
        if let Some(bound) = bound_report(sc, &d.config, rep.b, resolved.settings.seed)? {
            let p = out.join("bound.json");
            write_json(&p, &bound)?;
            written.push(p);
        }
        reports.push(rep);
    }
    let p = out.join("report.json");
    write_json(&p, &reports)?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
struct FrontierSummary {
    detector: String,
    points: Vec<FrontierPoint>,
    /// Least-squares fit of `ln MTFA` on `b`.
    exponent_fit: Option<ExponentFit>,
    /// Targets dropped because most runs alarmed before the change.
    skipped_targets: Vec<f64>,
}

fn mtfa_points(points: &[FrontierPoint]) -> Vec<MtfaPoint> {
    points.iter().map(|p| MtfaPoint { b: p.b, mtfa: p.mtfa, censor_rate: p.censor_rate }).collect()
}

/// Frontier points at each target, and the targets whose WADD could not be
/// estimated because too many runs alarmed before the change.
fn frontier_points(
    resolved: &Resolved,
    config: &DetectorConfig<f64>,
    targets: &[f64],
) -> Result<(Vec<FrontierPoint>, Vec<f64>)> {
    let s = &resolved.settings;
    let sc = &resolved.scenario;
    let top = targets[targets.len() - 1];
    let (mtfa, _) = MtfaProfiles::calibrated(config, &sc.pre, s.n_runs, s.max_len, top, CALIBRATION_TOL, s.seed)?;
    let bs = targets
        .iter()
        .map(|&g| Ok(mtfa.calibrate(g, CALIBRATION_TOL, 1e-9_f64.min(mtfa.cap() * 1e-9), mtfa.cap())?.b))
        .collect::<Result<Vec<f64>>>()?;
    let cap = bs.iter().copied().fold(f64::MIN, f64::max);
    let wadd = WaddProfiles::simulate(config, sc, s.n_runs_per_cell, s.max_delay, cap, s.seed)?;
    let (mut points, mut skipped) = (Vec::new(), Vec::new());
    let mut last_err = None;
    for (&b, &g) in bs.iter().zip(targets) {
        let w = match wadd.at(b) {
            Ok(w) => w,
            Err(e @ crate::Error::PreChangeAlarms { .. }) => {
                skipped.push(g);
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let m = mtfa.at(b)?;
        points.push(FrontierPoint {
            b,
            mtfa: m.mtfa,
            wadd: w.wadd,
            mtfa_stderr: m.stderr,
            wadd_stderr: w.stderr,
            censor_rate: m.censor_rate,
        });
    }
    match last_err {
        Some(e) if points.is_empty() => Err(e),
        _ => Ok((points, skipped)),
    }
}

fn sorted_targets(resolved: &Resolved) -> Vec<f64> {
    let mut targets = resolved.source.targets();
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    targets
}

/// Sweeps the configured MTFA targets for every detector; writes
/// `frontier_<detector>.csv` and `frontier.json`.
pub fn frontier(resolved: &Resolved) -> Result<Vec<PathBuf>> {
    let out = &resolved.source.out;
    let mut written = prepare(out, resolved)?;
    let targets = sorted_targets(resolved);
    let mut summaries = Vec::new();
    for d in &resolved.detectors {
        let (points, skipped_targets) = frontier_points(resolved, &d.config, &targets)?;
        let p = out.join(format!("frontier_{}.csv", d.name));
        write_frontier(&p, &points)?;
        written.push(p);
        summaries.push(FrontierSummary {
            detector: d.name.clone(),
            exponent_fit: fit_mtfa_exponent(&mtfa_points(&points)).ok(),
            points,
            skipped_targets,
        });
    }
    let p = out.join("frontier.json");
    write_json(&p, &summaries)?;
    written.push(p);
    Ok(written)
}

/// Experiment suites run by [`bench`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// DC-MMD against baselines that do not know the post-change law.
    UnknownPost,
    /// Configured detectors on Gaussian, Laplace and Student-t emissions.
    HeavyTail,
    /// Delay bound and MTFA growth of DC-MMD.
    Bound,
}

impl std::str::FromStr for Suite {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unknown_post" => Ok(Self::UnknownPost),
            "heavy_tail" => Ok(Self::HeavyTail),
            "bound" => Ok(Self::Bound),
            _ => Err(invalid(format!("unknown suite `{s}` (expected unknown_post, heavy_tail or bound)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Degradation {
    detector: String,
    family: String,
    /// `WADD(family) / WADD(gaussian) - 1`.
    relative: f64,
}

#[derive(Debug, Clone, Serialize)]
struct BenchReport {
    suite: String,
    results: Vec<ResultReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    degradation: Vec<Degradation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<BoundReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    frontier: Vec<FrontierPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    skipped_targets: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exponent_fit: Option<ExponentFit>,
    /// Per-step timing of every detector, percentiles included.
    timing: Vec<PerfReport>,
}

const BENCH_TIMING_LENGTHS: [u64; 3] = [1_000, 10_000, 100_000];

/// Runs one experiment suite and writes `bench.json`.
pub fn bench(resolved: &Resolved, suite: Suite) -> Result<Vec<PathBuf>> {
    let out = &resolved.source.out;
    let mut written = prepare(out, resolved)?;
    let sc = &resolved.scenario;
    let seed = resolved.settings.seed;
    let mut report = BenchReport {
        suite: format!("{suite:?}"),
        results: Vec::new(),
        degradation: Vec::new(),
        bound: None,
        frontier: Vec::new(),
        skipped_targets: Vec::new(),
        exponent_fit: None,
        timing: Vec::new(),
    };
    let mut timed: Vec<DetectorConfig<f64>> = Vec::new();
    match suite {
        Suite::UnknownPost => {
            let s = unknown_postchange_suite(sc, &resolved.source.dcmmd_setup(), seed)?;
            for d in &s.detectors {
                report.results.push(evaluate(resolved, &s.scenario, &d.name, &d.config)?);
                timed.push(d.config.clone());
            }
        }
        Suite::HeavyTail => {
            let members = heavy_tail_suite(sc)?;
            for member in &members {
                let src = ExperimentConfig { scenario: ScenarioSource::Inline(member.clone()), ..resolved.source.clone() };
                let r = src.resolve()?;
                for d in &r.detectors {
                    report.results.push(evaluate(&r, member, &d.name, &d.config)?);
                }
                if timed.is_empty() {
                    timed = r.detectors.iter().map(|d| d.config.clone()).collect();
                }
            }
            let n = resolved.detectors.len();
            for (k, member) in members.iter().enumerate().skip(1) {
                for i in 0..n {
                    let (g, f) = (&report.results[i], &report.results[k * n + i]);
                    report.degradation.push(Degradation {
                        detector: f.detector.clone(),
                        family: member.label.rsplit('/').next().unwrap_or_default().to_string(),
                        relative: f.wadd / g.wadd - 1.0,
                    });
                }
            }
        }
        Suite::Bound => {
            let d = resolved
                .detectors
                .iter()
                .find(|d| matches!(d.config, DetectorConfig::DcMmd(_)))
                .ok_or_else(|| invalid("the bound suite needs a dc_mmd detector"))?;
            let rep = evaluate(resolved, sc, &d.name, &d.config)?;
            report.bound = bound_report(sc, &d.config, rep.b, seed)?;
            (report.frontier, report.skipped_targets) = frontier_points(resolved, &d.config, &sorted_targets(resolved))?;
            report.exponent_fit = fit_mtfa_exponent(&mtfa_points(&report.frontier)).ok();
            report.results.push(rep);
            timed.push(d.config.clone());
        }
    }
    for c in &timed {
        report.timing.push(measure_latency(c, &sc.pre, &BENCH_TIMING_LENGTHS, 2, seed)?);
    }
    let p = out.join("bench.json");
    write_json(&p, &report)?;
    written.push(p);
    Ok(written)
}

/// Default stream lengths of the latency regression.
pub const PERF_LENGTHS: [u64; 3] = [10_000, 100_000, 1_000_000];

/// Regresses per-step latency on stream length for every detector; writes
/// `perf.json`.
pub fn perf(resolved: &Resolved, lengths: &[u64], reps: usize) -> Result<Vec<PathBuf>> {
    let out = &resolved.source.out;
    let mut written = prepare(out, resolved)?;
    let reports = resolved
        .detectors
        .iter()
        .map(|d| measure_latency(&d.config, &resolved.scenario.pre, lengths, reps, resolved.settings.seed))
        .collect::<Result<Vec<_>>>()?;
    let p = out.join("perf.json");
    write_json(&p, &reports)?;
    written.push(p);
    Ok(written)
}

/// Detector kinds accepted in configs, by name.
pub fn detector_kinds() -> [&'static str; 7] {
    [
        DetectorSpec::DcMmd.name(),
        DetectorSpec::GaussCusum.name(),
        DetectorSpec::GCusumMisspecified.name(),
        DetectorSpec::RobustCusum { kappa: 2.0 }.name(),
        DetectorSpec::GmmCusum.name(),
        DetectorSpec::GmmCusumSurrogate { kappa: 2.0 }.name(),
        DetectorSpec::Nll.name(),
    ]
}
