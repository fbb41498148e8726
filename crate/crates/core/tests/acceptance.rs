//! End-to-end acceptance checks, one test per criterion.
//!
//! Each test prints a single `criterion N: PASS|FAIL ...` line. Tests hold a
//! shared lock so that timings are not disturbed by concurrent simulation.

use std::sync::{Mutex, MutexGuard};

use dcmmd::detectors::DetectorConfig;
use dcmmd::error_model::{
    sample_path, second_order_chain, spectral_gap, stationary_distribution, HmmSpec, LatentMode, TransitionMatrix,
};
use dcmmd::evaluation::{
    estimate_discrepancy, measure_latency, DcMmdSetup, Evaluation, McSettings, MtfaProfiles, OffsetRule, RunMetrics,
    ScenarioSpec, ScoreSet, WaddProfiles, SCORE_WINDOW_BLOCKS,
};
use dcmmd::kernel_mmd::{mmd, mmd_squared, BandwidthRule, Block, RbfKernel, ReferenceSet, SecondOrderSample};
use dcmmd::scenarios::{
    gaussian_cusum_known, gmm_cusum_surrogate, heavy_tail_suite, nll_detector, preset, registry,
    unknown_postchange_suite, ShiftKind, ROBUST_KAPPA,
};
use dcmmd::theory::{estimate_r, fit_mtfa_exponent, BoundReport, DeltaReading, MtfaPoint, WaddBound};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static LOCK: Mutex<()> = Mutex::new(());

fn lock() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

const Z95: f64 = 1.959_963_984_540_054;
const Z99_ONE_SIDED: f64 = 2.326_347_874_040_841;

fn report(n: usize, pass: bool, detail: String) -> bool {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn setup(m: usize, bandwidth: f64, margin: f64) -> DcMmdSetup {
    DcMmdSetup {
        m,
        bandwidth: BandwidthRule::Fixed(bandwidth),
        n_ref: 500,
        offset: OffsetRule::Auto { margin },
        offset_blocks: 1_000,
        ..Default::default()
    }
}

fn dc_config(s: &DcMmdSetup, pre: &HmmSpec, seed: u64) -> DetectorConfig<f64> {
    DetectorConfig::DcMmd(s.build(pre, seed).unwrap().config)
}

fn settings(gamma: f64, runs: usize, seed: u64) -> McSettings {
    McSettings {
        n_runs: runs,
        max_len: (8.0 * gamma) as u64,
        n_runs_per_cell: runs,
        max_delay: (5.0 * gamma) as u64,
        seed,
    }
}

fn at_target(config: &DetectorConfig<f64>, scenario: &ScenarioSpec, s: &McSettings, gamma: f64) -> RunMetrics {
    let (ev, c) = Evaluation::calibrated(config, scenario, s, gamma, 0.05).unwrap();
    ev.at(c.b).unwrap()
}

fn interval(r: &RunMetrics) -> (f64, f64) {
    (r.wadd.wadd - Z95 * r.wadd.stderr, r.wadd.wadd + Z95 * r.wadd.stderr)
}

fn brute_mmd_squared(block: &[SecondOrderSample<f64>], reference: &[SecondOrderSample<f64>], sigma: f64) -> f64 {
    let k = |x: &SecondOrderSample<f64>, y: &SecondOrderSample<f64>| {
        let d = (x.prev() - y.prev()).powi(2) + (x.cur() - y.cur()).powi(2);
        (-d / (2.0 * sigma * sigma)).exp()
    };
    let mean = |a: &[SecondOrderSample<f64>], b: &[SecondOrderSample<f64>]| {
        let mut s = 0.0;
        for x in a {
            for y in b {
                s += k(x, y);
            }
        }
        s / (a.len() * b.len()) as f64
    };
    (mean(block, block) + mean(reference, reference) - 2.0 * mean(block, reference)).max(0.0)
}

#[test]
fn criterion_01_mmd_matches_double_sum() {
    let _g = lock();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_sq: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let nb = rng.random_range(2..=400usize);
        let nr = rng.random_range(2..=400usize);
        let shift = rng.random_range(-1.0..1.0);
        let errors: Vec<f64> = (0..=nb).map(|_| rng.random_range(-2.0..2.0) + shift).collect();
        let refs: Vec<SecondOrderSample<f64>> =
            (0..nr).map(|_| SecondOrderSample::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
        let sigma = rng.random_range(0.05..5.0);
        let reference = ReferenceSet::new(refs.clone(), RbfKernel::new(sigma).unwrap()).unwrap();
        let block = Block::from_errors(&errors).unwrap();
        let oracle = brute_mmd_squared(block.samples(), &refs, sigma);
        worst_sq = worst_sq.max((mmd_squared(&block, &reference).unwrap() - oracle).abs());
        worst = worst.max((mmd(&block, &reference).unwrap() - oracle.sqrt()).abs());
    }
    let pass = worst_sq <= 1e-12 && worst <= 1e-12;
    assert!(report(1, pass, format!("max |dD^2| = {worst_sq:.2e}, max |dD| = {worst:.2e} over 200 instances")));
}

#[test]
fn criterion_02_chain_frequencies_and_gap() {
    let _g = lock();
    let mut worst_freq: f64 = 0.0;
    for (i, (a, b)) in [(0.15, 0.15), (0.1, 0.3), (0.91, 0.91), (0.05, 0.6)].into_iter().enumerate() {
        let t = TransitionMatrix::from_switching(a, b).unwrap();
        let spec = HmmSpec::gaussian(t, 0.0, 1.0, 0.3).unwrap();
        let path = sample_path(&spec, 1_000_000, 7 + i as u64, None).unwrap();
        let low = path.modes.iter().filter(|&&z| z == LatentMode::L).count() as f64 / path.modes.len() as f64;
        let pi = stationary_distribution(&t);
        worst_freq = worst_freq.max((low - pi[0]).abs());
    }
    let mut worst_gap: f64 = 0.0;
    for a in [0.01, 0.15, 0.32, 0.5, 0.55, 0.87, 0.99] {
        for b in [0.01, 0.2, 0.5, 0.7, 0.99] {
            let t = TransitionMatrix::from_switching(a, b).unwrap();
            let g = spectral_gap(&second_order_chain(&t)).unwrap();
            worst_gap = worst_gap.max((g.gap - (1.0 - (1.0 - a - b).abs())).abs());
        }
    }
    let pass = worst_freq <= 0.005 && worst_gap <= 1e-10;
    assert!(report(2, pass, format!("max frequency error {worst_freq:.4}, max gap error {worst_gap:.2e}")));
}

#[test]
fn criterion_03_delay_bound_holds() {
    let _g = lock();
    let (m, b) = (50, 2.0);
    let mut lines = Vec::new();
    let mut pass = true;
    for name in ["highway_stop_and_go", "mixed_on_ramp_merge", "mixed_signalised_intersection"] {
        let sc = registry()
            .preset_with_shift(name, &ShiftKind::Emission { delta_mu: 3.0, sigma_scale: 1.0 })
            .unwrap()
            .with_grid(ScenarioSpec::default_grid(m))
            .unwrap();
        let s = DcMmdSetup { threshold: b, ..setup(m, 0.8, 0.05) };
        let c = s.build(&sc.pre, 3).unwrap().config;
        let d = estimate_discrepancy(&sc.pre, &sc.post, *c.reference.kernel(), 2_000, 9).unwrap();
        let gap = spectral_gap(&second_order_chain(sc.pre.transition())).unwrap();
        let rep = BoundReport::new(m, b, c.zeta, gap, estimate_r(&c.reference), d - c.zeta, DeltaReading::Lambda2)
            .unwrap();
        let w = WaddProfiles::simulate(&DetectorConfig::DcMmd(c), &sc, 500, 20_000, b, 5).unwrap().at(b).unwrap();
        let upper = w.wadd + Z99_ONE_SIDED * w.stderr;
        let ok = match rep.bound {
            WaddBound::Finite(bound) => rep.d_hat > rep.a && upper <= bound,
            WaddBound::Vacuous => false,
        };
        pass &= ok;
        lines.push(format!(
            "{name}: d={:.3} a={:.3} wadd99={upper:.1} bound={:?}",
            rep.d_hat, rep.a, rep.bound.value().unwrap_or(f64::NAN)
        ));
    }
    assert!(report(3, pass, lines.join("; ")));
}

#[test]
fn criterion_04_mtfa_grows_exponentially() {
    let _g = lock();
    let pre = preset("highway_car_following").unwrap().pre;
    let c = dc_config(&setup(10, 4.0, 0.05), &pre, 3);
    let grid = [0.03, 0.06, 0.09, 0.12, 0.15];
    let p = MtfaProfiles::simulate(&c, &pre, 300, 50_000, grid[4], 21).unwrap();
    let points: Vec<MtfaPoint> = grid
        .iter()
        .map(|&b| {
            let e = p.at(b).unwrap();
            MtfaPoint { b, mtfa: e.mtfa, censor_rate: e.censor_rate }
        })
        .collect();
    let fit = fit_mtfa_exponent(&points).unwrap();
    let pass = fit.q > 0.0 && fit.r_squared >= 0.9;
    let mtfas: Vec<String> = points.iter().map(|p| format!("{:.0}", p.mtfa)).collect();
    assert!(report(4, pass, format!("slope {:.2}, R^2 {:.4}, MTFA [{}]", fit.q, fit.r_squared, mtfas.join(", "))));
}

#[test]
fn criterion_05_unknown_post_ordering() {
    let _g = lock();
    let (m, gamma) = (5, 5_000.0);
    let base = registry()
        .preset_with_shift("highway_car_following", &ShiftKind::Emission { delta_mu: 0.5, sigma_scale: 1.0 })
        .unwrap()
        .with_grid(ScenarioSpec::default_grid(m))
        .unwrap();
    let suite = unknown_postchange_suite(&base, &setup(m, 4.0, 0.1), 1).unwrap();
    let s = settings(gamma, 300, 7);
    let r: Vec<(String, RunMetrics)> =
        suite.detectors.iter().map(|d| (d.name.clone(), at_target(&d.config, &suite.scenario, &s, gamma))).collect();
    let get = |n: &str| interval(&r.iter().find(|(k, _)| k == n).unwrap().1);
    let (dc, robust, mis, nll) = (get("dc_mmd"), get("robust_cusum"), get("g_cusum_misspecified"), get("nll"));
    let matched = r.iter().all(|(_, x)| (x.mtfa.mtfa / gamma - 1.0).abs() <= 0.1);
    let pass = matched && dc.1 < mis.0 && robust.1 < mis.0 && mis.1 < nll.0;
    let detail: Vec<String> = r
        .iter()
        .map(|(n, x)| format!("{n}={:.1}+-{:.1} (MTFA {:.0})", x.wadd.wadd, Z95 * x.wadd.stderr, x.mtfa.mtfa))
        .collect();
    assert!(report(5, pass, detail.join(", ")));
}

#[test]
fn criterion_06_heavy_tail_degradation() {
    let _g = lock();
    let (m, gamma) = (10, 1_000.0);
    let base = registry()
        .preset_with_shift("urban_pedestrian_zone", &ShiftKind::Emission { delta_mu: 0.3, sigma_scale: 1.5 })
        .unwrap()
        .with_grid(ScenarioSpec::default_grid(m))
        .unwrap();
    let [gauss, _, student] = heavy_tail_suite(&base).unwrap();
    let s = settings(gamma, 500, 11);
    let sp = setup(m, 4.0, 0.05);
    let wadd = |sc: &ScenarioSpec| {
        let dc = at_target(&dc_config(&sp, &sc.pre, 3), sc, &s, gamma).wadd.wadd;
        let gc = at_target(&gaussian_cusum_known(&sc.pre, &sc.post, 1.0).unwrap(), sc, &s, gamma).wadd.wadd;
        (dc, gc)
    };
    let (dc_g, gc_g) = wadd(&gauss);
    let (dc_t, gc_t) = wadd(&student);
    let (dc_deg, gc_deg) = (dc_t / dc_g - 1.0, gc_t / gc_g - 1.0);
    let pass = dc_deg < gc_deg && dc_deg <= 0.5 * gc_deg;
    assert!(report(
        6,
        pass,
        format!(
            "dc_mmd {dc_g:.1} -> {dc_t:.1} ({:+.0}%), g_cusum {gc_g:.1} -> {gc_t:.1} ({:+.0}%)",
            100.0 * dc_deg,
            100.0 * gc_deg
        )
    ));
}

#[test]
fn criterion_07_transition_shift_dominance() {
    let _g = lock();
    let (m, gamma) = (25, 1_000.0);
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, p) in [("highway_car_following", 0.85), ("highway_stop_and_go", 0.9)] {
        let sc = registry()
            .preset_with_shift(name, &ShiftKind::Transition { p })
            .unwrap()
            .with_grid(ScenarioSpec::default_grid(m))
            .unwrap();
        let s = settings(gamma, 300, 13);
        let dc = at_target(&dc_config(&setup(m, 0.5, 0.0), &sc.pre, 3), &sc, &s, gamma);
        let gmm = at_target(&gmm_cusum_surrogate(&sc.pre, ROBUST_KAPPA, 1.0).unwrap(), &sc, &s, gamma);
        let gain = 1.0 - dc.wadd.wadd / gmm.wadd.wadd;
        pass &= gain >= 0.1;
        lines.push(format!("{name}: dc_mmd {:.1} vs gmm_cusum {:.1} ({:.0}% lower)", dc.wadd.wadd, gmm.wadd.wadd, 100.0 * gain));
    }
    assert!(report(7, pass, lines.join("; ")));
}

#[test]
fn criterion_08_auroc() {
    let _g = lock();
    let m = 10;
    let sc = preset("urban_roundabout").unwrap().with_grid(ScenarioSpec::default_grid(m)).unwrap();
    let window = SCORE_WINDOW_BLOCKS * m as u64;
    let dc = ScoreSet::simulate(&dc_config(&setup(m, 0.8, 0.0), &sc.pre, 3), &sc, 500, window, 5).unwrap();
    let nll = ScoreSet::simulate(&nll_detector(&sc.pre, 1.0).unwrap(), &sc, 500, window, 5).unwrap();
    let (a_dc, a_nll) = (dc.auroc().unwrap(), nll.auroc().unwrap());
    let pass = a_dc >= 0.9 && a_nll <= a_dc;
    assert!(report(
        8,
        pass,
        format!("AUROC dc_mmd {a_dc:.3} (FPR95 {:.3}), nll {a_nll:.3} (FPR95 {:.3})", dc.fpr95().unwrap(), nll.fpr95().unwrap())
    ));
}

#[test]
fn criterion_09_constant_step_cost() {
    let _g = lock();
    let pre = preset("highway_car_following").unwrap().pre;
    let s = DcMmdSetup { n_ref: 2_000, ref_len: 20_000, ..setup(50, 0.8, 0.0) };
    let c = dc_config(&s, &pre, 3);
    let rep = measure_latency(&c, &pre, &[10_000, 100_000, 1_000_000], 3, 17).unwrap();
    let pass = rep.slope_indistinguishable_from_zero() && rep.mean_ns_per_step < 10_000.0;
    assert!(report(
        9,
        pass,
        format!(
            "{:.0} ns/step, slope {:.2e} ns/step^2, 95% CI [{:.2e}, {:.2e}]",
            rep.mean_ns_per_step, rep.slope, rep.slope_ci95[0], rep.slope_ci95[1]
        )
    ));
}

#[test]
fn criterion_10_bit_exact_reruns() {
    let _g = lock();
    let m = 10;
    let sc = registry()
        .preset_with_shift("highway_stop_and_go", &ShiftKind::Emission { delta_mu: 0.5, sigma_scale: 1.2 })
        .unwrap()
        .with_grid(ScenarioSpec::default_grid(m))
        .unwrap();
    let run = || {
        let dc = dc_config(&setup(m, 4.0, 0.05), &sc.pre, 3);
        let s = settings(300.0, 100, 19);
        let mut out = Vec::new();
        for c in [dc.clone(), gaussian_cusum_known(&sc.pre, &sc.post, 1.0).unwrap()] {
            let (ev, cal) = Evaluation::calibrated(&c, &sc, &s, 300.0, 0.05).unwrap();
            out.push(serde_json::to_string(&(cal.b, ev.at(cal.b).unwrap())).unwrap());
        }
        let scores = ScoreSet::simulate(&dc, &sc, 100, SCORE_WINDOW_BLOCKS * m as u64, 23).unwrap();
        out.push(serde_json::to_string(&scores).unwrap());
        out
    };
    let (first, second) = (run(), run());
    let pass = first == second;
    assert!(report(10, pass, format!("{} aggregate groups compared", first.len())));
}
