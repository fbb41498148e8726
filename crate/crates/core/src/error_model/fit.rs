//! Baum-Welch fitting of the two-state Gaussian HMM and posterior mode
//! assignment.

use serde::{Deserialize, Serialize};

use super::chain::TransitionMatrix;
use super::{EmissionDist, HmmSpec, LatentMode};
use crate::error::{Error, Result};

/// Smallest admissible fitted standard deviation.
pub const MIN_FITTED_STD: f64 = 1e-6;
const MIN_FIT_LEN: usize = 100;

/// Outcome of an EM fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmmFit {
    pub spec: HmmSpec,
    /// Log-likelihood after each E-step, starting from the initial guess.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    /// `false` when `max_iters` was reached before the tolerance.
    pub converged: bool,
}

struct Posterior {
    gamma: Vec<[f64; 2]>,
    xi_sum: [[f64; 2]; 2],
    log_likelihood: f64,
}

/// Scaled forward-backward pass.
fn forward_backward(errors: &[f64], init: [f64; 2], trans: [[f64; 2]; 2], emissions: [&EmissionDist; 2]) -> Result<Posterior> {
    let n = errors.len();
    // Emission likelihoods, rescaled per step by their maximum for stability.
    let mut lik = Vec::with_capacity(n);
    let mut log_offset = 0.0;
    for &e in errors {
        let l0 = emissions[0].ln_pdf(e);
        let l1 = emissions[1].ln_pdf(e);
        let mx = l0.max(l1);
        if !mx.is_finite() {
            return Err(Error::Numerical(format!("emission likelihood underflow at value {e}")));
        }
        log_offset += mx;
        lik.push([(l0 - mx).exp(), (l1 - mx).exp()]);
    }

    let mut alpha = vec![[0.0; 2]; n];
    let mut scale = vec![0.0; n];
    for t in 0..n {
        let prior = if t == 0 {
            init
        } else {
            let a = alpha[t - 1];
            [a[0] * trans[0][0] + a[1] * trans[1][0], a[0] * trans[0][1] + a[1] * trans[1][1]]
        };
        let v = [prior[0] * lik[t][0], prior[1] * lik[t][1]];
        let c = v[0] + v[1];
        if !(c > 0.0) {
            return Err(Error::Numerical(format!("forward pass degenerated at step {t}")));
        }
        scale[t] = c;
        alpha[t] = [v[0] / c, v[1] / c];
    }

    let mut beta = vec![[1.0; 2]; n];
    for t in (0..n - 1).rev() {
        let b = beta[t + 1];
        let l = lik[t + 1];
        let c = scale[t + 1];
        for i in 0..2 {
            beta[t][i] = (trans[i][0] * l[0] * b[0] + trans[i][1] * l[1] * b[1]) / c;
        }
    }

    let mut gamma = Vec::with_capacity(n);
    for t in 0..n {
        let g = [alpha[t][0] * beta[t][0], alpha[t][1] * beta[t][1]];
        let s = g[0] + g[1];
        gamma.push([g[0] / s, g[1] / s]);
    }

    let mut xi_sum = [[0.0; 2]; 2];
    for t in 0..n - 1 {
        let c = scale[t + 1];
        for i in 0..2 {
            for j in 0..2 {
                xi_sum[i][j] += alpha[t][i] * trans[i][j] * lik[t + 1][j] * beta[t + 1][j] / c;
            }
        }
    }

    let log_likelihood = scale.iter().map(|c| c.ln()).sum::<f64>() + log_offset;
    Ok(Posterior { gamma, xi_sum, log_likelihood })
}

fn validate_series(errors: &[f64], min_len: usize) -> Result<()> {
    if errors.len() < min_len {
        return Err(Error::Degenerate(format!("need at least {min_len} observations, got {}", errors.len())));
    }
    if let Some(i) = errors.iter().position(|e| !e.is_finite()) {
        return Err(Error::NonFinite(format!("observation {i} is {}", errors[i])));
    }
    Ok(())
}

fn initial_guess(errors: &[f64]) -> Result<(f64, f64, f64)> {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let (lo, hi): (Vec<f64>, Vec<f64>) = errors.iter().partition(|&&e| e < median);
    if lo.is_empty() || hi.is_empty() {
        return Err(Error::Degenerate("sequence has no spread around its median".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ml, mh) = (mean(&lo), mean(&hi));
    let ss: f64 = lo.iter().map(|e| (e - ml).powi(2)).sum::<f64>() + hi.iter().map(|e| (e - mh).powi(2)).sum::<f64>();
    let pooled = (ss / errors.len() as f64).sqrt();
    if !(pooled >= MIN_FITTED_STD) {
        return Err(Error::Degenerate(format!("pooled standard deviation {pooled:e} is below {MIN_FITTED_STD:e}")));
    }
    Ok((ml, mh, pooled))
}

/// Maximum-likelihood two-state Gaussian HMM via expectation-maximization.
///
/// Means start from a split at the sample median, both standard deviations
/// from the pooled within-split value, and the transition matrix from
/// `[[0.9, 0.1], [0.1, 0.9]]`.
pub fn fit_two_state_hmm(errors: &[f64], max_iters: usize, tol: f64) -> Result<HmmFit> {
    validate_series(errors, MIN_FIT_LEN)?;
    let (ml, mh, s0) = initial_guess(errors)?;
    let mut means = [ml, mh];
    let mut stds = [s0, s0];
    let mut trans = [[0.9, 0.1], [0.1, 0.9]];
    let mut init = [0.5, 0.5];
    let mut lls: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let el = EmissionDist::gaussian(means[0], stds[0]);
        let eh = EmissionDist::gaussian(means[1], stds[1]);
        let post = forward_backward(errors, init, trans, [&el, &eh])?;
        if let Some(&prev) = lls.last() {
            if (post.log_likelihood - prev).abs() <= tol * (1.0 + prev.abs()) {
                lls.push(post.log_likelihood);
                converged = true;
                break;
            }
        }
        lls.push(post.log_likelihood);
        if iterations == max_iters {
            break;
        }
        iterations += 1;

        // M-step.
        init = post.gamma[0];
        for (i, row) in trans.iter_mut().enumerate() {
            let tot = post.xi_sum[i][0] + post.xi_sum[i][1];
            if tot > 0.0 {
                *row = [post.xi_sum[i][0] / tot, post.xi_sum[i][1] / tot];
            }
        }
        for k in 0..2 {
            let w: f64 = post.gamma.iter().map(|g| g[k]).sum();
            if !(w > 0.0) {
                return Err(Error::Degenerate(format!("mode {k} lost all responsibility")));
            }
            let mu = post.gamma.iter().zip(errors).map(|(g, e)| g[k] * e).sum::<f64>() / w;
            let var = post.gamma.iter().zip(errors).map(|(g, e)| g[k] * (e - mu).powi(2)).sum::<f64>() / w;
            means[k] = mu;
            stds[k] = var.sqrt();
            if !(stds[k] >= MIN_FITTED_STD) {
                return Err(Error::Degenerate(format!("fitted std of mode {k} collapsed to {:e}", stds[k])));
            }
        }
    }

    // Label so that mean(L) <= mean(H).
    if means[0] > means[1] {
        means.swap(0, 1);
        stds.swap(0, 1);
        trans = [[trans[1][1], trans[1][0]], [trans[0][1], trans[0][0]]];
    }
    let floor = |p: f64| p.clamp(1e-12, 1.0 - 1e-12);
    let p_lh = floor(trans[0][1]);
    let p_hl = floor(trans[1][0]);
    let spec = HmmSpec::new(
        TransitionMatrix::from_switching(p_lh, p_hl)?,
        EmissionDist::gaussian(means[0], stds[0]),
        EmissionDist::gaussian(means[1], stds[1]),
    )?;
    Ok(HmmFit { spec, log_likelihoods: lls, iterations, converged })
}

/// Posterior mode probabilities `P(Z_t = H | e_1..e_n)` under `spec`, with
/// the chain started from its stationary distribution.
pub fn posterior_high(errors: &[f64], spec: &HmmSpec) -> Result<Vec<f64>> {
    validate_series(errors, 1)?;
    let post = forward_backward(
        errors,
        spec.stationary(),
        spec.transition().rows(),
        [spec.emission(LatentMode::L), spec.emission(LatentMode::H)],
    )?;
    Ok(post.gamma.iter().map(|g| g[1]).collect())
}

/// Per-step maximum a posteriori mode; ties go to `L`.
pub fn map_mode_assignment(errors: &[f64], spec: &HmmSpec) -> Result<Vec<LatentMode>> {
    Ok(posterior_high(errors, spec)?
        .into_iter()
        .map(|p| if p > 0.5 { LatentMode::H } else { LatentMode::L })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_model::sample_path;

    fn truth() -> HmmSpec {
        HmmSpec::gaussian(TransitionMatrix::symmetric(0.1).unwrap(), 0.0, 2.0, 0.3).unwrap()
    }

    #[test]
    fn recovers_known_parameters() {
        let path = sample_path(&truth(), 10_000, 21, None).unwrap();
        let fit = fit_two_state_hmm(&path.errors, 500, 1e-10).unwrap();
        let l = fit.spec.emission(LatentMode::L).mean();
        let h = fit.spec.emission(LatentMode::H).mean();
        assert!(((h - l) - 2.0).abs() <= 0.2, "gap {}", h - l);
        assert!((fit.spec.transition().rows()[0][0] - 0.9).abs() <= 0.05);
        assert!(fit.converged);
    }

    #[test]
    fn log_likelihood_monotone() {
        let spec = HmmSpec::gaussian(TransitionMatrix::from_switching(0.2, 0.4).unwrap(), 0.0, 0.8, 0.5).unwrap();
        let path = sample_path(&spec, 3_000, 5, None).unwrap();
        let fit = fit_two_state_hmm(&path.errors, 200, 0.0).unwrap();
        for w in fit.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
        assert!(!fit.converged || fit.iterations < 200);
    }

    #[test]
    fn constant_sequence_is_degenerate() {
        let errs = vec![1.5; 500];
        assert!(matches!(fit_two_state_hmm(&errs, 50, 1e-8), Err(Error::Degenerate(_))));
    }

    #[test]
    fn short_or_nonfinite_input_rejected() {
        assert!(fit_two_state_hmm(&[0.0; 10], 10, 1e-6).is_err());
        let mut e: Vec<f64> = (0..200).map(|i| i as f64).collect();
        e[3] = f64::NAN;
        assert!(matches!(fit_two_state_hmm(&e, 10, 1e-6), Err(Error::NonFinite(_))));
    }

    #[test]
    fn map_assignment_cases() {
        let spec = truth();
        let modes = map_mode_assignment(&[-3.0, -3.0, -3.0], &spec).unwrap();
        assert!(modes.iter().all(|m| *m == LatentMode::L));

        // Well separated: 2.0 / 0.3 > 4 standard deviations.
        let path = sample_path(&spec, 5_000, 9, None).unwrap();
        let est = map_mode_assignment(&path.errors, &spec).unwrap();
        assert_eq!(est.len(), path.errors.len());
        let acc = est.iter().zip(&path.modes).filter(|(a, b)| a == b).count() as f64 / est.len() as f64;
        assert!(acc >= 0.95, "accuracy {acc}");

        // Identical emissions: assignment follows the prior.
        let same = HmmSpec::gaussian(TransitionMatrix::from_switching(0.1, 0.3).unwrap(), 1.0, 1.0, 0.5).unwrap();
        let modes = map_mode_assignment(&path.errors[..50], &same).unwrap();
        assert!(modes.iter().all(|m| *m == LatentMode::L));
        let same_h = HmmSpec::gaussian(TransitionMatrix::from_switching(0.3, 0.1).unwrap(), 1.0, 1.0, 0.5).unwrap();
        let modes = map_mode_assignment(&path.errors[..50], &same_h).unwrap();
        assert!(modes.iter().all(|m| *m == LatentMode::H));
    }
}
