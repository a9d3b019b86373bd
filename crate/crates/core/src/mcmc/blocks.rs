//! Closed-form pieces of the Gibbs blocks: conjugate posteriors, indicator
//! full conditionals and the transition-probability correction.

use nalgebra::{DMatrix, DVector};

use crate::density::{ClusterLaw, ExpMixCoeffs};
use crate::error::{Error, Result};
use crate::model::{indicator_stationary, ModelParams, StateLayout};
use crate::priors::{delta_prior, ClusterHyper, PriorHyper};

/// Gamma law of `tau` given `delta`: shape `(nu_bar + L - 1 + bias) / 2`,
/// rate `(s_bar + delta' D' D delta) / 2`.
pub fn tau_posterior(hyper: &PriorHyper, delta: &[f64], dof_bias: f64) -> (f64, f64) {
    let ssd: f64 = delta.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let dof = hyper.nu_bar + delta.len() as f64 - 1.0 + dof_bias;
    (0.5 * dof, 0.5 * (hyper.s_bar + ssd))
}

/// Precision and covector of `delta` given the states, `tau`, `phi` and
/// `sigma`.
///
/// The states are written as `v ~ N(W delta, I)`: the first state of a day
/// contributes `x / sigma` and every later one its standardized innovation.
pub fn delta_posterior(
    layout: &StateLayout,
    states: &[f64],
    phi: f64,
    sigma: f64,
    hyper: &PriorHyper,
    tau: f64,
    dim: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let prior = delta_prior(hyper, dim, tau)?;
    let mut precision = prior.precision;
    let mut covector = prior.covector;
    let mut row = DVector::zeros(dim);
    let add = |row: &DVector<f64>, v: f64, precision: &mut DMatrix<f64>, covector: &mut DVector<f64>| {
        precision.ger(1.0, row, row, 1.0);
        covector.axpy(v, row, 1.0);
    };
    for (d, day) in layout.days.iter().enumerate() {
        if day.times.is_empty() {
            continue;
        }
        let base = layout.offsets[d];
        row.fill(0.0);
        add_row(&mut row, &day.rows[0], 1.0 / sigma);
        add(&row, states[base] / sigma, &mut precision, &mut covector);
        for (k, &lag) in day.lags.iter().enumerate() {
            let rho = (-phi * lag).exp();
            let sd = (-sigma * sigma * (-2.0 * phi * lag).exp_m1()).sqrt();
            if !(sd > 0.0) {
                return Err(Error::Degenerate(format!("zero-variance transition at lag {lag}")));
            }
            row.fill(0.0);
            add_row(&mut row, &day.rows[k + 1], 1.0 / sd);
            add_row(&mut row, &day.rows[k], -rho / sd);
            let v = (states[base + k + 1] - rho * states[base + k]) / sd;
            add(&row, v, &mut precision, &mut covector);
        }
    }
    Ok((precision, covector))
}

fn add_row(target: &mut DVector<f64>, row: &crate::splines::BasisRow, scale: f64) {
    for (j, w) in row.weights.iter().enumerate() {
        if row.first + j < target.len() {
            target[row.first + j] += scale * w;
        }
    }
}

/// Unnormalized log probabilities of `s = 0` and `s = 1` for one duration.
///
/// `prev` is `None` for the first duration of a day, where the stationary
/// law replaces the transition; `next` is `None` for the last one.
pub fn indicator_log_weights(
    y: f64,
    x: f64,
    prev: Option<u8>,
    next: Option<u8>,
    p: &ModelParams,
    coeffs: &ExpMixCoeffs,
    cluster: &ClusterLaw,
    discrete: bool,
) -> Result<[f64; 2]> {
    let stationary = indicator_stationary(p.xi00, p.xi11)?;
    let mut out = [0.0; 2];
    for (j, slot) in out.iter_mut().enumerate() {
        let j = j as u8;
        let obs = if j == 0 {
            cluster.ln_density(y)?
        } else if discrete {
            coeffs.regular_ln_pmf(y, x)?
        } else {
            coeffs.regular_ln_pdf(y, x)?
        };
        let left = match prev {
            Some(s) => p.transition(s, j),
            None if j == 0 => stationary.0,
            None => stationary.1,
        };
        let right = next.map_or(1.0, |s| p.transition(j, s));
        *slot = obs + left.ln() + right.ln();
    }
    Ok(out)
}

/// Probability of `s = 0` from log weights.
pub fn prob_cluster(w: [f64; 2]) -> f64 {
    if w[0] == f64::NEG_INFINITY {
        return 0.0;
    }
    if w[1] == f64::NEG_INFINITY {
        return 1.0;
    }
    1.0 / (1.0 + (w[1] - w[0]).exp())
}

/// Transition counts `N[l][k]` over all days.
pub fn transition_counts(indicators: &[Vec<u8>]) -> [[u64; 2]; 2] {
    let mut n = [[0u64; 2]; 2];
    for day in indicators {
        for w in day.windows(2) {
            n[w[0] as usize][w[1] as usize] += 1;
        }
    }
    n
}

/// Beta proposal parameters for `xi00` and `xi11`, exact given the first
/// indicator of each day.
pub fn xi_proposal(counts: &[[u64; 2]; 2], hyper: &PriorHyper) -> ((f64, f64), (f64, f64)) {
    (
        (counts[0][0] as f64 + hyper.a0, counts[0][1] as f64 + hyper.b0),
        (counts[1][1] as f64 + hyper.a1, counts[1][0] as f64 + hyper.b1),
    )
}

/// Log acceptance ratio of a transition-probability proposal: the
/// day-initial stationary factors at the proposal over those at the
/// current value.
pub fn xi_log_acceptance(first: &[u8], current: (f64, f64), proposed: (f64, f64)) -> Result<f64> {
    let cur = indicator_stationary(current.0, current.1)?;
    let new = indicator_stationary(proposed.0, proposed.1)?;
    Ok(first
        .iter()
        .map(|&s| if s == 0 { (new.0 / cur.0).ln() } else { (new.1 / cur.1).ln() })
        .sum())
}

/// Posterior laws of `(lambda_1, lambda_2, pi)` given component
/// memberships: counts and sums of cluster durations per component.
pub fn cluster_posterior(
    hyper: &ClusterHyper,
    counts: [u64; 2],
    sums: [f64; 2],
) -> [(f64, f64); 3] {
    [
        (hyper.lambda1.0 + counts[0] as f64, hyper.lambda1.1 + sums[0]),
        (hyper.lambda2.0 + counts[1] as f64, hyper.lambda2.1 + sums[1]),
        (hyper.pi.0 + counts[0] as f64, hyper.pi.1 + counts[1] as f64),
    ]
}

/// Probability that a cluster duration `y` belongs to the first component.
pub fn component_prob(y: f64, lambda1: f64, lambda2: f64, pi: f64) -> f64 {
    let a = pi.ln() + lambda1.ln() - lambda1 * y;
    let b = (1.0 - pi).ln() + lambda2.ln() - lambda2 * y;
    1.0 / (1.0 + (b - a).exp())
}

/// Beta law of `zeta` given the numbers of cluster durations recorded as
/// 0 s and as 1 s.
pub fn zeta_posterior(hyper: &PriorHyper, zeros: u64, ones: u64) -> Result<(f64, f64)> {
    let (a, b) = hyper.zeta()?;
    Ok((a + zeros as f64, b + ones as f64))
}
