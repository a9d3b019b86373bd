//! Block sampling of the whole intensity path.
//!
//! The conditional law of the states combines a Gaussian prior with
//! tridiagonal precision and a product of per-state measurement terms. The
//! proposal is Gaussian at the conditional mode, with precision equal to the
//! negative Hessian there; a Metropolis-Hastings step makes draws exact.

pub mod tridiag;

use rand::Rng;

pub use tridiag::{Factor, FactoredGaussian, TridiagGaussian};

use crate::density::ExpMixCoeffs;
use crate::error::{Error, Result};
use crate::model::{DurationData, Dynamics, LatentPath, ModelParams, StateLayout};
use crate::splines::SplineBasis;

/// Gaussian prior of the free state coordinates in precision form.
///
/// Per day, `z = x - m(t)` is AR(1) with `rho_k = exp(-phi lag_k)` and
/// innovation variance `sigma^2 (1 - rho_k^2)`; days are independent.
pub fn state_prior(layout: &StateLayout, phi: f64, sigma: f64, delta: &[f64]) -> Result<TridiagGaussian> {
    let n = layout.n_states();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let s2 = sigma * sigma;
    for (d, day) in layout.days.iter().enumerate() {
        let base = layout.offsets[d];
        if day.times.is_empty() {
            continue;
        }
        diag[base] = 1.0 / s2;
        for (k, &lag) in day.lags.iter().enumerate() {
            let rho = (-phi * lag).exp();
            let var = -s2 * (-2.0 * phi * lag).exp_m1();
            if !(var > 0.0) {
                return Err(Error::Degenerate(format!(
                    "zero-variance state transition at lag {lag}"
                )));
            }
            diag[base + k] += rho * rho / var;
            diag[base + k + 1] = 1.0 / var;
            off[base + k] = -rho / var;
        }
    }
    let levels = layout.diurnal_levels(delta);
    let partial = TridiagGaussian::new(diag, off, vec![0.0; n])?;
    let covector = partial.mul(&levels);
    Ok(TridiagGaussian { covector, ..partial })
}

/// [`state_prior`] straight from data.
pub fn state_prior_for(
    p: &ModelParams,
    data: &DurationData,
    basis: &SplineBasis,
    dynamics: Dynamics,
) -> Result<TridiagGaussian> {
    let layout = StateLayout::new(data, basis, dynamics)?;
    state_prior(&layout, p.phi, p.sigma, &p.delta)
}

/// Sum of measurement log densities, one or more per state.
pub trait StateMeasurement {
    /// Returns the value and adds first derivatives to `grad` and negative
    /// second derivatives to `curv`.
    fn eval(&self, x: &[f64], grad: &mut [f64], curv: &mut [f64]) -> f64;

    fn value(&self, x: &[f64]) -> f64;
}

/// Measurement terms of the regular durations; cluster durations do not
/// depend on the states and are left out.
#[derive(Debug, Clone)]
pub struct RegularObservations {
    state: Vec<usize>,
    y: Vec<f64>,
    coeffs: ExpMixCoeffs,
    discrete: bool,
}

impl RegularObservations {
    /// `regular(d, i)` says whether observation `i` of day `d` is regular.
    pub fn new(
        layout: &StateLayout,
        data: &DurationData,
        regular: impl Fn(usize, usize) -> bool,
        coeffs: ExpMixCoeffs,
    ) -> Self {
        let mut state = Vec::with_capacity(data.n_durations());
        let mut y = Vec::with_capacity(data.n_durations());
        for (d, day) in data.days.iter().enumerate() {
            for (i, &v) in day.durations().iter().enumerate() {
                if regular(d, i) {
                    state.push(layout.state_of(d, i));
                    y.push(v);
                }
            }
        }
        Self {
            state,
            y,
            coeffs,
            discrete: data.discrete,
        }
    }

    pub fn from_path(layout: &StateLayout, data: &DurationData, path: &LatentPath, coeffs: ExpMixCoeffs) -> Self {
        Self::new(layout, data, |d, i| path.days[d].s[i] == 1, coeffs)
    }

    pub fn with_coeffs(&self, coeffs: ExpMixCoeffs) -> Self {
        Self {
            coeffs,
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn jet(&self, k: usize, x: f64, order: usize) -> crate::jet::Jet {
        if self.discrete {
            self.coeffs.regular_pmf_jet(self.y[k] as u64, x, order)
        } else {
            self.coeffs.regular_jet(self.y[k], x, order)
        }
    }
}

impl StateMeasurement for RegularObservations {
    fn eval(&self, x: &[f64], grad: &mut [f64], curv: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for (k, &s) in self.state.iter().enumerate() {
            let j = self.jet(k, x[s], 2);
            total += j[0];
            grad[s] += j[1];
            curv[s] -= j[2];
        }
        total
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.state
            .iter()
            .enumerate()
            .map(|(k, &s)| self.jet(k, x[s], 0)[0])
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Max-norm of the gradient at the returned mode, or the rounding error
    /// of each component when that is larger.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

/// Gaussian proposal centred at the conditional mode.
#[derive(Debug, Clone)]
pub struct StateProposal {
    pub gaussian: FactoredGaussian,
    pub iterations: usize,
}

impl StateProposal {
    pub fn mode(&self) -> &[f64] {
        &self.gaussian.mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.gaussian.sample(rng)
    }

    pub fn logpdf(&self, x: &[f64]) -> f64 {
        self.gaussian.logpdf(x)
    }
}

/// `-x' Omega x / 2 + c' x + sum psi`, the conditional log density up to a
/// constant.
pub fn conditional_value<M: StateMeasurement + ?Sized>(prior: &TridiagGaussian, meas: &M, x: &[f64]) -> f64 {
    let lin: f64 = prior.covector.iter().zip(x).map(|(c, v)| c * v).sum();
    -0.5 * prior.quad(x) + lin + meas.value(x)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Conditional log density in deviations from the prior mean, which keeps
/// the quadratic form free of cancellation when the precision is large.
struct Centered<'a, M: ?Sized> {
    prior: &'a TridiagGaussian,
    meas: &'a M,
    mean: Vec<f64>,
}

impl<M: StateMeasurement + ?Sized> Centered<'_, M> {
    fn deviation(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).map(|(a, m)| a - m).collect()
    }

    fn value(&self, x: &[f64]) -> f64 {
        -0.5 * self.prior.quad(&self.deviation(x)) + self.meas.value(x)
    }

    /// Value, gradient, negative Hessian diagonal and a bound on the
    /// rounding error of each gradient component.
    fn eval(&self, x: &[f64], grad: &mut [f64], curv: &mut [f64], noise: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        curv.iter_mut().for_each(|c| *c = 0.0);
        let value = self.meas.eval(x, grad, curv);
        let d = self.deviation(x);
        let omega_d = self.prior.mul(&d);
        let (diag, off) = (&self.prior.diag, &self.prior.off);
        let n = x.len();
        let mut quad = 0.0;
        for i in 0..n {
            let mut size = grad[i].abs() + (diag[i] * d[i]).abs();
            if i > 0 {
                size += (off[i - 1] * d[i - 1]).abs();
            }
            if i + 1 < n {
                size += (off[i] * d[i + 1]).abs();
            }
            noise[i] = 16.0 * f64::EPSILON * size;
            grad[i] -= omega_d[i];
            curv[i] += diag[i];
            quad += d[i] * omega_d[i];
        }
        value - 0.5 * quad
    }
}

/// Newton iterations on the conditional log density, then the Laplace
/// proposal at the mode.
pub fn build_proposal<M: StateMeasurement + ?Sized>(
    prior: &TridiagGaussian,
    meas: &M,
    start: Option<&[f64]>,
    cfg: NewtonConfig,
) -> Result<StateProposal> {
    let n = prior.len();
    let target = Centered {
        prior,
        meas,
        mean: prior.mean()?,
    };
    let mut x = match start {
        Some(s) if s.len() == n => s.to_vec(),
        Some(s) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.len(),
            })
        }
        None => target.mean.clone(),
    };
    let mut grad = vec![0.0; n];
    let mut curv = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut noise = vec![0.0; n];
    let mut iterations = 0;
    loop {
        let f0 = target.eval(&x, &mut grad, &mut curv, &mut noise);
        let gnorm = max_abs(&grad);
        if grad.iter().zip(&noise).all(|(g, e)| g.abs() < cfg.tol.max(*e)) {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                gradient: gnorm,
            });
        }
        iterations += 1;
        // Levenberg inflation until the Newton system is positive definite
        let mut damp = 0.0;
        let scale = 1.0 + max_abs(&curv);
        let factor = loop {
            let d: Vec<f64> = curv.iter().map(|c| c + damp).collect();
            match Factor::new(&d, &prior.off) {
                Ok(f) => break f,
                Err(_) if damp < 1e12 * scale => {
                    damp = if damp == 0.0 { 1e-6 * scale } else { damp * 10.0 };
                }
                Err(e) => return Err(e),
            }
        };
        let step = factor.solve(&grad);
        let slack = 1e-10 * (1.0 + f0.abs());
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            for i in 0..n {
                trial[i] = x[i] + t * step[i];
            }
            let f1 = target.value(&trial);
            if f1.is_finite() && f1 >= f0 - slack {
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            return Err(Error::NonConvergence {
                iterations,
                gradient: gnorm,
            });
        }
        std::mem::swap(&mut x, &mut trial);
    }
    // precision at the mode; positive definite without damping at a maximum
    let gaussian = FactoredGaussian::with_mean(x, curv, prior.off.clone())?;
    Ok(StateProposal {
        gaussian,
        iterations,
    })
}

/// Independence Metropolis-Hastings update of the states.
pub fn propose_and_accept<R: Rng + ?Sized>(
    current: &[f64],
    proposal: &StateProposal,
    log_target: impl Fn(&[f64]) -> f64,
    rng: &mut R,
) -> (Vec<f64>, bool) {
    let candidate = proposal.sample(rng);
    let log_ratio = log_target(&candidate) - log_target(current) + proposal.logpdf(current)
        - proposal.logpdf(&candidate);
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        (candidate, true)
    } else {
        (current.to_vec(), false)
    }
}
