//! Parameter proposals: robust adaptive random walk during burn-in, then a
//! frozen multivariate Student t.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

fn normals<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Multivariate Student t (or Gaussian when `dof` is `None`) with a lower
/// Cholesky scale factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledT {
    pub mean: DVector<f64>,
    chol: DMatrix<f64>,
    pub dof: Option<f64>,
    ln_det_chol: f64,
}

impl ScaledT {
    pub fn new(mean: DVector<f64>, scale: DMatrix<f64>, dof: Option<f64>) -> Result<Self> {
        if scale.nrows() != mean.len() || scale.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: scale.nrows(),
            });
        }
        if let Some(nu) = dof {
            if !(nu > 0.0) {
                return Err(Error::InvalidParameter(format!("degrees of freedom {nu}")));
            }
        }
        let chol = scale
            .cholesky()
            .ok_or(Error::Factorization { index: 0 })?
            .l();
        let ln_det_chol = chol.diagonal().iter().map(|v| v.ln()).sum();
        Ok(Self {
            mean,
            chol,
            dof,
            ln_det_chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = normals(self.dim(), rng);
        let w = match self.dof {
            Some(nu) => {
                let c: f64 = ChiSquared::new(nu).expect("positive dof").sample(rng);
                (nu / c).sqrt()
            }
            None => 1.0,
        };
        &self.mean + &self.chol * z * w
    }

    pub fn logpdf(&self, x: &DVector<f64>) -> f64 {
        let k = self.dim() as f64;
        let u = self
            .chol
            .solve_lower_triangular(&(x - &self.mean))
            .expect("nonsingular factor");
        let q = u.norm_squared();
        let ln_pi = std::f64::consts::PI.ln();
        match self.dof {
            Some(nu) => {
                ln_gamma(0.5 * (nu + k)) - ln_gamma(0.5 * nu) - 0.5 * k * (nu.ln() + ln_pi)
                    - self.ln_det_chol
                    - 0.5 * (nu + k) * (q / nu).ln_1p()
            }
            None => -0.5 * k * (ln_pi + std::f64::consts::LN_2) - self.ln_det_chol - 0.5 * q,
        }
    }
}

/// Robust adaptive Metropolis: the random-walk factor `S` is updated after
/// every step so the acceptance rate approaches `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustAdaptive {
    factor: DMatrix<f64>,
    pub target: f64,
    /// Step sizes decay as `step^-decay`.
    pub decay: f64,
    step: u64,
}

impl RobustAdaptive {
    pub fn new(initial_scale: DMatrix<f64>, target: f64) -> Result<Self> {
        let factor = initial_scale
            .cholesky()
            .ok_or(Error::Factorization { index: 0 })?
            .l();
        Ok(Self {
            factor,
            target,
            decay: 2.0 / 3.0,
            step: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Proposal `current + S u` and the innovation `u`.
    pub fn propose<R: Rng + ?Sized>(&self, current: &DVector<f64>, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
        let u = normals(self.dim(), rng);
        (current + &self.factor * &u, u)
    }

    /// Rank-one update of `S S'` with the acceptance probability of the last
    /// proposal.
    pub fn adapt(&mut self, u: &DVector<f64>, accept_prob: f64) {
        self.step += 1;
        let eta = (self.dim() as f64 * (self.step as f64).powf(-self.decay)).min(1.0);
        let norm2 = u.norm_squared();
        if norm2 == 0.0 || !accept_prob.is_finite() {
            return;
        }
        let su = &self.factor * u;
        let coef = eta * (accept_prob.min(1.0) - self.target) / norm2;
        let updated = &self.factor * self.factor.transpose() + su.clone() * su.transpose() * coef;
        if let Some(c) = updated.cholesky() {
            self.factor = c.l();
        }
    }

    pub fn scale(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }
}

/// Sample mean and covariance (divisor `n - 1`) of row vectors.
pub fn moments(rows: &[DVector<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if rows.len() < 2 {
        return Err(Error::Degenerate(format!("{} draws for a covariance", rows.len())));
    }
    let dim = rows[0].len();
    let n = rows.len() as f64;
    let mean = rows.iter().fold(DVector::zeros(dim), |acc, r| acc + r) / n;
    let mut cov = DMatrix::zeros(dim, dim);
    for r in rows {
        let d = r - &mean;
        cov += &d * d.transpose();
    }
    Ok((mean, cov / (n - 1.0)))
}

/// How a parameter block is proposed.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamMove {
    RandomWalk(RobustAdaptive),
    Independent(ScaledT),
}

impl ParamMove {
    /// Returns the proposal and `ln q(current) - ln q(proposal)`.
    pub fn propose<R: Rng + ?Sized>(&self, current: &DVector<f64>, rng: &mut R) -> (DVector<f64>, f64, Option<DVector<f64>>) {
        match self {
            ParamMove::RandomWalk(rw) => {
                let (x, u) = rw.propose(current, rng);
                (x, 0.0, Some(u))
            }
            ParamMove::Independent(t) => {
                let x = t.sample(rng);
                let ratio = t.logpdf(current) - t.logpdf(&x);
                (x, ratio, None)
            }
        }
    }

    pub fn adapt(&mut self, u: Option<&DVector<f64>>, accept_prob: f64) {
        if let (ParamMove::RandomWalk(rw), Some(u)) = (self, u) {
            rw.adapt(u, accept_prob);
        }
    }
}
