//! Gaussians with tridiagonal precision: O(n) factorization, solves,
//! sampling and log densities.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `N(Omega^-1 c, Omega^-1)` with `Omega` symmetric tridiagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagGaussian {
    pub diag: Vec<f64>,
    /// `off[i] = Omega[i, i + 1]`.
    pub off: Vec<f64>,
    pub covector: Vec<f64>,
}

impl TridiagGaussian {
    pub fn new(diag: Vec<f64>, off: Vec<f64>, covector: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if covector.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: covector.len(),
            });
        }
        if off.len() + 1 != n.max(1) {
            return Err(Error::DimensionMismatch {
                expected: n.saturating_sub(1),
                got: off.len(),
            });
        }
        Ok(Self {
            diag,
            off,
            covector,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `Omega x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n.saturating_sub(1) {
            out[i] += self.off[i] * x[i + 1];
            out[i + 1] += self.off[i] * x[i];
        }
        out
    }

    /// `x' Omega x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let mut q: f64 = self.diag.iter().zip(x).map(|(d, v)| d * v * v).sum();
        for i in 0..self.len().saturating_sub(1) {
            q += 2.0 * self.off[i] * x[i] * x[i + 1];
        }
        q
    }

    pub fn factor(&self) -> Result<Factor> {
        Factor::new(&self.diag, &self.off)
    }

    pub fn mean(&self) -> Result<Vec<f64>> {
        Ok(self.factor()?.solve(&self.covector))
    }

    /// Factors once and returns the sampling form.
    pub fn to_gaussian(&self) -> Result<FactoredGaussian> {
        let factor = self.factor()?;
        let mean = factor.solve(&self.covector);
        Ok(FactoredGaussian {
            mean,
            diag: self.diag.clone(),
            off: self.off.clone(),
            factor,
        })
    }

    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        Ok(self.to_gaussian()?.logpdf(x))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.to_gaussian()?.sample(rng))
    }
}

/// Lower bidiagonal Cholesky factor `Omega = L L'` with diagonal `l` and
/// subdiagonal `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    l: Vec<f64>,
    m: Vec<f64>,
}

impl Factor {
    pub fn new(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut l = Vec::with_capacity(n);
        let mut m = Vec::with_capacity(n.saturating_sub(1));
        let mut carry = 0.0;
        for i in 0..n {
            let pivot = diag[i] - carry;
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::Factorization { index: i });
            }
            let li = pivot.sqrt();
            l.push(li);
            if i + 1 < n {
                let mi = off[i] / li;
                m.push(mi);
                carry = mi * mi;
            }
        }
        Ok(Self { l, m })
    }

    /// `Omega^-1 b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.len();
        let mut w = vec![0.0; n];
        for i in 0..n {
            let prev = if i > 0 { self.m[i - 1] * w[i - 1] } else { 0.0 };
            w[i] = (b[i] - prev) / self.l[i];
        }
        self.back_substitute(&mut w);
        w
    }

    /// Solves `L' u = w` in place.
    fn back_substitute(&self, w: &mut [f64]) {
        let n = self.l.len();
        for i in (0..n).rev() {
            let next = if i + 1 < n { self.m[i] * w[i + 1] } else { 0.0 };
            w[i] = (w[i] - next) / self.l[i];
        }
    }

    /// `ln det Omega`.
    pub fn ln_det(&self) -> f64 {
        2.0 * self.l.iter().map(|v| v.ln()).sum::<f64>()
    }
}

/// A factored tridiagonal-precision Gaussian with its mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredGaussian {
    pub mean: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
    factor: Factor,
}

impl FactoredGaussian {
    /// Gaussian with given mean and tridiagonal precision.
    pub fn with_mean(mean: Vec<f64>, diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        let factor = Factor::new(&diag, &off)?;
        Ok(Self {
            mean,
            diag,
            off,
            factor,
        })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn precision_diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn precision_off(&self) -> &[f64] {
        &self.off
    }

    pub fn ln_det(&self) -> f64 {
        self.factor.ln_det()
    }

    pub fn logpdf(&self, x: &[f64]) -> f64 {
        let n = self.len();
        let mut q = 0.0;
        let mut prev = 0.0;
        for i in 0..n {
            let u = x[i] - self.mean[i];
            q += self.diag[i] * u * u;
            if i > 0 {
                q += 2.0 * self.off[i - 1] * prev * u;
            }
            prev = u;
        }
        -0.5 * (n as f64 * LN_2PI - self.ln_det() + q)
    }

    /// `mean + L'^-1 z` with `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut z: Vec<f64> = (0..self.len()).map(|_| StandardNormal.sample(rng)).collect();
        self.factor.back_substitute(&mut z);
        z.iter_mut().zip(&self.mean).for_each(|(v, m)| *v += m);
        z
    }
}
