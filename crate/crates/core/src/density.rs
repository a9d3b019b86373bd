//! Normalized duration density, cluster laws and log-density derivatives.
//!
//! The regular-duration shape is a Bernstein perturbation of an exponential:
//! with `F(e) = 1 - exp(-lt e)` and `g` a mixture of `Be(j, J - j + 1)`
//! densities weighted by `beta`, the density `f(e) g(F(e))` expands into
//! `sum_j alpha_j j lt exp(-j lt e)`. The limiting hazard `lt` is fixed by the
//! unit-mean condition `lt = sum_j alpha_j / j`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::special::binomial;

/// Simplex weights of the Bernstein polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinWeights(Vec<f64>);

impl BernsteinWeights {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidParameter("empty Bernstein weights".into()));
        }
        if beta.iter().any(|&b| !(b >= 0.0) || !b.is_finite()) {
            return Err(Error::InvalidParameter(format!("negative Bernstein weight in {beta:?}")));
        }
        let total: f64 = beta.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "Bernstein weights sum to {total}, not 1"
            )));
        }
        Ok(Self(beta))
    }

    /// Weights `(1/J, ..., 1/J)`, for which the density is the unit exponential.
    pub fn uniform(j: usize) -> Self {
        Self(vec![1.0 / j as f64; j])
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Additive log-ratio coordinates `ln(beta_j / beta_J)`, `j < J`.
    pub fn to_logratio(&self) -> Vec<f64> {
        let last = self.0[self.0.len() - 1].ln();
        self.0[..self.0.len() - 1].iter().map(|b| b.ln() - last).collect()
    }

    pub fn from_logratio(theta: &[f64]) -> Self {
        let m = theta.iter().copied().fold(0.0f64, f64::max);
        let mut beta: Vec<f64> = theta.iter().map(|t| (t - m).exp()).collect();
        beta.push((-m).exp());
        let total: f64 = beta.iter().sum();
        beta.iter_mut().for_each(|b| *b /= total);
        Self(beta)
    }
}

/// `T` with `alpha = T beta`, obtained by expanding each
/// `Be(1 - w | j, J - j + 1) w` in powers of `w = exp(-lt e)`.
pub fn transform_matrix(j_order: usize) -> Vec<Vec<f64>> {
    let n = j_order;
    let mut t = vec![vec![0.0; n]; n];
    for j in 1..=n {
        // Be(z | j, n - j + 1) = n C(n-1, j-1) z^(j-1) (1-z)^(n-j), z = 1 - w
        let lead = n as f64 * binomial(n - 1, j - 1);
        for k in 0..j {
            // (1 - w)^(j-1) contributes C(j-1, k) (-w)^k; with the extra w^(n-j)
            // and the f factor the power of w is m = n - j + k + 1
            let m = n - j + k + 1;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            t[m - 1][j - 1] += sign * lead * binomial(j - 1, k) / m as f64;
        }
    }
    t
}

/// Coefficients of the normalized density as a signed combination of
/// exponentials.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpMixCoeffs {
    alpha: Vec<f64>,
    lambda_tilde: f64,
}

impl ExpMixCoeffs {
    pub fn from_bernstein(w: &BernsteinWeights) -> Self {
        let t = transform_matrix(w.order());
        let alpha: Vec<f64> = t
            .iter()
            .map(|row| row.iter().zip(w.as_slice()).map(|(a, b)| a * b).sum())
            .collect();
        let lambda_tilde = alpha
            .iter()
            .enumerate()
            .map(|(j, a)| a / (j + 1) as f64)
            .sum();
        Self {
            alpha,
            lambda_tilde,
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn lambda_tilde(&self) -> f64 {
        self.lambda_tilde
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    /// Rate of the `j`-th exponential (1-based `j`), `j lt`.
    fn rate(&self, j: usize) -> f64 {
        j as f64 * self.lambda_tilde
    }

    fn check_arg(eps: f64) -> Result<()> {
        if eps < 0.0 || eps.is_nan() {
            Err(Error::NegativeArgument(eps))
        } else {
            Ok(())
        }
    }

    pub fn pdf(&self, eps: f64) -> Result<f64> {
        Self::check_arg(eps)?;
        Ok(self
            .alpha
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let r = self.rate(j + 1);
                a * r * (-r * eps).exp()
            })
            .sum::<f64>()
            .max(0.0))
    }

    /// `sum_j alpha_j (1 - exp(-j lt eps))`.
    pub fn cdf(&self, eps: f64) -> Result<f64> {
        Self::check_arg(eps)?;
        Ok(self
            .alpha
            .iter()
            .enumerate()
            .map(|(j, a)| -a * (-self.rate(j + 1) * eps).exp_m1())
            .sum())
    }

    pub fn survival(&self, eps: f64) -> Result<f64> {
        Self::check_arg(eps)?;
        Ok(self
            .alpha
            .iter()
            .enumerate()
            .map(|(j, a)| a * (-self.rate(j + 1) * eps).exp())
            .sum())
    }

    /// `pdf / (1 - cdf)`, evaluated with the slowest exponential factored out
    /// so that it stays finite in the far tail.
    pub fn hazard(&self, eps: f64) -> Result<f64> {
        Self::check_arg(eps)?;
        let lead = self
            .alpha
            .iter()
            .position(|a| a.abs() > 1e-300)
            .unwrap_or(0);
        let w = (-self.lambda_tilde * eps).exp();
        let (mut num, mut den) = (0.0, 0.0);
        let mut wp = 1.0;
        for (j, a) in self.alpha.iter().enumerate().skip(lead) {
            num += a * (j + 1) as f64 * wp;
            den += a * wp;
            wp *= w;
        }
        Ok(self.lambda_tilde * num / den)
    }

    /// Draw from the normalized density: pick a beta component, then invert `F`.
    pub fn sample<R: Rng + ?Sized>(&self, beta: &BernsteinWeights, rng: &mut R) -> f64 {
        let n = beta.order();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut j = n;
        for (k, b) in beta.as_slice().iter().enumerate() {
            acc += b;
            if u < acc {
                j = k + 1;
                break;
            }
        }
        // 1 - Z with Z ~ Be(j, n - j + 1) is the (n - j + 1)-th smallest of n uniforms
        let mut us: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        us.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tail = us[n - j].max(f64::MIN_POSITIVE);
        -tail.ln() / self.lambda_tilde
    }

    /// `ln(exp(-x) p(y exp(-x)))` for a regular duration.
    pub fn regular_ln_pdf(&self, y: f64, x: f64) -> Result<f64> {
        if y < 0.0 || y.is_nan() {
            return Err(Error::NegativeArgument(y));
        }
        Ok(self.regular_jet(y, x, 0).value())
    }

    /// Value and derivatives in `x` of the regular log density.
    ///
    /// Each term is `alpha_j lambda_j exp(h_j(x))` with
    /// `h_j(x) = -x - lambda_j exp(-x) y`.
    pub fn regular_jet(&self, y: f64, x: f64, order: usize) -> Jet {
        let ex = (-x).exp();
        log_sum_of_exp_terms(
            self.alpha.len(),
            |k| {
                let r = self.rate(k + 1);
                (self.alpha[k] * r, 1.0, r * y)
            },
            ex,
            x,
            order,
        )
    }

    fn check_integer(y: f64) -> Result<u64> {
        if y < 0.0 || y.fract() != 0.0 || !y.is_finite() {
            Err(Error::NonInteger(y))
        } else {
            Ok(y as u64)
        }
    }

    /// Log pmf of a regular duration recorded to the second:
    /// `ln(½ [P((y+1)e^-x) - P((y-1)e^-x)])`, with the lower limit at zero
    /// for `y = 0`.
    pub fn regular_ln_pmf(&self, y: f64, x: f64) -> Result<f64> {
        let y = Self::check_integer(y)?;
        let s = (-x).exp();
        let p: f64 = if y == 0 {
            self.alpha
                .iter()
                .enumerate()
                .map(|(j, a)| -a * (-self.rate(j + 1) * s).exp_m1())
                .sum()
        } else {
            // the slowest exponential is factored out so the tail stays finite
            let lo = (y - 1) as f64;
            let lead = self.alpha.iter().position(|a| a.abs() > 1e-300).unwrap_or(0);
            let r0 = self.rate(lead + 1) * s;
            let p: f64 = self
                .alpha
                .iter()
                .enumerate()
                .skip(lead)
                .map(|(j, a)| {
                    let r = self.rate(j + 1) * s;
                    -a * (-(r - r0) * lo).exp() * (-2.0 * r).exp_m1()
                })
                .sum();
            return Ok((0.5 * p).ln() - r0 * lo);
        };
        Ok((0.5 * p).ln())
    }

    /// Derivatives in `x` of the discrete regular log pmf; the value slot is
    /// the stable closed-form log pmf.
    pub fn regular_pmf_jet(&self, y: u64, x: f64, order: usize) -> Jet {
        if order == 0 {
            return Jet::constant(self.regular_ln_pmf(y as f64, x).expect("integer argument"));
        }
        let s = (-x).exp();
        let n = self.alpha.len();
        let mut jet = if y == 0 {
            // 1 - sum_j alpha_j exp(-lambda_j e^-x)
            log_sum_of_exp_terms(
                n + 1,
                |k| {
                    if k == n {
                        (1.0, 0.0, 0.0)
                    } else {
                        (-self.alpha[k], 0.0, self.rate(k + 1))
                    }
                },
                s,
                x,
                order,
            )
        } else {
            let (lo, hi) = ((y - 1) as f64, (y + 1) as f64);
            log_sum_of_exp_terms(
                2 * n,
                |k| {
                    let j = k / 2;
                    let r = self.rate(j + 1);
                    if k % 2 == 0 {
                        (self.alpha[j], 0.0, r * lo)
                    } else {
                        (-self.alpha[j], 0.0, r * hi)
                    }
                },
                s,
                x,
                order,
            )
        };
        jet[0] = self
            .regular_ln_pmf(y as f64, x)
            .expect("integer argument");
        jet
    }
}

/// Jet of `ln sum_k w_k exp(-a_k x - b_k e^-x)`; `ex` is `e^-x`.
///
/// The largest exponent is factored out before exponentiating; derivatives of
/// the logarithm only involve ratios `S^(r) / S`, so the shift cancels.
fn log_sum_of_exp_terms(
    n_terms: usize,
    term: impl Fn(usize) -> (f64, f64, f64),
    ex: f64,
    x: f64,
    order: usize,
) -> Jet {
    let exponent = |a: f64, b: f64| -a * x - b * ex;
    let mut shift = f64::NEG_INFINITY;
    for k in 0..n_terms {
        let (w, a, b) = term(k);
        if w != 0.0 {
            shift = shift.max(exponent(a, b));
        }
    }
    if order <= 2 {
        // moments of h' under the weights exp(h - shift)
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for k in 0..n_terms {
            let (w, a, b) = term(k);
            if w == 0.0 {
                continue;
            }
            let be = b * ex;
            let e = w * (exponent(a, b) - shift).exp();
            let d1 = -a + be;
            s0 += e;
            s1 += e * d1;
            s2 += e * (d1 * d1 - be);
        }
        if !(s0 > 0.0) {
            return Jet::constant(f64::NEG_INFINITY);
        }
        let mut out = Jet::constant(s0.ln() + shift);
        let l1 = s1 / s0;
        out[1] = l1;
        out[2] = s2 / s0 - l1 * l1;
        return out;
    }
    let mut sum = Jet::default();
    for k in 0..n_terms {
        let (w, a, b) = term(k);
        if w == 0.0 {
            continue;
        }
        let mut h = Jet::default();
        h[0] = exponent(a, b);
        let be = b * ex;
        if order >= 1 {
            h[1] = -a + be;
        }
        for r in 2..=order {
            h[r] = if r % 2 == 0 { -be } else { be };
        }
        sum.add_assign_scaled(&h.exp_shifted(shift, order), w);
    }
    if !(sum[0] > 0.0) {
        // cancellation in the signed sum; the density is numerically zero here
        return Jet::constant(f64::NEG_INFINITY);
    }
    let mut out = sum.ln(order);
    out[0] += shift;
    out
}

/// Law of cluster durations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusterLaw {
    /// Mixture `pi Exp(lambda1) + (1 - pi) Exp(lambda2)`.
    Continuous { lambda1: f64, lambda2: f64, pi: f64 },
    /// Recorded value 0s with probability `zeta`, 1s otherwise.
    Discrete { zeta: f64 },
}

impl ClusterLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ClusterLaw::Continuous {
                lambda1,
                lambda2,
                pi,
            } => {
                if !(lambda1 > 0.0 && lambda2 > 0.0) {
                    return Err(Error::InvalidParameter("cluster hazards must be positive".into()));
                }
                if !(pi > 0.0 && pi < 1.0) {
                    return Err(Error::InvalidParameter(format!("pi = {pi} outside (0, 1)")));
                }
            }
            ClusterLaw::Discrete { zeta } => {
                if !(zeta > 0.0 && zeta < 1.0) {
                    return Err(Error::InvalidParameter(format!("zeta = {zeta} outside (0, 1)")));
                }
            }
        }
        Ok(())
    }

    /// Log density of a continuous cluster duration.
    pub fn ln_pdf(&self, y: f64) -> Result<f64> {
        if y < 0.0 || y.is_nan() {
            return Err(Error::NegativeArgument(y));
        }
        match *self {
            ClusterLaw::Continuous {
                lambda1,
                lambda2,
                pi,
            } => {
                let a = pi.ln() + lambda1.ln() - lambda1 * y;
                let b = (1.0 - pi).ln() + lambda2.ln() - lambda2 * y;
                Ok(crate::special::log_add_exp(a, b))
            }
            ClusterLaw::Discrete { .. } => Err(Error::InvalidParameter(
                "continuous density requested from the discrete cluster law".into(),
            )),
        }
    }

    /// Log pmf of a cluster duration recorded to the second; `-inf` for
    /// `y >= 2`.
    pub fn ln_pmf(&self, y: f64) -> Result<f64> {
        match *self {
            ClusterLaw::Discrete { zeta } => {
                if y == 0.0 {
                    Ok(zeta.ln())
                } else if y == 1.0 {
                    Ok((1.0 - zeta).ln())
                } else if y >= 0.0 && y.fract() == 0.0 {
                    Ok(f64::NEG_INFINITY)
                } else {
                    Err(Error::NonInteger(y))
                }
            }
            ClusterLaw::Continuous { .. } => Err(Error::InvalidParameter(
                "discrete pmf requested from the continuous cluster law".into(),
            )),
        }
    }

    /// Log density or pmf according to the law's variant.
    pub fn ln_density(&self, y: f64) -> Result<f64> {
        match self {
            ClusterLaw::Continuous { .. } => self.ln_pdf(y),
            ClusterLaw::Discrete { .. } => self.ln_pmf(y),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ClusterLaw::Continuous {
                lambda1,
                lambda2,
                pi,
            } => {
                let rate = if rng.random::<f64>() < pi { lambda1 } else { lambda2 };
                -(1.0 - rng.random::<f64>()).ln() / rate
            }
            ClusterLaw::Discrete { zeta } => {
                if rng.random::<f64>() < zeta {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Cluster,
    Regular,
}

impl Regime {
    pub fn from_indicator(s: u8) -> Self {
        if s == 0 {
            Regime::Cluster
        } else {
            Regime::Regular
        }
    }
}

/// `psi(x) = ln p(y | s, x)` and its first five derivatives in `x`.
pub fn log_density_derivs(
    y: f64,
    x: f64,
    regime: Regime,
    coeffs: &ExpMixCoeffs,
    cluster: Option<&ClusterLaw>,
    discrete: bool,
) -> Result<Jet> {
    match regime {
        Regime::Cluster => {
            let law = cluster.ok_or_else(|| {
                Error::InvalidParameter("cluster regime without a cluster law".into())
            })?;
            Ok(Jet::constant(law.ln_density(y)?))
        }
        Regime::Regular if discrete => {
            let y = ExpMixCoeffs::check_integer(y)?;
            Ok(coeffs.regular_pmf_jet(y, x, 5))
        }
        Regime::Regular => {
            if y < 0.0 || y.is_nan() {
                return Err(Error::NegativeArgument(y));
            }
            Ok(coeffs.regular_jet(y, x, 5))
        }
    }
}
