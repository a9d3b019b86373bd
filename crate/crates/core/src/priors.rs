//! Prior distributions, shipped hyperparameter presets and the induced
//! Gaussian prior on the diurnal coefficients.
//!
//! `s_bar tau ~ chi2(nu_bar)` is read as `tau ~ Gamma(shape nu_bar / 2,
//! rate s_bar / 2)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::density::{BernsteinWeights, ClusterLaw};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::special::{digamma, ln_beta_pdf, ln_dirichlet_pdf, ln_gamma_pdf, trigamma};
use crate::splines::SplineBasis;

pub const GIR_PRESET: &str = include_str!("../presets/gir.toml");
pub const TSX_PRESET: &str = include_str!("../presets/tsx.toml");

/// Which durations the model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// Cluster and regular durations.
    All,
    /// Regular durations only.
    Regular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelShape {
    /// Order of the Bernstein polynomial.
    #[serde(rename = "J")]
    pub j: usize,
    /// Number of distinct spline knots `M`; the basis has `M + 2` functions.
    pub knots: usize,
    pub t_open: f64,
    pub t_close: f64,
    pub discrete: bool,
    pub model: ModelVariant,
}

impl ModelShape {
    pub fn basis(&self) -> Result<SplineBasis> {
        SplineBasis::new(self.t_open, self.t_close, self.knots)
    }

    pub fn validate(&self) -> Result<()> {
        if self.j < 2 {
            return Err(Error::Config(format!("J = {} must be at least 2", self.j)));
        }
        self.basis().map(|_| ())
    }
}

/// Dirichlet concentration `M_bar`, either fixed or proportional to `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Concentration {
    Fixed(f64),
    PerComponent { per_component: f64 },
}

impl Concentration {
    pub fn value(&self, j: usize) -> f64 {
        match *self {
            Concentration::Fixed(m) => m,
            Concentration::PerComponent { per_component } => per_component * j as f64,
        }
    }
}

/// Prior hyperparameters, named after their barred symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorHyper {
    pub theta_bar: [f64; 2],
    /// `(Sigma_11, Sigma_22, Sigma_12)`.
    pub sigma_bar: [f64; 3],
    pub delta_bar: f64,
    pub h_bar: f64,
    pub s_bar: f64,
    pub nu_bar: f64,
    pub m_bar: Concentration,
    /// Prior mean of the Bernstein weights; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_bar: Option<Vec<f64>>,
    pub a0: f64,
    pub b0: f64,
    pub a1: f64,
    pub b1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_zeta: Option<f64>,
}

/// Gamma and beta hyperparameters of the continuous cluster law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterHyper {
    pub lambda1: (f64, f64),
    pub lambda2: (f64, f64),
    pub pi: (f64, f64),
}

fn require(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("missing prior hyperparameter {name}")))
}

impl PriorHyper {
    /// `M_bar beta_bar` for a Bernstein polynomial of order `j`.
    pub fn dirichlet_conc(&self, j: usize) -> Result<Vec<f64>> {
        let m = self.m_bar.value(j);
        let mean = match &self.beta_bar {
            Some(b) if b.len() == j => b.clone(),
            Some(b) => {
                return Err(Error::Config(format!(
                    "beta_bar has {} entries but J = {j}",
                    b.len()
                )))
            }
            None => vec![1.0 / j as f64; j],
        };
        Ok(mean.into_iter().map(|b| m * b).collect())
    }

    pub fn beta_mean(&self, j: usize) -> Result<Vec<f64>> {
        let conc = self.dirichlet_conc(j)?;
        let total: f64 = conc.iter().sum();
        Ok(conc.into_iter().map(|a| a / total).collect())
    }

    pub fn theta_cov(&self) -> [[f64; 2]; 2] {
        let [s11, s22, s12] = self.sigma_bar;
        [[s11, s12], [s12, s22]]
    }

    pub fn cluster_continuous(&self) -> Result<ClusterHyper> {
        Ok(ClusterHyper {
            lambda1: (
                require(self.a_lambda1, "a_lambda1")?,
                require(self.b_lambda1, "b_lambda1")?,
            ),
            lambda2: (
                require(self.a_lambda2, "a_lambda2")?,
                require(self.b_lambda2, "b_lambda2")?,
            ),
            pi: (require(self.a_pi, "a_pi")?, require(self.b_pi, "b_pi")?),
        })
    }

    pub fn zeta(&self) -> Result<(f64, f64)> {
        Ok((require(self.a_zeta, "a_zeta")?, require(self.b_zeta, "b_zeta")?))
    }

    pub fn has_cluster_priors(&self) -> bool {
        self.a_lambda1.is_some() || self.a_pi.is_some() || self.a_zeta.is_some()
    }

    pub fn validate(&self, shape: &ModelShape) -> Result<()> {
        let [s11, s22, s12] = self.sigma_bar;
        if !(s11 > 0.0 && s22 > 0.0 && s11 * s22 - s12 * s12 > 0.0) {
            return Err(Error::Config("sigma_bar is not positive definite".into()));
        }
        for (name, v) in [
            ("h_bar", self.h_bar),
            ("s_bar", self.s_bar),
            ("nu_bar", self.nu_bar),
            ("a0", self.a0),
            ("b0", self.b0),
            ("a1", self.a1),
            ("b1", self.b1),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        let conc = self.dirichlet_conc(shape.j)?;
        if conc.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Config("Dirichlet concentration must be positive".into()));
        }
        if let Some(b) = &self.beta_bar {
            if (b.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
                return Err(Error::Config("beta_bar must sum to 1".into()));
            }
        }
        if shape.model == ModelVariant::All {
            let fields: Vec<(&str, Option<f64>)> = if shape.discrete {
                vec![("a_zeta", self.a_zeta), ("b_zeta", self.b_zeta)]
            } else {
                vec![
                    ("a_lambda1", self.a_lambda1),
                    ("b_lambda1", self.b_lambda1),
                    ("a_lambda2", self.a_lambda2),
                    ("b_lambda2", self.b_lambda2),
                    ("a_pi", self.a_pi),
                    ("b_pi", self.b_pi),
                ]
            };
            for (name, v) in fields {
                match v {
                    Some(v) if v > 0.0 => {}
                    Some(v) => return Err(Error::Config(format!("{name} = {v} must be positive"))),
                    None => return Err(Error::Config(format!("missing prior hyperparameter {name}"))),
                }
            }
        }
        Ok(())
    }
}

/// Model shape plus priors, as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub shape: ModelShape,
    pub prior: PriorHyper,
}

impl ModelConfig {
    pub fn preset(name: &str) -> Result<Self> {
        Self::from_layers(&[preset_text(name)?])
    }

    /// Later layers override earlier ones key by key.
    pub fn from_layers(layers: &[&str]) -> Result<Self> {
        let mut merged = toml::Table::new();
        for text in layers {
            let table: toml::Table =
                toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            merge_toml(&mut merged, table);
        }
        let cfg: ModelConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.shape.validate()?;
        cfg.prior.validate(&cfg.shape)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn preset_text(name: &str) -> Result<&'static str> {
    match name {
        "gir" => Ok(GIR_PRESET),
        "tsx" => Ok(TSX_PRESET),
        other => Err(Error::Config(format!("unknown preset {other:?}"))),
    }
}

/// Deep merge: tables merge key by key, any other value replaces.
pub fn merge_toml(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_toml(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Gaussian prior of the diurnal coefficients given `tau`:
/// precision `h_bar v v' + tau D'D`, covector `h_bar delta_bar v`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaPrior {
    pub precision: DMatrix<f64>,
    pub covector: DVector<f64>,
    pub mean: DVector<f64>,
}

pub fn delta_prior(hyper: &PriorHyper, dim: usize, tau: f64) -> Result<DeltaPrior> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("basis dimension {dim} < 2")));
    }
    if !(tau > 0.0 && hyper.h_bar > 0.0) {
        return Err(Error::InvalidParameter("prior precisions must be positive".into()));
    }
    let inv = 1.0 / dim as f64;
    let mut precision = DMatrix::from_element(dim, dim, hyper.h_bar * inv * inv);
    for l in 0..dim - 1 {
        precision[(l, l)] += tau;
        precision[(l + 1, l + 1)] += tau;
        precision[(l, l + 1)] -= tau;
        precision[(l + 1, l)] -= tau;
    }
    let covector = DVector::from_element(dim, hyper.h_bar * hyper.delta_bar * inv);
    let mean = DVector::from_element(dim, hyper.delta_bar);
    Ok(DeltaPrior {
        precision,
        covector,
        mean,
    })
}

/// `ln p(delta | tau)`.
///
/// With `A = [v'; D]` unimodular, the density factors into the mean and the
/// first differences.
pub fn delta_log_prior(hyper: &PriorHyper, delta: &[f64], tau: f64) -> f64 {
    let l = delta.len() as f64;
    let mean = delta.iter().sum::<f64>() / l;
    let ssd: f64 = delta.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    0.5 * hyper.h_bar.ln() + 0.5 * (l - 1.0) * tau.ln() - 0.5 * l * ln2pi
        - 0.5 * (hyper.h_bar * (mean - hyper.delta_bar).powi(2) + tau * ssd)
}

pub fn theta_log_prior(hyper: &PriorHyper, theta: [f64; 2]) -> f64 {
    let [[a, b], [_, d]] = hyper.theta_cov();
    let det = a * d - b * b;
    let u = [theta[0] - hyper.theta_bar[0], theta[1] - hyper.theta_bar[1]];
    let q = (d * u[0] * u[0] - 2.0 * b * u[0] * u[1] + a * u[1] * u[1]) / det;
    -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * q
}

pub fn tau_log_prior(hyper: &PriorHyper, tau: f64) -> f64 {
    if !(tau > 0.0) {
        return f64::NEG_INFINITY;
    }
    ln_gamma_pdf(tau, 0.5 * hyper.nu_bar, 0.5 * hyper.s_bar)
}

/// Whether a parameter value lies where the prior density is finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Interior,
    /// Outside the support; the prior density is zero.
    Outside,
    /// On the simplex boundary where a concentration below one makes the
    /// Dirichlet density infinite; the finite factors are still reported.
    Singular,
}

/// Log prior by block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorTerms {
    pub theta: f64,
    pub delta: f64,
    pub tau: f64,
    pub beta: f64,
    pub xi: f64,
    pub cluster: f64,
    pub support: Support,
}

impl PriorTerms {
    pub fn total(&self) -> f64 {
        match self.support {
            Support::Outside => f64::NEG_INFINITY,
            _ => self.theta + self.delta + self.tau + self.beta + self.xi + self.cluster,
        }
    }
}

/// Dirichlet log density with boundary handling.
pub fn beta_log_prior(beta: &[f64], conc: &[f64]) -> (f64, Support) {
    if beta.iter().any(|&b| b < 0.0) {
        return (f64::NEG_INFINITY, Support::Outside);
    }
    let singular = beta.iter().zip(conc).any(|(&b, &a)| b == 0.0 && a < 1.0);
    let outside = beta.iter().zip(conc).any(|(&b, &a)| b == 0.0 && a > 1.0);
    if outside {
        return (f64::NEG_INFINITY, Support::Outside);
    }
    if singular {
        // drop the infinite factors, keep the rest
        let finite: f64 = beta
            .iter()
            .zip(conc)
            .filter(|(&b, _)| b > 0.0)
            .map(|(&b, &a)| (a - 1.0) * b.ln())
            .sum();
        let norm = ln_dirichlet_pdf(&vec![1.0 / beta.len() as f64; beta.len()], conc)
            - conc
                .iter()
                .map(|&a| (a - 1.0) * (1.0 / beta.len() as f64).ln())
                .sum::<f64>();
        return (norm + finite, Support::Singular);
    }
    (ln_dirichlet_pdf(beta, conc), Support::Interior)
}

pub fn xi_log_prior(hyper: &PriorHyper, xi00: f64, xi11: f64) -> f64 {
    ln_beta_pdf(xi00, hyper.a0, hyper.b0) + ln_beta_pdf(xi11, hyper.a1, hyper.b1)
}

pub fn cluster_log_prior(hyper: &PriorHyper, law: &ClusterLaw) -> Result<f64> {
    Ok(match *law {
        ClusterLaw::Continuous {
            lambda1,
            lambda2,
            pi,
        } => {
            let c = hyper.cluster_continuous()?;
            ln_gamma_pdf(lambda1, c.lambda1.0, c.lambda1.1)
                + ln_gamma_pdf(lambda2, c.lambda2.0, c.lambda2.1)
                + ln_beta_pdf(pi, c.pi.0, c.pi.1)
        }
        ClusterLaw::Discrete { zeta } => {
            let (a, b) = hyper.zeta()?;
            ln_beta_pdf(zeta, a, b)
        }
    })
}

/// Log prior of every static parameter, by block.
pub fn log_prior(p: &ModelParams, hyper: &PriorHyper) -> Result<PriorTerms> {
    let conc = hyper.dirichlet_conc(p.beta.order())?;
    let (beta, mut support) = beta_log_prior(p.beta.as_slice(), &conc);
    let theta = if p.phi > 0.0 && p.sigma > 0.0 {
        theta_log_prior(hyper, p.theta())
    } else {
        f64::NEG_INFINITY
    };
    let tau = tau_log_prior(hyper, p.tau);
    let delta = if p.tau > 0.0 {
        delta_log_prior(hyper, &p.delta, p.tau)
    } else {
        f64::NEG_INFINITY
    };
    let (xi, cluster) = match &p.cluster {
        Some(law) => (xi_log_prior(hyper, p.xi00, p.xi11), cluster_log_prior(hyper, law)?),
        None => (0.0, 0.0),
    };
    if [theta, tau, delta, xi, cluster].iter().any(|v| !v.is_finite()) {
        support = Support::Outside;
    }
    Ok(PriorTerms {
        theta,
        delta,
        tau,
        beta,
        xi,
        cluster,
        support,
    })
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng)
}

pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    Beta::new(a, b).expect("positive beta parameters").sample(rng)
}

pub fn sample_dirichlet<R: Rng + ?Sized>(conc: &[f64], rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = conc.iter().map(|&a| sample_gamma(a, 1.0, rng)).collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|v| v / total).collect()
}

/// Draw of `delta` given `tau`: the mean `v' delta` and the first
/// differences are independent Gaussians.
pub fn sample_delta<R: Rng + ?Sized>(hyper: &PriorHyper, dim: usize, tau: f64, rng: &mut R) -> Vec<f64> {
    let mean = hyper.delta_bar + normal(rng) / hyper.h_bar.sqrt();
    let sd = 1.0 / tau.sqrt();
    let mut delta = vec![0.0; dim];
    for l in 1..dim {
        delta[l] = delta[l - 1] + sd * normal(rng);
    }
    let shift = mean - delta.iter().sum::<f64>() / dim as f64;
    delta.iter_mut().for_each(|d| *d += shift);
    delta
}

pub fn sample_theta<R: Rng + ?Sized>(hyper: &PriorHyper, rng: &mut R) -> [f64; 2] {
    let [[a, b], [_, d]] = hyper.theta_cov();
    let l11 = a.sqrt();
    let l21 = b / l11;
    let l22 = (d - l21 * l21).sqrt();
    let (z1, z2) = (normal(rng), normal(rng));
    [
        hyper.theta_bar[0] + l11 * z1,
        hyper.theta_bar[1] + l21 * z1 + l22 * z2,
    ]
}

/// Independent draws of every parameter block from its prior.
pub fn sample_prior<R: Rng + ?Sized>(
    hyper: &PriorHyper,
    shape: &ModelShape,
    rng: &mut R,
) -> Result<ModelParams> {
    let theta = sample_theta(hyper, rng);
    let tau = sample_gamma(0.5 * hyper.nu_bar, 0.5 * hyper.s_bar, rng);
    let delta = sample_delta(hyper, shape.knots + 2, tau, rng);
    let beta = BernsteinWeights::new(sample_dirichlet(&hyper.dirichlet_conc(shape.j)?, rng))?;
    let (xi00, xi11, cluster) = match shape.model {
        ModelVariant::Regular => (0.5, 0.5, None),
        ModelVariant::All => {
            let xi00 = sample_beta(hyper.a0, hyper.b0, rng);
            let xi11 = sample_beta(hyper.a1, hyper.b1, rng);
            let law = if shape.discrete {
                let (a, b) = hyper.zeta()?;
                ClusterLaw::Discrete {
                    zeta: sample_beta(a, b, rng),
                }
            } else {
                let c = hyper.cluster_continuous()?;
                ClusterLaw::Continuous {
                    lambda1: sample_gamma(c.lambda1.0, c.lambda1.1, rng),
                    lambda2: sample_gamma(c.lambda2.0, c.lambda2.1, rng),
                    pi: sample_beta(c.pi.0, c.pi.1, rng),
                }
            };
            (xi00, xi11, Some(law))
        }
    };
    Ok(ModelParams {
        phi: theta[0].exp(),
        sigma: theta[1].exp(),
        delta,
        tau,
        beta,
        xi00,
        xi11,
        cluster,
    })
}

/// Mean and covariance of the logistic-normal approximation to `Dir(conc)`
/// in the log-ratio coordinates `ln(beta_j / beta_J)`.
pub fn dirichlet_logistic_moments(conc: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if conc.len() < 2 {
        return Err(Error::InvalidParameter("need at least two components".into()));
    }
    if let Some(&a) = conc.iter().find(|&&a| !(a > 0.0)) {
        return Err(Error::InvalidParameter(format!("nonpositive concentration {a}")));
    }
    let k = conc.len() - 1;
    let last = conc[k];
    let mean = conc[..k].iter().map(|&a| digamma(a) - digamma(last)).collect();
    let shared = trigamma(last);
    let mut cov = DMatrix::from_element(k, k, shared);
    for j in 0..k {
        cov[(j, j)] += trigamma(conc[j]);
    }
    Ok((mean, cov))
}

/// Analytic prior means of the scalar summaries reported by the
/// correctness harness, in report order.
pub fn prior_means(hyper: &PriorHyper, shape: &ModelShape) -> Result<Vec<(String, f64)>> {
    let mut out = vec![
        ("theta_1".to_string(), hyper.theta_bar[0]),
        ("theta_2".to_string(), hyper.theta_bar[1]),
        ("tau".to_string(), hyper.nu_bar / hyper.s_bar),
        ("vdelta".to_string(), hyper.delta_bar),
    ];
    for (j, b) in hyper.beta_mean(shape.j)?.into_iter().enumerate() {
        out.push((format!("beta_{}", j + 1), b));
    }
    if shape.model == ModelVariant::All {
        out.push(("xi00".into(), hyper.a0 / (hyper.a0 + hyper.b0)));
        out.push(("xi11".into(), hyper.a1 / (hyper.a1 + hyper.b1)));
        if shape.discrete {
            let (a, b) = hyper.zeta()?;
            out.push(("zeta".into(), a / (a + b)));
        } else {
            let c = hyper.cluster_continuous()?;
            out.push(("lambda_1".into(), c.lambda1.0 / c.lambda1.1));
            out.push(("lambda_2".into(), c.lambda2.0 / c.lambda2.1));
            out.push(("pi".into(), c.pi.0 / (c.pi.0 + c.pi.1)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn gir() -> ModelConfig {
        ModelConfig::preset("gir").unwrap()
    }

    #[test]
    fn presets_load() {
        let g = gir();
        assert_eq!(g.shape.j, 3);
        assert_eq!(g.shape.basis().unwrap().dim(), 4);
        let t = ModelConfig::preset("tsx").unwrap();
        assert_eq!(t.prior.theta_bar, [-4.5, -1.5]);
        assert_eq!(t.prior.theta_cov(), [[0.25, -0.05], [-0.05, 0.05]]);
        assert_eq!(t.prior.m_bar.value(5), 50.0);
        assert_eq!(t.prior.beta_mean(4).unwrap(), vec![0.25; 4]);
        assert_eq!(t.shape.basis().unwrap().dim(), 16);
        assert!(ModelConfig::preset("nope").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ModelConfig::from_layers(&[GIR_PRESET, "[prior]\nbogus = 1.0\n"]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn layers_override_key_by_key() {
        let cfg = ModelConfig::from_layers(&[GIR_PRESET, "[shape]\ndiscrete = true\n"]).unwrap();
        assert!(cfg.shape.discrete);
        assert_eq!(cfg.prior.h_bar, 500.0);
        let round = ModelConfig::from_layers(&[&cfg.to_toml()]).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn missing_cluster_priors_are_reported() {
        let err = ModelConfig::from_layers(&[TSX_PRESET, "[shape]\ndiscrete = false\n"]).unwrap_err();
        assert!(err.to_string().contains("a_lambda1"));
    }

    #[test]
    fn delta_prior_two_dimensional_example() {
        let mut h = gir().prior;
        h.h_bar = 1.0;
        h.delta_bar = 0.0;
        let p = delta_prior(&h, 2, 1.0).unwrap();
        let expected = [[1.25, -0.75], [-0.75, 1.25]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((p.precision[(i, j)] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn delta_prior_covector_and_symmetry() {
        let h = gir().prior;
        let p = delta_prior(&h, 6, 37.0).unwrap();
        let hm = &p.precision * &p.mean;
        assert!((hm - &p.covector).amax() < 1e-10);
        for i in 0..6 {
            for j in 0..6 {
                assert!((p.precision[(i, j)] - p.precision[(5 - i, 5 - j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_log_prior_matches_dense_gaussian() {
        let h = gir().prior;
        let dim = 5;
        let tau = 12.0;
        let p = delta_prior(&h, dim, tau).unwrap();
        let delta = [0.9, 1.1, 1.3, 0.7, 1.0];
        let u = DVector::from_row_slice(&delta) - &p.mean;
        let q = (u.transpose() * &p.precision * &u)[(0, 0)];
        let ln_det = p.precision.clone().cholesky().unwrap().l().diagonal().map(|v| v.ln()).sum() * 2.0;
        let dense = 0.5 * ln_det - 0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * q;
        assert!((delta_log_prior(&h, &delta, tau) - dense).abs() < 1e-10);
    }

    #[test]
    fn flat_draws_with_large_smoothing() {
        let h = gir().prior;
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let d = sample_delta(&h, 6, 1e12, &mut rng);
        let mean = d.iter().sum::<f64>() / 6.0;
        assert!(d.iter().all(|v| (v - mean).abs() < 1e-5));
    }

    #[test]
    fn log_prior_is_sum_of_blocks() {
        let cfg = gir();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let p = sample_prior(&cfg.prior, &cfg.shape, &mut rng).unwrap();
        let terms = log_prior(&p, &cfg.prior).unwrap();
        assert_eq!(terms.support, Support::Interior);
        let conc = cfg.prior.dirichlet_conc(3).unwrap();
        let direct = theta_log_prior(&cfg.prior, p.theta())
            + delta_log_prior(&cfg.prior, &p.delta, p.tau)
            + tau_log_prior(&cfg.prior, p.tau)
            + ln_dirichlet_pdf(p.beta.as_slice(), &conc)
            + xi_log_prior(&cfg.prior, p.xi00, p.xi11)
            + cluster_log_prior(&cfg.prior, p.cluster.as_ref().unwrap()).unwrap();
        assert!((terms.total() - direct).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_boundary_flags() {
        let (v, s) = beta_log_prior(&[0.0, 0.4, 0.6], &[0.5, 2.0, 2.0]);
        assert_eq!(s, Support::Singular);
        assert!(v.is_finite());
        let (v, s) = beta_log_prior(&[0.0, 0.4, 0.6], &[3.0, 2.0, 2.0]);
        assert_eq!(s, Support::Outside);
        assert_eq!(v, f64::NEG_INFINITY);
    }

    #[test]
    fn prior_means_gir() {
        let cfg = gir();
        let means = prior_means(&cfg.prior, &cfg.shape).unwrap();
        let get = |n: &str| means.iter().find(|(k, _)| k == n).unwrap().1;
        assert_eq!(means.len(), 12);
        assert_eq!(get("tau"), 200.0);
        assert!((get("xi00") - 0.4).abs() < 1e-15);
        assert!((get("xi11") - 0.8).abs() < 1e-15);
        assert_eq!(get("lambda_1"), 100.0);
        assert_eq!(get("lambda_2"), 50.0);
        assert_eq!(get("pi"), 0.5);
        assert_eq!(get("vdelta"), 1.0);
        let mut disc = cfg.shape.clone();
        disc.discrete = true;
        let means = prior_means(&cfg.prior, &disc).unwrap();
        assert_eq!(means.len(), 10);
        assert!((means.last().unwrap().1 - 0.95).abs() < 1e-15);
    }

    #[test]
    fn prior_draw_moments() {
        let cfg = gir();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let n = 100_000;
        let (mut xi, mut t1, mut t2) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let p = sample_prior(&cfg.prior, &cfg.shape, &mut rng).unwrap();
            xi += p.xi00;
            t1 += p.tau;
            t2 += p.tau * p.tau;
        }
        let nf = n as f64;
        let xi_mean = xi / nf;
        let sd = (200.0 * 300.0 / (500.0f64.powi(2) * 501.0)).sqrt();
        assert!((xi_mean - 0.4).abs() < 3.0 * sd / nf.sqrt());
        let tau_mean = t1 / nf;
        let tau_var = t2 / nf - tau_mean * tau_mean;
        assert!((tau_mean - 200.0).abs() < 3.0 * (80.0f64 / nf).sqrt());
        assert!((tau_var - 80.0).abs() < 3.0);
    }

    #[test]
    fn prior_scores_have_mean_zero() {
        // E[d/dv ln p(v)] = 0 under the prior, for each scalar block
        let cfg = gir();
        let h = &cfg.prior;
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 100_000;
        let fd = |f: &dyn Fn(f64) -> f64, v: f64| {
            let e = 1e-6 * v.abs().max(1e-3);
            (f(v + e) - f(v - e)) / (2.0 * e)
        };
        let (mut s_tau, mut s_xi, mut s_l1) = (0.0, 0.0, 0.0);
        let (mut q_tau, mut q_xi, mut q_l1) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let p = sample_prior(h, &cfg.shape, &mut rng).unwrap();
            let a = fd(&|t| tau_log_prior(h, t), p.tau);
            let b = fd(&|x| xi_log_prior(h, x, p.xi11), p.xi00);
            let Some(ClusterLaw::Continuous { lambda1, .. }) = p.cluster else {
                unreachable!()
            };
            let c = fd(&|l| ln_gamma_pdf(l, 500.0, 5.0), lambda1);
            s_tau += a;
            s_xi += b;
            s_l1 += c;
            q_tau += a * a;
            q_xi += b * b;
            q_l1 += c * c;
        }
        let nf = n as f64;
        for (s, q) in [(s_tau, q_tau), (s_xi, q_xi), (s_l1, q_l1)] {
            let mean = s / nf;
            let se = (q / nf - mean * mean).sqrt() / nf.sqrt();
            assert!(mean.abs() < 4.0 * se, "score mean {mean} se {se}");
        }
    }

    #[test]
    fn logistic_moments() {
        let (m, c) = dirichlet_logistic_moments(&[5.0, 5.0, 5.0]).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-15));
        assert!((c[(0, 1)] - trigamma(5.0)).abs() < 1e-15);
        let (m, c) = dirichlet_logistic_moments(&[250.0, 150.0, 100.0]).unwrap();
        // psi(250) - psi(100) by the recurrence psi(x+1) = psi(x) + 1/x
        let by_sum: f64 = (100..250).map(|k| 1.0 / k as f64).sum();
        assert!((m[0] - by_sum).abs() < 1e-12);
        assert!(c.clone().cholesky().is_some());
        assert!(dirichlet_logistic_moments(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn logistic_moments_match_monte_carlo() {
        let conc = [250.0, 150.0, 100.0];
        let (m, c) = dirichlet_logistic_moments(&conc).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mut s = [0.0; 2];
        let mut ss = [[0.0; 2]; 2];
        for _ in 0..n {
            let b = sample_dirichlet(&conc, &mut rng);
            let v = [(b[0] / b[2]).ln(), (b[1] / b[2]).ln()];
            for i in 0..2 {
                s[i] += v[i];
                for j in 0..2 {
                    ss[i][j] += v[i] * v[j];
                }
            }
        }
        let nf = n as f64;
        for i in 0..2 {
            let mean = s[i] / nf;
            assert!(((mean - m[i]) / m[i]).abs() < 0.02);
            for j in 0..2 {
                let cov = ss[i][j] / nf - (s[i] / nf) * (s[j] / nf);
                assert!(((cov - c[(i, j)]) / c[(i, j)]).abs() < 0.02, "{i}{j}: {cov} vs {}", c[(i, j)]);
            }
        }
    }
}
