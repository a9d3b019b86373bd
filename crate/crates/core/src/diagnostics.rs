//! Posterior summaries, numerical standard errors and curve exports.

use crate::density::{BernsteinWeights, ExpMixCoeffs};
use crate::error::{Error, Result};
use crate::splines::SplineBasis;

/// Default overlapping-batch length `floor(sqrt(n))`.
pub fn default_batch_len(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(1)
}

pub fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

/// Sample variance with divisor `n - 1`.
pub fn variance(series: &[f64]) -> f64 {
    let m = mean(series);
    series.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (series.len() as f64 - 1.0)
}

/// Numerical standard error of the sample mean by overlapping batch means.
pub fn obm_nse(series: &[f64], batch_len: Option<usize>) -> Result<f64> {
    let n = series.len();
    let b = batch_len.unwrap_or_else(|| default_batch_len(n));
    if b == 0 || b >= n {
        return Err(Error::Degenerate(format!("batch length {b} for {n} draws")));
    }
    let overall = mean(series);
    let mut window: f64 = series[..b].iter().sum();
    let mut ss = (window / b as f64 - overall).powi(2);
    for k in b..n {
        window += series[k] - series[k - b];
        ss += (window / b as f64 - overall).powi(2);
    }
    let (nf, bf) = (n as f64, b as f64);
    let var = nf * bf * ss / ((nf - bf) * (nf - bf + 1.0));
    Ok((var / nf).sqrt())
}

/// Relative numerical efficiency `(s^2 / n) / nse^2`.
pub fn rne(series: &[f64], batch_len: Option<usize>) -> Result<f64> {
    let nse = obm_nse(series, batch_len)?;
    let var = variance(series);
    if !(var > 0.0) || nse == 0.0 {
        return Err(Error::Degenerate("zero-variance series".into()));
    }
    Ok(var / series.len() as f64 / (nse * nse))
}

/// Lag at which the OU autocorrelation halves.
pub fn half_life(phi: f64) -> Result<f64> {
    if !(phi > 0.0) {
        return Err(Error::InvalidParameter(format!("phi = {phi} must be positive")));
    }
    Ok(std::f64::consts::LN_2 / phi)
}

/// Quantile by linear interpolation between order statistics at positions
/// `p (n - 1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    pub nse: f64,
    /// `None` for a constant series.
    pub rne: Option<f64>,
}

pub fn summarize_series(series: &[f64]) -> Result<Summary> {
    if series.len() < 2 {
        return Err(Error::Degenerate(format!("{} draws", series.len())));
    }
    if let Some(v) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::Degenerate(format!("non-finite draw {v}")));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nse = obm_nse(series, None)?;
    Ok(Summary {
        mean: mean(series),
        sd: variance(series).sqrt(),
        q025: quantile(&sorted, 0.025),
        q975: quantile(&sorted, 0.975),
        nse,
        rne: rne(series, None).ok(),
    })
}

/// Posterior summary of the half-life over draws of `phi`.
pub fn half_life_summary(phi_draws: &[f64]) -> Result<Summary> {
    let hl = phi_draws.iter().map(|&p| half_life(p)).collect::<Result<Vec<_>>>()?;
    summarize_series(&hl)
}

/// One row of the correctness-harness table.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTest {
    pub name: String,
    pub diff: f64,
    pub nse: f64,
    pub t: f64,
}

pub fn mean_test(name: &str, series: &[f64], prior_mean: f64) -> Result<MeanTest> {
    let diff = mean(series) - prior_mean;
    let nse = obm_nse(series, None)?;
    Ok(MeanTest {
        name: name.to_string(),
        diff,
        nse,
        t: diff / nse,
    })
}

pub fn format_mean_tests(rows: &[MeanTest]) -> String {
    let mut out = format!("{:>10} {:>12} {:>12} {:>9}\n", "parameter", "mean-prior", "nse", "t");
    for r in rows {
        out.push_str(&format!("{:>10} {:>12.3e} {:>12.3e} {:>9.3}\n", r.name, r.diff, r.nse, r.t));
    }
    out
}

/// Posterior classification of short durations.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationSummary {
    /// Posterior probability that each duration is regular.
    pub prob_regular: Vec<f64>,
    /// Count of durations recorded as 0 s classified regular, per draw.
    pub zeros: Summary,
    pub ones: Summary,
    pub zeros_recorded: usize,
    pub ones_recorded: usize,
}

/// `regular_hits[k]` counts the draws in which duration `k` was regular;
/// `zeros` and `ones` are the per-draw counts of regular durations recorded
/// as 0 s and 1 s.
pub fn classification_summary(
    durations: &[f64],
    regular_hits: &[u64],
    n_draws: u64,
    zeros: &[f64],
    ones: &[f64],
) -> Result<ClassificationSummary> {
    if durations.len() != regular_hits.len() {
        return Err(Error::DimensionMismatch {
            expected: durations.len(),
            got: regular_hits.len(),
        });
    }
    if n_draws == 0 {
        return Err(Error::Degenerate("no draws".into()));
    }
    let prob_regular = regular_hits.iter().map(|&h| h as f64 / n_draws as f64).collect();
    let summary = |s: &[f64]| -> Result<Summary> {
        match summarize_series(s) {
            Ok(v) => Ok(v),
            Err(_) if !s.is_empty() => {
                let m = mean(s);
                Ok(Summary {
                    mean: m,
                    sd: 0.0,
                    q025: m,
                    q975: m,
                    nse: 0.0,
                    rne: None,
                })
            }
            Err(e) => Err(e),
        }
    };
    Ok(ClassificationSummary {
        prob_regular,
        zeros: summary(zeros)?,
        ones: summary(ones)?,
        zeros_recorded: durations.iter().filter(|&&y| y == 0.0).count(),
        ones_recorded: durations.iter().filter(|&&y| y == 1.0).count(),
    })
}

/// Histogram of per-observation probabilities over `bins` equal cells.
pub fn probability_histogram(probs: &[f64], bins: usize) -> Vec<usize> {
    let mut out = vec![0; bins];
    for &p in probs {
        let k = ((p * bins as f64) as usize).min(bins - 1);
        out[k] += 1;
    }
    out
}

/// A curve on a grid at the posterior mean plus individual draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub grid: Vec<f64>,
    pub at_mean: Vec<f64>,
    pub draws: Vec<Vec<f64>>,
}

impl Curve {
    /// Tab-separated columns: grid, posterior-mean curve, then one column per
    /// draw.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("x\tmean");
        for k in 0..self.draws.len() {
            out.push_str(&format!("\tdraw_{}", k + 1));
        }
        out.push('\n');
        for (i, g) in self.grid.iter().enumerate() {
            out.push_str(&format!("{g:?}\t{:?}", self.at_mean[i]));
            for d in &self.draws {
                out.push_str(&format!("\t{:?}", d[i]));
            }
            out.push('\n');
        }
        out
    }
}

pub const SPAGHETTI: usize = 25;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Indices of `count` draws spread evenly over `n`.
fn spread(n: usize, count: usize) -> Vec<usize> {
    let count = count.min(n);
    (0..count).map(|k| k * n / count).collect()
}

fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let dim = rows[0].len();
    (0..dim)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
        .collect()
}

/// Diurnal pattern at the posterior mean of `delta` and for spread draws.
pub fn diurnal_curve(basis: &SplineBasis, delta_draws: &[Vec<f64>], points: usize, spaghetti: usize) -> Result<Curve> {
    if delta_draws.is_empty() {
        return Err(Error::Degenerate("no draws".into()));
    }
    let grid = linspace(basis.t_open(), basis.t_close(), points);
    let eval = |d: &[f64]| grid.iter().map(|&t| basis.diurnal(d, t)).collect::<Result<Vec<_>>>();
    let at_mean = eval(&column_means(delta_draws))?;
    let draws = spread(delta_draws.len(), spaghetti)
        .into_iter()
        .map(|k| eval(&delta_draws[k]))
        .collect::<Result<_>>()?;
    Ok(Curve { grid, at_mean, draws })
}

/// Normalized density and hazard on `[0, eps_max]` at the posterior mean of
/// `beta` and for spread draws.
pub fn shape_curves(beta_draws: &[Vec<f64>], eps_max: f64, points: usize, spaghetti: usize) -> Result<(Curve, Curve)> {
    if beta_draws.is_empty() {
        return Err(Error::Degenerate("no draws".into()));
    }
    let grid = linspace(0.0, eps_max, points);
    let eval = |b: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut w = b.to_vec();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        let c = ExpMixCoeffs::from_bernstein(&BernsteinWeights::new(w)?);
        let pdf = grid.iter().map(|&e| c.pdf(e)).collect::<Result<Vec<_>>>()?;
        let hz = grid.iter().map(|&e| c.hazard(e)).collect::<Result<Vec<_>>>()?;
        Ok((pdf, hz))
    };
    let (pdf_mean, hz_mean) = eval(&column_means(beta_draws))?;
    let mut pdf_draws = Vec::new();
    let mut hz_draws = Vec::new();
    for k in spread(beta_draws.len(), spaghetti) {
        let (p, h) = eval(&beta_draws[k])?;
        pdf_draws.push(p);
        hz_draws.push(h);
    }
    Ok((
        Curve {
            grid: grid.clone(),
            at_mean: pdf_mean,
            draws: pdf_draws,
        },
        Curve {
            grid,
            at_mean: hz_mean,
            draws: hz_draws,
        },
    ))
}
