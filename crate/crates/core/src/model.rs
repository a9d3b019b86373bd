//! Data-generating process: parameters, data, latent paths, transitions,
//! joint density and forward simulation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::density::{BernsteinWeights, ClusterLaw, ExpMixCoeffs};
use crate::error::{Error, Result};
use crate::priors::PriorHyper;
use crate::splines::{BasisRow, SplineBasis};

/// Static parameters of the model. `cluster` is `None` for the
/// regular-duration model, in which every duration is regular.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub phi: f64,
    pub sigma: f64,
    pub delta: Vec<f64>,
    pub tau: f64,
    pub beta: BernsteinWeights,
    pub xi00: f64,
    pub xi11: f64,
    pub cluster: Option<ClusterLaw>,
}

impl ModelParams {
    pub fn validate(&self, basis: &SplineBasis) -> Result<()> {
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return Err(Error::InvalidParameter(format!("phi = {}", self.phi)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma = {}", self.sigma)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau = {}", self.tau)));
        }
        if self.delta.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: self.delta.len(),
            });
        }
        if let Some(law) = &self.cluster {
            law.validate()?;
            indicator_stationary(self.xi00, self.xi11)?;
        }
        Ok(())
    }

    /// `(ln phi, ln sigma)`.
    pub fn theta(&self) -> [f64; 2] {
        [self.phi.ln(), self.sigma.ln()]
    }

    pub fn set_theta(&mut self, theta: [f64; 2]) {
        self.phi = theta[0].exp();
        self.sigma = theta[1].exp();
    }

    pub fn coeffs(&self) -> ExpMixCoeffs {
        ExpMixCoeffs::from_bernstein(&self.beta)
    }

    /// `v' delta`, the mean diurnal coefficient.
    pub fn mean_delta(&self) -> f64 {
        self.delta.iter().sum::<f64>() / self.delta.len() as f64
    }

    /// `xi_{k l}` for `k, l` in `{0, 1}`.
    pub fn transition(&self, from: u8, to: u8) -> f64 {
        let stay = if from == 0 { self.xi00 } else { self.xi11 };
        if from == to {
            stay
        } else {
            1.0 - stay
        }
    }
}

/// Stationary law `(xi_0, xi_1)` of the indicator chain.
pub fn indicator_stationary(xi00: f64, xi11: f64) -> Result<(f64, f64)> {
    let denom = 2.0 - xi00 - xi11;
    if !(denom > 0.0) {
        return Err(Error::Degenerate(format!(
            "xi00 + xi11 = {} leaves no stationary law",
            xi00 + xi11
        )));
    }
    let xi0 = (1.0 - xi11) / denom;
    Ok((xi0, 1.0 - xi0))
}

/// Moments of `x_{i+1}` given `x_i` under the sampled OU process; the lag is
/// the preceding duration.
pub fn ou_step(
    x_prev: f64,
    y_prev: f64,
    t_now: f64,
    t_prev: f64,
    p: &ModelParams,
    basis: &SplineBasis,
) -> Result<(f64, f64)> {
    if y_prev < 0.0 {
        return Err(Error::NegativeArgument(y_prev));
    }
    transition_moments(x_prev, y_prev, t_now, t_prev, p, basis)
}

fn transition_moments(
    x_prev: f64,
    lag: f64,
    t_now: f64,
    t_prev: f64,
    p: &ModelParams,
    basis: &SplineBasis,
) -> Result<(f64, f64)> {
    let m_now = basis.diurnal(&p.delta, t_now)?;
    let m_prev = basis.diurnal(&p.delta, t_prev)?;
    let rho = (-p.phi * lag).exp();
    let var = -p.sigma * p.sigma * (-2.0 * p.phi * lag).exp_m1();
    Ok((m_now + rho * (x_prev - m_prev), var))
}

/// Transaction times of one day, `t_0 <= t_1 <= ... <= t_n`, and the
/// durations between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Day {
    times: Vec<f64>,
    durations: Vec<f64>,
}

impl Day {
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidParameter("a day needs an opening time".into()));
        }
        let durations: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(&y) = durations.iter().find(|&&y| !(y >= 0.0)) {
            return Err(Error::NegativeArgument(y));
        }
        Ok(Self { times, durations })
    }

    pub fn from_durations(t0: f64, durations: &[f64]) -> Result<Self> {
        let mut times = Vec::with_capacity(durations.len() + 1);
        times.push(t0);
        let mut t = t0;
        for &y in durations {
            if !(y >= 0.0) {
                return Err(Error::NegativeArgument(y));
            }
            t += y;
            times.push(t);
        }
        Ok(Self {
            times,
            durations: durations.to_vec(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DurationData {
    pub days: Vec<Day>,
    /// Times recorded to the second.
    pub discrete: bool,
}

impl DurationData {
    pub fn new(days: Vec<Day>, discrete: bool) -> Result<Self> {
        if discrete {
            for day in &days {
                if let Some(&t) = day.times.iter().find(|t| t.fract() != 0.0) {
                    return Err(Error::NonInteger(t));
                }
            }
        }
        Ok(Self { days, discrete })
    }

    pub fn n_durations(&self) -> usize {
        self.days.iter().map(Day::len).sum()
    }

    pub fn check_domain(&self, basis: &SplineBasis) -> Result<()> {
        for day in &self.days {
            // the final time only closes the last duration; the state times must
            // lie in the session
            for &t in &day.times[..day.len()] {
                if !basis.contains(t) {
                    return Err(Error::OutOfDomain {
                        t,
                        lo: basis.t_open(),
                        hi: basis.t_close(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn all_durations(&self) -> impl Iterator<Item = f64> + '_ {
        self.days.iter().flat_map(|d| d.durations.iter().copied())
    }
}

/// Latent indicators (`0` cluster, `1` regular) and intensity states, one of
/// each per duration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DayPath {
    pub s: Vec<u8>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatentPath {
    pub days: Vec<DayPath>,
}

/// Law of the state sequence between transactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    /// The OU process sampled at transaction times; the lag is the duration.
    Ou,
    /// AR(1) with unit lag regardless of the duration.
    Homogeneous,
}

/// Free state coordinates of one day.
///
/// Under OU dynamics a zero duration makes the next state equal to the
/// current one, so observations that share a transaction time share a state.
#[derive(Debug, Clone, PartialEq)]
pub struct DayLayout {
    pub times: Vec<f64>,
    pub rows: Vec<BasisRow>,
    /// Lag between consecutive states.
    pub lags: Vec<f64>,
    /// State index of each observation.
    pub obs_state: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    pub days: Vec<DayLayout>,
    pub offsets: Vec<usize>,
    pub dynamics: Dynamics,
    n_states: usize,
}

impl StateLayout {
    pub fn new(data: &DurationData, basis: &SplineBasis, dynamics: Dynamics) -> Result<Self> {
        let mut days = Vec::with_capacity(data.days.len());
        let mut offsets = Vec::with_capacity(data.days.len() + 1);
        let mut n_states = 0;
        for day in &data.days {
            offsets.push(n_states);
            let times = &day.times;
            let mut layout = DayLayout {
                times: Vec::new(),
                rows: Vec::new(),
                lags: Vec::new(),
                obs_state: Vec::with_capacity(day.len()),
            };
            for i in 0..day.len() {
                let t = times[i];
                let merge = dynamics == Dynamics::Ou && i > 0 && t == times[i - 1];
                if !merge {
                    if let Some(&prev) = layout.times.last() {
                        layout.lags.push(match dynamics {
                            Dynamics::Ou => t - prev,
                            Dynamics::Homogeneous => 1.0,
                        });
                    }
                    layout.times.push(t);
                    layout.rows.push(basis.eval_row(t)?);
                }
                layout.obs_state.push(layout.times.len() - 1);
            }
            n_states += layout.times.len();
            days.push(layout);
        }
        offsets.push(n_states);
        Ok(Self {
            days,
            offsets,
            dynamics,
            n_states,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Global state index of observation `i` of day `d`.
    pub fn state_of(&self, d: usize, i: usize) -> usize {
        self.offsets[d] + self.days[d].obs_state[i]
    }

    /// Free coordinates from a per-observation path.
    pub fn reduce(&self, path: &LatentPath) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        for (d, (layout, day)) in self.days.iter().zip(&path.days).enumerate() {
            for (i, &k) in layout.obs_state.iter().enumerate() {
                out[self.offsets[d] + k] = day.x[i];
            }
        }
        out
    }

    /// Per-observation states from the free coordinates.
    pub fn expand_into(&self, states: &[f64], path: &mut LatentPath) {
        for (d, (layout, day)) in self.days.iter().zip(path.days.iter_mut()).enumerate() {
            day.x.clear();
            day.x
                .extend(layout.obs_state.iter().map(|&k| states[self.offsets[d] + k]));
        }
    }

    /// Diurnal level at every state time.
    pub fn diurnal_levels(&self, delta: &[f64]) -> Vec<f64> {
        self.days
            .iter()
            .flat_map(|l| l.rows.iter().map(|r| r.dot(delta)))
            .collect()
    }
}

/// Log density of the state sequence in free coordinates.
pub fn state_log_density(
    layout: &StateLayout,
    states: &[f64],
    phi: f64,
    sigma: f64,
    delta: &[f64],
) -> f64 {
    let levels = layout.diurnal_levels(delta);
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let mut total = 0.0;
    for (d, day) in layout.days.iter().enumerate() {
        let off = layout.offsets[d];
        if day.times.is_empty() {
            continue;
        }
        let z0 = states[off] - levels[off];
        total += -0.5 * (ln2pi + 2.0 * sigma.ln() + z0 * z0 / (sigma * sigma));
        for (k, &lag) in day.lags.iter().enumerate() {
            let rho = (-phi * lag).exp();
            let var = -sigma * sigma * (-2.0 * phi * lag).exp_m1();
            let z_prev = states[off + k] - levels[off + k];
            let z = states[off + k + 1] - levels[off + k + 1];
            let r = z - rho * z_prev;
            total += -0.5 * (ln2pi + var.ln() + r * r / var);
        }
    }
    total
}

/// Log probability of the indicators of one day.
fn indicator_log_prob(s: &[u8], p: &ModelParams) -> Result<f64> {
    let Some(first) = s.first() else {
        return Ok(0.0);
    };
    let (xi0, xi1) = indicator_stationary(p.xi00, p.xi11)?;
    let mut total = if *first == 0 { xi0.ln() } else { xi1.ln() };
    for w in s.windows(2) {
        total += p.transition(w[0], w[1]).ln();
    }
    Ok(total)
}

/// `ln p(y | s, x)` for one duration.
pub fn observation_log_density(
    y: f64,
    s: u8,
    x: f64,
    coeffs: &ExpMixCoeffs,
    cluster: Option<&ClusterLaw>,
    discrete: bool,
) -> Result<f64> {
    if s == 0 {
        let law = cluster.ok_or_else(|| {
            Error::ModelViolation("cluster indicator in the regular-duration model".into())
        })?;
        law.ln_density(y)
    } else if discrete {
        coeffs.regular_ln_pmf(y, x)
    } else {
        coeffs.regular_ln_pdf(y, x)
    }
}

/// Joint log density of data and latent variables given the parameters.
///
/// Equal states joined by a zero-lag OU transition carry no density term;
/// the density is with respect to the free coordinates of the layout.
pub fn conditional_log_density(
    p: &ModelParams,
    path: &LatentPath,
    data: &DurationData,
    basis: &SplineBasis,
    dynamics: Dynamics,
) -> Result<f64> {
    if path.days.len() != data.days.len() {
        return Err(Error::DimensionMismatch {
            expected: data.days.len(),
            got: path.days.len(),
        });
    }
    let layout = StateLayout::new(data, basis, dynamics)?;
    for (d, (lay, day)) in layout.days.iter().zip(&path.days).enumerate() {
        let n = data.days[d].len();
        if day.x.len() != n || day.s.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: day.x.len().min(day.s.len()),
            });
        }
        for i in 1..n {
            if lay.obs_state[i] == lay.obs_state[i - 1] && day.x[i] != day.x[i - 1] {
                return Ok(f64::NEG_INFINITY);
            }
        }
    }
    let states = layout.reduce(path);
    let mut total = state_log_density(&layout, &states, p.phi, p.sigma, &p.delta);
    let coeffs = p.coeffs();
    for (day_data, day) in data.days.iter().zip(&path.days) {
        if p.cluster.is_some() {
            total += indicator_log_prob(&day.s, p)?;
        }
        for (i, &y) in day_data.durations().iter().enumerate() {
            total += observation_log_density(
                y,
                day.s[i],
                day.x[i],
                &coeffs,
                p.cluster.as_ref(),
                data.discrete,
            )?;
        }
    }
    Ok(total)
}

/// Log prior plus [`conditional_log_density`].
pub fn joint_log_density(
    p: &ModelParams,
    hyper: &PriorHyper,
    path: &LatentPath,
    data: &DurationData,
    basis: &SplineBasis,
    dynamics: Dynamics,
) -> Result<f64> {
    let prior = crate::priors::log_prior(p, hyper)?;
    Ok(prior.total() + conditional_log_density(p, path, data, basis, dynamics)?)
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw a regular duration with conditional scale `exp(x)`; in discrete mode
/// the value recorded to the second has the censored pmf.
fn draw_regular<R: Rng + ?Sized>(
    x: f64,
    coeffs: &ExpMixCoeffs,
    beta: &BernsteinWeights,
    discrete: bool,
    rng: &mut R,
) -> f64 {
    let u = x.exp() * coeffs.sample(beta, rng);
    if discrete {
        u.floor() + if rng.random::<bool>() { 1.0 } else { 0.0 }
    } else {
        u
    }
}

/// Draw one duration given its indicator and state.
pub fn draw_duration<R: Rng + ?Sized>(
    s: u8,
    x: f64,
    p: &ModelParams,
    coeffs: &ExpMixCoeffs,
    discrete: bool,
    rng: &mut R,
) -> f64 {
    if s == 0 {
        p.cluster
            .as_ref()
            .expect("cluster indicator requires a cluster law")
            .sample(rng)
    } else {
        draw_regular(x, coeffs, &p.beta, discrete, rng)
    }
}

/// How many durations a simulated day holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DayLength {
    /// Trade until the next time would pass the close.
    UntilClose,
    /// Exactly `n` durations.
    Fixed(usize),
}

/// Forward simulation of `days` days starting at the open.
pub fn simulate<R: Rng + ?Sized>(
    p: &ModelParams,
    days: usize,
    basis: &SplineBasis,
    dynamics: Dynamics,
    length: DayLength,
    discrete: bool,
    rng: &mut R,
) -> Result<(DurationData, LatentPath)> {
    p.validate(basis)?;
    if discrete {
        if let Some(ClusterLaw::Continuous { .. }) = p.cluster {
            return Err(Error::ModelViolation(
                "discrete simulation needs the Bernoulli cluster law".into(),
            ));
        }
    } else if let Some(ClusterLaw::Discrete { .. }) = p.cluster {
        return Err(Error::ModelViolation(
            "continuous simulation needs the exponential-mixture cluster law".into(),
        ));
    }
    let coeffs = p.coeffs();
    let stationary = match p.cluster {
        Some(_) => indicator_stationary(p.xi00, p.xi11)?.0,
        None => 0.0,
    };
    let t_open = if discrete {
        basis.t_open().ceil()
    } else {
        basis.t_open()
    };
    let mut out_days = Vec::with_capacity(days);
    let mut paths = Vec::with_capacity(days);
    for _ in 0..days {
        let mut times = vec![t_open];
        let mut path = DayPath::default();
        let mut s = u8::from(p.cluster.is_none() || rng.random::<f64>() >= stationary);
        let mut x = basis.diurnal(&p.delta, t_open)? + p.sigma * normal(rng);
        loop {
            if let DayLength::Fixed(n) = length {
                if path.s.len() == n {
                    break;
                }
            }
            let y = draw_duration(s, x, p, &coeffs, discrete, rng);
            let t_prev = *times.last().unwrap();
            let t = t_prev + y;
            if length == DayLength::UntilClose && t > basis.t_close() {
                break;
            }
            times.push(t);
            path.s.push(s);
            path.x.push(x);
            if let DayLength::Fixed(n) = length {
                if path.s.len() == n {
                    break;
                }
            }
            if !basis.contains(t) {
                return Err(Error::OutOfDomain {
                    t,
                    lo: basis.t_open(),
                    hi: basis.t_close(),
                });
            }
            if p.cluster.is_some() {
                let stay = rng.random::<f64>() < p.transition(s, s);
                if !stay {
                    s = 1 - s;
                }
            }
            let lag = match dynamics {
                Dynamics::Ou => y,
                Dynamics::Homogeneous => 1.0,
            };
            if lag > 0.0 {
                let (mean, var) = transition_moments(x, lag, t, t_prev, p, basis)?;
                x = mean + var.sqrt() * normal(rng);
            }
        }
        out_days.push(Day::from_times(times)?);
        paths.push(path);
    }
    Ok((
        DurationData::new(out_days, discrete)?,
        LatentPath { days: paths },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn basis() -> SplineBasis {
        SplineBasis::new(0.0, 600.0, 2).unwrap()
    }

    fn params(cluster: Option<ClusterLaw>) -> ModelParams {
        ModelParams {
            phi: 0.03,
            sigma: 0.25,
            delta: vec![1.0, 0.8, 1.2, 1.0],
            tau: 200.0,
            beta: BernsteinWeights::new(vec![0.5, 0.3, 0.2]).unwrap(),
            xi00: 0.4,
            xi11: 0.8,
            cluster,
        }
    }

    fn continuous_law() -> Option<ClusterLaw> {
        Some(ClusterLaw::Continuous {
            lambda1: 100.0,
            lambda2: 50.0,
            pi: 0.5,
        })
    }

    #[test]
    fn stationary_law() {
        let (a, b) = indicator_stationary(0.5, 0.5).unwrap();
        assert!((a - 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        let (xi0, xi1) = indicator_stationary(0.4, 0.8).unwrap();
        assert!((xi0 - 0.25).abs() < 1e-15);
        // left eigenvector of the transition matrix
        assert!((xi0 * 0.4 + xi1 * 0.2 - xi0).abs() < 1e-15);
        assert!(matches!(indicator_stationary(1.0, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ou_step_limits() {
        let b = basis();
        let p = params(None);
        let (mean, var) = ou_step(2.0, 0.0, 100.0, 100.0, &p, &b).unwrap();
        assert!((mean - 2.0).abs() < 1e-15);
        assert_eq!(var, 0.0);
        let mut fast = p.clone();
        fast.phi = 50.0 / 10.0;
        let (mean, var) = ou_step(2.0, 10.0, 110.0, 100.0, &fast, &b).unwrap();
        assert!((mean - b.diurnal(&p.delta, 110.0).unwrap()).abs() < 1e-15);
        assert!((var - p.sigma * p.sigma).abs() < 1e-15);
        assert!(ou_step(0.0, 1.0, 700.0, 699.0, &p, &b).is_err());
    }

    #[test]
    fn half_life_lag() {
        let phi: f64 = 0.00296;
        let lag = 2f64.ln() / phi;
        assert!((lag - 234.2).abs() < 0.05);
        assert!(((-phi * lag).exp() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn layout_merges_zero_lags_under_ou_only() {
        let b = SplineBasis::new(0.0, 100.0, 3).unwrap();
        let data = DurationData::new(
            vec![Day::from_times(vec![10.0, 10.0, 10.0, 12.0, 15.0]).unwrap()],
            true,
        )
        .unwrap();
        let ou = StateLayout::new(&data, &b, Dynamics::Ou).unwrap();
        assert_eq!(ou.days[0].obs_state, vec![0, 0, 0, 1]);
        assert_eq!(ou.days[0].lags, vec![2.0]);
        let hom = StateLayout::new(&data, &b, Dynamics::Homogeneous).unwrap();
        assert_eq!(hom.n_states(), 4);
        assert_eq!(hom.days[0].lags, vec![1.0; 3]);
    }

    #[test]
    fn single_regular_observation() {
        let b = basis();
        let mut p = params(None);
        p.beta = BernsteinWeights::uniform(3);
        let data = DurationData::new(vec![Day::from_durations(0.0, &[1.7]).unwrap()], false).unwrap();
        let x = b.diurnal(&p.delta, 0.0).unwrap();
        let path = LatentPath {
            days: vec![DayPath { s: vec![1], x: vec![x] }],
        };
        let total = conditional_log_density(&p, &path, &data, &b, Dynamics::Ou).unwrap();
        let state = -0.5 * ((2.0 * std::f64::consts::PI).ln() + 2.0 * p.sigma.ln());
        let obs = -x - 1.7 * (-x).exp();
        assert!((total - state - obs).abs() < 1e-12);
    }

    /// HMM forward recursion over the indicators, an independent route to
    /// the marginal over `s`.
    fn forward_marginal(p: &ModelParams, y: &[f64], x: &[f64], discrete: bool) -> f64 {
        let c = p.coeffs();
        let law = p.cluster.as_ref().unwrap();
        let (xi0, xi1) = indicator_stationary(p.xi00, p.xi11).unwrap();
        let emit = |i: usize, s: u8| {
            observation_log_density(y[i], s, x[i], &c, Some(law), discrete)
                .unwrap()
                .exp()
        };
        let mut f = [xi0 * emit(0, 0), xi1 * emit(0, 1)];
        for i in 1..y.len() {
            let mut g = [0.0; 2];
            for to in 0..2u8 {
                let inflow: f64 = (0..2u8).map(|from| f[from as usize] * p.transition(from, to)).sum();
                g[to as usize] = inflow * emit(i, to);
            }
            f = g;
        }
        f[0] + f[1]
    }

    #[test]
    fn enumeration_over_indicators_matches_forward_recursion() {
        let b = basis();
        for &(discrete, ref ys) in &[
            (false, vec![0.02, 1.5, 0.3]),
            (true, vec![0.0, 1.0, 3.0]),
            (false, vec![2.2, 0.01]),
        ] {
            let mut p = params(if discrete {
                Some(ClusterLaw::Discrete { zeta: 0.9 })
            } else {
                continuous_law()
            });
            p.xi00 = 0.6;
            let day = Day::from_durations(0.0, ys).unwrap();
            let data = DurationData::new(vec![day], discrete).unwrap();
            let n = ys.len();
            // a grid over the leading state; later states follow a fixed offset
            for g in 0..5 {
                let x: Vec<f64> = (0..n).map(|i| -0.5 + 0.4 * g as f64 + 0.1 * i as f64).collect();
                let mut total = 0.0;
                for code in 0..(1u32 << n) {
                    let s: Vec<u8> = (0..n).map(|i| ((code >> i) & 1) as u8).collect();
                    let path = LatentPath {
                        days: vec![DayPath { s, x: x.clone() }],
                    };
                    let lp = conditional_log_density(&p, &path, &data, &b, Dynamics::Homogeneous).unwrap();
                    total += lp.exp();
                }
                let layout = StateLayout::new(&data, &b, Dynamics::Homogeneous).unwrap();
                let state = state_log_density(&layout, &x, p.phi, p.sigma, &p.delta).exp();
                let expected = state * forward_marginal(&p, ys, &x, discrete);
                assert!(
                    ((total - expected) / expected).abs() < 1e-10,
                    "{total} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn regular_model_drops_indicator_factors() {
        let b = basis();
        let p_all = params(continuous_law());
        let p_reg = params(None);
        let data = DurationData::new(vec![Day::from_durations(0.0, &[1.0, 2.0]).unwrap()], false).unwrap();
        let path = LatentPath {
            days: vec![DayPath {
                s: vec![1, 1],
                x: vec![1.0, 1.1],
            }],
        };
        let all = conditional_log_density(&p_all, &path, &data, &b, Dynamics::Ou).unwrap();
        let reg = conditional_log_density(&p_reg, &path, &data, &b, Dynamics::Ou).unwrap();
        let ind = indicator_log_prob(&[1, 1], &p_all).unwrap();
        assert!((all - ind - reg).abs() < 1e-12);
    }

    #[test]
    fn days_are_independent() {
        let b = basis();
        let p = params(continuous_law());
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let (data, path) =
            simulate(&p, 3, &b, Dynamics::Ou, DayLength::Fixed(20), false, &mut rng).unwrap();
        let whole = conditional_log_density(&p, &path, &data, &b, Dynamics::Ou).unwrap();
        let mut sum = 0.0;
        for d in 0..3 {
            let one = DurationData::new(vec![data.days[d].clone()], false).unwrap();
            let pd = LatentPath {
                days: vec![path.days[d].clone()],
            };
            sum += conditional_log_density(&p, &pd, &one, &b, Dynamics::Ou).unwrap();
        }
        assert!((whole - sum).abs() < 1e-9);
    }

    #[test]
    fn simulated_paths_have_finite_density() {
        let b = SplineBasis::new(0.0, 3600.0, 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for (discrete, law) in [
            (false, continuous_law()),
            (true, Some(ClusterLaw::Discrete { zeta: 0.95 })),
        ] {
            let mut p = params(law);
            p.delta = vec![1.0, 1.5, 0.5, 1.0, 1.2, 0.9];
            for _ in 0..200 {
                let (data, path) =
                    simulate(&p, 1, &b, Dynamics::Ou, DayLength::UntilClose, discrete, &mut rng).unwrap();
                let lp = conditional_log_density(&p, &path, &data, &b, Dynamics::Ou).unwrap();
                assert!(lp.is_finite());
                assert!(*data.days[0].times().last().unwrap() <= 3600.0);
                if discrete {
                    for (y, s) in data.days[0].durations().iter().zip(&path.days[0].s) {
                        assert!(*s == 1 || *y <= 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn absorbing_regular_state() {
        let b = basis();
        let mut p = params(continuous_law());
        p.xi11 = 1.0;
        p.xi00 = 0.5;
        // xi_1 = 1 makes every day start and stay regular
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let (_, path) = simulate(&p, 5, &b, Dynamics::Ou, DayLength::Fixed(30), false, &mut rng).unwrap();
        assert!(path.days.iter().all(|d| d.s.iter().all(|&s| s == 1)));
    }

    #[test]
    fn exponential_durations_without_state_noise() {
        let b = SplineBasis::new(0.0, 1e7, 2).unwrap();
        let mut p = params(None);
        p.sigma = 1e-9;
        p.delta = vec![0.7; 4];
        p.beta = BernsteinWeights::uniform(3);
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let (data, _) = simulate(&p, 1, &b, Dynamics::Ou, DayLength::Fixed(100_000), false, &mut rng).unwrap();
        let ys = data.days[0].durations();
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let expected = 0.7f64.exp();
        // exponential: sd equals the mean
        assert!((mean - expected).abs() < 3.0 * expected / n.sqrt(), "{mean}");
    }

    #[test]
    fn discrete_simulation_matches_pmf() {
        let b = SplineBasis::new(0.0, 1e7, 2).unwrap();
        let mut p = params(None);
        p.sigma = 1e-9;
        p.delta = vec![0.4; 4];
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let n = 200_000;
        let (data, _) = simulate(&p, 1, &b, Dynamics::Ou, DayLength::Fixed(n), true, &mut rng).unwrap();
        let c = p.coeffs();
        for y in 0..5u32 {
            let emp = data.days[0].durations().iter().filter(|&&v| v == y as f64).count() as f64 / n as f64;
            let exact = c.regular_ln_pmf(y as f64, 0.4).unwrap().exp();
            let se = (exact * (1.0 - exact) / n as f64).sqrt();
            assert!((emp - exact).abs() < 4.0 * se, "y = {y}: {emp} vs {exact}");
        }
    }

    #[test]
    fn ou_correlation_at_fixed_lag() {
        let b = SplineBasis::new(0.0, 1e6, 2).unwrap();
        let mut p = params(None);
        p.phi = 0.01;
        p.delta = vec![0.0; 4];
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        // pairs (x(t), x(t + 50)) from the transition law
        let lag = 50.0;
        let n = 100_000;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for _ in 0..n {
            let x0 = p.sigma * normal(&mut rng);
            let (m, v) = ou_step(x0, lag, 100.0 + lag, 100.0, &p, &b).unwrap();
            let x1 = m + v.sqrt() * normal(&mut rng);
            sxy += x0 * x1;
            sxx += x0 * x0;
        }
        let corr = sxy / sxx;
        assert!((corr - (-p.phi * lag).exp()).abs() < 0.01, "{corr}");
    }

    #[test]
    fn simulation_is_deterministic() {
        let b = basis();
        let p = params(continuous_law());
        let run = || {
            let mut rng = ChaCha12Rng::seed_from_u64(77);
            simulate(&p, 2, &b, Dynamics::Ou, DayLength::UntilClose, false, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }
}
