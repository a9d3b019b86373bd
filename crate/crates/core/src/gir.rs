//! Joint simulator over parameters, latent variables and data whose
//! parameter marginals must equal the prior when every sampler block is
//! correct.
//!
//! The states follow a unit-lag AR(1) so that redrawing the durations only
//! moves the diurnal levels.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::diagnostics::{format_mean_tests, mean_test, MeanTest};
use crate::density::ClusterLaw;
use crate::error::{Error, Result};
use crate::mcmc::adapt::{ParamMove, ScaledT};
use crate::mcmc::{ChainState, Moves, Sampler};
use crate::model::{draw_duration, simulate, state_log_density, Day, DayLength, DurationData, Dynamics, ModelParams, StateLayout};
use crate::priors::{dirichlet_logistic_moments, prior_means, sample_prior, ModelConfig, ModelVariant};
use crate::splines::SplineBasis;
use crate::state_sampler::NewtonConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct GirConfig {
    /// Durations per day.
    pub n: usize,
    pub days: usize,
    pub model: ModelConfig,
    pub sweeps: usize,
    pub newton: NewtonConfig,
    /// Added to the degrees of freedom of the `tau` conditional.
    pub tau_dof_bias: f64,
}

impl GirConfig {
    /// The standard setting: one 600 s session with 50 durations.
    pub fn standard(discrete: bool, sweeps: usize) -> Result<Self> {
        let mut model = ModelConfig::preset("gir")?;
        model.shape.discrete = discrete;
        Ok(Self {
            n: 50,
            days: 1,
            model,
            sweeps,
            newton: NewtonConfig::default(),
            tau_dof_bias: 0.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.days == 0 || self.sweeps < 4 {
            return Err(Error::Config(format!(
                "need positive durations, days and at least 4 sweeps (n = {}, days = {}, sweeps = {})",
                self.n, self.days, self.sweeps
            )));
        }
        self.model.shape.validate()?;
        self.model.prior.validate(&self.model.shape)
    }
}

/// Moments of the next state under the unit-lag dynamics.
pub fn gir_state_step(
    x_prev: f64,
    t_now: f64,
    t_prev: f64,
    p: &ModelParams,
    basis: &SplineBasis,
) -> Result<(f64, f64)> {
    let m_now = basis.diurnal(&p.delta, t_now)?;
    let m_prev = basis.diurnal(&p.delta, t_prev)?;
    let rho = (-p.phi).exp();
    let var = -p.sigma * p.sigma * (-2.0 * p.phi).exp_m1();
    Ok((m_now + rho * (x_prev - m_prev), var))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Redraw {
    /// The proposed data, which replaces the current data when accepted.
    pub data: DurationData,
    pub accepted: bool,
    /// A proposed state time fell after the close.
    pub overflow: bool,
    pub log_ratio: f64,
}

/// Independent proposal of every duration from its observation law given
/// the indicators and states, accepted jointly with the ratio of state
/// densities at the new and old transaction times.
pub fn redraw_data<R: Rng + ?Sized>(
    data: &DurationData,
    state: &ChainState,
    layout: &StateLayout,
    basis: &SplineBasis,
    rng: &mut R,
) -> Result<Redraw> {
    let p = &state.params;
    let coeffs = p.coeffs();
    let mut days = Vec::with_capacity(data.days.len());
    for (d, day) in data.days.iter().enumerate() {
        let ys: Vec<f64> = (0..day.len())
            .map(|i| {
                let x = state.states[layout.state_of(d, i)];
                draw_duration(state.indicators[d][i], x, p, &coeffs, data.discrete, rng)
            })
            .collect();
        days.push(Day::from_durations(day.times()[0], &ys)?);
    }
    let proposed = DurationData::new(days, data.discrete)?;
    if proposed.check_domain(basis).is_err() {
        return Ok(Redraw {
            data: proposed,
            accepted: false,
            overflow: true,
            log_ratio: f64::NEG_INFINITY,
        });
    }
    let new_layout = StateLayout::new(&proposed, basis, layout.dynamics)?;
    let log_ratio = state_log_density(&new_layout, &state.states, p.phi, p.sigma, &p.delta)
        - state_log_density(layout, &state.states, p.phi, p.sigma, &p.delta);
    let accepted = log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp();
    Ok(Redraw {
        data: proposed,
        accepted,
        overflow: false,
        log_ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GirReport {
    pub discrete: bool,
    pub sweeps: usize,
    pub rows: Vec<MeanTest>,
    pub redraw_rate: f64,
    pub overflows: u64,
    pub theta_rate: f64,
    pub beta_rate: f64,
}

impl GirReport {
    pub fn row(&self, name: &str) -> Option<&MeanTest> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# {} model, {} sweeps\n# acceptance: theta {:.3}, beta {:.3}, data {:.3}; {} proposals past the close\n",
            if self.discrete { "discrete" } else { "continuous" },
            self.sweeps,
            self.theta_rate,
            self.beta_rate,
            self.redraw_rate,
            self.overflows
        );
        out.push_str(&format_mean_tests(&self.rows));
        out
    }
}

fn recorded(p: &ModelParams) -> Vec<f64> {
    let theta = p.theta();
    let mut row = vec![theta[0], theta[1], p.tau, p.mean_delta()];
    row.extend_from_slice(p.beta.as_slice());
    if let Some(law) = p.cluster {
        row.extend([p.xi00, p.xi11]);
        match law {
            ClusterLaw::Discrete { zeta } => row.push(zeta),
            ClusterLaw::Continuous { lambda1, lambda2, pi } => row.extend([lambda1, lambda2, pi]),
        }
    }
    row
}

/// Exact draw of parameters, latent path and data from the prior, restricted
/// to state times inside the session.
pub fn sample_joint<R: Rng + ?Sized>(
    config: &GirConfig,
    basis: &SplineBasis,
    rng: &mut R,
) -> Result<(ModelParams, DurationData, crate::model::LatentPath)> {
    let shape = &config.model.shape;
    for _ in 0..10_000 {
        let params = sample_prior(&config.model.prior, shape, rng)?;
        match simulate(&params, config.days, basis, Dynamics::Homogeneous, DayLength::Fixed(config.n), shape.discrete, rng) {
            Ok((data, path)) => return Ok((params, data, path)),
            Err(Error::OutOfDomain { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Degenerate("prior draws keep overrunning the session".into()))
}

/// Run the successive-conditional simulator and compare every recorded
/// parameter mean with its prior mean.
pub fn run_gir<R: Rng + ?Sized>(config: &GirConfig, rng: &mut R) -> Result<GirReport> {
    config.validate()?;
    let shape = &config.model.shape;
    let hyper = &config.model.prior;
    let basis = shape.basis()?;
    let (params, data, path) = sample_joint(config, &basis, rng)?;
    let mut sampler = Sampler::new(data, basis.clone(), hyper.clone(), shape.model, shape.j, Dynamics::Homogeneous)?;
    sampler.newton = config.newton;
    sampler.warm_start = false;
    sampler.tau_dof_bias = config.tau_dof_bias;
    let mut state = sampler.state_from_path(params, &path)?;

    let cov = hyper.theta_cov();
    let theta_prior = ScaledT::new(
        DVector::from_row_slice(&hyper.theta_bar),
        DMatrix::from_row_slice(2, 2, &[cov[0][0], cov[0][1], cov[1][0], cov[1][1]]),
        None,
    )?;
    let (mean, cov) = dirichlet_logistic_moments(sampler.concentration())?;
    let beta_prior = ScaledT::new(DVector::from_vec(mean), cov, None)?;
    let mut moves = Moves {
        theta: ParamMove::Independent(theta_prior),
        beta: ParamMove::Independent(beta_prior),
    };

    let means = prior_means(hyper, shape)?;
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(config.sweeps); means.len()];
    let (mut theta_acc, mut beta_acc, mut redraws, mut overflows) = (0u64, 0u64, 0u64, 0u64);
    for _ in 0..config.sweeps {
        let out = sampler.sweep(&mut state, &mut moves, rng)?;
        theta_acc += out.theta.accepted as u64;
        beta_acc += out.beta.accepted as u64;
        let redraw = redraw_data(sampler.data(), &state, sampler.layout(), &basis, rng)?;
        overflows += redraw.overflow as u64;
        if redraw.accepted {
            redraws += 1;
            sampler.set_data(redraw.data)?;
        }
        for (column, v) in series.iter_mut().zip(recorded(&state.params)) {
            column.push(v);
        }
    }
    let rows = means
        .iter()
        .zip(&series)
        .map(|((name, m), s)| mean_test(name, s, *m))
        .collect::<Result<Vec<_>>>()?;
    let n = config.sweeps as f64;
    Ok(GirReport {
        discrete: shape.discrete,
        sweeps: config.sweeps,
        rows,
        redraw_rate: redraws as f64 / n,
        overflows,
        theta_rate: theta_acc as f64 / n,
        beta_rate: beta_acc as f64 / n,
    })
}

/// Number of report rows of the model variant.
pub fn report_len(model: ModelVariant, discrete: bool) -> usize {
    match (model, discrete) {
        (ModelVariant::Regular, _) => 7,
        (ModelVariant::All, true) => 10,
        (ModelVariant::All, false) => 12,
    }
}
