//! Gibbs sampler over parameters, states and indicators.
//!
//! One sweep updates `(x, phi, sigma)`, `(x, beta)`, `(delta, tau)` and, in
//! the all-duration model, the indicators, the transition probabilities and
//! the cluster law.

pub mod adapt;
pub mod blocks;
pub mod store;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::density::{BernsteinWeights, ClusterLaw, ExpMixCoeffs};
use crate::error::{Error, Result};
use crate::model::{DayPath, DurationData, Dynamics, LatentPath, ModelParams, StateLayout};
use crate::priors::{beta_log_prior, sample_beta, sample_gamma, theta_log_prior, ModelConfig, ModelVariant, PriorHyper};
use crate::splines::SplineBasis;
use crate::state_sampler::{
    build_proposal, state_prior, FactoredGaussian, NewtonConfig, RegularObservations, StateMeasurement, StateProposal,
    TridiagGaussian,
};

use adapt::{moments, ParamMove, RobustAdaptive, ScaledT};
use blocks::{
    cluster_posterior, component_prob, delta_posterior, indicator_log_weights, prob_cluster, tau_posterior,
    transition_counts, xi_log_acceptance, xi_proposal, zeta_posterior,
};
use store::{ClassificationTable, DrawTable};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub burn_in: usize,
    pub sweeps: usize,
    pub thin: usize,
    /// Degrees of freedom of the frozen parameter proposals.
    pub dof: f64,
    /// Acceptance rate the burn-in random walks adapt towards.
    pub target_rate: f64,
    pub seed: u64,
    pub newton: NewtonConfig,
    /// Start the mode search at the current states instead of the prior mean.
    pub warm_start: bool,
    /// Added to the degrees of freedom of the `tau` conditional; nonzero only
    /// to check that the correctness harness catches a wrong sampler.
    pub tau_dof_bias: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            burn_in: 15_000,
            sweeps: 50_000,
            thin: 1,
            dof: 15.0,
            target_rate: 0.234,
            seed: 0,
            newton: NewtonConfig::default(),
            warm_start: true,
            tau_dof_bias: 0.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.thin == 0 {
            return Err(Error::Config("sweeps and thinning must be positive".into()));
        }
        if self.burn_in < 4 {
            return Err(Error::Config(format!("burn-in of {} sweeps is too short to adapt", self.burn_in)));
        }
        if !(self.dof > 2.0) {
            return Err(Error::Config(format!("proposal degrees of freedom {} must exceed 2", self.dof)));
        }
        if !(self.target_rate > 0.0 && self.target_rate < 1.0) {
            return Err(Error::Config(format!("target rate {} outside (0, 1)", self.target_rate)));
        }
        Ok(())
    }
}

/// Everything the sampler updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub params: ModelParams,
    /// Free state coordinates of the layout.
    pub states: Vec<f64>,
    /// `s[d][i]`, 1 for a regular duration.
    pub indicators: Vec<Vec<u8>>,
    /// Mixture component (1 or 2) of each continuous cluster duration, 0
    /// elsewhere.
    pub components: Vec<Vec<u8>>,
    pub sweep: u64,
}

impl ChainState {
    pub fn path(&self, layout: &StateLayout) -> LatentPath {
        let mut path = LatentPath {
            days: self
                .indicators
                .iter()
                .map(|s| DayPath {
                    s: s.clone(),
                    x: Vec::new(),
                })
                .collect(),
        };
        layout.expand_into(&self.states, &mut path);
        path
    }
}

/// Gaussian prior, measurement terms and block proposal of the states for
/// fixed parameters.
#[derive(Debug, Clone)]
struct Conditional {
    prior: TridiagGaussian,
    prior_density: FactoredGaussian,
    meas: RegularObservations,
    proposal: StateProposal,
}

impl Conditional {
    fn log_target(&self, x: &[f64]) -> f64 {
        self.prior_density.logpdf(x) + self.meas.value(x)
    }
}

/// Proposal machinery of the two joint parameter/state blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Moves {
    pub theta: ParamMove,
    pub beta: ParamMove,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MoveOutcome {
    pub accepted: bool,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepOutcome {
    pub theta: MoveOutcome,
    pub beta: MoveOutcome,
    pub xi: bool,
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> MoveOutcome {
    if log_ratio.is_nan() {
        return MoveOutcome::default();
    }
    let prob = log_ratio.min(0.0).exp();
    MoveOutcome {
        accepted: log_ratio >= 0.0 || rng.random::<f64>() < prob,
        prob,
    }
}

/// Data, model and prior for one chain.
#[derive(Debug, Clone)]
pub struct Sampler {
    data: DurationData,
    basis: SplineBasis,
    hyper: PriorHyper,
    variant: ModelVariant,
    layout: StateLayout,
    conc: Vec<f64>,
    pub newton: NewtonConfig,
    pub warm_start: bool,
    pub tau_dof_bias: f64,
}

impl Sampler {
    pub fn new(
        data: DurationData,
        basis: SplineBasis,
        hyper: PriorHyper,
        variant: ModelVariant,
        j_order: usize,
        dynamics: Dynamics,
    ) -> Result<Self> {
        data.check_domain(&basis)?;
        let layout = StateLayout::new(&data, &basis, dynamics)?;
        let conc = hyper.dirichlet_conc(j_order)?;
        Ok(Self {
            data,
            basis,
            hyper,
            variant,
            layout,
            conc,
            newton: NewtonConfig::default(),
            warm_start: true,
            tau_dof_bias: 0.0,
        })
    }

    pub fn from_config(data: DurationData, config: &ModelConfig, dynamics: Dynamics) -> Result<Self> {
        config.shape.validate()?;
        config.prior.validate(&config.shape)?;
        if data.discrete != config.shape.discrete {
            return Err(Error::Config(format!(
                "data recorded {} but the model is {}",
                if data.discrete { "to the second" } else { "continuously" },
                if config.shape.discrete { "discrete" } else { "continuous" }
            )));
        }
        Self::new(
            data,
            config.shape.basis()?,
            config.prior.clone(),
            config.shape.model,
            config.shape.j,
            dynamics,
        )
    }

    pub fn configure(&mut self, config: &SamplerConfig) {
        self.newton = config.newton;
        self.warm_start = config.warm_start;
        self.tau_dof_bias = config.tau_dof_bias;
    }

    pub fn data(&self) -> &DurationData {
        &self.data
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    pub fn hyper(&self) -> &PriorHyper {
        &self.hyper
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn concentration(&self) -> &[f64] {
        &self.conc
    }

    /// Replace the data; the indicator arrays of any chain state must keep
    /// their shape.
    pub fn set_data(&mut self, data: DurationData) -> Result<()> {
        data.check_domain(&self.basis)?;
        self.layout = StateLayout::new(&data, &self.basis, self.layout.dynamics)?;
        self.data = data;
        Ok(())
    }

    /// Starting point for a fit: prior means, a flat diurnal pattern at the
    /// log mean duration and states at their conditional mode.
    pub fn initial_params(&self) -> Result<ModelParams> {
        let h = &self.hyper;
        let positive: Vec<f64> = self.data.all_durations().filter(|&y| y > 0.0).collect();
        let level = if positive.is_empty() {
            h.delta_bar
        } else {
            (positive.iter().sum::<f64>() / positive.len() as f64).ln()
        };
        let cluster = match self.variant {
            ModelVariant::Regular => None,
            ModelVariant::All if self.data.discrete => {
                let (a, b) = h.zeta()?;
                Some(ClusterLaw::Discrete { zeta: a / (a + b) })
            }
            ModelVariant::All => {
                let c = h.cluster_continuous()?;
                Some(ClusterLaw::Continuous {
                    lambda1: c.lambda1.0 / c.lambda1.1,
                    lambda2: c.lambda2.0 / c.lambda2.1,
                    pi: c.pi.0 / (c.pi.0 + c.pi.1),
                })
            }
        };
        let total: f64 = self.conc.iter().sum();
        Ok(ModelParams {
            phi: h.theta_bar[0].exp(),
            sigma: h.theta_bar[1].exp(),
            delta: vec![level; self.basis.dim()],
            tau: h.nu_bar / h.s_bar,
            beta: BernsteinWeights::new(self.conc.iter().map(|a| a / total).collect())?,
            xi00: h.a0 / (h.a0 + h.b0),
            xi11: h.a1 / (h.a1 + h.b1),
            cluster,
        })
    }

    /// Chain state with durations of 0 s (or the shortest tenth in
    /// continuous data) marked as cluster durations and states at their
    /// conditional mode.
    pub fn initial_state(&self, params: ModelParams) -> Result<ChainState> {
        let cutoff = if self.data.discrete {
            0.0
        } else {
            let n = self.data.n_durations().max(1) as f64;
            0.1 * self.data.all_durations().sum::<f64>() / n
        };
        let indicators: Vec<Vec<u8>> = self
            .data
            .days
            .iter()
            .map(|d| {
                d.durations()
                    .iter()
                    .map(|&y| match self.variant {
                        ModelVariant::All if y <= cutoff => 0,
                        _ => 1,
                    })
                    .collect()
            })
            .collect();
        let components = indicators
            .iter()
            .map(|s| s.iter().map(|&v| if v == 0 && !self.data.discrete { 1 } else { 0 }).collect())
            .collect();
        let mut state = ChainState {
            params,
            states: Vec::new(),
            indicators,
            components,
            sweep: 0,
        };
        let coeffs = state.params.coeffs();
        let cond = self.conditional(&state, &coeffs, None)?;
        state.states = cond.proposal.mode().to_vec();
        Ok(state)
    }

    /// Chain state from a complete latent draw, e.g. a forward simulation.
    pub fn state_from_path(&self, params: ModelParams, path: &LatentPath) -> Result<ChainState> {
        let states = self.layout.reduce(path);
        let indicators: Vec<Vec<u8>> = path.days.iter().map(|d| d.s.clone()).collect();
        let components = indicators.iter().map(|s| vec![0; s.len()]).collect();
        let mut state = ChainState {
            params,
            states,
            indicators,
            components,
            sweep: 0,
        };
        if matches!(state.params.cluster, Some(ClusterLaw::Continuous { .. })) {
            for (d, s) in state.indicators.iter().enumerate() {
                for (i, &v) in s.iter().enumerate() {
                    if v == 0 {
                        state.components[d][i] = 1;
                    }
                }
            }
        }
        Ok(state)
    }

    fn measurement(&self, state: &ChainState, coeffs: &ExpMixCoeffs) -> RegularObservations {
        RegularObservations::new(&self.layout, &self.data, |d, i| state.indicators[d][i] == 1, coeffs.clone())
    }

    fn start<'a>(&self, state: &'a ChainState) -> Option<&'a [f64]> {
        (self.warm_start && state.states.len() == self.layout.n_states()).then_some(state.states.as_slice())
    }

    fn conditional_from(
        &self,
        prior: TridiagGaussian,
        meas: RegularObservations,
        start: Option<&[f64]>,
    ) -> Result<Conditional> {
        let prior_density = prior.to_gaussian()?;
        let proposal = build_proposal(&prior, &meas, start, self.newton)?;
        Ok(Conditional {
            prior,
            prior_density,
            meas,
            proposal,
        })
    }

    fn conditional(&self, state: &ChainState, coeffs: &ExpMixCoeffs, start: Option<&[f64]>) -> Result<Conditional> {
        let p = &state.params;
        let prior = state_prior(&self.layout, p.phi, p.sigma, &p.delta)?;
        self.conditional_from(prior, self.measurement(state, coeffs), start)
    }

    fn current(&self, state: &ChainState, cache: &mut Option<Conditional>) -> Result<Conditional> {
        match cache.take() {
            Some(c) => Ok(c),
            None => self.conditional(state, &state.params.coeffs(), self.start(state)),
        }
    }

    /// Joint update of the states and `theta = (ln phi, ln sigma)`.
    fn block_x_theta_cached<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        mv: &mut ParamMove,
        cache: &mut Option<Conditional>,
        rng: &mut R,
    ) -> Result<MoveOutcome> {
        let cur = self.current(state, cache)?;
        let theta = DVector::from_row_slice(&state.params.theta());
        let (cand, lq, u) = mv.propose(&theta, rng);
        let (phi, sigma) = (cand[0].exp(), cand[1].exp());
        let mut outcome = MoveOutcome::default();
        let mut next = None;
        if phi > 0.0 && phi.is_finite() && sigma > 0.0 && sigma.is_finite() {
            let built = state_prior(&self.layout, phi, sigma, &state.params.delta)
                .and_then(|prior| self.conditional_from(prior, cur.meas.clone(), self.start(state)));
            if let Ok(new) = built {
                let x_new = new.proposal.sample(rng);
                let x = &state.states;
                let log_ratio = new.log_target(&x_new) + theta_log_prior(&self.hyper, [cand[0], cand[1]])
                    - cur.log_target(x)
                    - theta_log_prior(&self.hyper, [theta[0], theta[1]])
                    + cur.proposal.logpdf(x)
                    - new.proposal.logpdf(&x_new)
                    + lq;
                outcome = accept(log_ratio, rng);
                if outcome.accepted {
                    next = Some((new, x_new));
                }
            }
        }
        mv.adapt(u.as_ref(), outcome.prob);
        match next {
            Some((new, x_new)) => {
                state.params.phi = phi;
                state.params.sigma = sigma;
                state.states = x_new;
                *cache = Some(new);
            }
            None => *cache = Some(cur),
        }
        Ok(outcome)
    }

    /// Joint update of the states and the Bernstein weights through their
    /// log-ratio coordinates.
    fn block_x_beta_cached<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        mv: &mut ParamMove,
        cache: &mut Option<Conditional>,
        rng: &mut R,
    ) -> Result<MoveOutcome> {
        let cur = self.current(state, cache)?;
        let vartheta = DVector::from_vec(state.params.beta.to_logratio());
        let (cand, lq, u) = mv.propose(&vartheta, rng);
        let beta_new = BernsteinWeights::from_logratio(cand.as_slice());
        let mut outcome = MoveOutcome::default();
        let mut next = None;
        if beta_new.as_slice().iter().all(|&b| b > 0.0) {
            let (lp_new, _) = beta_log_prior(beta_new.as_slice(), &self.conc);
            let (lp_cur, _) = beta_log_prior(state.params.beta.as_slice(), &self.conc);
            let coeffs = ExpMixCoeffs::from_bernstein(&beta_new);
            let built = self.conditional_from(cur.prior.clone(), cur.meas.with_coeffs(coeffs), self.start(state));
            if let (true, Ok(new)) = (lp_new.is_finite(), built) {
                let x_new = new.proposal.sample(rng);
                let x = &state.states;
                let jacobian: f64 = beta_new.as_slice().iter().map(|b| b.ln()).sum::<f64>()
                    - state.params.beta.as_slice().iter().map(|b| b.ln()).sum::<f64>();
                let log_ratio = new.log_target(&x_new) + lp_new - cur.log_target(x) - lp_cur
                    + cur.proposal.logpdf(x)
                    - new.proposal.logpdf(&x_new)
                    + lq
                    + jacobian;
                outcome = accept(log_ratio, rng);
                if outcome.accepted {
                    next = Some((new, x_new));
                }
            }
        }
        mv.adapt(u.as_ref(), outcome.prob);
        match next {
            Some((new, x_new)) => {
                state.params.beta = beta_new;
                state.states = x_new;
                *cache = Some(new);
            }
            None => *cache = Some(cur),
        }
        Ok(outcome)
    }

    pub fn block_x_theta<R: Rng + ?Sized>(&self, state: &mut ChainState, mv: &mut ParamMove, rng: &mut R) -> Result<MoveOutcome> {
        self.block_x_theta_cached(state, mv, &mut None, rng)
    }

    pub fn block_x_beta<R: Rng + ?Sized>(&self, state: &mut ChainState, mv: &mut ParamMove, rng: &mut R) -> Result<MoveOutcome> {
        self.block_x_beta_cached(state, mv, &mut None, rng)
    }

    /// Exact draws of `tau | delta` and then `delta | tau, x, phi, sigma`.
    pub fn block_delta_tau<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        let p = &mut state.params;
        let (shape, rate) = tau_posterior(&self.hyper, &p.delta, self.tau_dof_bias);
        p.tau = sample_gamma(shape, rate, rng);
        let dim = p.delta.len();
        let (h, c) = delta_posterior(&self.layout, &state.states, p.phi, p.sigma, &self.hyper, p.tau, dim)?;
        let chol = h.cholesky().ok_or(Error::Factorization { index: 0 })?;
        let mean = chol.solve(&c);
        let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let dev = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or(Error::Factorization { index: 0 })?;
        p.delta = (mean + dev).iter().copied().collect();
        Ok(())
    }

    /// Single-move update of every indicator.
    pub fn block_s<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        let law = state
            .params
            .cluster
            .ok_or_else(|| Error::ModelViolation("indicator block needs a cluster law".into()))?;
        let coeffs = state.params.coeffs();
        for (d, day) in self.data.days.iter().enumerate() {
            let ys = day.durations();
            for i in 0..ys.len() {
                let s = &state.indicators[d];
                let prev = (i > 0).then(|| s[i - 1]);
                let next = (i + 1 < ys.len()).then(|| s[i + 1]);
                let x = state.states[self.layout.state_of(d, i)];
                let w = indicator_log_weights(ys[i], x, prev, next, &state.params, &coeffs, &law, self.data.discrete)?;
                let p0 = prob_cluster(w);
                let v = if rng.random::<f64>() < p0 { 0 } else { 1 };
                state.indicators[d][i] = v;
                if v == 1 {
                    state.components[d][i] = 0;
                } else if state.components[d][i] == 0 && !self.data.discrete {
                    state.components[d][i] = 1;
                }
            }
        }
        Ok(())
    }

    /// Metropolis-Hastings update of `(xi00, xi11)` with beta proposals.
    pub fn block_xi<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<bool> {
        let counts = transition_counts(&state.indicators);
        let ((a0, b0), (a1, b1)) = xi_proposal(&counts, &self.hyper);
        let xi00 = sample_beta(a0, b0, rng);
        let xi11 = sample_beta(a1, b1, rng);
        if !(xi00 > 0.0 && xi00 < 1.0 && xi11 > 0.0 && xi11 < 1.0) {
            return Ok(false);
        }
        let first: Vec<u8> = state.indicators.iter().filter_map(|s| s.first().copied()).collect();
        let log_ratio = xi_log_acceptance(&first, (state.params.xi00, state.params.xi11), (xi00, xi11))?;
        let out = accept(log_ratio, rng);
        if out.accepted {
            state.params.xi00 = xi00;
            state.params.xi11 = xi11;
        }
        Ok(out.accepted)
    }

    /// Component memberships, then `(lambda_1, lambda_2, pi)`.
    pub fn block_lambda_pi<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        let Some(ClusterLaw::Continuous { lambda1, lambda2, pi }) = state.params.cluster else {
            return Err(Error::ModelViolation("mixture block needs the continuous cluster law".into()));
        };
        let mut counts = [0u64; 2];
        let mut sums = [0.0; 2];
        for (d, day) in self.data.days.iter().enumerate() {
            for (i, &y) in day.durations().iter().enumerate() {
                if state.indicators[d][i] != 0 {
                    continue;
                }
                let k = if rng.random::<f64>() < component_prob(y, lambda1, lambda2, pi) { 0 } else { 1 };
                state.components[d][i] = k as u8 + 1;
                counts[k] += 1;
                sums[k] += y;
            }
        }
        let post = cluster_posterior(&self.hyper.cluster_continuous()?, counts, sums);
        state.params.cluster = Some(ClusterLaw::Continuous {
            lambda1: sample_gamma(post[0].0, post[0].1, rng),
            lambda2: sample_gamma(post[1].0, post[1].1, rng),
            pi: sample_beta(post[2].0, post[2].1, rng),
        });
        Ok(())
    }

    pub fn block_zeta<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        let (mut zeros, mut ones) = (0u64, 0u64);
        for (d, day) in self.data.days.iter().enumerate() {
            for (i, &y) in day.durations().iter().enumerate() {
                if state.indicators[d][i] != 0 {
                    continue;
                }
                match y {
                    0.0 => zeros += 1,
                    1.0 => ones += 1,
                    _ => {
                        return Err(Error::ModelViolation(format!(
                            "cluster duration recorded as {y} s"
                        )))
                    }
                }
            }
        }
        let (a, b) = zeta_posterior(&self.hyper, zeros, ones)?;
        state.params.cluster = Some(ClusterLaw::Discrete {
            zeta: sample_beta(a, b, rng),
        });
        Ok(())
    }

    /// One pass over every block of the model variant.
    pub fn sweep<R: Rng + ?Sized>(&self, state: &mut ChainState, moves: &mut Moves, rng: &mut R) -> Result<SweepOutcome> {
        let mut cache = None;
        let mut out = SweepOutcome {
            theta: self.block_x_theta_cached(state, &mut moves.theta, &mut cache, rng)?,
            beta: self.block_x_beta_cached(state, &mut moves.beta, &mut cache, rng)?,
            xi: false,
        };
        self.block_delta_tau(state, rng)?;
        if self.variant == ModelVariant::All {
            self.block_s(state, rng)?;
            out.xi = self.block_xi(state, rng)?;
            if self.data.discrete {
                self.block_zeta(state, rng)?;
            } else {
                self.block_lambda_pi(state, rng)?;
            }
        }
        state.sweep += 1;
        Ok(out)
    }

    /// Column names of the draw store, in order.
    pub fn draw_names(&self, dim: usize, j_order: usize) -> Vec<String> {
        let mut names: Vec<String> = ["theta_1", "theta_2", "phi", "sigma", "tau", "vdelta"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        names.extend((1..=dim).map(|l| format!("delta_{l}")));
        names.extend((1..=j_order).map(|j| format!("beta_{j}")));
        if self.variant == ModelVariant::All {
            names.extend(["xi00", "xi11"].map(String::from));
            if self.data.discrete {
                names.push("zeta".into());
            } else {
                names.extend(["lambda_1", "lambda_2", "pi"].map(String::from));
            }
            names.extend(["reg0", "reg1"].map(String::from));
        }
        names.extend(["acc_theta", "acc_beta"].map(String::from));
        if self.variant == ModelVariant::All {
            names.push("acc_xi".into());
        }
        names
    }

    pub fn draw_row(&self, state: &ChainState, out: &SweepOutcome) -> Vec<f64> {
        let p = &state.params;
        let theta = p.theta();
        let mut row = vec![theta[0], theta[1], p.phi, p.sigma, p.tau, p.mean_delta()];
        row.extend_from_slice(&p.delta);
        row.extend_from_slice(p.beta.as_slice());
        if self.variant == ModelVariant::All {
            row.extend([p.xi00, p.xi11]);
            match p.cluster {
                Some(ClusterLaw::Discrete { zeta }) => row.push(zeta),
                Some(ClusterLaw::Continuous { lambda1, lambda2, pi }) => row.extend([lambda1, lambda2, pi]),
                None => {}
            }
            let (r0, r1) = self.regular_short_counts(state);
            row.extend([r0 as f64, r1 as f64]);
        }
        row.extend([out.theta.accepted as u8 as f64, out.beta.accepted as u8 as f64]);
        if self.variant == ModelVariant::All {
            row.push(out.xi as u8 as f64);
        }
        row
    }

    /// Regular durations recorded as exactly 0 and 1.
    pub fn regular_short_counts(&self, state: &ChainState) -> (u64, u64) {
        let (mut r0, mut r1) = (0, 0);
        for (d, day) in self.data.days.iter().enumerate() {
            for (i, &y) in day.durations().iter().enumerate() {
                if state.indicators[d][i] == 1 {
                    if y == 0.0 {
                        r0 += 1;
                    } else if y == 1.0 {
                        r1 += 1;
                    }
                }
            }
        }
        (r0, r1)
    }
}

/// Results of one chain.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub draws: DrawTable,
    pub classification: Option<ClassificationTable>,
    pub final_state: ChainState,
    /// Acceptance rates of the two joint blocks over the second half of
    /// burn-in.
    pub burn_in_rates: [f64; 2],
    pub adaptation_warning: Option<String>,
}

fn frozen(rows: &[DVector<f64>], fallback: DMatrix<f64>, dof: f64) -> Result<ScaledT> {
    let (mean, cov) = moments(rows)?;
    ScaledT::new(mean.clone(), cov, Some(dof)).or_else(|_| ScaledT::new(mean, fallback, Some(dof)))
}

fn initial_walk(dim: usize, scale: f64, target: f64) -> Result<ParamMove> {
    Ok(ParamMove::RandomWalk(RobustAdaptive::new(DMatrix::identity(dim, dim) * scale, target)?))
}

/// Adaptive burn-in, then retained sweeps with frozen Student t proposals
/// fitted to the second half of burn-in.
pub fn adapt_and_run<R: Rng + ?Sized>(
    sampler: &mut Sampler,
    config: &SamplerConfig,
    mut state: ChainState,
    rng: &mut R,
) -> Result<RunOutput> {
    config.validate()?;
    sampler.configure(config);
    let j = state.params.beta.order();
    let dim = state.params.delta.len();
    let mut moves = Moves {
        theta: initial_walk(2, 1e-3, config.target_rate)?,
        beta: initial_walk(j - 1, 1e-2, config.target_rate)?,
    };
    let half = config.burn_in / 2;
    let mut theta_hist = Vec::with_capacity(config.burn_in - half);
    let mut beta_hist = Vec::with_capacity(config.burn_in - half);
    let mut accepted = [0usize; 2];
    for k in 0..config.burn_in {
        let out = sampler.sweep(&mut state, &mut moves, rng)?;
        if k >= half {
            theta_hist.push(DVector::from_row_slice(&state.params.theta()));
            beta_hist.push(DVector::from_vec(state.params.beta.to_logratio()));
            accepted[0] += out.theta.accepted as usize;
            accepted[1] += out.beta.accepted as usize;
        }
    }
    let n_half = (config.burn_in - half) as f64;
    let burn_in_rates = [accepted[0] as f64 / n_half, accepted[1] as f64 / n_half];
    let adaptation_warning = burn_in_rates
        .iter()
        .zip(["theta", "beta"])
        .filter(|(r, _)| !(**r > 0.05 && **r < 0.95))
        .map(|(r, name)| format!("{name} burn-in acceptance {r:.3} outside (0.05, 0.95)"))
        .reduce(|a, b| format!("{a}; {b}"));
    let scale_of = |m: &ParamMove| match m {
        ParamMove::RandomWalk(rw) => rw.scale(),
        ParamMove::Independent(t) => DMatrix::identity(t.dim(), t.dim()),
    };
    moves = Moves {
        theta: ParamMove::Independent(frozen(&theta_hist, scale_of(&moves.theta), config.dof)?),
        beta: ParamMove::Independent(frozen(&beta_hist, scale_of(&moves.beta), config.dof)?),
    };

    let mut draws = DrawTable::new(sampler.draw_names(dim, j));
    let shape_meta = [
        ("variant", format!("{:?}", sampler.variant()).to_lowercase()),
        ("discrete", sampler.data().discrete.to_string()),
        ("J", j.to_string()),
        ("L", dim.to_string()),
        ("seed", config.seed.to_string()),
        ("burn_in", config.burn_in.to_string()),
        ("sweeps", config.sweeps.to_string()),
        ("thin", config.thin.to_string()),
        ("burn_in_rate_theta", format!("{:?}", burn_in_rates[0])),
        ("burn_in_rate_beta", format!("{:?}", burn_in_rates[1])),
    ];
    draws.meta = shape_meta.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    if let Some(w) = &adaptation_warning {
        draws.meta.push(("warning".into(), w.clone()));
    }
    let mut hits: Vec<Vec<u64>> = state.indicators.iter().map(|s| vec![0; s.len()]).collect();
    for k in 0..config.sweeps * config.thin {
        let out = sampler.sweep(&mut state, &mut moves, rng)?;
        if (k + 1) % config.thin == 0 {
            draws.push(sampler.draw_row(&state, &out))?;
            for (h, s) in hits.iter_mut().zip(&state.indicators) {
                for (c, &v) in h.iter_mut().zip(s) {
                    *c += v as u64;
                }
            }
        }
    }
    let classification = (sampler.variant() == ModelVariant::All).then(|| ClassificationTable {
        draws: config.sweeps as u64,
        rows: sampler
            .data()
            .days
            .iter()
            .enumerate()
            .flat_map(|(d, day)| {
                let h = &hits[d];
                day.durations().iter().enumerate().map(move |(i, &y)| (d, i, y, h[i]))
            })
            .collect(),
    });
    Ok(RunOutput {
        draws,
        classification,
        final_state: state,
        burn_in_rates,
        adaptation_warning,
    })
}
