//! Acceptance criteria, one test each. Every test writes a single
//! `PASS`/`FAIL` line to stderr (uncaptured) before asserting.
//!
//! `FSCD_RECOVERY_REPLICATIONS` lowers the number of recovery replications
//! for quick local runs; the default is the full ten.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use fscd::density::{log_density_derivs, BernsteinWeights, ClusterLaw, ExpMixCoeffs, Regime};
use fscd::diagnostics::{half_life, rne, summarize_series};
use fscd::gir::{run_gir, GirConfig, GirReport};
use fscd::mcmc::{adapt_and_run, Sampler, SamplerConfig};
use fscd::model::{Day, DurationData, Dynamics, StateLayout};
use fscd::priors::ModelConfig;
use fscd::splines::SplineBasis;
use fscd::state_sampler::{
    build_proposal, conditional_value, state_prior, NewtonConfig, StateMeasurement, TridiagGaussian,
};
use fscd::synthetic::{desk_truth, simulate_desk};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Beta, Continuous};

fn report(id: u8, pass: bool, title: &str, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[acceptance {id:>2}] {verdict} {title}: {detail}\n");
    // bypass the test harness's output capture
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

// ---------------------------------------------------------------- 1 and 2

fn gir(discrete: bool, bias: f64, seed: u64) -> GirReport {
    let mut cfg = GirConfig::standard(discrete, 200_000).unwrap();
    cfg.tau_dof_bias = bias;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    run_gir(&cfg, &mut rng).unwrap()
}

#[test]
fn c01_gir_invariance() {
    let started = Instant::now();
    let reports = [gir(false, 0.0, 1), gir(true, 0.0, 1)];
    let ts: Vec<f64> = reports.iter().flat_map(|r| r.rows.iter().map(|m| m.t.abs())).collect();
    let rejected = ts.iter().filter(|&&t| t > 1.96).count();
    let worst = ts.iter().copied().fold(0.0, f64::max);
    let within_nse = reports
        .iter()
        .flat_map(|r| &r.rows)
        .all(|m| m.diff.abs() < 4.0 * m.nse);
    let pass = ts.len() == 22 && rejected <= 3 && worst <= 3.5 && within_nse;
    for r in &reports {
        let _ = std::io::stderr().write_all(r.to_text().as_bytes());
    }
    report(
        1,
        pass,
        "GIR invariance, 2e5 sweeps per variant",
        &format!(
            "{} hypotheses, {rejected} with |t| > 1.96, max |t| = {worst:.2}, all within 4 nse: {within_nse} ({:.0?})",
            ts.len(),
            started.elapsed()
        ),
    );
    assert!(pass);
}

#[test]
fn c02_bias_is_detected() {
    let r = gir(false, 2.0, 1);
    let t = r.row("tau").unwrap().t;
    let pass = t.abs() > 4.0;
    report(2, pass, "tau degrees of freedom off by two", &format!("t(tau) = {t:.2}"));
    assert!(pass);
}

// ---------------------------------------------------------------- 3

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// `f(e) g(F(e))` with `F` exponential and `g` the Bernstein (beta) mixture,
/// the rate set so that the mean is one.
fn beta_mixture_pdf(beta: &[f64], eps: f64) -> f64 {
    let n = beta.len();
    let lt: f64 = beta
        .iter()
        .enumerate()
        .map(|(k, b)| b * (harmonic(n) - harmonic(n - k - 1)))
        .sum();
    let z = -(-lt * eps).exp_m1();
    let g: f64 = beta
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let j = (k + 1) as f64;
            b * Beta::new(j, n as f64 - j + 1.0).unwrap().pdf(z)
        })
        .sum();
    lt * (-lt * eps).exp() * g
}

#[test]
fn c03_exponential_identity() {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for j in 2..=6 {
        for _ in 0..100 {
            let beta = random_simplex(&mut rng, j);
            let coeffs = ExpMixCoeffs::from_bernstein(&BernsteinWeights::new(beta.clone()).unwrap());
            for k in 0..200 {
                let eps = 15.0 * k as f64 / 199.0;
                worst = worst.max((coeffs.pdf(eps).unwrap() - beta_mixture_pdf(&beta, eps)).abs());
            }
        }
    }
    let pass = worst < 1e-10;
    report(3, pass, "exponential-mixture identity, J = 2..6", &format!("max abs error {worst:.2e}"));
    assert!(pass);
}

// ---------------------------------------------------------------- 4

/// Ridders' extrapolated central difference; returns the estimate and its
/// error estimate.
fn ridders(f: impl Fn(f64) -> f64, x: f64, h0: f64) -> (f64, f64) {
    const CON: f64 = 1.4;
    const N: usize = 10;
    let mut a = [[0.0; N]; N];
    let mut h = h0;
    a[0][0] = (f(x + h) - f(x - h)) / (2.0 * h);
    let mut best = (a[0][0], f64::INFINITY);
    for i in 1..N {
        h /= CON;
        a[0][i] = (f(x + h) - f(x - h)) / (2.0 * h);
        let mut fac = CON * CON;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON * CON;
            let err = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if err <= best.1 {
                best = (a[j][i], err);
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * best.1 {
            break;
        }
    }
    best
}

#[test]
fn c04_derivatives_match_finite_differences() {
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut cluster_exact = true;
    for case in 0..1000 {
        let j = rng.random_range(2..=6);
        let coeffs = ExpMixCoeffs::from_bernstein(&BernsteinWeights::new(random_simplex(&mut rng, j)).unwrap());
        let x: f64 = rng.random_range(-3.0..3.0);
        let discrete = case % 2 == 1;
        let eps: f64 = rng.random_range(0.0..6.0);
        let mut y = eps * x.exp();
        if discrete {
            y = y.floor();
        }
        if case % 5 == 0 {
            let law = if discrete {
                ClusterLaw::Discrete { zeta: rng.random_range(0.05..0.95) }
            } else {
                ClusterLaw::Continuous {
                    lambda1: rng.random_range(0.5..5.0),
                    lambda2: rng.random_range(5.0..50.0),
                    pi: rng.random_range(0.05..0.95),
                }
            };
            let y = if discrete { (case % 2) as f64 } else { y };
            let jet = log_density_derivs(y, x, Regime::Cluster, &coeffs, Some(&law), discrete).unwrap();
            cluster_exact &= (1..=5).all(|r| jet[r] == 0.0);
            continue;
        }
        let jet = log_density_derivs(y, x, Regime::Regular, &coeffs, None, discrete).unwrap();
        for r in 1..=5 {
            let lower = |u: f64| log_density_derivs(y, u, Regime::Regular, &coeffs, None, discrete).unwrap()[r - 1];
            let (fd, _) = ridders(lower, x, 0.02);
            let rel = (fd - jet[r]).abs() / jet[r].abs().max(1e-3);
            worst = worst.max(rel);
        }
    }
    let pass = worst < 1e-6 && cluster_exact;
    report(
        4,
        pass,
        "log-density derivatives of orders 1-5 against finite differences",
        &format!("1000 tuples, max relative error {worst:.2e}, cluster derivatives zero: {cluster_exact}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 5

struct GaussianMeasurement {
    a: Vec<f64>,
    r: f64,
}

impl StateMeasurement for GaussianMeasurement {
    fn eval(&self, x: &[f64], grad: &mut [f64], curv: &mut [f64]) -> f64 {
        for i in 0..x.len() {
            grad[i] -= (x[i] - self.a[i]) / self.r;
            curv[i] += 1.0 / self.r;
        }
        self.value(x)
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.a).map(|(x, a)| -(x - a).powi(2) / (2.0 * self.r)).sum()
    }
}

fn ou_prior(rng: &mut ChaCha12Rng, n: usize) -> (TridiagGaussian, DMatrix<f64>, Vec<f64>) {
    let basis = SplineBasis::new(0.0, 10_000.0, 4).unwrap();
    let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..40.0)).collect();
    let data = DurationData::new(vec![Day::from_durations(1.0, &ys).unwrap()], false).unwrap();
    let layout = StateLayout::new(&data, &basis, Dynamics::Ou).unwrap();
    let (phi, sigma) = (rng.random_range(0.005..0.2), rng.random_range(0.1..1.0));
    let delta: Vec<f64> = (0..basis.dim()).map(|_| rng.random_range(-1.0..2.0)).collect();
    let prior = state_prior(&layout, phi, sigma, &delta).unwrap();
    let times = &layout.days[0].times;
    let k = times.len();
    let cov = DMatrix::from_fn(k, k, |i, j| sigma * sigma * (-phi * (times[i] - times[j]).abs()).exp());
    (prior, cov, layout.diurnal_levels(&delta))
}

fn dense_logpdf(cov: &DMatrix<f64>, mean: &[f64], x: &[f64]) -> f64 {
    let n = mean.len();
    let chol = cov.clone().cholesky().unwrap();
    let u = DVector::from_iterator(n, x.iter().zip(mean).map(|(a, b)| a - b));
    let w = chol.solve(&u);
    let ld = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + ld + u.dot(&w))
}

#[test]
fn c05_tridiagonal_sampler_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let mut ld_err: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    const DRAWS: usize = 20_000;
    for n in [2usize, 5, 20, 50] {
        let (prior, cov, mean) = ou_prior(&mut rng, n);
        let k = mean.len();
        for _ in 0..20 {
            let x: Vec<f64> = mean.iter().map(|m| m + rng.random_range(-1.5..1.5)).collect();
            let oracle = dense_logpdf(&cov, &mean, &x);
            ld_err = ld_err.max((prior.logpdf(&x).unwrap() - oracle).abs() / oracle.abs().max(1.0));
        }
        let mut sum = vec![0.0; k];
        let mut sq = vec![0.0; k];
        for _ in 0..DRAWS {
            let d = prior.sample(&mut rng).unwrap();
            for i in 0..k {
                sum[i] += d[i];
                sq[i] += (d[i] - mean[i]).powi(2);
            }
        }
        for i in 0..k {
            let var = cov[(i, i)];
            let z_mean = (sum[i] / DRAWS as f64 - mean[i]) / (var / DRAWS as f64).sqrt();
            let z_var = (sq[i] / DRAWS as f64 - var) / (var * (2.0 / DRAWS as f64).sqrt());
            worst_z = worst_z.max(z_mean.abs()).max(z_var.abs());
        }
    }
    // the marginal z-scores are many and correlated; 4.5 keeps the
    // family-wise false alarm rate small
    let moments_ok = worst_z < 4.5;

    let g = TridiagGaussian::new(vec![3.0, 4.0, 3.5, 2.5], vec![-1.0, -1.5, 0.7], vec![0.2, 0.5, -0.1, 0.3]).unwrap();
    let meas = GaussianMeasurement {
        a: vec![0.5, -0.3, 1.2, 0.0],
        r: 0.7,
    };
    let prop = build_proposal(&g, &meas, None, NewtonConfig::default()).unwrap();
    let target = |x: &[f64]| conditional_value(&g, &meas, x);
    let mut x = vec![0.0; 4];
    let mut accepted = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..1000 {
        let cand = prop.sample(&mut rng);
        let lr = target(&cand) - target(&x) + prop.logpdf(&x) - prop.logpdf(&cand);
        worst_ratio = worst_ratio.max(lr.abs());
        if lr >= -1e-10 {
            accepted += 1;
            x = cand;
        }
    }
    let pass = ld_err < 1e-10 && moments_ok && accepted == 1000;
    report(
        5,
        pass,
        "tridiagonal Gaussian against dense oracle",
        &format!(
            "log-density error {ld_err:.2e}, max moment z {worst_z:.2}, conjugate acceptance {accepted}/1000 (max |log ratio| {worst_ratio:.1e})"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 6

#[test]
fn c06_pmf_normalization() {
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let j = rng.random_range(2..=6);
        let coeffs = ExpMixCoeffs::from_bernstein(&BernsteinWeights::new(random_simplex(&mut rng, j)).unwrap());
        let x: f64 = rng.random_range(-2.5..3.0);
        let s = (-x).exp();
        let mut total = 0.0;
        let mut y = 0u64;
        loop {
            total += coeffs.regular_ln_pmf(y as f64, x).unwrap().exp();
            // what is left beyond y is at most S(y s)
            if coeffs.survival(y as f64 * s).unwrap() < 1e-17 {
                break;
            }
            y += 1;
        }
        worst = worst.max((total - 1.0).abs());
    }
    let pass = worst < 1e-12;
    report(6, pass, "discrete pmf sums to one", &format!("100 (x, beta), max |sum - 1| = {worst:.2e}"));
    assert!(pass);
}

// ---------------------------------------------------------------- 7 and 8

#[derive(Debug)]
struct Replication {
    seed: u64,
    n: usize,
    missed: Vec<String>,
    beta_covered: usize,
    j: usize,
    reg0_truth: f64,
    reg0_mean: f64,
    reg0_sd: f64,
}

impl Replication {
    fn recovered(&self) -> bool {
        self.missed.iter().all(|m| m.starts_with("beta")) && self.beta_covered + 1 >= self.j
    }
}

fn replications() -> usize {
    std::env::var("FSCD_RECOVERY_REPLICATIONS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(10)
}

fn recover(seed: u64) -> Replication {
    let cfg = ModelConfig::preset("tsx").unwrap();
    let basis = cfg.shape.basis().unwrap();
    let truth = desk_truth(&basis, cfg.shape.j).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (data, path) = simulate_desk(&truth, 5, &basis, &mut rng).unwrap();
    let reg0_truth = data
        .days
        .iter()
        .zip(&path.days)
        .map(|(d, p)| d.durations().iter().zip(&p.s).filter(|(y, s)| **y == 0.0 && **s == 1).count())
        .sum::<usize>() as f64;
    let n = data.n_durations();
    let mut sampler = Sampler::from_config(data, &cfg, Dynamics::Ou).unwrap();
    let state = sampler.initial_state(sampler.initial_params().unwrap()).unwrap();
    let sc = SamplerConfig {
        burn_in: 2_000,
        sweeps: 5_000,
        seed,
        ..SamplerConfig::default()
    };
    let out = adapt_and_run(&mut sampler, &sc, state, &mut rng).unwrap();
    let zeta = match truth.cluster {
        Some(ClusterLaw::Discrete { zeta }) => zeta,
        _ => unreachable!("desk truth is discrete"),
    };
    let mut targets = vec![
        ("phi".to_string(), truth.phi),
        ("sigma".to_string(), truth.sigma),
        ("xi00".to_string(), truth.xi00),
        ("xi11".to_string(), truth.xi11),
        ("zeta".to_string(), zeta),
    ];
    for (k, b) in truth.beta.as_slice().iter().enumerate() {
        targets.push((format!("beta_{}", k + 1), *b));
    }
    let mut missed = Vec::new();
    let mut beta_covered = 0;
    for (name, value) in &targets {
        let s = summarize_series(&out.draws.column(name).unwrap()).unwrap();
        let covered = s.q025 <= *value && *value <= s.q975;
        if covered && name.starts_with("beta") {
            beta_covered += 1;
        }
        if !covered {
            missed.push(name.clone());
        }
    }
    let reg0 = summarize_series(&out.draws.column("reg0").unwrap()).unwrap();
    Replication {
        seed,
        n,
        missed,
        beta_covered,
        j: truth.beta.order(),
        reg0_truth,
        reg0_mean: reg0.mean,
        reg0_sd: reg0.sd,
    }
}

fn recovery_runs() -> &'static [Replication] {
    static RUNS: OnceLock<Vec<Replication>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (1..=replications() as u64)
            .map(|seed| {
                let started = Instant::now();
                let r = recover(seed);
                let line = format!(
                    "  replication {seed}: {} durations, missed {:?}, reg0 {} vs {:.1} (sd {:.1}), {:.0?}\n",
                    r.n,
                    r.missed,
                    r.reg0_truth,
                    r.reg0_mean,
                    r.reg0_sd,
                    started.elapsed()
                );
                let _ = std::io::stderr().write_all(line.as_bytes());
                r
            })
            .collect()
    })
}

#[test]
fn c07_parameter_recovery() {
    // each target, or the beta condition as a whole, must hold in 8 of 10
    let runs = recovery_runs();
    let needed = (runs.len() * 8).div_ceil(10);
    let mut counts: Vec<(&str, usize)> = ["phi", "sigma", "zeta", "xi00", "xi11"]
        .into_iter()
        .map(|name| (name, runs.iter().filter(|r| !r.missed.iter().any(|m| m == name)).count()))
        .collect();
    counts.push(("beta", runs.iter().filter(|r| r.beta_covered + 1 >= r.j).count()));
    let pass = counts.iter().all(|(_, c)| *c >= needed);
    let joint = runs.iter().filter(|r| r.recovered()).count();
    let table: Vec<String> = counts.iter().map(|(n, c)| format!("{n} {c}")).collect();
    report(
        7,
        pass,
        "parameter recovery, D = 5, 5000 retained sweeps",
        &format!(
            "covered out of {} replications (need {needed}): {}; all targets at once in {joint}",
            runs.len(),
            table.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn c08_classification_calibration() {
    let runs = recovery_runs();
    let within = runs
        .iter()
        .filter(|r| (r.reg0_mean - r.reg0_truth).abs() <= 3.0 * r.reg0_sd)
        .count();
    let worst_cv = runs.iter().map(|r| r.reg0_sd / r.reg0_mean).fold(0.0, f64::max);
    let pass = within == runs.len() && worst_cv < 0.15;
    report(
        8,
        pass,
        "regular 0 s count calibration",
        &format!(
            "{within} of {} within 3 sd of the simulated count, max sd/mean {worst_cv:.3}",
            runs.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 9

#[test]
fn c09_diagnostics_calibration() {
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let n = 100_000;
    let iid: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut ar = Vec::with_capacity(n);
    let mut v: f64 = rng.sample(StandardNormal);
    v /= (1.0f64 - 0.81).sqrt();
    for _ in 0..n {
        v = 0.9 * v + rng.sample::<f64, _>(StandardNormal);
        ar.push(v);
    }
    let r_iid = rne(&iid, None).unwrap();
    let r_ar = rne(&ar, None).unwrap();
    let hl = half_life(0.00296).unwrap();
    let pass = (r_iid - 1.0).abs() <= 0.15
        && (r_ar / 0.0526 - 1.0).abs() <= 0.30
        && format!("{hl:.1}") == "234.2";
    report(
        9,
        pass,
        "relative numerical efficiency and half-life",
        &format!("iid RNE {r_iid:.3}, AR(0.9) RNE {r_ar:.4}, half_life(0.00296) = {hl:.1}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 10

fn fscd(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_fscd")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "fscd {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic_ticks.csv")
}

fn numbers(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn c10_synthetic_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).display().to_string();
    let ticks = fixture().display().to_string();
    fscd(&["clean", "--input", &ticks, "--output", &p("clean")]);
    fscd(&["clean", "--input", &ticks, "--output", &p("clean_gw"), "--rule", "gw"]);
    fscd(&["clean", "--input", &ticks, "--output", &p("clean_ss"), "--rule", "same-second"]);
    let stats = std::fs::read_to_string(dir.path().join("clean/stats.tsv")).unwrap();
    let row: Vec<&str> = stats.lines().nth(1).unwrap().split('\t').collect();
    let zeros: f64 = row[6].parse().unwrap();

    let durations = p("clean/durations.tsv");
    fscd(&[
        "fit", "--input", &durations, "--output", &p("fit"), "--burnin", "300", "--sweeps", "500", "--seed", "10",
    ]);
    fscd(&["summarize", "--draws", &p("fit/draws.tsv"), "--output", &p("summary")]);
    let expected = [
        "summary/summary.tsv",
        "summary/summary.txt",
        "summary/diurnal.tsv",
        "summary/density.tsv",
        "summary/hazard.tsv",
        "summary/classification.txt",
        "summary/regular_probability.tsv",
        "summary/manifest.json",
    ];
    let missing: Vec<&str> = expected.iter().copied().filter(|f| !dir.path().join(f).is_file()).collect();

    let hazard = numbers(&dir.path().join("summary/hazard.tsv"));
    let grid_end = hazard.last().map_or(0.0, |r| r[0]);
    let values: Vec<f64> = hazard.iter().flat_map(|r| r[1..].iter().copied()).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    let bounded = values.iter().all(|v| v.is_finite()) && lo > 0.05 && hi < 20.0;

    let pass = (65.0..=75.0).contains(&zeros) && missing.is_empty() && grid_end == 30.0 && bounded;
    report(
        10,
        pass,
        "synthetic fixture through clean, fit and summarize",
        &format!("0 s share {zeros}%, missing exports {missing:?}, hazard on [0, {grid_end}] within [{lo:.3}, {hi:.3}]"),
    );
    assert!(pass);
}
