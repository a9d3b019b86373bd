//! Synthetic second-precision tick feed with a known latent truth, about
//! 70% of its durations recorded as 0 s.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{FlagSet, Session, TickRecord, TradeFlag};
use crate::density::{BernsteinWeights, ClusterLaw};
use crate::error::Result;
use crate::model::{simulate, DayLength, DurationData, Dynamics, LatentPath, ModelParams};
use crate::splines::SplineBasis;

/// Parameters of the all-duration discrete model on a trading-day basis:
/// a U-shaped diurnal pattern around `ln 19` and persistent clustering.
pub fn desk_truth(basis: &SplineBasis, j_order: usize) -> Result<ModelParams> {
    let dim = basis.dim();
    let delta = (0..dim)
        .map(|l| {
            let u = l as f64 / (dim - 1) as f64;
            2.95 - 0.5 * (std::f64::consts::PI * u).sin()
        })
        .collect();
    let raw: Vec<f64> = (0..j_order).map(|j| 1.0 + 0.6 * (j_order - 1 - j) as f64 / (j_order - 1) as f64).collect();
    let total: f64 = raw.iter().sum();
    Ok(ModelParams {
        phi: 0.01,
        sigma: 0.25,
        delta,
        tau: 10.0,
        beta: BernsteinWeights::new(raw.iter().map(|b| b / total).collect())?,
        xi00: 0.8,
        xi11: 0.5,
        cluster: Some(ClusterLaw::Discrete { zeta: 0.96 }),
    })
}

/// Simulate `days` full sessions of second-precision durations.
pub fn simulate_desk<R: Rng + ?Sized>(
    truth: &ModelParams,
    days: usize,
    basis: &SplineBasis,
    rng: &mut R,
) -> Result<(DurationData, LatentPath)> {
    simulate(truth, days, basis, Dynamics::Ou, DayLength::UntilClose, true, rng)
}

/// Tick records of the simulated trades, on a random-walk price, with a few
/// records that cleaning must remove: pre-open and after-close trades,
/// flagged trades and isolated price spikes.
pub fn ticks_from_durations<R: Rng + ?Sized>(data: &DurationData, rng: &mut R) -> Vec<TickRecord> {
    let mut out = Vec::new();
    let flags = TradeFlag::ALL;
    for (d, day) in data.days.iter().enumerate() {
        let label = format!("2026-01-{:02}", d + 5);
        let mut price = 25.0;
        let tick = |t: f64, price: f64, session: Session, flags: FlagSet, rng: &mut R| TickRecord {
            day: label.clone(),
            timestamp: t,
            price,
            volume: 100.0 * rng.random_range(1..=10) as f64,
            session,
            flags,
        };
        let open = day.times()[0];
        for k in 0..5 {
            out.push(tick(open - 600.0 + 60.0 * k as f64, price, Session::PreOpen, FlagSet::default(), rng));
        }
        for &t in day.times() {
            let z: f64 = StandardNormal.sample(rng);
            price = (price + 0.01 * (0.6 * z).round()).max(0.01);
            out.push(tick(t, price, Session::Continuous, FlagSet::default(), rng));
            let u: f64 = rng.random();
            if u < 0.002 {
                let f = flags[rng.random_range(0..flags.len())];
                out.push(tick(t, price + 0.05, Session::Continuous, [f].into_iter().collect(), rng));
            } else if u < 0.0025 {
                out.push(tick(t, price * 50.0, Session::Continuous, FlagSet::default(), rng));
            }
        }
        let close = *day.times().last().expect("a day has an opening time");
        out.push(tick(close + 300.0, price, Session::Extended, FlagSet::default(), rng));
    }
    out
}
