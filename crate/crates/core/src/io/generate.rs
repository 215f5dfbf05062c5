//! Random scenarios: access-point placement and per-cell link rates.
//!
//! Draw order for one scenario is fixed: a uniform shuffle of the cells
//! (the first `ap_count` get an access point), then one cellular rate per
//! cell, then one WLAN rate per cell. WLAN rates are drawn for every cell so
//! that the same seed with a larger `ap_count` keeps the earlier access
//! points and their rates and only adds new ones.
//!
//! Rates are quantized to capacities of `round(rate / sigma)` units, at
//! least one. Energy per Mbit is the curve evaluated at the unquantized rate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as Gaussian};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::io::config::ScenarioConfig;
use crate::mobility::{build_grid_mobility, Adjacency, MobilityModel};
use crate::model::{CostParams, FlowSpec, LocationProfile, Scenario, Units};
use crate::{Error, Rational, Result};

/// Rejection sampling is used while the window holds at least this much mass.
pub const MIN_REJECTION_MASS: f64 = 0.01;

/// Random stream for scenario draw `draw` under `seed`.
///
/// Streams from the top half of the stream space are used so they never
/// coincide with Monte Carlo episode streams of the same seed.
pub fn scenario_rng(seed: u64, draw: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((1 << 63) | draw);
    rng
}

/// Normal(mean, stddev) conditioned on `[lo, hi]`.
///
/// Draws are rejected until one lands in the window. When the window holds
/// less than [`MIN_REJECTION_MASS`] of the untruncated distribution the
/// inverse CDF is used instead. Invalid parameters fall back to the window
/// midpoint.
pub fn truncated_normal_sample<R: Rng + ?Sized>(mean: f64, stddev: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let midpoint = 0.5 * (lo + hi);
    if !(stddev > 0.0) || !(lo < hi) {
        return midpoint;
    }
    let Ok(std) = Normal::new(0.0, 1.0) else {
        return midpoint;
    };
    // work on the side of the mean where tail probabilities keep precision
    let flip = lo > mean;
    let (a, b) = if flip {
        ((mean - hi) / stddev, (mean - lo) / stddev)
    } else {
        ((lo - mean) / stddev, (hi - mean) / stddev)
    };
    let (pa, pb) = (std.cdf(a), std.cdf(b));
    let mass = pb - pa;

    if mass >= MIN_REJECTION_MASS {
        let gauss = Gaussian::new(mean, stddev).expect("positive stddev");
        loop {
            let x = gauss.sample(rng);
            if (lo..=hi).contains(&x) {
                return x;
            }
        }
    }
    if !(mass > 0.0) {
        return midpoint;
    }
    let u: f64 = rng.random();
    let z = std.inverse_cdf(pa + u * mass);
    let x = if flip { mean - z * stddev } else { mean + z * stddev };
    if x.is_finite() {
        x.clamp(lo, hi)
    } else {
        midpoint
    }
}

fn capacity(rate: f64, sigma: f64) -> Units {
    ((rate / sigma).round() as Units).max(1)
}

/// Build one random scenario from `config`.
pub fn generate_scenario<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Scenario<f64>> {
    config.validate()?;
    let n = config.num_cells();
    let net = &config.network;
    let curve = net.energy_curve.curve();

    let mut cells: Vec<usize> = (0..n).collect();
    cells.shuffle(rng);
    let mut has_ap = vec![false; n];
    for &c in &cells[..net.ap_count] {
        has_ap[c] = true;
    }
    let c = net.cellular;
    let cellular: Vec<f64> = (0..n)
        .map(|_| truncated_normal_sample(c.mean, c.stddev, c.lo, c.hi, rng))
        .collect();
    let w = net.wlan;
    let wlan: Vec<f64> = (0..n)
        .map(|_| truncated_normal_sample(w.mean, w.stddev, w.lo, w.hi, rng))
        .collect();

    let locations = (0..n)
        .map(|l| LocationProfile {
            id: l,
            wlan_available: has_ap[l],
            cellular_capacity: capacity(cellular[l], net.sigma),
            wlan_capacity: if has_ap[l] { capacity(wlan[l], net.sigma) } else { 0 },
            cellular_throughput: cellular[l],
            wlan_throughput: if has_ap[l] { wlan[l] } else { 0.0 },
            cellular_energy: curve.eval(cellular[l]),
            wlan_energy: if has_ap[l] { curve.eval(wlan[l]) } else { 0.0 },
        })
        .collect();

    let mobility = build_grid_mobility(
        config.grid.width,
        config.grid.height,
        config.grid.stay_prob,
        config.grid.adjacency,
    )?;
    let costs = CostParams::new(config.costs.price_per_mbit, config.costs.theta, config.costs.penalty);
    let scenario = Scenario::new(
        locations,
        mobility,
        config.flow_specs()?,
        costs,
        net.sigma,
        config.run.seed,
    )?;
    match &config.costs.theta_schedule {
        Some(s) => scenario.with_theta_schedule(s.clone()),
        None => Ok(scenario),
    }
}

fn frac<R: Rng + ?Sized>(rng: &mut R, lo: i128, hi: i128, den: i128) -> Rational {
    Rational::new(rng.random_range(lo..=hi), den)
}

/// A small exact instance for optimality cross-checks: 1, 2 or 4 cells,
/// at most 4 slots, one or two flows of at most 4 units, unit sigma.
pub fn random_tiny_instance<R: Rng + ?Sized>(rng: &mut R) -> Result<Scenario<Rational>> {
    let (w, h) = [(1, 1), (2, 1), (2, 2)][rng.random_range(0..3)];
    let num_flows = rng.random_range(1..=2);
    let mut deadlines: Vec<usize> = (0..num_flows).map(|_| rng.random_range(1..=4)).collect();
    deadlines.sort_unstable();
    let flows = deadlines
        .iter()
        .enumerate()
        .map(|(j, &d)| FlowSpec::new(j, rng.random_range(0..=4), d))
        .collect();

    let locations = (0..w * h)
        .map(|l| {
            let cell = rng.random_range(1..=3);
            let wlan = if rng.random_bool(0.5) {
                Some(rng.random_range(1..=4))
            } else {
                None
            };
            let eps_c = frac(rng, 1, 10, 10);
            let eps_w = frac(rng, 0, 10, 10);
            LocationProfile::from_capacities(l, Rational::from_integer(1), cell, wlan, eps_c, eps_w)
        })
        .collect();
    let stay = frac(rng, 0, 10, 10);
    let mobility = if w * h == 1 {
        MobilityModel::stationary(1, 1)?
    } else {
        build_grid_mobility(w, h, stay, Adjacency::VonNeumann)?
    };
    let theta = frac(rng, 0, 4, 2);
    Scenario::new(
        locations,
        mobility,
        flows,
        CostParams::reference(theta),
        Rational::from_integer(1),
        0,
    )
    .map_err(|e| Error::Internal(format!("tiny instance rejected: {e}")))
}
