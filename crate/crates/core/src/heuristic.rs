//! Online policies that need no offline solve.
//!
//! [`heuristic_decide`] weights flows by deadline urgency and remaining size,
//! uses WLAN whenever a fast enough access point is present, and falls back
//! to cellular only when some deadline is close. [`baseline_decide`] always
//! transmits at full rate on the cheapest available network.
//! [`price_only_policy`] is the exact solver run as if energy were free.

use serde::{Deserialize, Serialize};

use crate::dp::{backward_induction, PolicyTable, SolverOptions};
use crate::model::{edf_fill, Action, FlowSpec, LocationProfile, Network, Policy, Scenario, State, Units};
use crate::{Error, Result, Scalar};

/// Thresholds in force for one decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeuristicParams {
    /// Slots; cellular is used without WLAN once the closest deadline is nearer than this.
    pub deadline_threshold: f64,
    /// Mbit/slot; slower access points are ignored.
    pub wlan_speed_threshold: f64,
}

/// User-facing heuristic settings. Unset thresholds fall back to the
/// adaptive defaults in [`default_deadline_threshold`] and
/// [`default_wlan_speed_threshold`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wlan_speed_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeadlineWeights {
    /// Normalized allocation weights, one per flow.
    pub weights: Vec<f64>,
    /// Slots left until each unfinished, unexpired flow's deadline.
    pub remaining_deadlines: Vec<usize>,
}

impl DeadlineWeights {
    pub fn min_remaining_deadline(&self) -> Option<usize> {
        self.remaining_deadlines.iter().copied().min()
    }
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter().map(|x| x / total).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Urgency weights at elapsed time `elapsed` (slots already used).
///
/// A flow with time left (`elapsed < deadline`) and data left gets raw
/// weight `1 / (deadline - elapsed)`. Raw weights and remaining sizes are each
/// normalized, multiplied elementwise, and normalized again.
pub fn deadline_weights(elapsed: usize, deadlines: &[usize], remaining: &[Units]) -> DeadlineWeights {
    let mut raw = vec![0.0; deadlines.len()];
    let mut left = Vec::new();
    for (j, (&deadline, &b)) in deadlines.iter().zip(remaining).enumerate() {
        if elapsed < deadline && b > 0 {
            left.push(deadline - elapsed);
            raw[j] = 1.0 / (deadline - elapsed) as f64;
        }
    }
    let w_bar = normalize(&raw);
    let sizes: Vec<f64> = remaining.iter().map(|&b| f64::from(b)).collect();
    let b_bar = normalize(&sizes);
    let product: Vec<f64> = w_bar.iter().zip(&b_bar).map(|(w, b)| w * b).collect();
    DeadlineWeights {
        weights: normalize(&product),
        remaining_deadlines: left,
    }
}

/// Split `capacity` in proportion to `weights`, sigma-quantized.
///
/// Floors are topped up by largest fractional remainder (ties to the lower
/// index). Shares are then capped at `caps`, and the excess goes to flows
/// with room in descending weight order. Zero-weight flows get nothing.
pub fn proportional_split(weights: &[f64], caps: &[Units], capacity: Units) -> Vec<Units> {
    let m = weights.len();
    let mut alloc = vec![0u32; m];
    let positive: Vec<usize> = (0..m).filter(|&j| weights[j] > 0.0).collect();
    if positive.is_empty() || capacity == 0 {
        return alloc;
    }
    let cap = f64::from(capacity);
    let mut fracs = Vec::with_capacity(positive.len());
    let mut used: u64 = 0;
    for &j in &positive {
        let quota = weights[j] * cap;
        let base = quota.floor().min(cap) as u32;
        alloc[j] = base;
        used += u64::from(base);
        fracs.push((j, quota - quota.floor()));
    }
    let mut leftover = u64::from(capacity).saturating_sub(used);
    fracs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for &(j, _) in fracs.iter().cycle().take(leftover as usize) {
        alloc[j] += 1;
    }
    leftover = 0;

    for j in 0..m {
        if alloc[j] > caps[j] {
            leftover += u64::from(alloc[j] - caps[j]);
            alloc[j] = caps[j];
        }
    }
    let mut by_weight = positive;
    by_weight.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    for j in by_weight {
        if leftover == 0 {
            break;
        }
        let room = u64::from(caps[j] - alloc[j]).min(leftover);
        alloc[j] += room as u32;
        leftover -= room;
    }
    alloc
}

/// One slot of the weighted heuristic. `epoch` is the 1-based slot.
pub fn heuristic_decide<T: Scalar>(
    epoch: usize,
    state: &State,
    location: &LocationProfile<T>,
    flows: &[FlowSpec],
    params: &HeuristicParams,
) -> Action {
    let m = state.remaining.len();
    let deadlines: Vec<usize> = flows.iter().map(|f| f.deadline).collect();
    let dw = deadline_weights(epoch.saturating_sub(1), &deadlines, &state.remaining);
    let Some(closest) = dw.min_remaining_deadline() else {
        return Action::idle(m);
    };
    let network = if location.wlan_available
        && location.throughput(Network::Wlan) > params.wlan_speed_threshold
    {
        Network::Wlan
    } else if (closest as f64) < params.deadline_threshold {
        Network::Cellular
    } else {
        return Action::idle(m);
    };
    let alloc = proportional_split(&dw.weights, &state.remaining, location.capacity(network));
    Action::new(network, alloc)
}

/// WLAN when present, otherwise cellular, always at full rate split EDF.
pub fn baseline_decide<T: Scalar>(
    epoch: usize,
    state: &State,
    location: &LocationProfile<T>,
    flows: &[FlowSpec],
) -> Action {
    let caps: Vec<Units> = state
        .remaining
        .iter()
        .zip(flows)
        .map(|(&b, f)| if epoch <= f.deadline { b } else { 0 })
        .collect();
    let network = if location.wlan_available {
        Network::Wlan
    } else {
        Network::Cellular
    };
    Action::new(network, edf_fill(&caps, flows, location.capacity(network)))
}

/// ceil(1.5 x smallest remaining size / mean cellular rate), at least one slot.
pub fn default_deadline_threshold(min_remaining_mbit: f64, mean_cellular_mbit: f64) -> f64 {
    if mean_cellular_mbit <= 0.0 {
        return 1.0;
    }
    (1.5 * min_remaining_mbit / mean_cellular_mbit).ceil().max(1.0)
}

/// 9 + 3 min(theta, 2) Mbit/slot: a more energy-conscious user skips slower APs.
pub fn default_wlan_speed_threshold(theta: f64) -> f64 {
    9.0 + 3.0 * theta.clamp(0.0, 2.0)
}

/// [`heuristic_decide`] bound to a scenario, resolving default thresholds per slot.
#[derive(Clone, Debug)]
pub struct HeuristicPolicy {
    config: HeuristicConfig,
    mean_cellular_mbit: f64,
    sigma: f64,
}

impl HeuristicPolicy {
    pub fn new<T: Scalar>(scenario: &Scenario<T>, config: HeuristicConfig) -> Self {
        let sigma = scenario.sigma.as_f64();
        let total: f64 = scenario
            .locations
            .iter()
            .map(|l| f64::from(l.cellular_capacity) * sigma)
            .sum();
        Self {
            config,
            mean_cellular_mbit: total / scenario.num_locations() as f64,
            sigma,
        }
    }

    pub fn params_for<T: Scalar>(&self, scenario: &Scenario<T>, epoch: usize, state: &State) -> HeuristicParams {
        let deadline_threshold = self.config.deadline_threshold.unwrap_or_else(|| {
            let min_left = state
                .remaining
                .iter()
                .zip(&scenario.flows)
                .filter(|(&b, f)| b > 0 && epoch <= f.deadline)
                .map(|(&b, _)| b)
                .min()
                .unwrap_or(0);
            default_deadline_threshold(f64::from(min_left) * self.sigma, self.mean_cellular_mbit)
        });
        let wlan_speed_threshold = self.config.wlan_speed_threshold.unwrap_or_else(|| {
            default_wlan_speed_threshold(scenario.costs_at(epoch).energy_preference.as_f64())
        });
        HeuristicParams {
            deadline_threshold,
            wlan_speed_threshold,
        }
    }
}

impl<T: Scalar> Policy<T> for HeuristicPolicy {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn decide(&self, scenario: &Scenario<T>, epoch: usize, state: &State) -> Result<Action> {
        let params = self.params_for(scenario, epoch, state);
        let location = scenario
            .locations
            .get(state.location)
            .ok_or_else(|| Error::Infeasible(format!("unknown location {}", state.location)))?;
        Ok(heuristic_decide(epoch, state, location, &scenario.flows, &params))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BaselinePolicy;

impl<T: Scalar> Policy<T> for BaselinePolicy {
    fn name(&self) -> &str {
        "baseline"
    }

    fn decide(&self, scenario: &Scenario<T>, epoch: usize, state: &State) -> Result<Action> {
        let location = scenario
            .locations
            .get(state.location)
            .ok_or_else(|| Error::Infeasible(format!("unknown location {}", state.location)))?;
        Ok(baseline_decide(epoch, state, location, &scenario.flows))
    }
}

/// Exact solve with the energy weight forced to zero. Stands in for a
/// single-flow, price-driven deferral scheme that ignores energy.
pub fn price_only_policy<T: Scalar>(
    scenario: &Scenario<T>,
    options: &SolverOptions,
) -> Result<PolicyTable> {
    if scenario.num_flows() != 1 {
        return Err(Error::Config(format!(
            "price-only comparator is single-flow, scenario has {} flows",
            scenario.num_flows()
        )));
    }
    let mut blind = scenario.clone();
    blind.costs.energy_preference = T::zero();
    blind.theta_schedule = None;
    Ok(backward_induction(&blind, options)?.policy)
}

/// Wraps a policy under another name, e.g. a price-only table.
#[derive(Clone, Debug)]
pub struct Named<P> {
    pub name: String,
    pub inner: P,
}

impl<P> Named<P> {
    pub fn new(name: impl Into<String>, inner: P) -> Self {
        Self {
            name: name.into(),
            inner,
        }
    }
}

impl<T: Scalar, P: Policy<T>> Policy<T> for Named<P> {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, scenario: &Scenario<T>, epoch: usize, state: &State) -> Result<Action> {
        self.inner.decide(scenario, epoch, state)
    }
}
