//! Episode simulation, Monte Carlo aggregation and exact evaluation.
//!
//! Episode `i` of a Monte Carlo run draws from
//! `ChaCha8Rng::seed_from_u64(base_seed)` switched to stream `i`. Each
//! episode's randomness is therefore fixed by `(base_seed, i)` alone, and
//! episodes can run on any thread in any order. Means and deviations are
//! reduced in episode order with compensated summation.
//!
//! [`brute_force_value`] is a deliberately separate implementation of the
//! expected-cost minimization, used to cross-check [`crate::dp`].

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{check_budget, q_value, StateSpace, ValueTable, DEFAULT_MEMORY_BUDGET};
use crate::io::fingerprint::fingerprint_hex;
use crate::mobility::next_location;
use crate::model::{
    apply_action, monetary_cost, raw_energy, Action, Network, Policy, Scenario, State, Units,
};
use crate::scalar::compensated_sum;
use crate::{Error, Result, Scalar};

/// Upper bound on recursion nodes for [`brute_force_value`].
pub const BRUTE_FORCE_NODE_LIMIT: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord<T> {
    pub epoch: usize,
    pub location: usize,
    pub action: Action,
    pub remaining_after: Vec<Units>,
    pub monetary: T,
    pub raw_energy: T,
    pub weighted_energy: T,
    /// Penalty on flows whose deadline is this slot.
    pub penalty: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTotals<T> {
    pub monetary_cost: T,
    pub raw_energy: T,
    pub weighted_energy: T,
    pub penalty_paid: T,
}

impl<T: Scalar> EpisodeTotals<T> {
    fn zero() -> Self {
        Self {
            monetary_cost: T::zero(),
            raw_energy: T::zero(),
            weighted_energy: T::zero(),
            penalty_paid: T::zero(),
        }
    }

    fn add(&mut self, rec: &SlotRecord<T>) {
        self.monetary_cost = self.monetary_cost + rec.monetary;
        self.raw_energy = self.raw_energy + rec.raw_energy;
        self.weighted_energy = self.weighted_energy + rec.weighted_energy;
        self.penalty_paid = self.penalty_paid + rec.penalty;
    }

    /// Realized objective: payments, weighted energy and penalties.
    pub fn objective(&self) -> T {
        self.monetary_cost + self.weighted_energy + self.penalty_paid
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult<T> {
    pub start_location: usize,
    pub monetary_cost: T,
    pub raw_energy: T,
    pub weighted_energy: T,
    pub penalty_paid: T,
    /// Flow finished at or before its deadline.
    pub finished: Vec<bool>,
    pub trace: Vec<SlotRecord<T>>,
}

impl<T: Scalar> EpisodeResult<T> {
    pub fn totals(&self) -> EpisodeTotals<T> {
        EpisodeTotals {
            monetary_cost: self.monetary_cost,
            raw_energy: self.raw_energy,
            weighted_energy: self.weighted_energy,
            penalty_paid: self.penalty_paid,
        }
    }

    pub fn objective(&self) -> T {
        self.totals().objective()
    }

    pub fn finish_rate(&self) -> f64 {
        if self.finished.is_empty() {
            return 1.0;
        }
        self.finished.iter().filter(|&&f| f).count() as f64 / self.finished.len() as f64
    }
}

fn slot_err(epoch: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Slot {
        epoch,
        source: Box::new(e),
    }
}

/// Cost of one slot's action, as recorded in a trace.
fn slot_record<T: Scalar>(
    scenario: &Scenario<T>,
    epoch: usize,
    state: &State,
    action: &Action,
) -> Result<SlotRecord<T>> {
    scenario.check_feasible(epoch, state, action)?;
    let location = &scenario.locations[state.location];
    let costs = scenario.costs_at(epoch);
    let monetary = monetary_cost(state, action, &costs, scenario.sigma)?;
    let joules = raw_energy(state, action, location, scenario.sigma)?;
    let after = apply_action(state, action)?;
    let due: u64 = scenario
        .flows
        .iter()
        .zip(&after)
        .filter(|(f, _)| f.deadline == epoch)
        .map(|(_, &b)| u64::from(b))
        .sum();
    Ok(SlotRecord {
        epoch,
        location: state.location,
        action: action.clone(),
        remaining_after: after,
        monetary,
        raw_energy: joules,
        weighted_energy: costs.energy_preference * joules,
        penalty: costs.penalty_coefficient * scenario.mbit(due),
    })
}

/// Simulate one download session under `policy`.
///
/// Each slot observes the location, asks the policy, pays for the action and
/// shrinks the remaining sizes. A flow whose deadline is the current slot is
/// penalized on what it still has left after the slot. The session stops
/// early once every flow is empty.
pub fn run_episode<T: Scalar, R: Rng + ?Sized>(
    scenario: &Scenario<T>,
    policy: &(impl Policy<T> + ?Sized),
    start_location: usize,
    rng: &mut R,
) -> Result<EpisodeResult<T>> {
    let mut state = scenario.initial_state(start_location);
    scenario.check_state(&state)?;
    let mut finished: Vec<bool> = state.remaining.iter().map(|&b| b == 0).collect();
    let mut totals = EpisodeTotals::zero();
    let mut trace = Vec::new();

    for epoch in 1..=scenario.horizon {
        if state.is_empty() {
            break;
        }
        let action = policy.decide(scenario, epoch, &state).map_err(slot_err(epoch))?;
        let rec = slot_record(scenario, epoch, &state, &action).map_err(slot_err(epoch))?;
        for (j, flow) in scenario.flows.iter().enumerate() {
            if rec.remaining_after[j] == 0 && epoch <= flow.deadline {
                finished[j] = true;
            }
        }
        totals.add(&rec);
        state.remaining.clone_from(&rec.remaining_after);
        trace.push(rec);
        if epoch < scenario.horizon {
            state.location = next_location(&scenario.mobility, state.location, rng);
        }
    }

    Ok(EpisodeResult {
        start_location,
        monetary_cost: totals.monetary_cost,
        raw_energy: totals.raw_energy,
        weighted_energy: totals.weighted_energy,
        penalty_paid: totals.penalty_paid,
        finished,
        trace,
    })
}

/// Recompute the cost totals of a recorded trace under `scenario`.
///
/// With a scenario that differs only in energy rates this prices the same
/// trajectory and actions under another energy curve.
pub fn replay_trace<T: Scalar>(scenario: &Scenario<T>, trace: &[SlotRecord<T>]) -> Result<EpisodeTotals<T>> {
    let mut totals = EpisodeTotals::zero();
    let mut remaining = scenario.totals();
    for rec in trace {
        let state = State::new(rec.location, remaining);
        let replayed = slot_record(scenario, rec.epoch, &state, &rec.action).map_err(slot_err(rec.epoch))?;
        totals.add(&replayed);
        remaining = replayed.remaining_after;
    }
    Ok(totals)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); zero for one sample.
    pub sd: f64,
    pub stderr: f64,
}

impl SampleStats {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                sd: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = compensated_sum(xs.iter().copied()) / n as f64;
        let sd = if n > 1 {
            (compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            sd,
            stderr: sd / (n as f64).sqrt(),
        }
    }

    /// Normal-approximation 95% confidence interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - 1.96 * self.stderr, self.mean + 1.96 * self.stderr)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scenario_id: String,
    pub policy: String,
    pub theta: f64,
    pub n_flows: usize,
    pub n_aps: usize,
    pub episodes: usize,
    pub seed: u64,
    pub fingerprint: String,
    pub monetary: SampleStats,
    pub raw_energy: SampleStats,
    pub weighted_energy: SampleStats,
    pub penalty: SampleStats,
    pub objective: SampleStats,
    pub finish_rate: SampleStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonteCarloOptions {
    pub episodes: usize,
    pub base_seed: u64,
    /// Fixed start cell; `None` draws it uniformly per episode.
    pub start_location: Option<usize>,
    /// Episode `i` uses stream `stream_offset + i`.
    pub stream_offset: u64,
}

impl MonteCarloOptions {
    pub fn new(episodes: usize, base_seed: u64) -> Self {
        Self {
            episodes,
            base_seed,
            start_location: None,
            stream_offset: 0,
        }
    }

    pub fn starting_at(mut self, location: usize) -> Self {
        self.start_location = Some(location);
        self
    }

    pub fn with_stream_offset(mut self, offset: u64) -> Self {
        self.stream_offset = offset;
        self
    }
}

/// Random stream for episode `index`.
pub fn episode_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// Run episode `index` of a Monte Carlo batch, including its start draw.
pub fn run_indexed_episode<T: Scalar>(
    scenario: &Scenario<T>,
    policy: &(impl Policy<T> + ?Sized),
    options: &MonteCarloOptions,
    index: usize,
) -> Result<EpisodeResult<T>> {
    let mut rng = episode_rng(options.base_seed, options.stream_offset + index as u64);
    let start = match options.start_location {
        Some(l) => l,
        None => rng.random_range(0..scenario.num_locations()),
    };
    run_episode(scenario, policy, start, &mut rng)
}

/// Per-episode totals kept for aggregation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub monetary: f64,
    pub raw_energy: f64,
    pub weighted_energy: f64,
    pub penalty: f64,
    pub finish_rate: f64,
}

impl EpisodeSummary {
    pub fn objective(&self) -> f64 {
        self.monetary + self.weighted_energy + self.penalty
    }
}

/// Episode summaries in episode order.
pub fn episode_summaries<T: Scalar>(
    scenario: &Scenario<T>,
    policy: &(impl Policy<T> + ?Sized),
    options: &MonteCarloOptions,
) -> Result<Vec<EpisodeSummary>> {
    if options.episodes == 0 {
        return Err(Error::Config("episode count must be at least 1".into()));
    }
    if let Some(l) = options.start_location {
        if l >= scenario.num_locations() {
            return Err(Error::Config(format!("start location {l} outside the grid")));
        }
    }
    (0..options.episodes)
        .into_par_iter()
        .map(|i| {
            let ep = run_indexed_episode(scenario, policy, options, i)?;
            Ok(EpisodeSummary {
                monetary: ep.monetary_cost.as_f64(),
                raw_energy: ep.raw_energy.as_f64(),
                weighted_energy: ep.weighted_energy.as_f64(),
                penalty: ep.penalty_paid.as_f64(),
                finish_rate: ep.finish_rate(),
            })
        })
        .collect()
}

/// Labels carried into a report next to the statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportMeta {
    pub scenario_id: String,
    pub policy: String,
    pub theta: f64,
    pub n_flows: usize,
    pub n_aps: usize,
    pub seed: u64,
    pub fingerprint: String,
}

impl ReportMeta {
    pub fn for_scenario<T: Scalar>(scenario: &Scenario<T>, policy: &str, seed: u64) -> Self {
        let fingerprint = fingerprint_hex(scenario);
        Self {
            scenario_id: fingerprint[..12].to_string(),
            policy: policy.to_string(),
            theta: scenario.costs.energy_preference.as_f64(),
            n_flows: scenario.num_flows(),
            n_aps: scenario.locations.iter().filter(|l| l.wlan_available).count(),
            seed,
            fingerprint,
        }
    }
}

impl AggregateReport {
    pub fn from_summaries(meta: ReportMeta, runs: &[EpisodeSummary]) -> Self {
        let column = |f: fn(&EpisodeSummary) -> f64| -> SampleStats {
            SampleStats::from_samples(&runs.iter().map(f).collect::<Vec<_>>())
        };
        AggregateReport {
            scenario_id: meta.scenario_id,
            policy: meta.policy,
            theta: meta.theta,
            n_flows: meta.n_flows,
            n_aps: meta.n_aps,
            episodes: runs.len(),
            seed: meta.seed,
            fingerprint: meta.fingerprint,
            monetary: column(|s| s.monetary),
            raw_energy: column(|s| s.raw_energy),
            weighted_energy: column(|s| s.weighted_energy),
            penalty: column(|s| s.penalty),
            objective: column(EpisodeSummary::objective),
            finish_rate: column(|s| s.finish_rate),
        }
    }
}

pub fn monte_carlo<T: Scalar>(
    scenario: &Scenario<T>,
    policy: &(impl Policy<T> + ?Sized),
    options: &MonteCarloOptions,
) -> Result<AggregateReport> {
    let runs = episode_summaries(scenario, policy, options)?;
    let meta = ReportMeta::for_scenario(scenario, policy.name(), options.base_seed);
    Ok(AggregateReport::from_summaries(meta, &runs))
}

/// Expected cost of following `policy` from every (slot, state).
///
/// Slot `horizon + 1` holds the end-of-horizon penalties, so the result has
/// the same layout as the optimal value table.
pub fn exact_policy_evaluation<T: Scalar>(
    scenario: &Scenario<T>,
    policy: &(impl Policy<T> + ?Sized),
) -> Result<ValueTable<T>> {
    scenario.validate()?;
    check_budget(scenario, DEFAULT_MEMORY_BUDGET)?;
    let space = StateSpace::for_scenario(scenario)?;
    let horizon = scenario.horizon;
    let mut values: Vec<Vec<T>> = vec![Vec::new(); horizon + 1];
    values[horizon] = crate::dp::boundary_values(scenario, &space);
    for epoch in (1..=horizon).rev() {
        let next = &values[epoch];
        let layer: Vec<T> = (0..space.per_epoch())
            .into_par_iter()
            .map(|idx| {
                let state = space.state(idx);
                let action = policy.decide(scenario, epoch, &state).map_err(slot_err(epoch))?;
                scenario
                    .check_feasible(epoch, &state, &action)
                    .map_err(slot_err(epoch))?;
                q_value(scenario, &space, epoch, &state, &action, next)
            })
            .collect::<Result<_>>()?;
        values[epoch - 1] = layer;
    }
    Ok(ValueTable::new(space, horizon, values))
}

/// Minimum expected cost from the full sizes at `start_location`, by plain
/// recursion over every action and every mobility branch.
///
/// Instances whose tree bound (locations x size combinations x slots x
/// actions) exceeds [`BRUTE_FORCE_NODE_LIMIT`] are refused up front. The
/// first pass has no memoization. If it would expand more than
/// [`BRUTE_FORCE_NODE_LIMIT`] nodes, a memoized pass is tried under the same
/// limit before giving up with a sizing error.
pub fn brute_force_value<T: Scalar>(scenario: &Scenario<T>, start_location: usize) -> Result<T> {
    scenario.validate()?;
    if start_location >= scenario.num_locations() {
        return Err(Error::Config(format!("start location {start_location} outside the grid")));
    }
    let remaining = scenario.totals();
    let combos: u128 = remaining.iter().map(|&b| u128::from(b) + 1).product();
    let tree = scenario.num_locations() as u128 * combos * scenario.horizon as u128 * (1 + 2 * combos);
    if tree > u128::from(BRUTE_FORCE_NODE_LIMIT) {
        return Err(too_large(scenario, &remaining, tree));
    }
    let mut plain = Search {
        scenario,
        nodes: 0,
        memo: None,
    };
    if let Some(v) = plain.value(1, start_location, &remaining) {
        return Ok(v);
    }
    let mut memoized = Search {
        scenario,
        nodes: 0,
        memo: Some(HashMap::new()),
    };
    memoized
        .value(1, start_location, &remaining)
        .ok_or_else(|| too_large(scenario, &remaining, u128::from(BRUTE_FORCE_NODE_LIMIT) + 1))
}

fn too_large<T: Scalar>(scenario: &Scenario<T>, remaining: &[Units], nodes: u128) -> Error {
    let sizes: Vec<String> = remaining.iter().map(|b| (b + 1).to_string()).collect();
    Error::Sizing {
        product: format!(
            "{} locations x {} sizes x {} slots x actions",
            scenario.num_locations(),
            sizes.join(" x "),
            scenario.horizon
        ),
        entries: nodes,
        bytes: 0,
        budget: u128::from(BRUTE_FORCE_NODE_LIMIT),
    }
}

type MemoKey = (usize, usize, Vec<Units>);

struct Search<'a, T> {
    scenario: &'a Scenario<T>,
    nodes: u64,
    memo: Option<HashMap<MemoKey, T>>,
}

impl<T: Scalar> Search<'_, T> {
    /// Cost-to-go before acting in slot `t`; `None` once the node limit is hit.
    fn value(&mut self, t: usize, loc: usize, rem: &[Units]) -> Option<T> {
        let sc = self.scenario;
        if t > sc.horizon {
            return Some(T::zero());
        }
        if let Some(v) = self.memo.as_ref().and_then(|m| m.get(&(t, loc, rem.to_vec()))) {
            return Some(*v);
        }
        self.nodes += 1;
        if self.nodes > BRUTE_FORCE_NODE_LIMIT {
            return None;
        }

        let place = &sc.locations[loc];
        let theta = match &sc.theta_schedule {
            Some(s) => s[t - 1],
            None => sc.costs.energy_preference,
        };
        let open: Vec<Units> = rem
            .iter()
            .zip(&sc.flows)
            .map(|(&b, f)| if t <= f.deadline { b } else { 0 })
            .collect();

        let mut best = self.follow(t, loc, rem, &vec![0; rem.len()], T::zero())?;
        for (network, capacity, energy) in [
            (Network::Wlan, place.wlan_capacity, place.wlan_energy),
            (Network::Cellular, place.cellular_capacity, place.cellular_energy),
        ] {
            if capacity == 0 || (network == Network::Wlan && !place.wlan_available) {
                continue;
            }
            for alloc in all_allocations(&open) {
                let sent: u64 = alloc.iter().map(|&a| u64::from(a)).sum();
                if sent == 0 || sent > u64::from(capacity) {
                    continue;
                }
                let mbit = sc.sigma * T::from_units(sent);
                let mut cost = theta * energy * mbit;
                if network == Network::Cellular {
                    cost = cost + sc.costs.price_per_mbit * mbit;
                }
                let v = self.follow(t, loc, rem, &alloc, cost)?;
                if v < best {
                    best = v;
                }
            }
        }
        if let Some(m) = self.memo.as_mut() {
            m.insert((t, loc, rem.to_vec()), best);
        }
        Some(best)
    }

    /// Slot cost plus deadline penalties plus the expectation over next cells.
    fn follow(&mut self, t: usize, loc: usize, rem: &[Units], alloc: &[Units], cost: T) -> Option<T> {
        let sc = self.scenario;
        let after: Vec<Units> = rem.iter().zip(alloc).map(|(b, a)| b - a).collect();
        let mut total = cost;
        for (f, &b) in sc.flows.iter().zip(&after) {
            if f.deadline == t {
                total = total + sc.costs.penalty_coefficient * sc.sigma * T::from_units(u64::from(b));
            }
        }
        if t == sc.horizon {
            return Some(total);
        }
        for next in 0..sc.num_locations() {
            let p = sc.mobility.probability(loc, next);
            if p == T::zero() {
                continue;
            }
            total = total + p * self.value(t + 1, next, &after)?;
        }
        Some(total)
    }
}

/// Every vector `a` with `0 <= a[j] <= caps[j]`.
fn all_allocations(caps: &[Units]) -> Vec<Vec<Units>> {
    let mut out = vec![Vec::with_capacity(caps.len())];
    for &c in caps {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=c).map(move |a| {
                    let mut v = prefix.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    out
}
