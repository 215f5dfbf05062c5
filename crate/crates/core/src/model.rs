//! Domain types and the per-slot cost and transition maths.
//!
//! Data sizes are tracked as integer multiples of the scenario's
//! discretization step `sigma` (see [`Units`]); only cost evaluation converts
//! to Mbit. This keeps state indexing exact for the solver.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mobility::MobilityModel;
use crate::{Error, Result, Scalar};

/// A data amount or per-slot rate expressed in multiples of `sigma`.
pub type Units = u32;

/// Which radio carries traffic in a slot. The declaration order is the
/// tie-break preference used by the solver: idle, then WLAN, then cellular.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Network {
    Idle,
    Wlan,
    Cellular,
}

impl Network {
    pub fn code(self) -> u8 {
        match self {
            Network::Idle => 0,
            Network::Wlan => 1,
            Network::Cellular => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Network::Idle),
            1 => Some(Network::Wlan),
            2 => Some(Network::Cellular),
            _ => None,
        }
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Network::Idle => "idle",
            Network::Wlan => "wlan",
            Network::Cellular => "cellular",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub id: usize,
    pub total_units: Units,
    /// Last slot (1-based) in which the flow may be served.
    pub deadline: usize,
}

impl FlowSpec {
    pub fn new(id: usize, total_units: Units, deadline: usize) -> Self {
        Self {
            id,
            total_units,
            deadline,
        }
    }
}

/// Radio conditions at one grid cell.
///
/// Capacities are what the solver can move per slot, in `sigma` units.
/// Throughputs are the nominal link speeds in Mbit/slot the capacities were
/// quantized from; the heuristic compares its WLAN speed threshold against
/// them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationProfile<T> {
    pub id: usize,
    pub wlan_available: bool,
    pub cellular_capacity: Units,
    pub wlan_capacity: Units,
    pub cellular_throughput: f64,
    pub wlan_throughput: f64,
    /// joule per Mbit
    pub cellular_energy: T,
    /// joule per Mbit
    pub wlan_energy: T,
}

impl<T: Scalar> LocationProfile<T> {
    /// Profile whose nominal throughputs equal the quantized capacities.
    pub fn from_capacities(
        id: usize,
        sigma: T,
        cellular_capacity: Units,
        wlan_capacity: Option<Units>,
        cellular_energy: T,
        wlan_energy: T,
    ) -> Self {
        let sigma = sigma.as_f64();
        let wlan = wlan_capacity.unwrap_or(0);
        Self {
            id,
            wlan_available: wlan > 0,
            cellular_capacity,
            wlan_capacity: wlan,
            cellular_throughput: f64::from(cellular_capacity) * sigma,
            wlan_throughput: f64::from(wlan) * sigma,
            cellular_energy,
            wlan_energy: if wlan > 0 { wlan_energy } else { T::zero() },
        }
    }

    pub fn capacity(&self, network: Network) -> Units {
        match network {
            Network::Idle => 0,
            Network::Wlan if self.wlan_available => self.wlan_capacity,
            Network::Wlan => 0,
            Network::Cellular => self.cellular_capacity,
        }
    }

    pub fn energy_rate(&self, network: Network) -> T {
        match network {
            Network::Idle => T::zero(),
            Network::Wlan => self.wlan_energy,
            Network::Cellular => self.cellular_energy,
        }
    }

    pub fn throughput(&self, network: Network) -> f64 {
        match network {
            Network::Idle => 0.0,
            Network::Wlan if self.wlan_available => self.wlan_throughput,
            Network::Wlan => 0.0,
            Network::Cellular => self.cellular_throughput,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cellular_capacity == 0 {
            return Err(Error::Config(format!(
                "location {}: cellular capacity must be positive",
                self.id
            )));
        }
        if self.wlan_available != (self.wlan_capacity > 0) {
            return Err(Error::Config(format!(
                "location {}: wlan_available must match a positive wlan capacity",
                self.id
            )));
        }
        if self.cellular_energy < T::zero() || self.wlan_energy < T::zero() {
            return Err(Error::Config(format!(
                "location {}: energy rates must be non-negative",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    pub location: usize,
    pub remaining: Vec<Units>,
}

impl State {
    pub fn new(location: usize, remaining: Vec<Units>) -> Self {
        Self {
            location,
            remaining,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.remaining.iter().all(|&b| b == 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub network: Network,
    pub allocation: Vec<Units>,
}

impl Action {
    pub fn idle(num_flows: usize) -> Self {
        Self {
            network: Network::Idle,
            allocation: vec![0; num_flows],
        }
    }

    pub fn new(network: Network, allocation: Vec<Units>) -> Self {
        if allocation.iter().all(|&a| a == 0) {
            return Self {
                network: Network::Idle,
                allocation,
            };
        }
        Self {
            network,
            allocation,
        }
    }

    pub fn total(&self) -> u64 {
        self.allocation.iter().map(|&a| u64::from(a)).sum()
    }

    pub fn is_idle(&self) -> bool {
        self.network == Network::Idle
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.network, self.allocation)
    }
}

/// Prices and preference weights. Sizes in Mbit, money in yen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams<T> {
    pub price_per_mbit: T,
    /// Weight turning joules into cost units.
    pub energy_preference: T,
    pub penalty_coefficient: T,
}

impl<T: Scalar> CostParams<T> {
    pub fn new(price_per_mbit: T, energy_preference: T, penalty_coefficient: T) -> Self {
        Self {
            price_per_mbit,
            energy_preference,
            penalty_coefficient,
        }
    }

    /// 1.5 yen per Mbyte and a penalty of 2 per unfinished Mbit.
    pub fn reference(energy_preference: T) -> Self {
        Self::new(T::from_ratio(3, 16), energy_preference, T::from_units(2))
    }

    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        if self.price_per_mbit < zero
            || self.energy_preference < zero
            || self.penalty_coefficient < zero
        {
            return Err(Error::Config("cost parameters must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionMode {
    /// Every sigma-granular split of a network's capacity.
    Exhaustive,
    /// One earliest-deadline-first fill per network.
    #[default]
    EdfRestricted,
}

impl FromStr for ActionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(ActionMode::Exhaustive),
            "edf-restricted" | "edf" => Ok(ActionMode::EdfRestricted),
            other => Err(Error::Parse(format!("unknown action mode `{other}`"))),
        }
    }
}

impl fmt::Display for ActionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionMode::Exhaustive => "exhaustive",
            ActionMode::EdfRestricted => "edf-restricted",
        })
    }
}

/// An immutable problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub grid_width: usize,
    pub grid_height: usize,
    pub locations: Vec<LocationProfile<T>>,
    pub mobility: MobilityModel<T>,
    pub flows: Vec<FlowSpec>,
    pub horizon: usize,
    pub costs: CostParams<T>,
    /// Optional per-slot energy preference; entry `t - 1` applies to slot `t`.
    pub theta_schedule: Option<Vec<T>>,
    /// Mbit per unit.
    pub sigma: T,
    pub rng_seed: u64,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(
        locations: Vec<LocationProfile<T>>,
        mobility: MobilityModel<T>,
        flows: Vec<FlowSpec>,
        costs: CostParams<T>,
        sigma: T,
        rng_seed: u64,
    ) -> Result<Self> {
        let horizon = flows.iter().map(|f| f.deadline).max().unwrap_or(0);
        let scenario = Self {
            grid_width: mobility.width(),
            grid_height: mobility.height(),
            locations,
            mobility,
            flows,
            horizon,
            costs,
            theta_schedule: None,
            sigma,
            rng_seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn with_theta_schedule(mut self, schedule: Vec<T>) -> Result<Self> {
        self.theta_schedule = Some(schedule);
        self.validate()?;
        Ok(self)
    }

    pub fn with_costs(mut self, costs: CostParams<T>) -> Result<Self> {
        self.costs = costs;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.grid_width * self.grid_height;
        if cells == 0 {
            return Err(Error::Config("grid must have at least one cell".into()));
        }
        if self.locations.len() != cells || self.mobility.len() != cells {
            return Err(Error::Config(format!(
                "grid has {cells} cells but {} location profiles and a {}-state mobility model",
                self.locations.len(),
                self.mobility.len()
            )));
        }
        for (i, loc) in self.locations.iter().enumerate() {
            if loc.id != i {
                return Err(Error::Config(format!("location {i} carries id {}", loc.id)));
            }
            loc.validate()?;
        }
        if self.flows.is_empty() {
            return Err(Error::Config("scenario needs at least one flow".into()));
        }
        for (j, flow) in self.flows.iter().enumerate() {
            if flow.deadline == 0 {
                return Err(Error::Config(format!("flow {j}: deadline must be >= 1")));
            }
            if j > 0 && self.flows[j - 1].deadline > flow.deadline {
                return Err(Error::Config(
                    "flows must be ordered by non-decreasing deadline".into(),
                ));
            }
        }
        let horizon = self.flows.iter().map(|f| f.deadline).max().unwrap_or(0);
        if self.horizon != horizon {
            return Err(Error::Config(format!(
                "horizon {} differs from last deadline {horizon}",
                self.horizon
            )));
        }
        if self.sigma <= T::zero() {
            return Err(Error::Config("sigma must be positive".into()));
        }
        self.costs.validate()?;
        if let Some(schedule) = &self.theta_schedule {
            if schedule.len() < self.horizon {
                return Err(Error::Config(format!(
                    "theta schedule has {} entries, horizon is {}",
                    schedule.len(),
                    self.horizon
                )));
            }
            if schedule.iter().any(|&x| x < T::zero()) {
                return Err(Error::Config("theta schedule must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn num_flows(&self) -> usize {
        self.flows.len()
    }

    pub fn num_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn totals(&self) -> Vec<Units> {
        self.flows.iter().map(|f| f.total_units).collect()
    }

    pub fn deadlines(&self) -> Vec<usize> {
        self.flows.iter().map(|f| f.deadline).collect()
    }

    pub fn initial_state(&self, location: usize) -> State {
        State::new(location, self.totals())
    }

    /// Cost parameters in force at slot `epoch`.
    pub fn costs_at(&self, epoch: usize) -> CostParams<T> {
        let mut costs = self.costs.clone();
        if let Some(theta) = self
            .theta_schedule
            .as_ref()
            .and_then(|s| s.get(epoch.wrapping_sub(1)))
        {
            costs.energy_preference = *theta;
        }
        costs
    }

    pub fn mbit(&self, units: u64) -> T {
        self.sigma * T::from_units(units)
    }

    /// A flow may be served while `epoch <= deadline`.
    pub fn is_servable(&self, flow: usize, epoch: usize) -> bool {
        epoch <= self.flows[flow].deadline
    }

    pub fn check_state(&self, state: &State) -> Result<()> {
        if state.location >= self.num_locations() {
            return Err(Error::Infeasible(format!(
                "location {} outside grid of {} cells",
                state.location,
                self.num_locations()
            )));
        }
        if state.remaining.len() != self.num_flows() {
            return Err(Error::Infeasible("remaining vector has wrong length".into()));
        }
        for (b, f) in state.remaining.iter().zip(&self.flows) {
            if *b > f.total_units {
                return Err(Error::Infeasible(format!(
                    "flow {} remaining {b} exceeds its size {}",
                    f.id, f.total_units
                )));
            }
        }
        Ok(())
    }

    /// Full feasibility of `action` in `state` at slot `epoch`: state-level
    /// bounds, network availability, capacity, and no service after a
    /// flow's deadline.
    pub fn check_feasible(&self, epoch: usize, state: &State, action: &Action) -> Result<()> {
        self.check_state(state)?;
        check_against_state(state, action)?;
        let location = &self.locations[state.location];
        if action.network == Network::Wlan && !location.wlan_available {
            return Err(Error::Infeasible(format!(
                "no WLAN at location {}",
                state.location
            )));
        }
        let capacity = u64::from(location.capacity(action.network));
        if action.total() > capacity {
            return Err(Error::Infeasible(format!(
                "{action} exceeds {} capacity {capacity}",
                action.network
            )));
        }
        for (j, &a) in action.allocation.iter().enumerate() {
            if a > 0 && !self.is_servable(j, epoch) {
                return Err(Error::Infeasible(format!(
                    "flow {j} served at slot {epoch} after its deadline {}",
                    self.flows[j].deadline
                )));
            }
        }
        Ok(())
    }
}

/// Structural checks that only need the state: matching length, idle
/// actions carry nothing, and no flow receives more than it has left.
pub fn check_against_state(state: &State, action: &Action) -> Result<()> {
    if action.allocation.len() != state.remaining.len() {
        return Err(Error::Infeasible(format!(
            "allocation has {} entries for {} flows",
            action.allocation.len(),
            state.remaining.len()
        )));
    }
    if action.network == Network::Idle && action.total() > 0 {
        return Err(Error::Infeasible("idle action with nonzero allocation".into()));
    }
    for (j, (&a, &b)) in action.allocation.iter().zip(&state.remaining).enumerate() {
        if a > b {
            return Err(Error::Infeasible(format!(
                "flow {j} allocated {a} but only {b} remain"
            )));
        }
    }
    Ok(())
}

/// Units actually delivered on `network`: sum of min(remaining, allocation).
pub fn served_units(state: &State, action: &Action, network: Network) -> u64 {
    if action.network != network || network == Network::Idle {
        return 0;
    }
    action
        .allocation
        .iter()
        .zip(&state.remaining)
        .map(|(&a, &b)| u64::from(a.min(b)))
        .sum()
}

/// Usage-based payment for this slot. Only cellular traffic is billed.
pub fn monetary_cost<T: Scalar>(
    state: &State,
    action: &Action,
    costs: &CostParams<T>,
    sigma: T,
) -> Result<T> {
    check_against_state(state, action)?;
    let served = served_units(state, action, Network::Cellular);
    Ok(costs.price_per_mbit * sigma * T::from_units(served))
}

/// Unweighted joules spent this slot.
pub fn raw_energy<T: Scalar>(
    state: &State,
    action: &Action,
    location: &LocationProfile<T>,
    sigma: T,
) -> Result<T> {
    check_against_state(state, action)?;
    let cellular = T::from_units(served_units(state, action, Network::Cellular));
    let wlan = T::from_units(served_units(state, action, Network::Wlan));
    Ok(sigma * (location.cellular_energy * cellular + location.wlan_energy * wlan))
}

/// Energy term of the stage cost: raw joules scaled by the preference weight.
pub fn energy_cost<T: Scalar>(
    state: &State,
    action: &Action,
    location: &LocationProfile<T>,
    costs: &CostParams<T>,
    sigma: T,
) -> Result<T> {
    Ok(costs.energy_preference * raw_energy(state, action, location, sigma)?)
}

/// Linear penalty on data left when a deadline passes.
pub fn penalty<T: Scalar>(remaining: &[Units], costs: &CostParams<T>, sigma: T) -> T {
    let left: u64 = remaining.iter().map(|&b| u64::from(b)).sum();
    costs.penalty_coefficient * sigma * T::from_units(left)
}

pub fn stage_reward<T: Scalar>(
    state: &State,
    action: &Action,
    location: &LocationProfile<T>,
    costs: &CostParams<T>,
    sigma: T,
) -> Result<T> {
    Ok(monetary_cost(state, action, costs, sigma)?
        + energy_cost(state, action, location, costs, sigma)?)
}

/// Remaining sizes after serving `action`. Location plays no part.
pub fn apply_action(state: &State, action: &Action) -> Result<Vec<Units>> {
    check_against_state(state, action)?;
    Ok(state
        .remaining
        .iter()
        .zip(&action.allocation)
        .map(|(&b, &a)| b.saturating_sub(a))
        .collect())
}

/// Candidate actions in `state` at slot `epoch`.
///
/// The list starts with idle, then WLAN actions, then cellular actions; within
/// a network allocations are in lexicographic order. Flows past their deadline
/// or already finished never receive capacity.
pub fn enumerate_actions<T: Scalar>(
    state: &State,
    location: &LocationProfile<T>,
    epoch: usize,
    flows: &[FlowSpec],
    mode: ActionMode,
) -> Vec<Action> {
    let m = state.remaining.len();
    let caps: Vec<Units> = state
        .remaining
        .iter()
        .zip(flows)
        .map(|(&b, f)| if epoch <= f.deadline { b } else { 0 })
        .collect();

    let mut actions = vec![Action::idle(m)];
    if caps.iter().all(|&c| c == 0) {
        return actions;
    }
    for network in [Network::Wlan, Network::Cellular] {
        let capacity = location.capacity(network);
        if capacity == 0 {
            continue;
        }
        match mode {
            ActionMode::Exhaustive => {
                let mut current = vec![0; m];
                compositions(&caps, capacity, 0, &mut current, &mut |alloc| {
                    if alloc.iter().any(|&a| a > 0) {
                        actions.push(Action::new(network, alloc.to_vec()));
                    }
                });
            }
            ActionMode::EdfRestricted => {
                let alloc = edf_fill(&caps, flows, capacity);
                if alloc.iter().any(|&a| a > 0) {
                    actions.push(Action::new(network, alloc));
                }
            }
        }
    }
    actions
}

fn compositions(
    caps: &[Units],
    budget: Units,
    index: usize,
    current: &mut Vec<Units>,
    emit: &mut impl FnMut(&[Units]),
) {
    if index == caps.len() {
        emit(current);
        return;
    }
    for a in 0..=caps[index].min(budget) {
        current[index] = a;
        compositions(caps, budget - a, index + 1, current, emit);
    }
    current[index] = 0;
}

/// Fill `capacity` greedily in earliest-deadline-first order, each flow
/// capped at `caps[j]`. Ties on deadline go to the lower index.
pub fn edf_fill(caps: &[Units], flows: &[FlowSpec], capacity: Units) -> Vec<Units> {
    let mut order: Vec<usize> = (0..caps.len()).collect();
    order.sort_by_key(|&j| (flows[j].deadline, j));
    let mut left = capacity;
    let mut alloc = vec![0; caps.len()];
    for j in order {
        let take = caps[j].min(left);
        alloc[j] = take;
        left -= take;
        if left == 0 {
            break;
        }
    }
    alloc
}

/// Something that picks an action for every (slot, state).
pub trait Policy<T: Scalar>: Sync {
    fn name(&self) -> &str;

    fn decide(&self, scenario: &Scenario<T>, epoch: usize, state: &State) -> Result<Action>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::{build_grid_mobility, Adjacency};
    use proptest::prelude::*;

    fn one_mbit_location(cell: Units, wlan: Option<Units>, eps_c: f64, eps_w: f64) -> LocationProfile<f64> {
        LocationProfile::from_capacities(0, 1.0, cell, wlan, eps_c, eps_w)
    }

    fn flows(spec: &[(Units, usize)]) -> Vec<FlowSpec> {
        spec.iter()
            .enumerate()
            .map(|(i, &(b, d))| FlowSpec::new(i, b, d))
            .collect()
    }

    #[test]
    fn monetary_cost_of_cellular_split() {
        let costs = CostParams::reference(0.0f64);
        assert_eq!(costs.price_per_mbit, 0.1875);
        let state = State::new(0, vec![10, 5]);
        let action = Action::new(Network::Cellular, vec![8, 5]);
        let cost = monetary_cost(&state, &action, &costs, 1.0).unwrap();
        assert!((cost - 2.4375).abs() < 1e-12);
    }

    #[test]
    fn idle_and_wlan_are_free() {
        let costs = CostParams::reference(1.0);
        let state = State::new(0, vec![10, 5]);
        assert_eq!(monetary_cost(&state, &Action::idle(2), &costs, 1.0).unwrap(), 0.0);
        let wlan = Action::new(Network::Wlan, vec![3, 2]);
        assert_eq!(monetary_cost(&state, &wlan, &costs, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn energy_cost_examples() {
        let state = State::new(0, vec![20]);
        let loc = one_mbit_location(10, Some(20), 0.7107, 0.484);

        let zero = CostParams::reference(0.0);
        let any = Action::new(Network::Cellular, vec![7]);
        assert_eq!(energy_cost(&state, &any, &loc, &zero, 1.0).unwrap(), 0.0);

        let one = CostParams::reference(1.0);
        let wlan = Action::new(Network::Wlan, vec![10]);
        let e = energy_cost(&state, &wlan, &loc, &one, 1.0).unwrap();
        assert!((e - 4.84).abs() < 1e-12);

        let two = CostParams::reference(2.0);
        let cell = Action::new(Network::Cellular, vec![4]);
        let e = energy_cost(&state, &cell, &loc, &two, 1.0).unwrap();
        assert!((e - 5.6856).abs() < 1e-12);
        assert!((raw_energy(&state, &cell, &loc, 1.0).unwrap() - 2.8428).abs() < 1e-12);
    }

    #[test]
    fn penalty_examples() {
        let costs = CostParams::reference(0.0);
        assert_eq!(penalty(&[3, 4], &costs, 1.0), 14.0);
        assert_eq!(penalty(&[0, 0], &costs, 1.0), 0.0);
        assert_eq!(penalty(&[500], &costs, 1.0), 1000.0);
        assert_eq!(penalty(&[20], &costs, 25.0), 1000.0);
    }

    #[test]
    fn stage_reward_composes() {
        let loc = one_mbit_location(10, Some(20), 0.7107, 0.484);
        let state = State::new(0, vec![10, 5]);
        let costs = CostParams::reference(2.0);
        assert_eq!(
            stage_reward(&state, &Action::idle(2), &loc, &costs, 1.0).unwrap(),
            0.0
        );
        let cell = Action::new(Network::Cellular, vec![4, 0]);
        let r = stage_reward(&state, &cell, &loc, &costs, 1.0).unwrap();
        assert!((r - (4.0 * 0.1875 + 5.6856)).abs() < 1e-12);

        let free = CostParams::reference(0.0);
        let wlan = Action::new(Network::Wlan, vec![5, 5]);
        assert_eq!(stage_reward(&state, &wlan, &loc, &free, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn apply_action_examples() {
        let s = State::new(0, vec![10, 5]);
        assert_eq!(
            apply_action(&s, &Action::new(Network::Cellular, vec![8, 5])).unwrap(),
            vec![2, 0]
        );
        assert_eq!(apply_action(&s, &Action::idle(2)).unwrap(), vec![10, 5]);
        let s = State::new(0, vec![4, 0]);
        assert_eq!(
            apply_action(&s, &Action::new(Network::Wlan, vec![4, 0])).unwrap(),
            vec![0, 0]
        );
    }

    #[test]
    fn over_allocation_is_rejected() {
        let s = State::new(0, vec![2]);
        let a = Action::new(Network::Cellular, vec![3]);
        assert!(matches!(apply_action(&s, &a), Err(Error::Infeasible(_))));
        assert!(matches!(
            monetary_cost(&s, &a, &CostParams::reference(0.0), 1.0),
            Err(Error::Infeasible(_))
        ));
        let bad_idle = Action {
            network: Network::Idle,
            allocation: vec![1],
        };
        assert!(check_against_state(&s, &bad_idle).is_err());
    }

    #[test]
    fn enumerate_single_flow() {
        let loc = one_mbit_location(2, None, 1.0, 0.0);
        let f = flows(&[(3, 5)]);
        let s = State::new(0, vec![3]);
        let ex = enumerate_actions(&s, &loc, 1, &f, ActionMode::Exhaustive);
        assert_eq!(
            ex,
            vec![
                Action::idle(1),
                Action::new(Network::Cellular, vec![1]),
                Action::new(Network::Cellular, vec![2]),
            ]
        );
        let edf = enumerate_actions(&s, &loc, 1, &f, ActionMode::EdfRestricted);
        assert_eq!(
            edf,
            vec![Action::idle(1), Action::new(Network::Cellular, vec![2])]
        );
    }

    #[test]
    fn enumerate_empty_state_is_idle_only() {
        let loc = one_mbit_location(4, Some(4), 1.0, 1.0);
        let f = flows(&[(3, 5), (3, 5)]);
        let s = State::new(0, vec![0, 0]);
        for mode in [ActionMode::Exhaustive, ActionMode::EdfRestricted] {
            assert_eq!(enumerate_actions(&s, &loc, 1, &f, mode), vec![Action::idle(2)]);
        }
    }

    #[test]
    fn enumerate_two_flow_wlan_splits() {
        let loc = one_mbit_location(1, Some(2), 1.0, 1.0);
        let f = flows(&[(1, 5), (1, 5)]);
        let s = State::new(0, vec![1, 1]);
        let wlan: Vec<Vec<Units>> = enumerate_actions(&s, &loc, 1, &f, ActionMode::Exhaustive)
            .into_iter()
            .filter(|a| a.network == Network::Wlan)
            .map(|a| a.allocation)
            .collect();
        assert_eq!(wlan, vec![vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn expired_flows_get_nothing() {
        let loc = one_mbit_location(3, None, 1.0, 0.0);
        let f = flows(&[(3, 1), (3, 4)]);
        let s = State::new(0, vec![3, 3]);
        for mode in [ActionMode::Exhaustive, ActionMode::EdfRestricted] {
            for a in enumerate_actions(&s, &loc, 2, &f, mode) {
                assert_eq!(a.allocation[0], 0);
            }
        }
    }

    fn count_bounded(caps: &[Units], k: Units) -> u64 {
        // ways[s] = number of vectors seen so far summing to s
        let mut ways = vec![0u64; k as usize + 1];
        ways[0] = 1;
        for &c in caps {
            let mut next = vec![0u64; k as usize + 1];
            for (s, &w) in ways.iter().enumerate() {
                for a in 0..=c as usize {
                    if s + a <= k as usize {
                        next[s + a] += w;
                    }
                }
            }
            ways = next;
        }
        ways[1..].iter().sum()
    }

    fn test_scenario() -> Scenario<f64> {
        let mob = build_grid_mobility(2, 1, 0.5, Adjacency::VonNeumann).unwrap();
        let locs = vec![
            LocationProfile::from_capacities(0, 1.0, 2, Some(3), 0.5, 0.3),
            LocationProfile::from_capacities(1, 1.0, 1, None, 0.7, 0.0),
        ];
        Scenario::new(
            locs,
            mob,
            flows(&[(4, 2), (3, 3)]),
            CostParams::reference(1.0),
            1.0,
            7,
        )
        .unwrap()
    }

    #[test]
    fn scenario_validation() {
        let sc = test_scenario();
        assert_eq!(sc.horizon, 3);
        let mut bad = sc.clone();
        bad.flows.swap(0, 1);
        assert!(bad.validate().is_err());
        let mut bad = sc.clone();
        bad.horizon = 5;
        assert!(bad.validate().is_err());
        assert!(sc.clone().with_theta_schedule(vec![1.0]).is_err());
        let scheduled = sc.with_theta_schedule(vec![0.0, 2.0, 3.0]).unwrap();
        assert_eq!(scheduled.costs_at(2).energy_preference, 2.0);
        assert_eq!(scheduled.costs_at(9).energy_preference, 1.0);
    }

    #[test]
    fn feasibility_checks_capacity_and_availability() {
        let sc = test_scenario();
        let s = State::new(1, vec![4, 3]);
        assert!(sc
            .check_feasible(1, &s, &Action::new(Network::Wlan, vec![1, 0]))
            .is_err());
        assert!(sc
            .check_feasible(1, &s, &Action::new(Network::Cellular, vec![1, 1]))
            .is_err());
        assert!(sc
            .check_feasible(1, &s, &Action::new(Network::Cellular, vec![1, 0]))
            .is_ok());
        assert!(sc
            .check_feasible(3, &State::new(0, vec![4, 3]), &Action::new(Network::Wlan, vec![1, 0]))
            .is_err());
    }

    proptest! {
        #[test]
        fn exhaustive_count_matches_bounded_compositions(
            caps in proptest::collection::vec(0u32..=5, 1..=5),
            k in 1u32..=5,
        ) {
            let m = caps.len();
            let f: Vec<FlowSpec> = (0..m).map(|i| FlowSpec::new(i, 5, 10)).collect();
            let loc = one_mbit_location(k, None, 1.0, 0.0);
            let s = State::new(0, caps.clone());
            let actions = enumerate_actions(&s, &loc, 1, &f, ActionMode::Exhaustive);
            let cellular = actions.iter().filter(|a| a.network == Network::Cellular).count() as u64;
            prop_assert_eq!(cellular, count_bounded(&caps, k));
        }

        #[test]
        fn enumerated_actions_are_feasible_and_cover_edf(
            b0 in 0u32..=4, b1 in 0u32..=3, loc_idx in 0usize..2, epoch in 1usize..=3,
        ) {
            let sc = test_scenario();
            let s = State::new(loc_idx, vec![b0, b1]);
            let loc = &sc.locations[loc_idx];
            let ex = enumerate_actions(&s, loc, epoch, &sc.flows, ActionMode::Exhaustive);
            let edf = enumerate_actions(&s, loc, epoch, &sc.flows, ActionMode::EdfRestricted);
            let mut seen = std::collections::HashSet::new();
            for a in &ex {
                prop_assert!(sc.check_feasible(epoch, &s, a).is_ok());
                prop_assert!(seen.insert(a.clone()));
                let costs = sc.costs_at(epoch);
                let r = stage_reward(&s, a, loc, &costs, sc.sigma).unwrap();
                prop_assert!(r >= 0.0);
                let next = apply_action(&s, a).unwrap();
                for (n, b) in next.iter().zip(&s.remaining) {
                    prop_assert!(n <= b);
                }
            }
            for a in &edf {
                prop_assert!(ex.contains(a));
            }
        }

        #[test]
        fn monetary_is_linear_and_theta_zero_reward_is_monetary(
            a0 in 0u32..=6, a1 in 0u32..=6, price in 0.0f64..3.0,
        ) {
            let s = State::new(0, vec![6, 6]);
            let loc = one_mbit_location(12, None, 0.9, 0.0);
            let costs = CostParams::new(price, 0.0, 2.0);
            let act = Action::new(Network::Cellular, vec![a0, a1]);
            let m = monetary_cost(&s, &act, &costs, 1.0).unwrap();
            prop_assert!((m - price * f64::from(a0 + a1)).abs() < 1e-9);
            prop_assert_eq!(stage_reward(&s, &act, &loc, &costs, 1.0).unwrap(), m);
        }
    }
}
