//! Exact finite-horizon solver.
//!
//! Values are computed backwards from the slot after the last deadline. At
//! that boundary every state is worth the penalty on flows whose deadline
//! is the horizon. Flows with earlier deadlines are charged inside the
//! backup at their deadline slot, on what is left after that slot's
//! action, and are frozen afterwards.
//!
//! Within one slot every state is backed up independently against the
//! next slot's table, so the sweep over states runs on the rayon pool. Each
//! state's argmin is a sequential scan in enumeration order, so results do
//! not depend on the thread count.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::io::fingerprint::scenario_fingerprint;
use crate::model::{
    apply_action, enumerate_actions, penalty, stage_reward, Action, ActionMode, Network, Policy,
    Scenario, State, Units,
};
use crate::{Error, Result, Scalar};

/// Default memory budget for value and policy tables: 2 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

/// Dense indexing of (location, remaining-vector) states.
///
/// Remaining vectors are mixed-radix numbers with the last flow least
/// significant; the location is the most significant digit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSpace {
    num_locations: usize,
    totals: Vec<Units>,
    strides: Vec<usize>,
    per_location: usize,
}

impl StateSpace {
    pub fn new(num_locations: usize, totals: Vec<Units>) -> Result<Self> {
        let mut strides = vec![0; totals.len()];
        let mut per_location: usize = 1;
        for j in (0..totals.len()).rev() {
            strides[j] = per_location;
            per_location = per_location
                .checked_mul(totals[j] as usize + 1)
                .ok_or_else(|| Error::Config("state space overflows usize".into()))?;
        }
        per_location
            .checked_mul(num_locations)
            .ok_or_else(|| Error::Config("state space overflows usize".into()))?;
        Ok(Self {
            num_locations,
            totals,
            strides,
            per_location,
        })
    }

    pub fn for_scenario<T: Scalar>(scenario: &Scenario<T>) -> Result<Self> {
        Self::new(scenario.num_locations(), scenario.totals())
    }

    pub fn num_locations(&self) -> usize {
        self.num_locations
    }

    pub fn totals(&self) -> &[Units] {
        &self.totals
    }

    pub fn num_flows(&self) -> usize {
        self.totals.len()
    }

    pub fn per_location(&self) -> usize {
        self.per_location
    }

    pub fn per_epoch(&self) -> usize {
        self.per_location * self.num_locations
    }

    pub fn remaining_index(&self, remaining: &[Units]) -> Option<usize> {
        if remaining.len() != self.totals.len() {
            return None;
        }
        let mut idx = 0;
        for ((&b, &cap), &stride) in remaining.iter().zip(&self.totals).zip(&self.strides) {
            if b > cap {
                return None;
            }
            idx += b as usize * stride;
        }
        Some(idx)
    }

    pub fn index(&self, state: &State) -> Option<usize> {
        if state.location >= self.num_locations {
            return None;
        }
        self.remaining_index(&state.remaining)
            .map(|r| state.location * self.per_location + r)
    }

    /// Writes the remaining vector of `index` into `buf` and returns the location.
    pub fn decode_into(&self, index: usize, buf: &mut [Units]) -> usize {
        let location = index / self.per_location;
        let mut rest = index % self.per_location;
        for (slot, &stride) in buf.iter_mut().zip(&self.strides) {
            *slot = (rest / stride) as Units;
            rest %= stride;
        }
        location
    }

    pub fn state(&self, index: usize) -> State {
        let mut remaining = vec![0; self.totals.len()];
        let location = self.decode_into(index, &mut remaining);
        State::new(location, remaining)
    }
}

/// Pre-flight estimate of table memory. Fails with a sizing error naming
/// the factor product when the budget would be exceeded.
pub fn check_budget<T: Scalar>(scenario: &Scenario<T>, budget: u64) -> Result<u128> {
    let totals = scenario.totals();
    let mut entries: u128 = scenario.num_locations() as u128;
    let mut factors = vec![format!("{} locations", scenario.num_locations())];
    for b in &totals {
        entries = entries.saturating_mul(u128::from(*b) + 1);
        factors.push(format!("{}", u64::from(*b) + 1));
    }
    let epochs = scenario.horizon as u128 + 1;
    factors.push(format!("{epochs} epochs"));
    entries = entries.saturating_mul(epochs);
    let per_entry =
        std::mem::size_of::<T>() as u128 + 1 + (std::mem::size_of::<Units>() * totals.len()) as u128;
    let bytes = entries.saturating_mul(per_entry);
    if bytes > u128::from(budget) {
        return Err(Error::Sizing {
            product: factors.join(" x "),
            entries,
            bytes,
            budget: u128::from(budget),
        });
    }
    Ok(bytes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverOptions {
    pub action_mode: ActionMode,
    pub memory_budget: u64,
}

impl SolverOptions {
    /// Exhaustive splits for a single flow, EDF fills otherwise.
    pub fn for_flows(num_flows: usize) -> Self {
        Self {
            action_mode: if num_flows <= 1 {
                ActionMode::Exhaustive
            } else {
                ActionMode::EdfRestricted
            },
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    pub fn with_mode(mode: ActionMode) -> Self {
        Self {
            action_mode: mode,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// Expected cost-to-go per slot. Slot `t` lives at `values[t - 1]`; the
/// extra last row is the boundary after the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable<T> {
    space: StateSpace,
    horizon: usize,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> ValueTable<T> {
    pub fn new(space: StateSpace, horizon: usize, values: Vec<Vec<T>>) -> Self {
        Self {
            space,
            horizon,
            values,
        }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Whole table for slot `epoch` (1-based, up to `horizon + 1`).
    pub fn at(&self, epoch: usize) -> &[T] {
        &self.values[epoch - 1]
    }

    pub fn get(&self, epoch: usize, state: &State) -> Option<T> {
        if epoch == 0 || epoch > self.horizon + 1 {
            return None;
        }
        self.space.index(state).map(|i| self.values[epoch - 1][i])
    }
}

/// Minimizing action for every slot and state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolicyTable {
    space: StateSpace,
    horizon: usize,
    fingerprint: [u8; 32],
    networks: Vec<Vec<u8>>,
    allocations: Vec<Vec<Units>>,
}

impl PolicyTable {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Content hash of the scenario the table was solved for.
    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn lookup_action(&self, epoch: usize, state: &State) -> Result<Action> {
        let miss = || Error::Lookup {
            epoch,
            location: state.location,
            remaining: state.remaining.clone(),
        };
        if epoch == 0 || epoch > self.horizon {
            return Err(miss());
        }
        let idx = self.space.index(state).ok_or_else(miss)?;
        Ok(self.action_at(epoch, idx))
    }

    fn action_at(&self, epoch: usize, idx: usize) -> Action {
        let m = self.space.num_flows();
        let network = Network::from_code(self.networks[epoch - 1][idx]).unwrap_or(Network::Idle);
        let allocation = self.allocations[epoch - 1][idx * m..(idx + 1) * m].to_vec();
        Action {
            network,
            allocation,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    /// Binary layout, all integers little-endian:
    ///
    /// ```text
    /// magic        8 bytes  "OFFLPOL\0"
    /// version      u32      1
    /// fingerprint  32 bytes SHA-256 of the scenario
    /// locations    u32
    /// flows        u32      M
    /// horizon      u32
    /// totals       M x u32  flow sizes in sigma units
    /// rows         for t = 1..=horizon, for each state index in order:
    ///              u8 network (0 idle, 1 wlan, 2 cellular), M x u32 allocation
    /// ```
    ///
    /// State index order is location-major, then the remaining vector as a
    /// mixed-radix number with the last flow least significant.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(POLICY_MAGIC)?;
        w.write_all(&POLICY_VERSION.to_le_bytes())?;
        w.write_all(&self.fingerprint)?;
        write_u32(w, self.space.num_locations())?;
        write_u32(w, self.space.num_flows())?;
        write_u32(w, self.horizon)?;
        for &b in self.space.totals() {
            w.write_all(&b.to_le_bytes())?;
        }
        let m = self.space.num_flows();
        for (nets, allocs) in self.networks.iter().zip(&self.allocations) {
            for (idx, &net) in nets.iter().enumerate() {
                w.write_all(&[net])?;
                for &a in &allocs[idx * m..(idx + 1) * m] {
                    w.write_all(&a.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != POLICY_MAGIC {
            return Err(Error::PolicyFormat("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != POLICY_VERSION {
            return Err(Error::PolicyFormat(format!("unsupported version {version}")));
        }
        let mut fingerprint = [0u8; 32];
        r.read_exact(&mut fingerprint)?;
        let num_locations = read_u32(r)? as usize;
        let m = read_u32(r)? as usize;
        let horizon = read_u32(r)? as usize;
        let totals = (0..m).map(|_| read_u32(r)).collect::<Result<Vec<_>>>()?;
        let space = StateSpace::new(num_locations, totals)?;
        let n = space.per_epoch();
        let mut networks = Vec::with_capacity(horizon);
        let mut allocations = Vec::with_capacity(horizon);
        let mut remaining = vec![0; m];
        let mut row = vec![0u8; 1 + 4 * m];
        for epoch in 1..=horizon {
            let mut nets = Vec::with_capacity(n);
            let mut allocs = Vec::with_capacity(n * m);
            for idx in 0..n {
                r.read_exact(&mut row)?;
                let net = Network::from_code(row[0]).ok_or_else(|| {
                    Error::PolicyFormat(format!("bad network code {} at slot {epoch}", row[0]))
                })?;
                space.decode_into(idx, &mut remaining);
                for (j, chunk) in row[1..].chunks_exact(4).enumerate() {
                    let a = u32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
                    if a > remaining[j] || (net == Network::Idle && a > 0) {
                        return Err(Error::PolicyFormat(format!(
                            "infeasible allocation at slot {epoch}, state {idx}"
                        )));
                    }
                    allocs.push(a);
                }
                nets.push(net.code());
            }
            networks.push(nets);
            allocations.push(allocs);
        }
        let mut tail = [0u8; 1];
        if r.read(&mut tail)? != 0 {
            return Err(Error::PolicyFormat("trailing bytes".into()));
        }
        Ok(Self {
            space,
            horizon,
            fingerprint,
            networks,
            allocations,
        })
    }
}

const POLICY_MAGIC: &[u8; 8] = b"OFFLPOL\0";
const POLICY_VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::PolicyFormat(format!("{v} exceeds u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

impl<T: Scalar> Policy<T> for PolicyTable {
    fn name(&self) -> &str {
        "dp"
    }

    fn decide(&self, _scenario: &Scenario<T>, epoch: usize, state: &State) -> Result<Action> {
        self.lookup_action(epoch, state)
    }
}

#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub values: ValueTable<T>,
    pub policy: PolicyTable,
}

impl<T: Scalar> Solution<T> {
    /// Optimal expected cost from the full initial sizes at `location`.
    pub fn start_value(&self, scenario: &Scenario<T>, location: usize) -> T {
        self.values
            .get(1, &scenario.initial_state(location))
            .expect("initial state inside the table")
    }
}

/// Values after the horizon: penalty on the flows whose deadline is the horizon.
pub fn boundary_values<T: Scalar>(scenario: &Scenario<T>, space: &StateSpace) -> Vec<T> {
    let last: Vec<bool> = scenario
        .flows
        .iter()
        .map(|f| f.deadline == scenario.horizon)
        .collect();
    let mut buf = vec![0; space.num_flows()];
    (0..space.per_epoch())
        .map(|idx| {
            space.decode_into(idx, &mut buf);
            let due: Vec<Units> = buf
                .iter()
                .zip(&last)
                .map(|(&b, &is_last)| if is_last { b } else { 0 })
                .collect();
            penalty(&due, &scenario.costs, scenario.sigma)
        })
        .collect()
}

/// Penalty owed at the end of `epoch` on the post-action sizes, for flows
/// whose deadline is this slot but not the horizon (those are in the boundary).
pub fn intermediate_penalty<T: Scalar>(
    scenario: &Scenario<T>,
    epoch: usize,
    after: &[Units],
) -> T {
    if epoch >= scenario.horizon {
        return T::zero();
    }
    let due: Vec<Units> = scenario
        .flows
        .iter()
        .zip(after)
        .map(|(f, &b)| if f.deadline == epoch { b } else { 0 })
        .collect();
    penalty(&due, &scenario.costs, scenario.sigma)
}

/// Stage cost plus expected next-slot value for taking `action` in `state`.
pub fn q_value<T: Scalar>(
    scenario: &Scenario<T>,
    space: &StateSpace,
    epoch: usize,
    state: &State,
    action: &Action,
    next_values: &[T],
) -> Result<T> {
    if next_values.len() != space.per_epoch() {
        return Err(Error::Internal(format!(
            "next-slot table has {} entries, expected {}",
            next_values.len(),
            space.per_epoch()
        )));
    }
    let location = scenario
        .locations
        .get(state.location)
        .ok_or_else(|| Error::Infeasible(format!("unknown location {}", state.location)))?;
    let costs = scenario.costs_at(epoch);
    let stage = stage_reward(state, action, location, &costs, scenario.sigma)?;
    let after = apply_action(state, action)?;
    let due = intermediate_penalty(scenario, epoch, &after);
    let rem_idx = space
        .remaining_index(&after)
        .ok_or_else(|| Error::Internal(format!("post-action sizes {after:?} outside table")))?;
    let mut future = T::zero();
    for (next, p) in scenario.mobility.transitions(state.location) {
        let v = next_values
            .get(next * space.per_location() + rem_idx)
            .ok_or_else(|| Error::Internal(format!("missing value for location {next}")))?;
        future = future + p * *v;
    }
    Ok(stage + due + future)
}

/// Backward induction over all slots, locations and remaining vectors.
pub fn backward_induction<T: Scalar>(
    scenario: &Scenario<T>,
    options: &SolverOptions,
) -> Result<Solution<T>> {
    scenario.validate()?;
    check_budget(scenario, options.memory_budget)?;
    let space = StateSpace::for_scenario(scenario)?;
    let horizon = scenario.horizon;
    let n = space.per_epoch();
    let m = space.num_flows();

    let mut values: Vec<Vec<T>> = vec![Vec::new(); horizon + 1];
    let mut networks: Vec<Vec<u8>> = vec![Vec::new(); horizon];
    let mut allocations: Vec<Vec<Units>> = vec![Vec::new(); horizon];
    values[horizon] = boundary_values(scenario, &space);

    for epoch in (1..=horizon).rev() {
        let next = &values[epoch];
        let backed: Vec<(T, Action)> = (0..n)
            .into_par_iter()
            .map(|idx| {
                let state = space.state(idx);
                let location = &scenario.locations[state.location];
                let mut best: Option<(T, Action)> = None;
                for action in
                    enumerate_actions(&state, location, epoch, &scenario.flows, options.action_mode)
                {
                    let q = q_value(scenario, &space, epoch, &state, &action, next)?;
                    // strict: the first minimizer in enumeration order wins ties
                    if best.as_ref().is_none_or(|(v, _)| q < *v) {
                        best = Some((q, action));
                    }
                }
                best.ok_or_else(|| Error::Internal("no candidate action".into()))
            })
            .collect::<Result<_>>()?;

        let mut vals = Vec::with_capacity(n);
        let mut nets = Vec::with_capacity(n);
        let mut allocs = Vec::with_capacity(n * m);
        for (v, a) in backed {
            vals.push(v);
            nets.push(a.network.code());
            allocs.extend_from_slice(&a.allocation);
        }
        values[epoch - 1] = vals;
        networks[epoch - 1] = nets;
        allocations[epoch - 1] = allocs;
    }

    Ok(Solution {
        values: ValueTable::new(space.clone(), horizon, values),
        policy: PolicyTable {
            space,
            horizon,
            fingerprint: scenario_fingerprint(scenario),
            networks,
            allocations,
        },
    })
}
