//! One-axis experiment sweeps over every policy.
//!
//! For each axis value the base configuration is edited, `scenario_draws`
//! scenarios are generated, and each policy is simulated on all of them with
//! the same episode streams. Episodes from all draws are pooled into one
//! report per (value, policy). Rows come out in value order, then in the
//! order dp, heuristic, baseline, price-only.

use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::dp::{backward_induction, SolverOptions, DEFAULT_MEMORY_BUDGET};
use crate::heuristic::{price_only_policy, BaselinePolicy, HeuristicPolicy, Named};
use crate::io::config::{FlowConfig, ScenarioConfig};
use crate::io::fingerprint::scenario_fingerprint;
use crate::io::generate::{generate_scenario, scenario_rng};
use crate::model::{ActionMode, Policy, Scenario};
use crate::sim::{episode_summaries, AggregateReport, EpisodeSummary, MonteCarloOptions, ReportMeta};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Energy preference.
    Theta,
    /// Number of flows.
    Flows,
    /// Number of access points.
    Aps,
    /// First deadline; later deadlines are scaled in proportion.
    Deadline,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(SweepAxis::Theta),
            "flows" => Ok(SweepAxis::Flows),
            "aps" => Ok(SweepAxis::Aps),
            "deadline" => Ok(SweepAxis::Deadline),
            other => Err(Error::Parse(format!(
                "unknown sweep axis '{other}' (theta, flows, aps, deadline)"
            ))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Theta => "theta",
            SweepAxis::Flows => "flows",
            SweepAxis::Aps => "aps",
            SweepAxis::Deadline => "deadline",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKind {
    Dp,
    Heuristic,
    Baseline,
    PriceOnly,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Dp,
        PolicyKind::Heuristic,
        PolicyKind::Baseline,
        PolicyKind::PriceOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Dp => "dp",
            PolicyKind::Heuristic => "heuristic",
            PolicyKind::Baseline => "baseline",
            PolicyKind::PriceOnly => "price-only",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown policy '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub policies: Vec<PolicyKind>,
    /// `None` picks exhaustive actions for one flow and EDF-restricted otherwise.
    pub action_mode: Option<ActionMode>,
    pub memory_budget: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            policies: PolicyKind::ALL.to_vec(),
            action_mode: None,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl SweepOptions {
    pub fn solver_options(&self, num_flows: usize) -> SolverOptions {
        let mut o = SolverOptions::for_flows(num_flows);
        if let Some(mode) = self.action_mode {
            o.action_mode = mode;
        }
        o.memory_budget = self.memory_budget;
        o
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub reports: Vec<AggregateReport>,
    /// Policies skipped, with the reason.
    pub warnings: Vec<String>,
}

fn whole(value: f64, axis: SweepAxis) -> Result<usize> {
    if value < 0.0 || value.fract() != 0.0 || !value.is_finite() {
        return Err(Error::Config(format!("{axis} value {value} must be a whole number")));
    }
    Ok(value as usize)
}

/// The configuration at one point of the sweep.
///
/// * `flows`: the first `n` flows; more than configured repeats the list
///   cyclically, then re-sorts by deadline.
/// * `deadline`: the first flow's deadline becomes `value` and every other
///   deadline is multiplied by the same factor, rounded, at least 1.
/// * `theta` drops any per-slot schedule.
pub fn apply_axis(base: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig> {
    let mut c = base.clone();
    match axis {
        SweepAxis::Theta => {
            c.costs.theta = value;
            c.costs.theta_schedule = None;
        }
        SweepAxis::Aps => c.network.ap_count = whole(value, axis)?,
        SweepAxis::Flows => {
            let n = whole(value, axis)?;
            if n == 0 {
                return Err(Error::Config("flows value must be at least 1".into()));
            }
            let template = &base.flows;
            let mut flows: Vec<FlowConfig> = (0..n).map(|k| template[k % template.len()].clone()).collect();
            flows.sort_by_key(|f| f.deadline);
            c.flows = flows;
        }
        SweepAxis::Deadline => {
            let first = whole(value, axis)?;
            if first == 0 {
                return Err(Error::Config("deadline value must be at least 1".into()));
            }
            let scale = first as f64 / base.flows[0].deadline as f64;
            for f in &mut c.flows {
                f.deadline = ((f.deadline as f64 * scale).round() as usize).max(1);
            }
            c.flows[0].deadline = first;
        }
    }
    c.validate()?;
    Ok(c)
}

/// Simulate every requested policy on `config`, pooling its scenario draws.
pub fn evaluate_config(
    config: &ScenarioConfig,
    scenario_id: &str,
    options: &SweepOptions,
) -> Result<SweepOutput> {
    config.validate()?;
    let draws = config.run.scenario_draws;
    let scenarios: Vec<Scenario<f64>> = (0..draws)
        .map(|d| generate_scenario(config, &mut scenario_rng(config.run.seed, d as u64)))
        .collect::<Result<_>>()?;

    let mut hash = Sha256::new();
    for sc in &scenarios {
        hash.update(scenario_fingerprint(sc));
    }
    let digest: [u8; 32] = hash.finalize().into();
    let fingerprint: String = digest.iter().map(|b| format!("{b:02x}")).collect();

    let first = &scenarios[0];
    let n_aps = first.locations.iter().filter(|l| l.wlan_available).count();
    let mut out = SweepOutput::default();
    let mc = |d: usize| {
        let mut o = MonteCarloOptions::new(config.run.episodes, config.run.seed)
            .with_stream_offset((d * config.run.episodes) as u64);
        o.start_location = config.run.start_location;
        o
    };

    for &kind in &options.policies {
        let mut pooled: Vec<EpisodeSummary> = Vec::with_capacity(draws * config.run.episodes);
        let mut skipped = None;
        for (d, sc) in scenarios.iter().enumerate() {
            let runs = match kind {
                PolicyKind::Dp => match backward_induction(sc, &options.solver_options(sc.num_flows())) {
                    Ok(sol) => episode_summaries(sc, &sol.policy, &mc(d))?,
                    Err(e @ Error::Sizing { .. }) => {
                        skipped = Some(e.to_string());
                        break;
                    }
                    Err(e) => return Err(e),
                },
                PolicyKind::Heuristic => {
                    let h = HeuristicPolicy::new(sc, config.heuristic);
                    episode_summaries(sc, &h, &mc(d))?
                }
                PolicyKind::Baseline => episode_summaries(sc, &BaselinePolicy, &mc(d))?,
                PolicyKind::PriceOnly => match price_only_policy(sc, &options.solver_options(1)) {
                    Ok(t) => {
                        let p: &dyn Policy<f64> = &Named::new(kind.name(), t);
                        episode_summaries(sc, p, &mc(d))?
                    }
                    Err(e @ (Error::Config(_) | Error::Sizing { .. })) => {
                        skipped = Some(e.to_string());
                        break;
                    }
                    Err(e) => return Err(e),
                },
            };
            pooled.extend(runs);
        }
        if let Some(reason) = skipped {
            out.warnings.push(format!("{scenario_id}: skipped {}: {reason}", kind.name()));
            continue;
        }
        let meta = ReportMeta {
            scenario_id: scenario_id.to_string(),
            policy: kind.name().to_string(),
            theta: config.costs.theta,
            n_flows: config.flows.len(),
            n_aps,
            seed: config.run.seed,
            fingerprint: fingerprint.clone(),
        };
        out.reports.push(AggregateReport::from_summaries(meta, &pooled));
    }
    Ok(out)
}

/// Evaluate `base` at each of `values` along `axis`.
pub fn run_sweep(
    base: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    options: &SweepOptions,
) -> Result<SweepOutput> {
    let mut out = SweepOutput::default();
    for &v in values {
        let config = apply_axis(base, axis, v)?;
        let id = format!("{axis}={}", crate::io::report::format_sig6(v));
        let part = evaluate_config(&config, &id, options)?;
        out.reports.extend(part.reports);
        out.warnings.extend(part.warnings);
    }
    Ok(out)
}
