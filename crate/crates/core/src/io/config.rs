//! TOML experiment configuration.
//!
//! ```toml
//! schema_version = 1
//!
//! [grid]
//! width = 4
//! height = 4
//! stay_prob = 0.6
//! adjacency = "von-neumann"
//!
//! [network]
//! ap_count = 8
//! sigma = 25.0
//! energy_curve = "f1"
//! wlan = { mean = 15.0, stddev = 6.0, lo = 9.0, hi = 21.0 }
//! cellular = { mean = 10.0, stddev = 5.0, lo = 5.0, hi = 15.0 }
//!
//! [costs]
//! price_per_mbit = 0.1875
//! theta = 1.0
//! penalty = 2.0
//!
//! [[flows]]
//! size_mbit = 500.0
//! deadline = 140
//!
//! [run]
//! episodes = 1000
//! seed = 42
//! ```
//!
//! Sizes are in Mbit and must be whole multiples of `sigma`. Throughputs
//! are Mbit per slot. `run.start_location` fixes the starting cell, which is
//! otherwise uniform. `run.scenario_draws` pools several random AP layouts
//! into each report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::heuristic::HeuristicConfig;
use crate::io::energy::CurveChoice;
use crate::mobility::Adjacency;
use crate::model::{FlowSpec, Units};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub grid: GridConfig,
    pub network: NetworkConfig,
    pub costs: CostConfig,
    pub flows: Vec<FlowConfig>,
    #[serde(default)]
    pub heuristic: HeuristicConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub stay_prob: f64,
    #[serde(default)]
    pub adjacency: Adjacency,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub ap_count: usize,
    /// Mbit per data unit.
    pub sigma: f64,
    #[serde(default)]
    pub energy_curve: CurveChoice,
    pub wlan: RateDistribution,
    pub cellular: RateDistribution,
}

/// Normal(mean, stddev) truncated to `[lo, hi]`, Mbit/slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateDistribution {
    pub mean: f64,
    pub stddev: f64,
    pub lo: f64,
    pub hi: f64,
}

impl RateDistribution {
    pub const WLAN: RateDistribution = RateDistribution {
        mean: 15.0,
        stddev: 6.0,
        lo: 9.0,
        hi: 21.0,
    };
    pub const CELLULAR: RateDistribution = RateDistribution {
        mean: 10.0,
        stddev: 5.0,
        lo: 5.0,
        hi: 15.0,
    };

    pub fn validate(&self, what: &str) -> Result<()> {
        let finite = [self.mean, self.stddev, self.lo, self.hi].iter().all(|x| x.is_finite());
        if !finite || !(self.stddev > 0.0) || !(self.lo < self.hi) || self.lo < 0.0 {
            return Err(Error::Config(format!(
                "{what} rate needs finite values, stddev > 0 and 0 <= lo < hi, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// yen per Mbit of cellular traffic
    pub price_per_mbit: f64,
    pub theta: f64,
    /// Per-slot override of `theta`, at least as long as the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_schedule: Option<Vec<f64>>,
    /// Charge per Mbit left at a deadline.
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub size_mbit: f64,
    pub deadline: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub episodes: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_location: Option<usize>,
    #[serde(default = "one")]
    pub scenario_draws: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,
}

impl ScenarioConfig {
    /// 4x4 grid, two flows of 500 and 550 Mbit due at slots 140 and 280,
    /// 25 Mbit units.
    pub fn desk() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            grid: GridConfig {
                width: 4,
                height: 4,
                stay_prob: 0.6,
                adjacency: Adjacency::VonNeumann,
            },
            network: NetworkConfig {
                ap_count: 8,
                sigma: 25.0,
                energy_curve: CurveChoice::F1,
                wlan: RateDistribution::WLAN,
                cellular: RateDistribution::CELLULAR,
            },
            costs: CostConfig {
                price_per_mbit: 0.1875,
                theta: 1.0,
                theta_schedule: None,
                penalty: 2.0,
            },
            flows: vec![
                FlowConfig {
                    size_mbit: 500.0,
                    deadline: 140,
                },
                FlowConfig {
                    size_mbit: 550.0,
                    deadline: 280,
                },
            ],
            heuristic: HeuristicConfig::default(),
            run: RunConfig {
                episodes: 1000,
                seed: 42,
                start_location: None,
                scenario_draws: 1,
            },
            output: OutputConfig::default(),
        }
    }

    /// One 100 Mbit flow due at slot 40 on 5 Mbit units, pooled over eight
    /// access-point layouts.
    pub fn single_flow_desk() -> Self {
        let mut c = Self::desk();
        c.network.sigma = 5.0;
        c.flows = vec![FlowConfig {
            size_mbit: 100.0,
            deadline: 40,
        }];
        c.run.episodes = 250;
        c.run.scenario_draws = 8;
        c
    }

    /// Two flows of 100 and 110 Mbit due at slots 10 and 20 on 5 Mbit units.
    /// Deadlines are tight enough that access-point density decides whether
    /// the flows finish.
    pub fn ap_sweep_desk() -> Self {
        let mut c = Self::desk();
        c.network.sigma = 5.0;
        c.flows = vec![
            FlowConfig {
                size_mbit: 100.0,
                deadline: 10,
            },
            FlowConfig {
                size_mbit: 110.0,
                deadline: 20,
            },
        ];
        c.run.episodes = 250;
        c.run.scenario_draws = 8;
        c
    }

    pub fn num_cells(&self) -> usize {
        self.grid.width * self.grid.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.num_cells() == 0 {
            return Err(Error::Config("grid must have at least one cell".into()));
        }
        if !(0.0..=1.0).contains(&self.grid.stay_prob) {
            return Err(Error::Config(format!(
                "stay_prob {} outside [0, 1]",
                self.grid.stay_prob
            )));
        }
        if self.network.ap_count > self.num_cells() {
            return Err(Error::Config(format!(
                "ap_count {} exceeds the {} grid cells",
                self.network.ap_count,
                self.num_cells()
            )));
        }
        if !(self.network.sigma > 0.0 && self.network.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma {} must be positive", self.network.sigma)));
        }
        self.network.wlan.validate("wlan")?;
        self.network.cellular.validate("cellular")?;
        if let CurveChoice::Custom(c) = self.network.energy_curve {
            c.validate().map_err(|e| Error::Config(format!("energy_curve: {e}")))?;
        }
        let c = &self.costs;
        if [c.price_per_mbit, c.theta, c.penalty].iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::Config("price, theta and penalty must be finite and non-negative".into()));
        }
        if self.flows.is_empty() {
            return Err(Error::Config("at least one flow is required".into()));
        }
        let units = self.flow_specs()?;
        if units.windows(2).any(|w| w[0].deadline > w[1].deadline) {
            return Err(Error::Config("flows must be listed in non-decreasing deadline order".into()));
        }
        if let Some(s) = &c.theta_schedule {
            let horizon = units.iter().map(|f| f.deadline).max().unwrap_or(0);
            if s.len() < horizon || s.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(Error::Config(format!(
                    "theta_schedule needs {horizon} non-negative entries, got {}",
                    s.len()
                )));
            }
        }
        if self.run.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.run.scenario_draws == 0 {
            return Err(Error::Config("scenario_draws must be at least 1".into()));
        }
        if let Some(l) = self.run.start_location {
            if l >= self.num_cells() {
                return Err(Error::Config(format!("start_location {l} outside the grid")));
            }
        }
        Ok(())
    }

    /// Flows in data units.
    pub fn flow_specs(&self) -> Result<Vec<FlowSpec>> {
        let sigma = self.network.sigma;
        self.flows
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let units = f.size_mbit / sigma;
                if !(f.size_mbit >= 0.0) || (units - units.round()).abs() > 1e-9 || units > f64::from(Units::MAX) {
                    return Err(Error::Config(format!(
                        "flow {j}: size {} Mbit is not a whole number of {sigma} Mbit units",
                        f.size_mbit
                    )));
                }
                if f.deadline == 0 {
                    return Err(Error::Config(format!("flow {j}: deadline must be at least 1")));
                }
                Ok(FlowSpec::new(j, units.round() as Units, f.deadline))
            })
            .collect()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
