//! Multi-flow mobile data offloading over WLAN and cellular networks.
//!
//! The crate models a mobile user who must download several deadline-bound
//! flows while moving over a grid of locations. Cellular coverage is
//! everywhere and billed per Mbit; WLAN is free but only present at some
//! cells. Each slot the user picks one network (or stays idle) and splits its
//! rate across the flows.
//!
//! * [`model`] holds the domain types and the per-slot cost and transition maths.
//! * [`mobility`] builds the grid Markov chain the user moves on.
//! * [`dp`] solves the finite-horizon MDP exactly by backward induction.
//! * [`heuristic`] contains the online weighted heuristic, the always-offload
//!   baseline and the price-only comparator.
//! * [`sim`] runs episodes, Monte Carlo aggregation, exact policy evaluation
//!   and the brute-force optimality oracle.
//! * [`io`] covers configuration, random scenario generation, energy curves,
//!   report emission and experiment sweeps.
//!
//! All of the cost and solver code is generic over a [`Scalar`]; the
//! aliases below pin the two instantiations used in practice: `f64` for
//! experiments and an exact rational type for optimality checks.

pub mod dp;
pub mod error;
pub mod heuristic;
pub mod io;
pub mod mobility;
pub mod model;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Exact rational scalar used by the verification oracles.
pub type Rational = num_rational::Ratio<i128>;

pub type Scenario64 = model::Scenario<f64>;
pub type ExactScenario = model::Scenario<Rational>;
pub type CostParams64 = model::CostParams<f64>;
pub type LocationProfile64 = model::LocationProfile<f64>;
pub type MobilityModel64 = mobility::MobilityModel<f64>;
pub type ValueTable64 = dp::ValueTable<f64>;
pub type ExactValueTable = dp::ValueTable<Rational>;
pub type EpisodeResult64 = sim::EpisodeResult<f64>;
