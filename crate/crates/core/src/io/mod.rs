//! Configuration, scenario generation, energy curves, reports and sweeps.

pub mod config;
pub mod convert;
pub mod energy;
pub mod fingerprint;
pub mod generate;
pub mod report;
pub mod sweep;
