use crate::model::{CostParams, LocationProfile, Scenario};
use crate::Scalar;

/// Re-express a scenario over another scalar type, value by value.
pub fn convert_scenario<T: Scalar, U: Scalar>(
    scenario: &Scenario<T>,
    f: impl Fn(T) -> U,
) -> Scenario<U> {
    Scenario {
        grid_width: scenario.grid_width,
        grid_height: scenario.grid_height,
        locations: scenario
            .locations
            .iter()
            .map(|l| LocationProfile {
                id: l.id,
                wlan_available: l.wlan_available,
                cellular_capacity: l.cellular_capacity,
                wlan_capacity: l.wlan_capacity,
                cellular_throughput: l.cellular_throughput,
                wlan_throughput: l.wlan_throughput,
                cellular_energy: f(l.cellular_energy),
                wlan_energy: f(l.wlan_energy),
            })
            .collect(),
        mobility: scenario.mobility.map(&f),
        flows: scenario.flows.clone(),
        horizon: scenario.horizon,
        costs: CostParams {
            price_per_mbit: f(scenario.costs.price_per_mbit),
            energy_preference: f(scenario.costs.energy_preference),
            penalty_coefficient: f(scenario.costs.penalty_coefficient),
        },
        theta_schedule: scenario
            .theta_schedule
            .as_ref()
            .map(|s| s.iter().map(|&x| f(x)).collect()),
        sigma: f(scenario.sigma),
        rng_seed: scenario.rng_seed,
    }
}

pub fn scenario_to_f64<T: Scalar>(scenario: &Scenario<T>) -> Scenario<f64> {
    convert_scenario(scenario, |x| x.as_f64())
}
