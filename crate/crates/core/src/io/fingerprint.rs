//! Platform-stable content hash of a scenario.
//!
//! Every field is fed to SHA-256 in a fixed order as little-endian integers
//! or IEEE-754 bit patterns of the `f64` value, so the digest does not
//! depend on struct layout or pointer width.

use sha2::{Digest, Sha256};

use crate::model::Scenario;
use crate::Scalar;

pub fn scenario_fingerprint<T: Scalar>(scenario: &Scenario<T>) -> [u8; 32] {
    let mut h = Sha256::new();
    let put_u64 = |h: &mut Sha256, v: u64| h.update(v.to_le_bytes());
    let put_f64 = |h: &mut Sha256, v: f64| h.update(v.to_bits().to_le_bytes());

    h.update(b"offload-scenario-v1");
    put_u64(&mut h, scenario.grid_width as u64);
    put_u64(&mut h, scenario.grid_height as u64);
    for loc in &scenario.locations {
        put_u64(&mut h, loc.id as u64);
        put_u64(&mut h, u64::from(loc.wlan_available));
        put_u64(&mut h, u64::from(loc.cellular_capacity));
        put_u64(&mut h, u64::from(loc.wlan_capacity));
        put_f64(&mut h, loc.cellular_throughput);
        put_f64(&mut h, loc.wlan_throughput);
        put_f64(&mut h, loc.cellular_energy.as_f64());
        put_f64(&mut h, loc.wlan_energy.as_f64());
    }
    for l in 0..scenario.mobility.len() {
        for &p in scenario.mobility.row(l) {
            put_f64(&mut h, p.as_f64());
        }
    }
    for f in &scenario.flows {
        put_u64(&mut h, f.id as u64);
        put_u64(&mut h, u64::from(f.total_units));
        put_u64(&mut h, f.deadline as u64);
    }
    put_u64(&mut h, scenario.horizon as u64);
    put_f64(&mut h, scenario.costs.price_per_mbit.as_f64());
    put_f64(&mut h, scenario.costs.energy_preference.as_f64());
    put_f64(&mut h, scenario.costs.penalty_coefficient.as_f64());
    match &scenario.theta_schedule {
        None => put_u64(&mut h, 0),
        Some(s) => {
            put_u64(&mut h, s.len() as u64 + 1);
            for &x in s {
                put_f64(&mut h, x.as_f64());
            }
        }
    }
    put_f64(&mut h, scenario.sigma.as_f64());
    put_u64(&mut h, scenario.rng_seed);
    h.finalize().into()
}

pub fn fingerprint_hex<T: Scalar>(scenario: &Scenario<T>) -> String {
    scenario_fingerprint(scenario)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
