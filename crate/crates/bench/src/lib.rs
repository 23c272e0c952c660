//! Shared fixtures for the criterion benches.

use vscfdi::measmodel::{
    build_config, generate_measurements, MeasurementConfig, MeasurementVector, StateVector,
};
use vscfdi::netcase::{bundled_ieee14_case, NetworkCase};
use vscfdi::wls::estimate;

pub struct Fixture {
    pub case: NetworkCase,
    pub truth: StateVector,
    pub config: MeasurementConfig,
    pub z: MeasurementVector,
    pub x_hat: StateVector,
}

/// Bundled case, one measurement group, seeded telemetry and its estimate.
pub fn fixture(group: u8, seed: u64) -> Fixture {
    let (case, op) = bundled_ieee14_case();
    let config = build_config(&case, group).expect("bundled groups are observable");
    let z = generate_measurements(&case, &config, &op.state, seed, 1.0);
    let x_hat = estimate(&case, &config, &z, &StateVector::flat(case.n_bus()))
        .expect("bundled telemetry estimates")
        .x_hat;
    Fixture {
        case,
        truth: op.state,
        config,
        z,
        x_hat,
    }
}
