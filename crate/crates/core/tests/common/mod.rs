#![allow(dead_code)]

use proptest::prelude::*;
use vscfdi::measmodel::{StateLayout, StateVector};
use vscfdi::netcase::{parse_case_with_state, NetworkCase};

pub const FOUR_BUS_CASE: &str = include_str!("../data/four_bus.case");

pub fn four_bus() -> (NetworkCase, StateVector) {
    let (case, st) = parse_case_with_state(FOUR_BUS_CASE).unwrap();
    (case, st.unwrap().state)
}

/// Offsets of up to `scale` added to every estimation variable of `x`.
pub fn perturbed(
    layout: &StateLayout,
    x: &StateVector,
    offsets: &[f64],
    scale: f64,
) -> StateVector {
    let mut v = layout.to_vec(x);
    for (a, d) in v.iter_mut().zip(offsets) {
        *a += scale * d;
    }
    layout.from_vec(&v)
}

pub fn offsets(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n)
}

use vscfdi::measmodel::{
    build_config, generate_measurements, MeasurementConfig, MeasurementVector,
};
use vscfdi::wls::{detect_and_identify, estimate, Detection};

/// Telemetry measurements with nonzero residual variance at the truth state.
pub fn redundant_telemetry(
    case: &NetworkCase,
    config: &MeasurementConfig,
    truth: &StateVector,
) -> Vec<usize> {
    let z = generate_measurements(case, config, truth, 0, 0.0);
    let est = estimate(case, config, &z, truth).unwrap();
    (0..config.len())
        .filter(|&i| !config.spec(i).is_virtual() && !est.critical[i])
        .collect()
}

/// Noisy group-1 telemetry for `seed`, with a `k`-sigma error added to the
/// redundant measurement picked by the seed when `k` is nonzero. Returns the
/// corrupted index, if any, and the detection outcome at threshold 3.
pub fn bad_data_trial(
    case: &NetworkCase,
    truth: &StateVector,
    config: &MeasurementConfig,
    redundant: &[usize],
    seed: u64,
    k: f64,
) -> (Option<usize>, MeasurementVector, Detection) {
    let mut z = generate_measurements(case, config, truth, seed, 1.0);
    let bad = (k != 0.0).then(|| redundant[(seed as usize * 7919) % redundant.len()]);
    if let Some(i) = bad {
        z.values[i] += k * config.spec(i).sigma;
    }
    let det = detect_and_identify(case, config, &z, 3.0, &StateVector::flat(case.n_bus())).unwrap();
    (bad, z, det)
}

pub fn group_one(case: &NetworkCase) -> MeasurementConfig {
    build_config(case, 1).unwrap()
}
