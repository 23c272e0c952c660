//! Deterministic measurement noise.
//!
//! Every measurement draws from its own ChaCha stream selected by the
//! measurement's identity, so a measurement keeps its noise sample when the
//! surrounding configuration changes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    eval_h, End, Location, MeasurementConfig, MeasurementSpec, MeasurementVector, Power,
    Provenance, StateVector,
};
use crate::netcase::NetworkCase;

/// Purpose of a noise draw; different purposes never share samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseStream {
    Telemetry,
    Forgery,
}

/// SplitMix64 finalizer over two words.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn identity_key(spec: &MeasurementSpec) -> u64 {
    let kind = spec.kind as u64;
    let loc = match spec.location {
        Location::Bus(id) => (1 << 32) | id as u64,
        Location::Branch(k, end) => (2 << 32) | ((k as u64) << 1) | (end == End::To) as u64,
        Location::Converter(s) => (3 << 32) | s.index() as u64,
        Location::BusPower(id, p) => (4 << 32) | ((id as u64) << 1) | (p == Power::Reactive) as u64,
    };
    (kind << 40) ^ loc
}

/// Standard normal sample for one measurement.
pub fn keyed_normal(seed: u64, stream: NoiseStream, spec: &MeasurementSpec) -> f64 {
    let tag = match stream {
        NoiseStream::Telemetry => 0x7e1e,
        NoiseStream::Forgery => 0xf02e,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, tag));
    rng.set_stream(identity_key(spec));
    rng.sample(StandardNormal)
}

/// `z = h(x_true) + noise_scale * sigma * N(0, 1)`; virtual entries are exactly zero.
pub fn generate_measurements(
    case: &NetworkCase,
    config: &MeasurementConfig,
    x_true: &StateVector,
    seed: u64,
    noise_scale: f64,
) -> MeasurementVector {
    let h = eval_h(case, config, x_true);
    let mut values = Vec::with_capacity(h.len());
    let mut provenance = Vec::with_capacity(h.len());
    for (spec, hv) in config.specs().iter().zip(h) {
        if spec.is_virtual() {
            values.push(0.0);
            provenance.push(Provenance::True);
        } else if noise_scale == 0.0 {
            values.push(hv);
            provenance.push(Provenance::True);
        } else {
            let e = keyed_normal(seed, NoiseStream::Telemetry, spec);
            values.push(hv + noise_scale * spec.sigma * e);
            provenance.push(Provenance::Noisy);
        }
    }
    MeasurementVector { values, provenance }
}
