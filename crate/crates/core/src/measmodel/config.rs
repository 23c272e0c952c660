//! The eight nested measurement groups.

use super::{
    check_observable, End, Location, MeasurementConfig, MeasurementKind, MeasurementSpec, Power,
    StateVector, DEFAULT_SIGMA,
};
use crate::netcase::{NetworkCase, Side};
use crate::{Error, Result};

pub const GROUP_COUNT: u8 = 8;

/// A generic non-degenerate state used for structural checks.
pub fn probe_state(case: &NetworkCase) -> StateVector {
    let n = case.n_bus();
    let mut x = StateVector::flat(n);
    for p in 0..n {
        x.angle[p] = -0.02 * p as f64;
        x.vmag[p] = 1.0 + 0.01 * (p % 3) as f64;
    }
    let r = case.reference_pos();
    let shift = x.angle[r];
    for a in x.angle.iter_mut() {
        *a -= shift;
    }
    x.theta_c = [-0.1, 0.05];
    x.u_c = [1.05, 0.97];
    x.u_dc1 = 1.0;
    x.i_dc1 = 0.5;
    x
}

/// Builds measurement group `group` (1..=8).
///
/// Group 1 measures everything: bus voltages, injections at loaded or
/// generating buses, both ends of every branch, the converter powers on both
/// sides of each converter and the DC voltages and currents. The converter
/// power balances and zero injections enter as virtual measurements. Group 2
/// drops the receiving-end flows of branches away from the converter buses;
/// groups 3 to 8 each remove one more set of converter telemetry.
pub fn build_config(case: &NetworkCase, group: u8) -> Result<MeasurementConfig> {
    if !(1..=GROUP_COUNT).contains(&group) {
        return Err(Error::Config(format!(
            "measurement group must be 1..={GROUP_COUNT}, got {group}"
        )));
    }
    use MeasurementKind as K;
    let sig = DEFAULT_SIGMA;
    let mut specs = Vec::new();
    for b in &case.buses {
        specs.push(MeasurementSpec::real(K::VMag, Location::Bus(b.id), sig));
    }
    for b in case.buses.iter().filter(|b| b.has_nonzero_injection) {
        specs.push(MeasurementSpec::real(K::PInj, Location::Bus(b.id), sig));
        specs.push(MeasurementSpec::real(K::QInj, Location::Bus(b.id), sig));
    }
    let vsc_buses: Vec<usize> = Side::BOTH
        .iter()
        .map(|&s| case.converter(s).ac_bus)
        .collect();
    for (k, br) in case.branches.iter().enumerate() {
        let near_vsc = vsc_buses.contains(&br.from_bus) || vsc_buses.contains(&br.to_bus);
        for end in [End::From, End::To] {
            if group >= 2 && end == End::To && !near_vsc {
                continue;
            }
            let loc = Location::Branch(k + 1, end);
            specs.push(MeasurementSpec::real(K::PFlow, loc, sig));
            specs.push(MeasurementSpec::real(K::QFlow, loc, sig));
        }
    }
    let removed = |kind: K, side: Side| -> bool {
        let both = |from: u8| group >= from;
        match kind {
            K::Qc => both(3),
            K::Pc => both(4),
            K::Qs => both(5),
            K::Idc => side == Side::Two && both(6),
            K::Udc => side == Side::Two && both(7),
            K::Ps => both(8),
            _ => false,
        }
    };
    for kind in [K::Ps, K::Qs, K::Pc, K::Qc, K::Udc, K::Idc] {
        for side in Side::BOTH {
            if !removed(kind, side) {
                specs.push(MeasurementSpec::real(kind, Location::Converter(side), sig));
            }
        }
    }
    for side in Side::BOTH {
        specs.push(MeasurementSpec::virtual_(
            K::VirtPbal,
            Location::Converter(side),
        ));
    }
    for id in case.zero_injection_buses() {
        for p in [Power::Active, Power::Reactive] {
            specs.push(MeasurementSpec::virtual_(
                K::VirtZeroInj,
                Location::BusPower(id, p),
            ));
        }
    }
    let config = MeasurementConfig::new(case, specs)?;
    let active = vec![true; config.len()];
    check_observable(case, &config, &probe_state(case), &active).map_err(|e| match e {
        Error::Unobservable(m) => Error::Unobservable(format!("measurement group {group}: {m}")),
        other => other,
    })?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::bundled_ieee14_case;

    fn count(config: &MeasurementConfig, kind: MeasurementKind) -> usize {
        config.specs().iter().filter(|s| s.kind == kind).count()
    }

    #[test]
    fn group_one_inventory() {
        let (case, _) = bundled_ieee14_case();
        let c = build_config(&case, 1).unwrap();
        assert_eq!(count(&c, MeasurementKind::VMag), 14);
        assert_eq!(count(&c, MeasurementKind::PInj), 13);
        assert_eq!(count(&c, MeasurementKind::PFlow), 40);
        assert_eq!(count(&c, MeasurementKind::VirtPbal), 2);
        assert_eq!(count(&c, MeasurementKind::VirtZeroInj), 2);
        assert_eq!(c.len(), 136);
        assert_eq!(c.layout().len(), 33);
    }

    #[test]
    fn groups_are_nested_and_shrinking() {
        let (case, _) = bundled_ieee14_case();
        let mut prev = build_config(&case, 1).unwrap();
        for g in 2..=GROUP_COUNT {
            let c = build_config(&case, g).unwrap();
            assert!(c.len() < prev.len(), "group {g}");
            for s in c.specs() {
                assert!(prev.position(s.kind, s.location).is_some());
            }
            prev = c;
        }
        let last = prev;
        assert_eq!(count(&last, MeasurementKind::Ps), 0);
        assert_eq!(count(&last, MeasurementKind::Udc), 1);
        assert_eq!(count(&last, MeasurementKind::Idc), 1);
    }

    #[test]
    fn group_out_of_range() {
        let (case, _) = bundled_ieee14_case();
        assert!(matches!(build_config(&case, 0), Err(Error::Config(_))));
        assert!(matches!(build_config(&case, 9), Err(Error::Config(_))));
    }
}
