mod common;

use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use vscfdi::attacksynth::{
    changed_variables, forge_measurements, shrunk_discs, solve_candidate, synthesize,
    tampered_measurements, target_coupled, target_point, AttackSpec, Candidate, Target,
};
use vscfdi::capability::{chart_params, is_safe, operating_point_from_state, OperatingPoint};
use vscfdi::measmodel::{
    build_config, eval_h, eval_one, generate_measurements, StateIndex, StateVector,
};
use vscfdi::netcase::{bundled_ieee14_case, Side};
use vscfdi::wls::estimate;

use common::four_bus;

#[test]
fn truth_point_projection_matches_grid_oracle() {
    let (case, op) = bundled_ieee14_case();
    let chart = chart_params(&case, Side::One, op.state.vmag[5]).unwrap();
    let current = operating_point_from_state(&case, &op.state, Side::One);
    let t = target_point(&chart, current, 1.0, 1.0, 0.02).unwrap();

    let [a, b] = shrunk_discs(&chart, 1.0, 1.0, 0.02);
    let n = 2000;
    let half = a.radius;
    let step = 2.0 * half / n as f64;
    let mut best = (f64::INFINITY, OperatingPoint::new(0.0, 0.0));
    for i in 0..=n {
        for k in 0..=n {
            let p = OperatingPoint::new(-half + i as f64 * step, -half + k as f64 * step);
            let ina = p.p.hypot(p.q) <= a.radius;
            let inb = (p.p - b.center.0).hypot(p.q - b.center.1) <= b.radius;
            if ina && inb {
                let d = p.distance(&current);
                if d < best.0 {
                    best = (d, p);
                }
            }
        }
    }
    assert!(
        t.distance(&best.1) <= 2.0 * step * std::f64::consts::SQRT_2,
        "{t:?} vs {:?}",
        best.1
    );
    assert!(t.distance(&current) <= best.0 + 1e-12);
}

#[test]
fn radial_projection_onto_the_current_circle() {
    let (case, _) = bundled_ieee14_case();
    let chart = chart_params(&case, Side::One, 1.0).unwrap();
    let phi: f64 = -1.2;
    let pt = OperatingPoint::new(1.5 * phi.cos(), 1.5 * phi.sin());
    assert!(chart.voltage_circle.contains(pt));
    let t = target_point(&chart, pt, 0.9, 1.0, 0.02).unwrap();
    let rho = 0.9 * 1.2 - 0.02;
    assert!((t.p - rho * phi.cos()).abs() < 1e-12);
    assert!((t.q - rho * phi.sin()).abs() < 1e-12);
}

#[test]
fn level_one_frees_the_converter_terminal() {
    let (case, _) = bundled_ieee14_case();
    let config = build_config(&case, 1).unwrap();
    let layout = config.layout();
    let mut want: Vec<usize> = [
        StateIndex::Angle(5),
        StateIndex::Vmag(5),
        StateIndex::ThetaC(Side::One),
        StateIndex::Uc(Side::One),
    ]
    .iter()
    .map(|&v| layout.index(v).unwrap())
    .collect();
    want.sort();
    assert_eq!(target_coupled(&case, Side::One).unwrap(), want);
}

#[test]
fn forged_noise_is_standard_normal() {
    let (case, op) = bundled_ieee14_case();
    let config = build_config(&case, 4).unwrap();
    let z = generate_measurements(&case, &config, &op.state, 3, 1.0);
    let est = estimate(&case, &config, &z, &StateVector::flat(14)).unwrap();
    let plan = synthesize(
        &case,
        &config,
        &z,
        &est.x_hat,
        &AttackSpec::new(&case, 1.0, 1.0),
    )
    .unwrap();
    assert!(!plan.tampered.is_empty());
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = 1000;
    // Family-wise level 0.01 over the tampered entries.
    let alpha = 0.01 / plan.tampered.len() as f64;
    let critical = (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt();
    for &i in &plan.tampered {
        let spec = config.spec(i);
        let h = eval_one(&case, spec, &plan.x_a);
        let mut e: Vec<f64> = (0..n as u64)
            .map(|s| {
                (forge_measurements(&case, &config, &plan, &z, s, true).values[i] - h) / spec.sigma
            })
            .collect();
        e.sort_by(f64::total_cmp);
        let d = e
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let f = normal.cdf(v);
                (f - k as f64 / n as f64).max((k + 1) as f64 / n as f64 - f)
            })
            .fold(0.0, f64::max);
        assert!(d < critical, "measurement {i}: KS statistic {d}");
    }
}

fn brute_force_minimum(
    case: &vscfdi::NetworkCase,
    config: &vscfdi::MeasurementConfig,
    spec: &AttackSpec,
    x_hat: &StateVector,
) -> Option<usize> {
    let n = config.layout().len();
    let att = spec.attackable_mask(config);
    let target = Target::Region {
        r1: spec.r1,
        r2: spec.r2,
        delta: spec.delta,
    };
    (1u32..(1 << n))
        .filter_map(|mask| {
            let free: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
            let cand = Candidate {
                free,
                related: Vec::new(),
                bound: 0,
            };
            let x_a = solve_candidate(case, config, spec, &att, x_hat, &cand, &target)?;
            let changed = changed_variables(config, x_hat, &x_a);
            Some(tampered_measurements(config, &att, &changed).len())
        })
        .min()
}

#[test]
fn pruned_search_matches_brute_force_on_four_buses() {
    let (case, truth) = four_bus();
    let config = build_config(&case, 8).unwrap();
    let z = generate_measurements(&case, &config, &truth, 5, 1.0);
    let est = estimate(&case, &config, &z, &StateVector::flat(4)).unwrap();
    let spec = AttackSpec::new(&case, 0.9, 0.9);
    let plan = synthesize(&case, &config, &z, &est.x_hat, &spec).unwrap();
    assert!(plan.feasible);
    assert_eq!(
        Some(plan.cost),
        brute_force_minimum(&case, &config, &spec, &est.x_hat)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn plans_keep_untouched_entries_and_meet_constraints(
        seed in 0u64..10_000,
        group in 1u8..=8,
        r in prop_oneof![Just(1.0), Just(0.9), Just(0.85)],
    ) {
        let (case, op) = bundled_ieee14_case();
        let config = build_config(&case, group).unwrap();
        let z = generate_measurements(&case, &config, &op.state, seed, 1.0);
        let est = estimate(&case, &config, &z, &StateVector::flat(14)).unwrap();
        let spec = AttackSpec::new(&case, r, r);
        let plan = synthesize(&case, &config, &z, &est.x_hat, &spec).unwrap();
        prop_assert!(plan.feasible);

        let h_hat = eval_h(&case, &config, &est.x_hat);
        let h_a = eval_h(&case, &config, &plan.x_a);
        for i in 0..config.len() {
            let touched = config.dep(i).iter().any(|j| plan.changed.contains(j));
            if !touched {
                prop_assert_eq!(h_a[i].to_bits(), h_hat[i].to_bits());
            }
            if config.spec(i).is_virtual() {
                prop_assert!(h_a[i].abs() <= 1e-6 + h_hat[i].abs());
            }
            if !plan.tampered.contains(&i) {
                prop_assert_eq!(plan.z_a.values[i], z.values[i]);
            }
        }
        let v = config.layout().to_vec(&plan.x_a);
        for j in 0..v.len() {
            prop_assert!(v[j] >= spec.lower[j] && v[j] <= spec.upper[j]);
        }
        let chart = chart_params(&case, Side::One, plan.x_a.vmag[5]).unwrap();
        let pt = operating_point_from_state(&case, &plan.x_a, Side::One);
        prop_assert!(is_safe(pt, &chart, r, r));
    }
}
