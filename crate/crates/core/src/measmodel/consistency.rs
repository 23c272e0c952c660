//! Making a state satisfy the converter balances and zero injections exactly.

use nalgebra::{DMatrix, DVector};

use super::{
    eval_h, eval_jacobian, Location, MeasurementConfig, MeasurementKind, MeasurementSpec, Power,
    StateIndex, StateVector,
};
use crate::netcase::{NetworkCase, Side};
use crate::numeric::min_norm_project;
use crate::{Error, Result};

/// Virtual measurements only: both power balances and every zero injection.
pub fn constraint_config(case: &NetworkCase) -> Result<MeasurementConfig> {
    let mut specs: Vec<MeasurementSpec> = Side::BOTH
        .iter()
        .map(|&s| MeasurementSpec::virtual_(MeasurementKind::VirtPbal, Location::Converter(s)))
        .collect();
    for id in case.zero_injection_buses() {
        for p in [Power::Active, Power::Reactive] {
            specs.push(MeasurementSpec::virtual_(
                MeasurementKind::VirtZeroInj,
                Location::BusPower(id, p),
            ));
        }
    }
    MeasurementConfig::new(case, specs)
}

/// Nearest state to `x` (Euclidean in the flat estimation vector) that
/// satisfies every equality constraint, with the `pinned` variables held fixed.
pub fn project_onto_constraints(
    case: &NetworkCase,
    x: &StateVector,
    pinned: &[StateIndex],
) -> Result<StateVector> {
    let config = constraint_config(case)?;
    let layout = *config.layout();
    let free: Vec<usize> = (0..layout.len())
        .filter(|&j| !pinned.iter().any(|&p| layout.index(p) == Some(j)))
        .collect();
    let full = layout.to_vec(x);
    let x0 = DVector::from_iterator(free.len(), free.iter().map(|&j| full[j]));
    let expand = |xf: &DVector<f64>| {
        let mut v = full.clone();
        for (k, &j) in free.iter().enumerate() {
            v[j] = xf[k];
        }
        layout.from_vec(&v)
    };
    let p = min_norm_project(
        &x0,
        &x0,
        |xf| {
            let s = expand(xf);
            let r = DVector::from_vec(eval_h(case, &config, &s));
            let jac = eval_jacobian(case, &config, &s).to_dense();
            let jf = DMatrix::from_fn(jac.nrows(), free.len(), |i, k| jac[(i, free[k])]);
            (r, jf)
        },
        1e-13,
        100,
    );
    if p.residual > 1e-10 {
        return Err(Error::InfeasibleTarget(format!(
            "constraints not satisfiable from this state (residual {:.3e})",
            p.residual
        )));
    }
    Ok(expand(&p.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::bundled_ieee14_case;

    #[test]
    fn projection_satisfies_constraints_and_keeps_pins() {
        let (case, op) = bundled_ieee14_case();
        let mut x = op.state.clone();
        x.u_c[0] += 0.01;
        x.vmag[6] -= 0.01;
        let pins = [StateIndex::Udc1, StateIndex::Idc1];
        let y = project_onto_constraints(&case, &x, &pins).unwrap();
        let c = constraint_config(&case).unwrap();
        assert!(eval_h(&case, &c, &y).iter().all(|r| r.abs() < 1e-10));
        assert_eq!(y.u_dc1, x.u_dc1);
        assert_eq!(y.i_dc1, x.i_dc1);
    }
}
