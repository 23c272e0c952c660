use nalgebra::{DMatrix, DVector};

use super::{AttackSpec, Candidate, Target};
use crate::capability::OperatingPoint;
use crate::measmodel::{
    eval_h, eval_jacobian, Location, MeasurementConfig, MeasurementKind, MeasurementSpec,
    StateVector,
};
use crate::netcase::NetworkCase;
use crate::numeric::min_norm_project;

const SOLVE_TOLERANCE: f64 = 1e-10;
const MAX_SOLVE_ITERATIONS: usize = 100;
/// Constraint residual above which a candidate is declared infeasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

/// Minimum-distance state for one candidate, or `None` if infeasible.
///
/// Variables outside the free set stay at `x_hat`. Every non-attackable
/// measurement touching the free set keeps its value at `x_hat`, and the
/// converter's `(P_s, Q_s)` must meet the target. Region targets are handled
/// by enumerating which of the two disc constraints are active; box bounds
/// by pinning violated variables at their bound and solving again.
pub fn solve_candidate(
    case: &NetworkCase,
    config: &MeasurementConfig,
    spec: &AttackSpec,
    attackable: &[bool],
    x_hat: &StateVector,
    cand: &Candidate,
    target: &Target,
) -> Option<StateVector> {
    let layout = *config.layout();
    let preserved: Vec<usize> = (0..config.len())
        .filter(|&i| !attackable[i] && config.dep(i).iter().any(|j| cand.free.contains(j)))
        .collect();
    let s = case.converter(spec.side).ac_bus;
    let loc = Location::Converter(spec.side);
    let mut specs: Vec<MeasurementSpec> = preserved.iter().map(|&i| *config.spec(i)).collect();
    specs.push(MeasurementSpec::real(MeasurementKind::Ps, loc, 1.0));
    specs.push(MeasurementSpec::real(MeasurementKind::Qs, loc, 1.0));
    specs.push(MeasurementSpec::real(
        MeasurementKind::VMag,
        Location::Bus(s),
        1.0,
    ));
    let sub = MeasurementConfig::new(case, specs).ok()?;
    let np = preserved.len();
    let keep: Vec<f64> = eval_h(case, &sub, x_hat)[..np].to_vec();
    let eval = TargetEval::new(case, spec, target);

    let x_hat_vec = layout.to_vec(x_hat);
    let mut base = x_hat_vec.clone();
    let mut free = cand.free.clone();
    for _ in 0..=cand.free.len() {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for active in eval.active_sets() {
            let x0 = DVector::from_iterator(free.len(), free.iter().map(|&j| x_hat_vec[j]));
            let expand = |xf: &DVector<f64>| {
                let mut v = base.clone();
                for (k, &j) in free.iter().enumerate() {
                    v[j] = xf[k];
                }
                v
            };
            let p = min_norm_project(
                &x0,
                &x0,
                |xf| {
                    let st = layout.from_vec(&expand(xf));
                    let h = eval_h(case, &sub, &st);
                    let jac = eval_jacobian(case, &sub, &st).to_dense();
                    let g = eval.values(&h[np..], jac.rows(np, 3).into_owned());
                    let rows = np + active.len();
                    let mut r = DVector::zeros(rows);
                    let mut jm = DMatrix::zeros(rows, free.len());
                    for k in 0..np {
                        r[k] = h[k] - keep[k];
                        for (c, &j) in free.iter().enumerate() {
                            jm[(k, c)] = jac[(k, j)];
                        }
                    }
                    for (a, &gi) in active.iter().enumerate() {
                        r[np + a] = g.0[gi];
                        for (c, &j) in free.iter().enumerate() {
                            jm[(np + a, c)] = g.1[(gi, j)];
                        }
                    }
                    (r, jm)
                },
                SOLVE_TOLERANCE,
                MAX_SOLVE_ITERATIONS,
            );
            if !(p.residual <= FEASIBILITY_TOLERANCE) {
                continue;
            }
            let v = expand(&p.x);
            let st = layout.from_vec(&v);
            if !st.is_valid(&layout) {
                continue;
            }
            let h = eval_h(case, &sub, &st);
            let jac = eval_jacobian(case, &sub, &st).to_dense();
            let g = eval.values(&h[np..], jac.rows(np, 3).into_owned());
            let meets = (0..g.0.len()).all(|k| {
                if active.contains(&k) {
                    g.0[k].abs() <= FEASIBILITY_TOLERANCE
                } else {
                    eval.is_equality() || g.0[k] <= 1e-9
                }
            });
            if !meets {
                continue;
            }
            let d: f64 = v.iter().zip(&x_hat_vec).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, v));
            }
        }
        let (_, v) = best?;
        let violated: Vec<usize> = free
            .iter()
            .copied()
            .filter(|&j| v[j] < spec.lower[j] || v[j] > spec.upper[j])
            .collect();
        if violated.is_empty() {
            return Some(layout.from_vec(&v));
        }
        for j in violated {
            base[j] = v[j].clamp(spec.lower[j], spec.upper[j]);
            free.retain(|&f| f != j);
        }
        if free.is_empty() {
            return None;
        }
    }
    None
}

/// Target constraints as functions of `(P_s, Q_s, U_s)`.
struct TargetEval {
    kind: Target,
    i_max: f64,
    u_max: f64,
    g: f64,
    b: f64,
}

impl TargetEval {
    fn new(case: &NetworkCase, spec: &AttackSpec, target: &Target) -> Self {
        let conv = case.converter(spec.side);
        let y = case.y_tc(spec.side);
        Self {
            kind: *target,
            i_max: conv.i_c_max,
            u_max: conv.u_c_max,
            g: y.re,
            b: y.im,
        }
    }

    fn is_equality(&self) -> bool {
        matches!(self.kind, Target::Point(_))
    }

    fn active_sets(&self) -> Vec<Vec<usize>> {
        match self.kind {
            Target::Point(_) => vec![vec![0, 1]],
            Target::Region { .. } => vec![vec![], vec![0], vec![1], vec![0, 1]],
        }
    }

    /// Constraint values and gradient rows, given `h = [P, Q, U]` and their
    /// Jacobian rows.
    fn values(&self, h: &[f64], jac: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let (p, q, u) = (h[0], h[1], h[2]);
        let (dp, dq, du) = (jac.row(0), jac.row(1), jac.row(2));
        match self.kind {
            Target::Point(OperatingPoint { p: ps, q: qs }) => {
                let mut j = DMatrix::zeros(2, jac.ncols());
                j.row_mut(0).copy_from(&dp);
                j.row_mut(1).copy_from(&dq);
                (vec![p - ps, q - qs], j)
            }
            Target::Region { r1, r2, delta } => {
                let rho1 = r1 * u * self.i_max - delta;
                let ymag = self.g.hypot(self.b);
                let rho2 = r2 * u * self.u_max * ymag - delta;
                let (cp, cq) = (p + u * u * self.g, q - u * u * self.b);
                let g1 = p * p + q * q - rho1 * rho1;
                let g2 = cp * cp + cq * cq - rho2 * rho2;
                let mut j = DMatrix::zeros(2, jac.ncols());
                let d1 = 2.0 * p * dp + 2.0 * q * dq - (2.0 * rho1 * r1 * self.i_max) * du;
                let d2 = 2.0 * cp * (dp + (2.0 * u * self.g) * du)
                    + 2.0 * cq * (dq - (2.0 * u * self.b) * du)
                    - (2.0 * rho2 * r2 * self.u_max * ymag) * du;
                j.row_mut(0).copy_from(&d1);
                j.row_mut(1).copy_from(&d2);
                (vec![g1, g2], j)
            }
        }
    }
}

/// Free-set variables that moved by more than 1e-9.
pub fn changed_variables(
    config: &MeasurementConfig,
    x_hat: &StateVector,
    x_a: &StateVector,
) -> Vec<usize> {
    let layout = config.layout();
    let (a, b) = (layout.to_vec(x_hat), layout.to_vec(x_a));
    (0..a.len())
        .filter(|&j| (a[j] - b[j]).abs() > 1e-9)
        .collect()
}

/// Attackable measurements whose value depends on a changed variable.
pub fn tampered_measurements(
    config: &MeasurementConfig,
    attackable: &[bool],
    changed: &[usize],
) -> Vec<usize> {
    (0..config.len())
        .filter(|&i| attackable[i] && config.dep(i).iter().any(|j| changed.contains(j)))
        .collect()
}
