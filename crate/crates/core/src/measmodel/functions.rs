//! Measurement functions and their analytic Jacobian.
//!
//! Each measurement is evaluated by one routine that optionally records the
//! partial derivatives it touches. `h(x)`, the Jacobian and the dependency
//! sets all come from that single routine.

use nalgebra::DMatrix;

use super::{End, Location, MeasurementConfig, MeasurementKind, MeasurementSpec, Power};
use super::{StateIndex, StateLayout, StateVector};
use crate::netcase::{ConverterSpec, EndAdmittance, NetworkCase, Side};
use crate::{Error, Result};

/// Converter operating mode, which selects the quadratic loss coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    Rectifier,
    Inverter,
}

impl LossMode {
    /// Rectifier when the converter delivers power into the DC link.
    pub fn for_dc_power(p_dc: f64) -> Self {
        if p_dc >= 0.0 {
            LossMode::Rectifier
        } else {
            LossMode::Inverter
        }
    }
}

/// `a + b I + c I^2`.
pub fn converter_loss(conv: &ConverterSpec, i_c: f64, mode: LossMode) -> f64 {
    let c = match mode {
        LossMode::Rectifier => conv.loss.c_rect,
        LossMode::Inverter => conv.loss.c_inv,
    };
    conv.loss.a + conv.loss.b * i_c + c * i_c * i_c
}

/// Magnitude of the current through the equivalent converter admittance.
pub fn converter_ac_current(case: &NetworkCase, x: &StateVector, side: Side) -> f64 {
    let s = case.converter(side).ac_bus - 1;
    let k = current_kernel(x, s, side).0;
    case.y_tc(side).norm() * k.max(0.0).sqrt()
}

/// DC power delivered by the converter on `side` into the DC link.
pub fn dc_power(case: &NetworkCase, x: &StateVector, side: Side) -> f64 {
    match side {
        Side::One => x.u_dc1 * x.i_dc1,
        Side::Two => x.u_dc2(case.vsc.r_dc) * x.i_dc2(),
    }
}

/// `P_loss + P_c + P_dc`; zero for a consistent operating point.
pub fn power_balance_residual(case: &NetworkCase, x: &StateVector, side: Side) -> f64 {
    let layout = StateLayout::for_case(case);
    Eval::new(case, &layout, x, None).pbal(side)
}

/// Value of a single measurement.
pub fn eval_one(case: &NetworkCase, spec: &MeasurementSpec, x: &StateVector) -> f64 {
    let layout = StateLayout::for_case(case);
    Eval::new(case, &layout, x, None).measure(spec)
}

pub fn eval_h(case: &NetworkCase, config: &MeasurementConfig, x: &StateVector) -> Vec<f64> {
    let layout = *config.layout();
    let mut ev = Eval::new(case, &layout, x, None);
    config.specs().iter().map(|s| ev.measure(s)).collect()
}

/// Row-sparse Jacobian; row `i` holds exactly the columns in `dep(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseJacobian {
    pub n_cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseJacobian {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rows[i].iter().find(|(c, _)| *c == j).map(|(_, v)| *v)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.n_cols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Dense matrix of the selected rows only.
    pub fn dense_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(rows.len(), self.n_cols);
        for (r, &i) in rows.iter().enumerate() {
            for &(j, v) in &self.rows[i] {
                m[(r, j)] = v;
            }
        }
        m
    }
}

pub fn eval_jacobian(
    case: &NetworkCase,
    config: &MeasurementConfig,
    x: &StateVector,
) -> SparseJacobian {
    let layout = *config.layout();
    let mut buf = Vec::new();
    let rows = config
        .specs()
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            buf.clear();
            Eval::new(case, &layout, x, Some(&mut buf)).measure(spec);
            let row = merge(&mut buf);
            debug_assert!(row.iter().map(|e| e.0).eq(config.dep(i).iter().copied()));
            row
        })
        .collect();
    SparseJacobian {
        n_cols: layout.len(),
        rows,
    }
}

fn merge(buf: &mut [(usize, f64)]) -> Vec<(usize, f64)> {
    buf.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(buf.len());
    for &(j, v) in buf.iter() {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out
}

/// Checks the location against the case and returns the sorted dependency set.
pub(super) fn dependencies(
    case: &NetworkCase,
    layout: &StateLayout,
    spec: &MeasurementSpec,
) -> std::result::Result<Vec<usize>, String> {
    use MeasurementKind as K;
    let bus_ok = |id: usize| {
        case.bus_pos(id)
            .map(|_| ())
            .ok_or_else(|| format!("bus {id} does not exist"))
    };
    match (spec.kind, spec.location) {
        (K::VMag | K::PInj | K::QInj, Location::Bus(id)) => bus_ok(id)?,
        (K::PFlow | K::QFlow, Location::Branch(k, _)) => {
            if k == 0 || k > case.branches.len() {
                return Err(format!("branch {k} does not exist"));
            }
        }
        (K::Ps | K::Qs | K::Pc | K::Qc | K::Udc | K::Idc | K::VirtPbal, Location::Converter(_)) => {
        }
        (K::VirtZeroInj, Location::BusPower(id, _)) => {
            bus_ok(id)?;
            if case.buses[id - 1].has_nonzero_injection {
                return Err(format!("bus {id} has nonzero injection"));
            }
        }
        (kind, loc) => return Err(format!("location `{loc}` does not fit kind {kind}")),
    }
    // The evaluator records every structurally present partial, including
    // ones that happen to vanish at this state.
    let x = super::probe_state(case);
    let mut buf = Vec::new();
    Eval::new(case, layout, &x, Some(&mut buf)).measure(spec);
    Ok(merge(&mut buf).into_iter().map(|e| e.0).collect())
}

/// Fails when the Jacobian rows selected by `active` do not have full column rank.
pub fn check_observable(
    case: &NetworkCase,
    config: &MeasurementConfig,
    x: &StateVector,
    active: &[bool],
) -> Result<()> {
    let h = eval_jacobian(case, config, x);
    let rows: Vec<usize> = (0..config.len()).filter(|&i| active[i]).collect();
    let n = h.n_cols;
    if rows.len() < n {
        return Err(Error::Unobservable(format!(
            "{} measurements for {n} state variables",
            rows.len()
        )));
    }
    let mut m = h.dense_rows(&rows);
    for j in 0..n {
        let norm = m.column(j).norm();
        if norm == 0.0 {
            let var = config.layout().var(j);
            return Err(Error::Unobservable(format!(
                "no measurement depends on {var}"
            )));
        }
        m.column_mut(j).scale_mut(1.0 / norm);
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 1e-10 * max {
        return Err(Error::Unobservable(format!(
            "Jacobian is rank deficient (singular value ratio {:.3e})",
            min / max
        )));
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Node {
    theta: StateIndex,
    mag: StateIndex,
}

impl Node {
    fn bus(pos: usize) -> Self {
        Node {
            theta: StateIndex::Angle(pos),
            mag: StateIndex::Vmag(pos),
        }
    }

    fn converter(side: Side) -> Self {
        Node {
            theta: StateIndex::ThetaC(side),
            mag: StateIndex::Uc(side),
        }
    }
}

/// K = U_c^2 + U_s^2 - 2 U_c U_s cos(theta_c - theta_s) with its partials
/// with respect to (theta_s, U_s, theta_c, U_c).
fn current_kernel(x: &StateVector, s: usize, side: Side) -> (f64, [f64; 4]) {
    let k = side.index();
    let (uc, us) = (x.u_c[k], x.vmag[s]);
    let d = x.theta_c[k] - x.angle[s];
    let (sin, cos) = d.sin_cos();
    let val = uc * uc + us * us - 2.0 * uc * us * cos;
    let dtc = 2.0 * uc * us * sin;
    (
        val,
        [
            -dtc,
            2.0 * us - 2.0 * uc * cos,
            dtc,
            2.0 * uc - 2.0 * us * cos,
        ],
    )
}

struct Eval<'a> {
    case: &'a NetworkCase,
    layout: &'a StateLayout,
    x: &'a StateVector,
    grad: Option<&'a mut Vec<(usize, f64)>>,
}

impl<'a> Eval<'a> {
    fn new(
        case: &'a NetworkCase,
        layout: &'a StateLayout,
        x: &'a StateVector,
        grad: Option<&'a mut Vec<(usize, f64)>>,
    ) -> Self {
        Self {
            case,
            layout,
            x,
            grad,
        }
    }

    fn add(&mut self, var: StateIndex, d: f64) {
        if let Some(g) = self.grad.as_mut() {
            if let Some(j) = self.layout.index(var) {
                g.push((j, d));
            }
        }
    }

    fn measure(&mut self, spec: &MeasurementSpec) -> f64 {
        use MeasurementKind as K;
        match (spec.kind, spec.location) {
            (K::VMag, Location::Bus(id)) => {
                self.add(StateIndex::Vmag(id - 1), 1.0);
                self.x.vmag[id - 1]
            }
            (K::PInj, Location::Bus(id)) => self.injection(id - 1, Power::Active),
            (K::QInj, Location::Bus(id)) => self.injection(id - 1, Power::Reactive),
            (K::VirtZeroInj, Location::BusPower(id, p)) => self.injection(id - 1, p),
            (K::PFlow, Location::Branch(k, end)) => {
                self.branch_flow(k - 1, end, Power::Active, 1.0)
            }
            (K::QFlow, Location::Branch(k, end)) => {
                self.branch_flow(k - 1, end, Power::Reactive, 1.0)
            }
            (K::Ps, Location::Converter(s)) => self.ac_side(s, Power::Active, 1.0),
            (K::Qs, Location::Converter(s)) => self.ac_side(s, Power::Reactive, 1.0),
            (K::Pc, Location::Converter(s)) => self.converter_side(s, Power::Active, 1.0),
            (K::Qc, Location::Converter(s)) => self.converter_side(s, Power::Reactive, 1.0),
            (K::Udc, Location::Converter(s)) => self.u_dc(s),
            (K::Idc, Location::Converter(s)) => self.i_dc(s),
            (K::VirtPbal, Location::Converter(s)) => self.pbal(s),
            (kind, loc) => panic!("location `{loc}` does not fit kind {kind}"),
        }
    }

    /// Power leaving node `s` through a two-port with terms `y`, scaled by `sign`.
    fn end_flow(&mut self, s: Node, m: Node, y: EndAdmittance, p: Power, sign: f64) -> f64 {
        let x = self.x;
        let (vs, vm) = (x.get(s.mag), x.get(m.mag));
        let (sin, cos) = (x.get(s.theta) - x.get(m.theta)).sin_cos();
        let (g, b) = (y.mutual.re, y.mutual.im);
        let (gss, bss) = (y.self_term.re, y.self_term.im);
        let (val, dth, dvs, dvm) = match p {
            Power::Active => {
                let t = g * cos + b * sin;
                (
                    vs * vs * gss + vs * vm * t,
                    vs * vm * (-g * sin + b * cos),
                    2.0 * vs * gss + vm * t,
                    vs * t,
                )
            }
            Power::Reactive => {
                let t = g * sin - b * cos;
                (
                    -vs * vs * bss + vs * vm * t,
                    vs * vm * (g * cos + b * sin),
                    -2.0 * vs * bss + vm * t,
                    vs * t,
                )
            }
        };
        self.add(s.theta, sign * dth);
        self.add(m.theta, -sign * dth);
        self.add(s.mag, sign * dvs);
        self.add(m.mag, sign * dvm);
        sign * val
    }

    fn branch_flow(&mut self, k: usize, end: End, p: Power, sign: f64) -> f64 {
        let br = &self.case.branches[k];
        let (f, t) = (br.from_bus - 1, br.to_bus - 1);
        match end {
            End::From => self.end_flow(Node::bus(f), Node::bus(t), br.from_end(), p, sign),
            End::To => self.end_flow(Node::bus(t), Node::bus(f), br.to_end(), p, sign),
        }
    }

    fn injection(&mut self, pos: usize, p: Power) -> f64 {
        let case = self.case;
        let id = pos + 1;
        let mut total = 0.0;
        for k in case.incident_branches(pos) {
            let end = if case.branches[k].from_bus == id {
                End::From
            } else {
                End::To
            };
            total += self.branch_flow(k, end, p, 1.0);
        }
        let sh = case.buses[pos].shunt;
        let coef = match p {
            Power::Active => sh.re,
            Power::Reactive => -sh.im,
        };
        if coef != 0.0 {
            let v = self.x.vmag[pos];
            total += coef * v * v;
            self.add(StateIndex::Vmag(pos), 2.0 * coef * v);
        }
        for side in case.converters_at(pos) {
            total += self.ac_side(side, p, -1.0);
        }
        total
    }

    /// Power injected into the AC bus by the converter.
    fn ac_side(&mut self, side: Side, p: Power, sign: f64) -> f64 {
        let y = self.case.y_tc(side);
        let s = self.case.converter(side).ac_bus - 1;
        let ya = EndAdmittance {
            self_term: -y,
            mutual: y,
        };
        self.end_flow(Node::bus(s), Node::converter(side), ya, p, sign)
    }

    /// Power flowing from the converter node toward the AC bus.
    fn converter_side(&mut self, side: Side, p: Power, sign: f64) -> f64 {
        let y = self.case.y_tc(side);
        let s = self.case.converter(side).ac_bus - 1;
        let ya = EndAdmittance {
            self_term: y,
            mutual: -y,
        };
        self.end_flow(Node::converter(side), Node::bus(s), ya, p, sign)
    }

    fn u_dc(&mut self, side: Side) -> f64 {
        self.add(StateIndex::Udc1, 1.0);
        match side {
            Side::One => self.x.u_dc1,
            Side::Two => {
                let r = self.case.vsc.r_dc;
                if r != 0.0 {
                    self.add(StateIndex::Idc1, -r);
                }
                self.x.u_dc2(r)
            }
        }
    }

    fn i_dc(&mut self, side: Side) -> f64 {
        match side {
            Side::One => {
                self.add(StateIndex::Idc1, 1.0);
                self.x.i_dc1
            }
            Side::Two => {
                self.add(StateIndex::Idc1, -1.0);
                self.x.i_dc2()
            }
        }
    }

    fn p_dc(&mut self, side: Side) -> f64 {
        let (u, i) = (self.x.u_dc1, self.x.i_dc1);
        match side {
            Side::One => {
                self.add(StateIndex::Udc1, i);
                self.add(StateIndex::Idc1, u);
                u * i
            }
            Side::Two => {
                let r = self.case.vsc.r_dc;
                self.add(StateIndex::Udc1, -i);
                self.add(StateIndex::Idc1, -u + 2.0 * r * i);
                -(u - r * i) * i
            }
        }
    }

    fn loss(&mut self, side: Side, mode: LossMode) -> f64 {
        let conv = self.case.converter(side);
        let ymag = self.case.y_tc(side).norm();
        let s = conv.ac_bus - 1;
        let (k, dk) = current_kernel(self.x, s, side);
        let k = k.max(0.0);
        let root = k.sqrt();
        let c = match mode {
            LossMode::Rectifier => conv.loss.c_rect,
            LossMode::Inverter => conv.loss.c_inv,
        };
        let i_c = ymag * root;
        let db = if root > 0.0 {
            conv.loss.b * ymag / (2.0 * root)
        } else {
            0.0
        };
        let dc = c * ymag * ymag;
        let vars = [
            StateIndex::Angle(s),
            StateIndex::Vmag(s),
            StateIndex::ThetaC(side),
            StateIndex::Uc(side),
        ];
        for (var, d) in vars.into_iter().zip(dk) {
            self.add(var, (db + dc) * d);
        }
        conv.loss.a + conv.loss.b * i_c + c * i_c * i_c
    }

    fn pbal(&mut self, side: Side) -> f64 {
        let mode = LossMode::for_dc_power(dc_power(self.case, self.x, side));
        let loss = self.loss(side, mode);
        let pc = self.converter_side(side, Power::Active, 1.0);
        let pdc = self.p_dc(side);
        loss + pc + pdc
    }
}
