use std::fmt;

use crate::netcase::{NetworkCase, Side};

/// Full system state: AC bus phasors plus the six VSC-link states.
///
/// `angle` and `vmag` are indexed by bus position (`id - 1`). The reference
/// bus entry of `angle` is always zero and is not an estimation variable.
/// Side-2 DC quantities are derived: `U_dc2 = U_dc1 - I_dc1 r_dc`, `I_dc2 = -I_dc1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub angle: Vec<f64>,
    pub vmag: Vec<f64>,
    pub theta_c: [f64; 2],
    pub u_c: [f64; 2],
    pub u_dc1: f64,
    pub i_dc1: f64,
}

impl StateVector {
    /// Flat start: unit magnitudes, zero angles, `I_dc1 = 0.1`.
    pub fn flat(n_bus: usize) -> Self {
        Self {
            angle: vec![0.0; n_bus],
            vmag: vec![1.0; n_bus],
            theta_c: [0.0; 2],
            u_c: [1.0; 2],
            u_dc1: 1.0,
            i_dc1: 0.1,
        }
    }

    pub fn u_dc2(&self, r_dc: f64) -> f64 {
        self.u_dc1 - self.i_dc1 * r_dc
    }

    pub fn i_dc2(&self) -> f64 {
        -self.i_dc1
    }

    pub fn get(&self, idx: StateIndex) -> f64 {
        match idx {
            StateIndex::Angle(p) => self.angle[p],
            StateIndex::Vmag(p) => self.vmag[p],
            StateIndex::ThetaC(s) => self.theta_c[s.index()],
            StateIndex::Uc(s) => self.u_c[s.index()],
            StateIndex::Udc1 => self.u_dc1,
            StateIndex::Idc1 => self.i_dc1,
        }
    }

    pub fn set(&mut self, idx: StateIndex, value: f64) {
        match idx {
            StateIndex::Angle(p) => self.angle[p] = value,
            StateIndex::Vmag(p) => self.vmag[p] = value,
            StateIndex::ThetaC(s) => self.theta_c[s.index()] = value,
            StateIndex::Uc(s) => self.u_c[s.index()] = value,
            StateIndex::Udc1 => self.u_dc1 = value,
            StateIndex::Idc1 => self.i_dc1 = value,
        }
    }

    /// Checks the value invariants: finite entries, positive magnitudes,
    /// zero reference angle.
    pub fn is_valid(&self, layout: &StateLayout) -> bool {
        self.angle.len() == layout.n_bus
            && self.vmag.len() == layout.n_bus
            && self.angle[layout.reference] == 0.0
            && self.angle.iter().all(|a| a.is_finite())
            && self.vmag.iter().all(|v| v.is_finite() && *v > 0.0)
            && self.theta_c.iter().all(|a| a.is_finite())
            && self.u_c.iter().all(|v| v.is_finite() && *v > 0.0)
            && self.u_dc1.is_finite()
            && self.u_dc1 > 0.0
            && self.i_dc1.is_finite()
    }
}

/// Addresses one scalar state variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateIndex {
    /// Voltage angle of the bus at this position.
    Angle(usize),
    /// Voltage magnitude of the bus at this position.
    Vmag(usize),
    ThetaC(Side),
    Uc(Side),
    Udc1,
    Idc1,
}

impl fmt::Display for StateIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateIndex::Angle(p) => write!(f, "theta_{}", p + 1),
            StateIndex::Vmag(p) => write!(f, "V_{}", p + 1),
            StateIndex::ThetaC(s) => write!(f, "theta_c{s}"),
            StateIndex::Uc(s) => write!(f, "U_c{s}"),
            StateIndex::Udc1 => write!(f, "U_dc1"),
            StateIndex::Idc1 => write!(f, "I_dc1"),
        }
    }
}

/// Maps state variables to positions in the flat estimation vector:
/// non-reference angles, all magnitudes, then
/// `theta_c1, theta_c2, U_c1, U_c2, U_dc1, I_dc1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n_bus: usize,
    pub reference: usize,
}

impl StateLayout {
    pub fn new(n_bus: usize, reference: usize) -> Self {
        assert!(reference < n_bus);
        Self { n_bus, reference }
    }

    pub fn for_case(case: &NetworkCase) -> Self {
        Self::new(case.n_bus(), case.reference_pos())
    }

    pub fn len(&self) -> usize {
        2 * self.n_bus - 1 + 6
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat position of a variable; `None` for the reference angle.
    pub fn index(&self, var: StateIndex) -> Option<usize> {
        let na = self.n_bus - 1;
        let vsc = na + self.n_bus;
        match var {
            StateIndex::Angle(p) if p == self.reference => None,
            StateIndex::Angle(p) => Some(if p < self.reference { p } else { p - 1 }),
            StateIndex::Vmag(p) => Some(na + p),
            StateIndex::ThetaC(s) => Some(vsc + s.index()),
            StateIndex::Uc(s) => Some(vsc + 2 + s.index()),
            StateIndex::Udc1 => Some(vsc + 4),
            StateIndex::Idc1 => Some(vsc + 5),
        }
    }

    pub fn var(&self, j: usize) -> StateIndex {
        let na = self.n_bus - 1;
        let vsc = na + self.n_bus;
        if j < na {
            StateIndex::Angle(if j < self.reference { j } else { j + 1 })
        } else if j < vsc {
            StateIndex::Vmag(j - na)
        } else {
            match j - vsc {
                0 => StateIndex::ThetaC(Side::One),
                1 => StateIndex::ThetaC(Side::Two),
                2 => StateIndex::Uc(Side::One),
                3 => StateIndex::Uc(Side::Two),
                4 => StateIndex::Udc1,
                5 => StateIndex::Idc1,
                _ => panic!("state index {j} out of range"),
            }
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = StateIndex> + '_ {
        (0..self.len()).map(|j| self.var(j))
    }

    pub fn is_angle(&self, j: usize) -> bool {
        matches!(self.var(j), StateIndex::Angle(_) | StateIndex::ThetaC(_))
    }

    pub fn to_vec(&self, x: &StateVector) -> Vec<f64> {
        self.vars().map(|v| x.get(v)).collect()
    }

    pub fn from_vec(&self, values: &[f64]) -> StateVector {
        assert_eq!(values.len(), self.len());
        let mut x = StateVector::flat(self.n_bus);
        for (j, &v) in values.iter().enumerate() {
            x.set(self.var(j), v);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_round_trips_every_variable() {
        let layout = StateLayout::new(5, 2);
        assert_eq!(layout.len(), 4 + 5 + 6);
        assert_eq!(layout.index(StateIndex::Angle(2)), None);
        for j in 0..layout.len() {
            assert_eq!(layout.index(layout.var(j)), Some(j));
        }
    }

    #[test]
    fn derived_dc_quantities() {
        let mut x = StateVector::flat(2);
        x.u_dc1 = 1.049;
        x.i_dc1 = 0.937;
        assert!((x.u_dc2(0.052) - 1.000276).abs() < 1e-12);
        assert_eq!(x.i_dc2(), -0.937);
    }
}
