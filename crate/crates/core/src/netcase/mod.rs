//! Network data model: AC buses and branches plus one two-terminal VSC-HVDC link.
//!
//! All electrical quantities are per-unit on the case's MVA/kV bases. Bus ids are
//! contiguous from 1, so a bus id maps to position `id - 1` in every per-bus vector.

mod format;
mod ieee14;

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::measmodel::StateVector;
use crate::{Error, Result};

pub use format::{parse_case, parse_case_with_state, write_case, write_case_json};
pub use ieee14::{bundled_ieee14_case, IEEE14_CASE_TEXT};

/// One of the two converter stations of the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    One,
    Two,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::One, Side::Two];

    pub fn index(self) -> usize {
        match self {
            Side::One => 0,
            Side::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Side> {
        match n {
            1 => Some(Side::One),
            2 => Some(Side::Two),
            _ => None,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusSpec {
    pub id: usize,
    pub has_nonzero_injection: bool,
    pub v_min: f64,
    pub v_max: f64,
    /// Fixed shunt admittance to ground (g_sh + j b_sh).
    pub shunt: Complex64,
}

/// Standard pi branch. `tap` is a fixed off-nominal ratio on the from side
/// (1.0 for lines); it is a constant parameter, never estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series admittance g + jb.
    pub admittance: Complex64,
    /// Total line-charging susceptance, split equally between the ends.
    pub b_sh: f64,
    pub tap: f64,
}

/// Two-port admittance terms of a branch as seen from one end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndAdmittance {
    pub self_term: Complex64,
    pub mutual: Complex64,
}

impl BranchSpec {
    pub fn from_end(&self) -> EndAdmittance {
        let y = self.admittance;
        let half = Complex64::new(0.0, self.b_sh / 2.0);
        EndAdmittance {
            self_term: (y + half) / (self.tap * self.tap),
            mutual: -y / self.tap,
        }
    }

    pub fn to_end(&self) -> EndAdmittance {
        let y = self.admittance;
        EndAdmittance {
            self_term: y + Complex64::new(0.0, self.b_sh / 2.0),
            mutual: -y / self.tap,
        }
    }
}

/// Converter loss polynomial `a + b I_c + c I_c^2`, with `c` depending on the
/// operating mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub a: f64,
    pub b: f64,
    pub c_rect: f64,
    pub c_inv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConverterSpec {
    /// AC bus the converter transformer connects to.
    pub ac_bus: usize,
    /// Converter transformer admittance.
    pub y_t: Complex64,
    /// Phase reactor admittance.
    pub y_c: Complex64,
    pub loss: LossCoefficients,
    pub i_c_max: f64,
    pub u_c_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VscLinkSpec {
    pub converters: [ConverterSpec; 2],
    pub r_dc: f64,
}

impl VscLinkSpec {
    pub fn converter(&self, side: Side) -> &ConverterSpec {
        &self.converters[side.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Base {
    pub mva: f64,
    pub kv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub name: String,
    pub buses: Vec<BusSpec>,
    pub branches: Vec<BranchSpec>,
    pub vsc: VscLinkSpec,
    pub reference_bus: usize,
    pub base: Base,
}

/// Ground-truth operating state shipped with a case.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingState {
    pub state: StateVector,
}

/// Series combination `y_t y_c / (y_t + y_c)` of converter transformer and phase reactor.
pub fn equivalent_converter_admittance(vsc: &VscLinkSpec, side: Side) -> Result<Complex64> {
    let conv = vsc.converter(side);
    series_admittance(conv.y_t, conv.y_c).ok_or(Error::DegenerateSeries {
        side: side.number(),
    })
}

fn series_admittance(a: Complex64, b: Complex64) -> Option<Complex64> {
    let sum = a + b;
    if sum.norm() == 0.0 || a.norm() == 0.0 || b.norm() == 0.0 {
        return None;
    }
    Some(a * b / sum)
}

impl NetworkCase {
    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    /// Position of a bus id in per-bus vectors.
    pub fn bus_pos(&self, id: usize) -> Option<usize> {
        (id >= 1 && id <= self.buses.len()).then(|| id - 1)
    }

    pub fn reference_pos(&self) -> usize {
        self.reference_bus - 1
    }

    pub fn converter(&self, side: Side) -> &ConverterSpec {
        self.vsc.converter(side)
    }

    /// Equivalent converter admittance. Validated cases never hit the
    /// degenerate-series error, so this panics only on unvalidated input.
    pub fn y_tc(&self, side: Side) -> Complex64 {
        equivalent_converter_admittance(&self.vsc, side)
            .expect("validated case has non-degenerate converter admittance")
    }

    /// Sides whose converter attaches to bus position `pos`.
    pub fn converters_at(&self, pos: usize) -> impl Iterator<Item = Side> + '_ {
        Side::BOTH
            .into_iter()
            .filter(move |&s| self.converter(s).ac_bus - 1 == pos)
    }

    /// Branch indices incident to bus position `pos`.
    pub fn incident_branches(&self, pos: usize) -> impl Iterator<Item = usize> + '_ {
        let id = pos + 1;
        self.branches
            .iter()
            .enumerate()
            .filter(move |(_, br)| br.from_bus == id || br.to_bus == id)
            .map(|(k, _)| k)
    }

    /// Buses without any generation or load.
    pub fn zero_injection_buses(&self) -> impl Iterator<Item = usize> + '_ {
        self.buses
            .iter()
            .filter(|b| !b.has_nonzero_injection)
            .map(|b| b.id)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::Validation(msg));

        if self.buses.is_empty() {
            return invalid("case has no buses".into());
        }
        let mut seen = HashSet::new();
        for bus in &self.buses {
            if !seen.insert(bus.id) {
                return invalid(format!("duplicate bus id {}", bus.id));
            }
        }
        for (pos, bus) in self.buses.iter().enumerate() {
            if bus.id != pos + 1 {
                return invalid(format!(
                    "bus ids must be contiguous from 1 and listed in order; found {} at position {}",
                    bus.id,
                    pos + 1
                ));
            }
            if !(bus.v_min < bus.v_max) {
                return invalid(format!("bus {}: v_min must be below v_max", bus.id));
            }
            if !(bus.shunt.re.is_finite() && bus.shunt.im.is_finite()) {
                return invalid(format!("bus {}: non-finite shunt", bus.id));
            }
        }
        let exists = |id: usize| id >= 1 && id <= self.buses.len();
        for (k, br) in self.branches.iter().enumerate() {
            let n = k + 1;
            if !exists(br.from_bus) || !exists(br.to_bus) {
                return invalid(format!(
                    "branch {n} ({} -> {}) references a bus that does not exist",
                    br.from_bus, br.to_bus
                ));
            }
            if br.from_bus == br.to_bus {
                return invalid(format!("branch {n} connects bus {} to itself", br.from_bus));
            }
            let y = br.admittance;
            if !(y.re.is_finite() && y.im.is_finite()) || y.norm() == 0.0 {
                return invalid(format!("branch {n}: admittance must be finite and nonzero"));
            }
            if !(br.tap.is_finite() && br.tap > 0.0) || !br.b_sh.is_finite() {
                return invalid(format!("branch {n}: tap must be positive, b_sh finite"));
            }
        }
        if !exists(self.reference_bus) {
            return invalid(format!(
                "reference bus {} does not exist",
                self.reference_bus
            ));
        }
        for side in Side::BOTH {
            let conv = self.converter(side);
            if !exists(conv.ac_bus) {
                return invalid(format!(
                    "converter {side}: AC bus {} does not exist",
                    conv.ac_bus
                ));
            }
            if !(conv.i_c_max > 0.0) || !(conv.u_c_max > 0.0) {
                return invalid(format!(
                    "converter {side}: I_c_max and U_c_max must be positive"
                ));
            }
            let l = conv.loss;
            if [l.a, l.b, l.c_rect, l.c_inv]
                .iter()
                .any(|v| !(v.is_finite() && *v >= 0.0))
            {
                return invalid(format!("converter {side}: loss coefficients must be >= 0"));
            }
            equivalent_converter_admittance(&self.vsc, side)?;
        }
        if !(self.vsc.r_dc.is_finite() && self.vsc.r_dc >= 0.0) {
            return invalid("r_dc must be >= 0".into());
        }
        if !(self.base.mva > 0.0 && self.base.kv > 0.0) {
            return invalid("bases must be positive".into());
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.n_bus();
        let mut adj = vec![Vec::new(); n];
        for br in &self.branches {
            adj[br.from_bus - 1].push(br.to_bus - 1);
            adj[br.to_bus - 1].push(br.from_bus - 1);
        }
        let s1 = self.converter(Side::One).ac_bus - 1;
        let s2 = self.converter(Side::Two).ac_bus - 1;
        adj[s1].push(s2);
        adj[s2].push(s1);

        let mut seen = vec![false; n];
        let mut stack = vec![self.reference_pos()];
        seen[self.reference_pos()] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(pos) => Err(Error::Validation(format!(
                "bus {} is not connected to the reference bus",
                pos + 1
            ))),
            None => Ok(()),
        }
    }
}
