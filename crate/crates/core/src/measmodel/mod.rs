//! State vector, measurement definitions and the measurement model `h(x)`.

mod config;
mod consistency;
mod csv;
mod functions;
mod noise;
mod state;

use std::fmt;
use std::str::FromStr;

use crate::netcase::{NetworkCase, Side};
use crate::{Error, Result};

pub use config::{build_config, probe_state, GROUP_COUNT};
pub use consistency::{constraint_config, project_onto_constraints};
pub use csv::{read_measurements, write_measurements};
pub use functions::{
    check_observable, converter_ac_current, converter_loss, dc_power, eval_h, eval_jacobian,
    eval_one, power_balance_residual, LossMode, SparseJacobian,
};
pub use noise::{generate_measurements, keyed_normal, mix_seed, NoiseStream};
pub use state::{StateIndex, StateLayout, StateVector};

/// Standard deviation assigned to equality constraints treated as measurements.
pub const VIRTUAL_SIGMA: f64 = 1e-6;

/// Default telemetry standard deviation.
pub const DEFAULT_SIGMA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeasurementKind {
    VMag,
    PInj,
    QInj,
    PFlow,
    QFlow,
    Ps,
    Qs,
    Pc,
    Qc,
    Udc,
    Idc,
    /// Converter active-power balance `P_loss + P_c + P_dc = 0`.
    VirtPbal,
    /// Zero injection at a bus without generation or load.
    VirtZeroInj,
}

impl MeasurementKind {
    pub const ALL: [MeasurementKind; 13] = [
        MeasurementKind::VMag,
        MeasurementKind::PInj,
        MeasurementKind::QInj,
        MeasurementKind::PFlow,
        MeasurementKind::QFlow,
        MeasurementKind::Ps,
        MeasurementKind::Qs,
        MeasurementKind::Pc,
        MeasurementKind::Qc,
        MeasurementKind::Udc,
        MeasurementKind::Idc,
        MeasurementKind::VirtPbal,
        MeasurementKind::VirtZeroInj,
    ];

    pub fn is_virtual(self) -> bool {
        matches!(
            self,
            MeasurementKind::VirtPbal | MeasurementKind::VirtZeroInj
        )
    }

    pub fn code(self) -> &'static str {
        match self {
            MeasurementKind::VMag => "V_MAG",
            MeasurementKind::PInj => "P_INJ",
            MeasurementKind::QInj => "Q_INJ",
            MeasurementKind::PFlow => "P_FLOW",
            MeasurementKind::QFlow => "Q_FLOW",
            MeasurementKind::Ps => "P_S",
            MeasurementKind::Qs => "Q_S",
            MeasurementKind::Pc => "P_C",
            MeasurementKind::Qc => "Q_C",
            MeasurementKind::Udc => "U_DC",
            MeasurementKind::Idc => "I_DC",
            MeasurementKind::VirtPbal => "VIRT_PBAL",
            MeasurementKind::VirtZeroInj => "VIRT_ZEROINJ",
        }
    }
}

impl fmt::Display for MeasurementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for MeasurementKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        MeasurementKind::ALL
            .into_iter()
            .find(|k| k.code() == s)
            .ok_or_else(|| format!("unknown measurement kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    From,
    To,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Power {
    Active,
    Reactive,
}

/// Where a measurement sits. Bus and branch numbers are 1-based ids.
///
/// Text forms: `bus:6`, `branch:3:from`, `vsc:1`, `bus:7:p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    Bus(usize),
    Branch(usize, End),
    Converter(Side),
    BusPower(usize, Power),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Bus(b) => write!(f, "bus:{b}"),
            Location::Branch(k, End::From) => write!(f, "branch:{k}:from"),
            Location::Branch(k, End::To) => write!(f, "branch:{k}:to"),
            Location::Converter(s) => write!(f, "vsc:{s}"),
            Location::BusPower(b, Power::Active) => write!(f, "bus:{b}:p"),
            Location::BusPower(b, Power::Reactive) => write!(f, "bus:{b}:q"),
        }
    }
}

impl FromStr for Location {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bad = || format!("malformed location `{s}`");
        let parts: Vec<&str> = s.split(':').collect();
        let id = |p: &str| p.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["bus", b] => Ok(Location::Bus(id(b)?)),
            ["bus", b, "p"] => Ok(Location::BusPower(id(b)?, Power::Active)),
            ["bus", b, "q"] => Ok(Location::BusPower(id(b)?, Power::Reactive)),
            ["branch", k, "from"] => Ok(Location::Branch(id(k)?, End::From)),
            ["branch", k, "to"] => Ok(Location::Branch(id(k)?, End::To)),
            ["vsc", n] => {
                let n: u8 = n.parse().map_err(|_| bad())?;
                Side::from_number(n)
                    .map(Location::Converter)
                    .ok_or_else(bad)
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSpec {
    pub kind: MeasurementKind,
    pub location: Location,
    pub sigma: f64,
    pub attackable: bool,
}

impl MeasurementSpec {
    /// A telemetry measurement, attackable by default.
    pub fn real(kind: MeasurementKind, location: Location, sigma: f64) -> Self {
        debug_assert!(!kind.is_virtual());
        Self {
            kind,
            location,
            sigma,
            attackable: true,
        }
    }

    /// An equality constraint carried as a high-weight, never-attackable measurement.
    pub fn virtual_(kind: MeasurementKind, location: Location) -> Self {
        debug_assert!(kind.is_virtual());
        Self {
            kind,
            location,
            sigma: VIRTUAL_SIGMA,
            attackable: false,
        }
    }

    pub fn is_virtual(&self) -> bool {
        self.kind.is_virtual()
    }

    pub fn label(&self) -> String {
        format!("{}@{}", self.kind, self.location)
    }
}

/// Ordered measurement set with precomputed state-dependency sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementConfig {
    specs: Vec<MeasurementSpec>,
    deps: Vec<Vec<usize>>,
    layout: StateLayout,
}

impl MeasurementConfig {
    /// Validates every spec against the case and computes `dep(i)`.
    pub fn new(case: &NetworkCase, specs: Vec<MeasurementSpec>) -> Result<Self> {
        let layout = StateLayout::for_case(case);
        let mut deps = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            if !(spec.sigma > 0.0 && spec.sigma.is_finite()) {
                return Err(Error::Config(format!(
                    "measurement {i} ({}): sigma must be positive",
                    spec.label()
                )));
            }
            if spec.is_virtual() && spec.attackable {
                return Err(Error::Config(format!(
                    "measurement {i} ({}): virtual measurements cannot be attackable",
                    spec.label()
                )));
            }
            deps.push(functions::dependencies(case, &layout, spec).map_err(|msg| {
                Error::Config(format!("measurement {i} ({}): {msg}", spec.label()))
            })?);
        }
        Ok(Self {
            specs,
            deps,
            layout,
        })
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[MeasurementSpec] {
        &self.specs
    }

    pub fn spec(&self, i: usize) -> &MeasurementSpec {
        &self.specs[i]
    }

    /// Sorted flat state indices with structurally nonzero `dh_i/dx_j`.
    pub fn dep(&self, i: usize) -> &[usize] {
        &self.deps[i]
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn position(&self, kind: MeasurementKind, location: Location) -> Option<usize> {
        self.specs
            .iter()
            .position(|s| s.kind == kind && s.location == location)
    }

    /// Same measurements with every telemetry sigma replaced.
    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        for s in self.specs.iter_mut().filter(|s| !s.is_virtual()) {
            s.sigma = sigma;
        }
        Ok(self)
    }

    /// Overrides the attackable flags of telemetry measurements.
    pub fn with_attackable(mut self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.specs.len() {
            return Err(Error::Config("attackable mask length mismatch".into()));
        }
        for (s, &m) in self.specs.iter_mut().zip(mask) {
            if m && s.is_virtual() {
                return Err(Error::Config(format!(
                    "{}: virtual measurements cannot be attackable",
                    s.label()
                )));
            }
            s.attackable = m;
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    True,
    Noisy,
    Forged,
}

impl Provenance {
    pub fn code(self) -> &'static str {
        match self {
            Provenance::True => "true",
            Provenance::Noisy => "noisy",
            Provenance::Forged => "forged",
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "true" => Ok(Provenance::True),
            "noisy" => Ok(Provenance::Noisy),
            "forged" => Ok(Provenance::Forged),
            _ => Err(format!("unknown provenance `{s}`")),
        }
    }
}

/// Measured values aligned with a [`MeasurementConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
    pub provenance: Vec<Provenance>,
}

impl MeasurementVector {
    pub fn exact(values: Vec<f64>) -> Self {
        let provenance = vec![Provenance::True; values.len()];
        Self { values, provenance }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn location_text_round_trip() {
        for loc in [
            Location::Bus(6),
            Location::Branch(3, End::From),
            Location::Branch(20, End::To),
            Location::Converter(Side::Two),
            Location::BusPower(7, Power::Reactive),
        ] {
            assert_eq!(loc.to_string().parse::<Location>().unwrap(), loc);
        }
        assert!("vsc:3".parse::<Location>().is_err());
        assert!("line:1".parse::<Location>().is_err());
    }

    #[test]
    fn kind_codes_round_trip() {
        for k in MeasurementKind::ALL {
            assert_eq!(k.code().parse::<MeasurementKind>().unwrap(), k);
        }
    }
}
