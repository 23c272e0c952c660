//! Plain-text case format and its JSON mirror.
//!
//! ```text
//! # comments start with '#'
//! [case]
//! name = ieee14-vsc
//! base_mva = 100
//! base_kv = 345
//! reference_bus = 1
//!
//! [buses]
//! # id  nonzero_injection(0|1)  v_min  v_max  [g_sh  b_sh]
//! 1 1 0.85 1.35
//!
//! [branches]
//! # from  to  g  b  b_sh  [tap]
//! 1 2 4.999 -15.263 0.0528
//!
//! [vsc]
//! side1.bus = 6
//! side1.y_t = 0.119 -8.919        # re im
//! side1.y_c = 0.0037 -6.087
//! side1.loss = a b c_rect c_inv
//! side1.i_max = 1.2
//! side1.u_max = 1.1
//! side2.* ...
//! r_dc = 0.052
//!
//! [state]                          # optional
//! angle_unit = deg                 # deg (default) or rad
//! bus 1 1.060 0.0                  # id vmag angle
//! theta_c1 = -34.993
//! u_c1 = 1.301                     # likewise theta_c2, u_c2, u_dc1, i_dc1
//! ```
//!
//! A document whose first non-blank character is `{` is read as the JSON mirror
//! (see [`CaseDoc`]).

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    Base, BranchSpec, BusSpec, ConverterSpec, LossCoefficients, NetworkCase, OperatingState, Side,
    VscLinkSpec,
};
use crate::measmodel::StateVector;
use crate::{Error, Result};

/// Parses and validates a case, ignoring any `[state]` section.
pub fn parse_case(text: &str) -> Result<NetworkCase> {
    parse_case_with_state(text).map(|(case, _)| case)
}

/// Parses and validates a case together with its optional ground-truth state.
pub fn parse_case_with_state(text: &str) -> Result<(NetworkCase, Option<OperatingState>)> {
    let doc = if text.trim_start().starts_with('{') {
        serde_json::from_str::<CaseDoc>(text)
            .map_err(|e| Error::parse(e.line(), format!("JSON case: {e}")))?
    } else {
        parse_text(text)?
    };
    doc.into_case()
}

/// JSON mirror of [`write_case`], accepted by [`parse_case`].
pub fn write_case_json(case: &NetworkCase, state: Option<&StateVector>) -> String {
    serde_json::to_string_pretty(&CaseDoc::from_case(case, state))
        .expect("case document serializes")
}

/// Serializes a case (and optionally a state) in the text format. Angles in
/// the state section are written in radians so values round-trip bit-exactly.
pub fn write_case(case: &NetworkCase, state: Option<&StateVector>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[case]");
    let _ = writeln!(out, "name = {}", case.name);
    let _ = writeln!(out, "base_mva = {}", case.base.mva);
    let _ = writeln!(out, "base_kv = {}", case.base.kv);
    let _ = writeln!(out, "reference_bus = {}", case.reference_bus);
    let _ = writeln!(out, "\n[buses]");
    for b in &case.buses {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            b.id,
            u8::from(b.has_nonzero_injection),
            b.v_min,
            b.v_max,
            b.shunt.re,
            b.shunt.im
        );
    }
    let _ = writeln!(out, "\n[branches]");
    for br in &case.branches {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            br.from_bus, br.to_bus, br.admittance.re, br.admittance.im, br.b_sh, br.tap
        );
    }
    let _ = writeln!(out, "\n[vsc]");
    for side in Side::BOTH {
        let c = case.converter(side);
        let n = side.number();
        let _ = writeln!(out, "side{n}.bus = {}", c.ac_bus);
        let _ = writeln!(out, "side{n}.y_t = {} {}", c.y_t.re, c.y_t.im);
        let _ = writeln!(out, "side{n}.y_c = {} {}", c.y_c.re, c.y_c.im);
        let l = c.loss;
        let _ = writeln!(
            out,
            "side{n}.loss = {} {} {} {}",
            l.a, l.b, l.c_rect, l.c_inv
        );
        let _ = writeln!(out, "side{n}.i_max = {}", c.i_c_max);
        let _ = writeln!(out, "side{n}.u_max = {}", c.u_c_max);
    }
    let _ = writeln!(out, "r_dc = {}", case.vsc.r_dc);
    if let Some(x) = state {
        let _ = writeln!(out, "\n[state]");
        let _ = writeln!(out, "angle_unit = rad");
        for (pos, (v, a)) in x.vmag.iter().zip(&x.angle).enumerate() {
            let _ = writeln!(out, "bus {} {} {}", pos + 1, v, a);
        }
        let _ = writeln!(out, "theta_c1 = {}", x.theta_c[0]);
        let _ = writeln!(out, "theta_c2 = {}", x.theta_c[1]);
        let _ = writeln!(out, "u_c1 = {}", x.u_c[0]);
        let _ = writeln!(out, "u_c2 = {}", x.u_c[1]);
        let _ = writeln!(out, "u_dc1 = {}", x.u_dc1);
        let _ = writeln!(out, "i_dc1 = {}", x.i_dc1);
    }
    out
}

/// Serde mirror of the text format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseDoc {
    #[serde(default)]
    pub name: String,
    pub base_mva: f64,
    pub base_kv: f64,
    pub reference_bus: usize,
    pub buses: Vec<BusDoc>,
    pub branches: Vec<BranchDoc>,
    pub vsc: Option<VscDoc>,
    #[serde(default)]
    pub state: Option<StateDoc>,
    /// Source line of each bus/branch record, for error context.
    #[serde(skip)]
    lines: Lines,
}

#[derive(Debug, Clone, Default)]
struct Lines {
    buses: Vec<usize>,
    branches: Vec<usize>,
    vsc: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusDoc {
    pub id: usize,
    pub nonzero_injection: bool,
    pub v_min: f64,
    pub v_max: f64,
    #[serde(default)]
    pub g_sh: f64,
    #[serde(default)]
    pub b_sh: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchDoc {
    pub from: usize,
    pub to: usize,
    pub g: f64,
    pub b: f64,
    #[serde(default)]
    pub b_sh: f64,
    #[serde(default = "unit_tap")]
    pub tap: f64,
}

fn unit_tap() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConverterDoc {
    pub bus: usize,
    pub y_t: [f64; 2],
    pub y_c: [f64; 2],
    /// `[a, b, c_rect, c_inv]`
    pub loss: [f64; 4],
    pub i_max: f64,
    pub u_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VscDoc {
    pub sides: [ConverterDoc; 2],
    pub r_dc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[default]
    Deg,
    Rad,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusStateDoc {
    pub id: usize,
    pub vmag: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDoc {
    #[serde(default)]
    pub angle_unit: AngleUnit,
    pub buses: Vec<BusStateDoc>,
    pub theta_c: [f64; 2],
    pub u_c: [f64; 2],
    pub u_dc1: f64,
    pub i_dc1: f64,
}

impl CaseDoc {
    fn into_case(self) -> Result<(NetworkCase, Option<OperatingState>)> {
        let line_of = |v: &Vec<usize>, k: usize| v.get(k).copied().unwrap_or(0);

        let mut ids = HashSet::new();
        for (k, b) in self.buses.iter().enumerate() {
            if !ids.insert(b.id) {
                return Err(Error::parse(
                    line_of(&self.lines.buses, k),
                    format!("duplicate bus id {}", b.id),
                ));
            }
        }
        for (k, br) in self.branches.iter().enumerate() {
            for end in [br.from, br.to] {
                if !ids.contains(&end) {
                    return Err(Error::parse(
                        line_of(&self.lines.branches, k),
                        format!(
                            "branch {} ({} -> {}): endpoint bus {end} is not defined",
                            k + 1,
                            br.from,
                            br.to
                        ),
                    ));
                }
            }
        }
        let vsc = self
            .vsc
            .ok_or_else(|| Error::parse(0, "missing [vsc] block"))?;
        for (k, side) in vsc.sides.iter().enumerate() {
            if !ids.contains(&side.bus) {
                return Err(Error::parse(
                    self.lines.vsc,
                    format!("converter {}: AC bus {} is not defined", k + 1, side.bus),
                ));
            }
        }

        let mut buses: Vec<BusSpec> = self
            .buses
            .iter()
            .map(|b| BusSpec {
                id: b.id,
                has_nonzero_injection: b.nonzero_injection,
                v_min: b.v_min,
                v_max: b.v_max,
                shunt: Complex64::new(b.g_sh, b.b_sh),
            })
            .collect();
        buses.sort_by_key(|b| b.id);

        let conv = |d: &ConverterDoc| ConverterSpec {
            ac_bus: d.bus,
            y_t: Complex64::new(d.y_t[0], d.y_t[1]),
            y_c: Complex64::new(d.y_c[0], d.y_c[1]),
            loss: LossCoefficients {
                a: d.loss[0],
                b: d.loss[1],
                c_rect: d.loss[2],
                c_inv: d.loss[3],
            },
            i_c_max: d.i_max,
            u_c_max: d.u_max,
        };
        let case = NetworkCase {
            name: self.name,
            buses,
            branches: self
                .branches
                .iter()
                .map(|b| BranchSpec {
                    from_bus: b.from,
                    to_bus: b.to,
                    admittance: Complex64::new(b.g, b.b),
                    b_sh: b.b_sh,
                    tap: b.tap,
                })
                .collect(),
            vsc: VscLinkSpec {
                converters: [conv(&vsc.sides[0]), conv(&vsc.sides[1])],
                r_dc: vsc.r_dc,
            },
            reference_bus: self.reference_bus,
            base: Base {
                mva: self.base_mva,
                kv: self.base_kv,
            },
        };
        case.validate()?;

        let state = match self.state {
            None => None,
            Some(s) => Some(state_from_doc(&case, s)?),
        };
        Ok((case, state))
    }

    /// Mirror document of a case, for JSON export.
    pub fn from_case(case: &NetworkCase, state: Option<&StateVector>) -> Self {
        let conv = |c: &ConverterSpec| ConverterDoc {
            bus: c.ac_bus,
            y_t: [c.y_t.re, c.y_t.im],
            y_c: [c.y_c.re, c.y_c.im],
            loss: [c.loss.a, c.loss.b, c.loss.c_rect, c.loss.c_inv],
            i_max: c.i_c_max,
            u_max: c.u_c_max,
        };
        CaseDoc {
            name: case.name.clone(),
            base_mva: case.base.mva,
            base_kv: case.base.kv,
            reference_bus: case.reference_bus,
            buses: case
                .buses
                .iter()
                .map(|b| BusDoc {
                    id: b.id,
                    nonzero_injection: b.has_nonzero_injection,
                    v_min: b.v_min,
                    v_max: b.v_max,
                    g_sh: b.shunt.re,
                    b_sh: b.shunt.im,
                })
                .collect(),
            branches: case
                .branches
                .iter()
                .map(|b| BranchDoc {
                    from: b.from_bus,
                    to: b.to_bus,
                    g: b.admittance.re,
                    b: b.admittance.im,
                    b_sh: b.b_sh,
                    tap: b.tap,
                })
                .collect(),
            vsc: Some(VscDoc {
                sides: [
                    conv(case.converter(Side::One)),
                    conv(case.converter(Side::Two)),
                ],
                r_dc: case.vsc.r_dc,
            }),
            state: state.map(|x| StateDoc {
                angle_unit: AngleUnit::Rad,
                buses: x
                    .vmag
                    .iter()
                    .zip(&x.angle)
                    .enumerate()
                    .map(|(p, (&vmag, &angle))| BusStateDoc {
                        id: p + 1,
                        vmag,
                        angle,
                    })
                    .collect(),
                theta_c: x.theta_c,
                u_c: x.u_c,
                u_dc1: x.u_dc1,
                i_dc1: x.i_dc1,
            }),
            lines: Lines::default(),
        }
    }
}

fn state_from_doc(case: &NetworkCase, doc: StateDoc) -> Result<OperatingState> {
    let to_rad = |a: f64| match doc.angle_unit {
        AngleUnit::Deg => a.to_radians(),
        AngleUnit::Rad => a,
    };
    let n = case.n_bus();
    let mut x = StateVector::flat(n);
    let mut seen = vec![false; n];
    for b in &doc.buses {
        let pos = case
            .bus_pos(b.id)
            .ok_or_else(|| Error::Validation(format!("state: unknown bus {}", b.id)))?;
        x.vmag[pos] = b.vmag;
        x.angle[pos] = to_rad(b.angle);
        seen[pos] = true;
    }
    if let Some(pos) = seen.iter().position(|s| !s) {
        return Err(Error::Validation(format!("state: bus {} missing", pos + 1)));
    }
    if x.angle[case.reference_pos()] != 0.0 {
        return Err(Error::Validation(
            "state: reference bus angle must be exactly zero".into(),
        ));
    }
    x.theta_c = doc.theta_c.map(to_rad);
    x.u_c = doc.u_c;
    x.u_dc1 = doc.u_dc1;
    x.i_dc1 = doc.i_dc1;
    if !x.is_valid(&crate::measmodel::StateLayout::for_case(case)) {
        return Err(Error::Validation(
            "state: entries must be finite with positive magnitudes".into(),
        ));
    }
    Ok(OperatingState { state: x })
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Case,
    Buses,
    Branches,
    Vsc,
    State,
}

fn parse_text(text: &str) -> Result<CaseDoc> {
    let mut section = Section::None;
    let mut header: HashMap<String, (usize, String)> = HashMap::new();
    let mut vsc: HashMap<String, (usize, String)> = HashMap::new();
    let mut state_kv: HashMap<String, (usize, String)> = HashMap::new();
    let mut state_buses = Vec::new();
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    let mut lines = Lines::default();
    let mut saw_vsc = false;
    let mut saw_state = false;

    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[case]" => Section::Case,
                "[buses]" => Section::Buses,
                "[branches]" => Section::Branches,
                "[vsc]" => {
                    saw_vsc = true;
                    lines.vsc = lineno;
                    Section::Vsc
                }
                "[state]" => {
                    saw_state = true;
                    Section::State
                }
                other => return Err(Error::parse(lineno, format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::None => {
                return Err(Error::parse(lineno, "record outside of any section"));
            }
            Section::Case => {
                let (key, val) = key_value(lineno, line)?;
                header.insert(key, (lineno, val));
            }
            Section::Vsc => {
                let (key, val) = key_value(lineno, line)?;
                vsc.insert(key, (lineno, val));
            }
            Section::Buses => {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 4 && f.len() != 6 {
                    return Err(Error::parse(
                        lineno,
                        format!("bus record needs 4 or 6 fields, found {}", f.len()),
                    ));
                }
                let nz = num::<u8>(lineno, "nonzero_injection", f[1])?;
                if nz > 1 {
                    return Err(Error::parse(lineno, "nonzero_injection must be 0 or 1"));
                }
                buses.push(BusDoc {
                    id: num(lineno, "id", f[0])?,
                    nonzero_injection: nz == 1,
                    v_min: num(lineno, "v_min", f[2])?,
                    v_max: num(lineno, "v_max", f[3])?,
                    g_sh: if f.len() == 6 {
                        num(lineno, "g_sh", f[4])?
                    } else {
                        0.0
                    },
                    b_sh: if f.len() == 6 {
                        num(lineno, "b_sh", f[5])?
                    } else {
                        0.0
                    },
                });
                lines.buses.push(lineno);
            }
            Section::Branches => {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 5 && f.len() != 6 {
                    return Err(Error::parse(
                        lineno,
                        format!("branch record needs 5 or 6 fields, found {}", f.len()),
                    ));
                }
                branches.push(BranchDoc {
                    from: num(lineno, "from", f[0])?,
                    to: num(lineno, "to", f[1])?,
                    g: num(lineno, "g", f[2])?,
                    b: num(lineno, "b", f[3])?,
                    b_sh: num(lineno, "b_sh", f[4])?,
                    tap: if f.len() == 6 {
                        num(lineno, "tap", f[5])?
                    } else {
                        1.0
                    },
                });
                lines.branches.push(lineno);
            }
            Section::State => {
                if let Some(rest) = line.strip_prefix("bus ") {
                    let f: Vec<&str> = rest.split_whitespace().collect();
                    if f.len() != 3 {
                        return Err(Error::parse(
                            lineno,
                            "state bus record: bus <id> <vmag> <angle>",
                        ));
                    }
                    state_buses.push(BusStateDoc {
                        id: num(lineno, "id", f[0])?,
                        vmag: num(lineno, "vmag", f[1])?,
                        angle: num(lineno, "angle", f[2])?,
                    });
                } else {
                    let (key, val) = key_value(lineno, line)?;
                    state_kv.insert(key, (lineno, val));
                }
            }
        }
    }

    let vsc = if saw_vsc {
        Some(VscDoc {
            sides: [
                converter_doc(&vsc, 1, lines.vsc)?,
                converter_doc(&vsc, 2, lines.vsc)?,
            ],
            r_dc: scalar(&vsc, "r_dc", lines.vsc)?,
        })
    } else {
        None
    };

    let state = if saw_state {
        let angle_unit = match state_kv.get("angle_unit").map(|(l, v)| (*l, v.as_str())) {
            None | Some((_, "deg")) => AngleUnit::Deg,
            Some((_, "rad")) => AngleUnit::Rad,
            Some((l, other)) => {
                return Err(Error::parse(
                    l,
                    format!("angle_unit: expected deg or rad, got {other}"),
                ))
            }
        };
        Some(StateDoc {
            angle_unit,
            buses: state_buses,
            theta_c: [
                scalar(&state_kv, "theta_c1", 0)?,
                scalar(&state_kv, "theta_c2", 0)?,
            ],
            u_c: [scalar(&state_kv, "u_c1", 0)?, scalar(&state_kv, "u_c2", 0)?],
            u_dc1: scalar(&state_kv, "u_dc1", 0)?,
            i_dc1: scalar(&state_kv, "i_dc1", 0)?,
        })
    } else {
        None
    };

    Ok(CaseDoc {
        name: header
            .get("name")
            .map(|(_, v)| v.clone())
            .unwrap_or_default(),
        base_mva: scalar(&header, "base_mva", 0)?,
        base_kv: scalar(&header, "base_kv", 0)?,
        reference_bus: scalar_as(&header, "reference_bus", 0)?,
        buses,
        branches,
        vsc,
        state,
        lines,
    })
}

fn key_value(lineno: usize, line: &str) -> Result<(String, String)> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::parse(lineno, format!("expected key = value, got `{line}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn num<T: std::str::FromStr>(lineno: usize, field: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| {
        Error::parse(
            lineno,
            format!("field `{field}`: `{s}` is not a valid number"),
        )
    })
}

fn scalar(map: &HashMap<String, (usize, String)>, key: &str, section_line: usize) -> Result<f64> {
    scalar_as(map, key, section_line)
}

fn scalar_as<T: std::str::FromStr>(
    map: &HashMap<String, (usize, String)>,
    key: &str,
    section_line: usize,
) -> Result<T> {
    let (l, v) = map
        .get(key)
        .ok_or_else(|| Error::parse(section_line, format!("missing key `{key}`")))?;
    num(*l, key, v)
}

fn numbers<const N: usize>(
    map: &HashMap<String, (usize, String)>,
    key: &str,
    section_line: usize,
) -> Result<[f64; N]> {
    let (l, v) = map
        .get(key)
        .ok_or_else(|| Error::parse(section_line, format!("missing key `{key}`")))?;
    let parts: Vec<&str> = v.split_whitespace().collect();
    if parts.len() != N {
        return Err(Error::parse(
            *l,
            format!("`{key}` needs {N} values, found {}", parts.len()),
        ));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = num(*l, key, p)?;
    }
    Ok(out)
}

fn converter_doc(
    map: &HashMap<String, (usize, String)>,
    n: u8,
    section_line: usize,
) -> Result<ConverterDoc> {
    let key = |k: &str| format!("side{n}.{k}");
    Ok(ConverterDoc {
        bus: scalar_as(map, &key("bus"), section_line)?,
        y_t: numbers(map, &key("y_t"), section_line)?,
        y_c: numbers(map, &key("y_c"), section_line)?,
        loss: numbers(map, &key("loss"), section_line)?,
        i_max: scalar(map, &key("i_max"), section_line)?,
        u_max: scalar(map, &key("u_max"), section_line)?,
    })
}
