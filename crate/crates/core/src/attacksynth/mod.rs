//! Targeted false-data injection against a converter's estimated operating
//! point.
//!
//! Given a pre-attack estimate `x_hat`, the attacker looks for a state `x_a`
//! close to `x_hat` whose measurements move the converter's estimated
//! `(P_s, Q_s)` into its margin-shrunk capability region, while changing as
//! few attackable measurements as possible. Candidate free-variable sets are
//! explored best-first by a lower bound on their tamper count; each candidate
//! is a small minimum-distance problem.

mod enumerate;
mod solve;
mod target;

use std::fmt::Write;

use crate::capability::OperatingPoint;
use crate::capability::{chart_params, interior_point, is_safe, operating_point_from_state};
use crate::measmodel::{
    eval_one, keyed_normal, MeasurementConfig, MeasurementVector, NoiseStream, Provenance,
    StateIndex, StateLayout, StateVector,
};
use crate::netcase::{NetworkCase, Side};
use crate::{Error, Result};

pub use enumerate::{target_coupled, Enumerator};
pub use solve::{changed_variables, solve_candidate, tampered_measurements, FEASIBILITY_TOLERANCE};
pub use target::{shrunk_discs, target_point};

pub const DEFAULT_DELTA: f64 = 0.02;
pub const DEFAULT_ENUMERATION_CAP: usize = 4000;

/// How the converter's post-attack operating point is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// Anywhere inside both margin discs shrunk by `delta`, with the chart
    /// following the attacked terminal voltage.
    Region,
    /// Exactly the projection of the current point onto the shrunk region,
    /// with the chart fixed at the estimated terminal voltage.
    Point,
}

/// Constraint on `(P_s, Q_s)` handed to [`solve_candidate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Point(OperatingPoint),
    Region { r1: f64, r2: f64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub side: Side,
    pub r1: f64,
    pub r2: f64,
    pub delta: f64,
    /// Lower state bounds in estimation-vector order.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Overrides the configuration's attackable flags when present.
    pub attackable: Option<Vec<bool>>,
    /// Maximum number of candidates solved before giving up.
    pub enumeration_cap: usize,
    pub target_mode: TargetMode,
}

/// Angles within +-pi/2, AC magnitudes within the bus limits, converter and
/// DC voltages within [0.85, 1.35], |I_dc1| <= 2.
pub fn default_bounds(case: &NetworkCase) -> (Vec<f64>, Vec<f64>) {
    let layout = StateLayout::for_case(case);
    let half_pi = std::f64::consts::FRAC_PI_2;
    layout
        .vars()
        .map(|v| match v {
            StateIndex::Angle(_) | StateIndex::ThetaC(_) => (-half_pi, half_pi),
            StateIndex::Vmag(p) => (case.buses[p].v_min, case.buses[p].v_max),
            StateIndex::Uc(_) | StateIndex::Udc1 => (0.85, 1.35),
            StateIndex::Idc1 => (-2.0, 2.0),
        })
        .unzip()
}

impl AttackSpec {
    /// Converter 1, default bounds and offset.
    pub fn new(case: &NetworkCase, r1: f64, r2: f64) -> Self {
        let (lower, upper) = default_bounds(case);
        Self {
            side: Side::One,
            r1,
            r2,
            delta: DEFAULT_DELTA,
            lower,
            upper,
            attackable: None,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            target_mode: TargetMode::Region,
        }
    }

    pub fn validate(&self, config: &MeasurementConfig) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        for (name, r) in [("r1", self.r1), ("r2", self.r2)] {
            if !(r > 0.0 && r <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {r}"));
            }
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be non-negative, got {}", self.delta));
        }
        let n = config.layout().len();
        if self.lower.len() != n || self.upper.len() != n {
            return bad(format!("state bounds must have {n} entries"));
        }
        if let Some(j) = (0..n).find(|&j| !(self.lower[j] < self.upper[j])) {
            return bad(format!(
                "empty bound interval for {}",
                config.layout().var(j)
            ));
        }
        if let Some(mask) = &self.attackable {
            if mask.len() != config.len() {
                return bad("attackable mask length mismatch".into());
            }
            if let Some(i) = (0..mask.len()).find(|&i| mask[i] && config.spec(i).is_virtual()) {
                return bad(format!(
                    "measurement {i} is virtual and cannot be attackable"
                ));
            }
        }
        if self.enumeration_cap == 0 {
            return bad("enumeration cap must be positive".into());
        }
        Ok(())
    }

    pub fn attackable_mask(&self, config: &MeasurementConfig) -> Vec<bool> {
        match &self.attackable {
            Some(m) => m.clone(),
            None => config.specs().iter().map(|s| s.attackable).collect(),
        }
    }
}

/// A set of state variables the attacker lets move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    /// Free variables, sorted estimation-vector indices.
    pub free: Vec<usize>,
    /// Attackable measurements touching the free set.
    pub related: Vec<usize>,
    /// `related.len()`; the tamper count if every free variable moves.
    pub bound: usize,
}

impl Candidate {
    pub fn fixed(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|j| !self.free.contains(j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackPlan {
    pub x_a: StateVector,
    /// Sorted indices of the measurements to falsify.
    pub tampered: Vec<usize>,
    /// Pre-attack vector with tampered entries replaced by `h_i(x_a)`.
    pub z_a: MeasurementVector,
    pub cost: usize,
    pub l2_distance: f64,
    pub feasible: bool,
    /// Variables that differ between `x_a` and the pre-attack estimate.
    pub changed: Vec<usize>,
    /// Fixed target point, when one was used.
    pub target: Option<OperatingPoint>,
    pub candidates_examined: usize,
    pub truncated: bool,
}

impl AttackPlan {
    pub(crate) fn no_op(x_hat: &StateVector, z_c: &MeasurementVector) -> Self {
        Self {
            x_a: x_hat.clone(),
            tampered: Vec::new(),
            z_a: z_c.clone(),
            cost: 0,
            l2_distance: 0.0,
            feasible: true,
            changed: Vec::new(),
            target: None,
            candidates_examined: 0,
            truncated: false,
        }
    }
}

/// First `limit` candidates in search order, without pruning.
pub fn enumerate_candidates(
    case: &NetworkCase,
    config: &MeasurementConfig,
    spec: &AttackSpec,
    limit: usize,
) -> Result<(Vec<Candidate>, bool)> {
    let seeds = target_coupled(case, spec.side)?;
    let mut en = Enumerator::new(config, spec.attackable_mask(config), seeds, limit);
    let mut out = Vec::new();
    while let Some(c) = en.next(None) {
        out.push(c);
    }
    Ok((out, en.truncated()))
}

/// Cheapest attack moving the estimated operating point of `spec.side` into
/// its margin region; ties on cost go to the smaller state change.
pub fn synthesize(
    case: &NetworkCase,
    config: &MeasurementConfig,
    z_c: &MeasurementVector,
    x_hat: &StateVector,
    spec: &AttackSpec,
) -> Result<AttackPlan> {
    spec.validate(config)?;
    if z_c.len() != config.len() {
        return Err(Error::Config("measurement vector length mismatch".into()));
    }
    let side = spec.side;
    let u_s = x_hat.vmag[case.converter(side).ac_bus - 1];
    let chart = chart_params(case, side, u_s)?;
    let current = operating_point_from_state(case, x_hat, side);
    let [cur, vol] = shrunk_discs(&chart, spec.r1, spec.r2, spec.delta);
    if interior_point(&cur, &vol).is_none() {
        return Err(Error::InfeasibleTarget(format!(
            "margin region is empty for r1 = {}, r2 = {}, delta = {}",
            spec.r1, spec.r2, spec.delta
        )));
    }
    if is_safe(current, &chart, spec.r1, spec.r2) {
        return Ok(AttackPlan::no_op(x_hat, z_c));
    }
    let (target, target_pt) = match spec.target_mode {
        TargetMode::Region => (
            Target::Region {
                r1: spec.r1,
                r2: spec.r2,
                delta: spec.delta,
            },
            None,
        ),
        TargetMode::Point => {
            let p = target_point(&chart, current, spec.r1, spec.r2, spec.delta)?;
            (Target::Point(p), Some(p))
        }
    };

    let attackable = spec.attackable_mask(config);
    let seeds = target_coupled(case, side)?;
    let mut en = Enumerator::new(config, attackable.clone(), seeds, spec.enumeration_cap);
    let mut best: Option<(usize, f64, StateVector, Vec<usize>, Vec<usize>)> = None;
    while let Some(cand) = en.next(best.as_ref().map(|b| b.0)) {
        let Some(x_a) = solve_candidate(case, config, spec, &attackable, x_hat, &cand, &target)
        else {
            continue;
        };
        let changed = changed_variables(config, x_hat, &x_a);
        let tampered = tampered_measurements(config, &attackable, &changed);
        let cost = tampered.len();
        let l2 = l2(config, x_hat, &x_a);
        let better = match &best {
            None => true,
            Some((bc, bl, ..)) => cost < *bc || (cost == *bc && l2 < *bl),
        };
        if better {
            best = Some((cost, l2, x_a, tampered, changed));
        }
    }
    let examined = en.examined();
    let truncated = en.truncated();
    Ok(match best {
        Some((cost, l2_distance, x_a, tampered, changed)) => {
            let z_a = forge_exact(case, config, &x_a, &tampered, z_c);
            AttackPlan {
                x_a,
                tampered,
                z_a,
                cost,
                l2_distance,
                feasible: true,
                changed,
                target: target_pt,
                candidates_examined: examined,
                truncated,
            }
        }
        None => AttackPlan {
            feasible: false,
            target: target_pt,
            candidates_examined: examined,
            truncated,
            ..AttackPlan::no_op(x_hat, z_c)
        },
    })
}

fn l2(config: &MeasurementConfig, a: &StateVector, b: &StateVector) -> f64 {
    let layout = config.layout();
    let (u, v) = (layout.to_vec(a), layout.to_vec(b));
    u.iter()
        .zip(&v)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn forge_exact(
    case: &NetworkCase,
    config: &MeasurementConfig,
    x_a: &StateVector,
    tampered: &[usize],
    z_c: &MeasurementVector,
) -> MeasurementVector {
    let mut z = z_c.clone();
    for &i in tampered {
        z.values[i] = eval_one(case, config.spec(i), x_a);
        z.provenance[i] = Provenance::Forged;
    }
    z
}

/// Attacked measurement vector: tampered entries become `h_i(x_a)` plus,
/// when `noise` is set, a fresh draw from `N(0, sigma_i^2)`; the rest is
/// copied from `z_c`.
pub fn forge_measurements(
    case: &NetworkCase,
    config: &MeasurementConfig,
    plan: &AttackPlan,
    z_c: &MeasurementVector,
    seed: u64,
    noise: bool,
) -> MeasurementVector {
    let mut z = forge_exact(case, config, &plan.x_a, &plan.tampered, z_c);
    if noise {
        for &i in &plan.tampered {
            let spec = config.spec(i);
            z.values[i] += spec.sigma * keyed_normal(seed, NoiseStream::Forgery, spec);
        }
    }
    z
}

/// `index,kind,location,z_before,z_after` for every tampered measurement,
/// then a `#` summary line.
pub fn plan_csv(
    config: &MeasurementConfig,
    plan: &AttackPlan,
    z_c: &MeasurementVector,
    z_a: &MeasurementVector,
    spec: &AttackSpec,
    seed: u64,
) -> String {
    let mut out = String::from("index,kind,location,z_before,z_after\n");
    for &i in &plan.tampered {
        let s = config.spec(i);
        let _ = writeln!(
            out,
            "{i},{},{},{:.16e},{:.16e}",
            s.kind, s.location, z_c.values[i], z_a.values[i]
        );
    }
    let _ = writeln!(
        out,
        "# feasible={},cost={},l2_distance={:.16e},r1={},r2={},delta={},seed={}",
        plan.feasible, plan.cost, plan.l2_distance, spec.r1, spec.r2, spec.delta, seed
    );
    out
}
