//! Converter P-Q capability chart: the current-limit and voltage-limit discs
//! in the plane of the converter's AC-terminal injection `(P_s, Q_s)`.

use std::fmt::Write;

use crate::measmodel::{eval_one, Location, MeasurementKind, MeasurementSpec, StateVector};
use crate::netcase::{NetworkCase, Side};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub p: f64,
    pub q: f64,
}

impl OperatingPoint {
    pub fn new(p: f64, q: f64) -> Self {
        Self { p, q }
    }

    pub fn distance(&self, other: &OperatingPoint) -> f64 {
        (self.p - other.p).hypot(self.q - other.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: (f64, f64),
    pub radius: f64,
}

impl Circle {
    /// Closed-disc membership, with a relative slack of 1e-12 on `radius^2`
    /// so that computed boundary points count as inside.
    pub fn contains(&self, pt: OperatingPoint) -> bool {
        let (dp, dq) = (pt.p - self.center.0, pt.q - self.center.1);
        let r2 = self.radius * self.radius;
        dp * dp + dq * dq <= r2 * (1.0 + 1e-12)
    }

    pub fn scaled(&self, r: f64) -> Circle {
        Circle {
            center: self.center,
            radius: r * self.radius,
        }
    }

    pub fn point_at(&self, phi: f64) -> (f64, f64) {
        (
            self.center.0 + self.radius * phi.cos(),
            self.center.1 + self.radius * phi.sin(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PQChart {
    /// AC-terminal voltage magnitude the chart was built for.
    pub u_s: f64,
    pub current_circle: Circle,
    pub voltage_circle: Circle,
}

/// Chart of the converter on `side` at terminal voltage `u_s`.
///
/// The current disc bounds `|S_s| = U_s I_c`; the voltage disc bounds
/// `|U_c| |y_tc| U_s`, centered at `U_s^2 (-g_tc, b_tc)`.
pub fn chart_params(case: &NetworkCase, side: Side, u_s: f64) -> Result<PQChart> {
    if !(u_s > 0.0 && u_s.is_finite()) {
        return Err(Error::Validation(format!(
            "terminal voltage must be positive, got {u_s}"
        )));
    }
    let conv = case.converter(side);
    let y = case.y_tc(side);
    Ok(PQChart {
        u_s,
        current_circle: Circle {
            center: (0.0, 0.0),
            radius: u_s * conv.i_c_max,
        },
        voltage_circle: Circle {
            center: (-u_s * u_s * y.re, u_s * u_s * y.im),
            radius: u_s * conv.u_c_max * y.norm(),
        },
    })
}

/// Inside both margin-scaled discs (boundaries included).
pub fn is_safe(pt: OperatingPoint, chart: &PQChart, r1: f64, r2: f64) -> bool {
    chart.current_circle.scaled(r1).contains(pt) && chart.voltage_circle.scaled(r2).contains(pt)
}

/// `(P_s, Q_s)` of the converter on `side`, evaluated exactly as the
/// corresponding measurement functions.
pub fn operating_point_from_state(
    case: &NetworkCase,
    x: &StateVector,
    side: Side,
) -> OperatingPoint {
    let loc = Location::Converter(side);
    let p = eval_one(
        case,
        &MeasurementSpec::real(MeasurementKind::Ps, loc, 1.0),
        x,
    );
    let q = eval_one(
        case,
        &MeasurementSpec::real(MeasurementKind::Qs, loc, 1.0),
        x,
    );
    OperatingPoint { p, q }
}

/// Boundary polylines of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPolylines {
    pub current: Vec<(f64, f64)>,
    pub voltage: Vec<(f64, f64)>,
    /// Boundary of the intersection of both discs; empty when they do not overlap.
    pub region: Vec<(f64, f64)>,
    pub region_empty: bool,
}

/// A point strictly inside both discs, if they overlap with positive area.
pub(crate) fn interior_point(a: &Circle, b: &Circle) -> Option<(f64, f64)> {
    if a.radius <= 0.0 || b.radius <= 0.0 {
        return None;
    }
    let (dx, dy) = (b.center.0 - a.center.0, b.center.1 - a.center.1);
    let d = dx.hypot(dy);
    if d + b.radius <= a.radius {
        return Some(b.center);
    }
    if d + a.radius <= b.radius {
        return Some(a.center);
    }
    if d >= a.radius + b.radius {
        return None;
    }
    // Midpoint of the overlap of the two discs along the line of centers.
    let t = 0.5 * ((d - b.radius) + a.radius) / d;
    Some((a.center.0 + t * dx, a.center.1 + t * dy))
}

/// Distance from interior point `o` along unit direction `u` to the circle.
fn exit_distance(c: &Circle, o: (f64, f64), u: (f64, f64)) -> f64 {
    let w = (o.0 - c.center.0, o.1 - c.center.1);
    let b = u.0 * w.0 + u.1 * w.1;
    let k = w.0 * w.0 + w.1 * w.1 - c.radius * c.radius;
    -b + (b * b - k).max(0.0).sqrt()
}

pub fn sample_chart(
    chart: &PQChart,
    r1: f64,
    r2: f64,
    resolution: usize,
) -> Result<ChartPolylines> {
    if resolution < 16 {
        return Err(Error::Validation(format!(
            "resolution must be at least 16, got {resolution}"
        )));
    }
    let cur = chart.current_circle.scaled(r1);
    let vol = chart.voltage_circle.scaled(r2);
    let angles = (0..resolution).map(|k| std::f64::consts::TAU * k as f64 / resolution as f64);
    let current = angles.clone().map(|a| cur.point_at(a)).collect();
    let voltage = angles.clone().map(|a| vol.point_at(a)).collect();
    let (region, region_empty) = match interior_point(&cur, &vol) {
        Some(o) => {
            let pts = angles
                .map(|a| {
                    let u = (a.cos(), a.sin());
                    let t = exit_distance(&cur, o, u).min(exit_distance(&vol, o, u));
                    (o.0 + t * u.0, o.1 + t * u.1)
                })
                .collect();
            (pts, false)
        }
        None => (Vec::new(), true),
    };
    Ok(ChartPolylines {
        current,
        voltage,
        region,
        region_empty,
    })
}

/// `series_id,P,Q` rows: the three polylines followed by labelled points.
pub fn chart_csv(lines: &ChartPolylines, points: &[(&str, OperatingPoint)]) -> String {
    let mut out = String::from("series_id,P,Q\n");
    for (name, series) in [
        ("current_limit", &lines.current),
        ("voltage_limit", &lines.voltage),
        ("safe_region", &lines.region),
    ] {
        for (p, q) in series {
            let _ = writeln!(out, "{name},{p:.12e},{q:.12e}");
        }
    }
    for (name, pt) in points {
        let _ = writeln!(out, "{name},{:.12e},{:.12e}", pt.p, pt.q);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::bundled_ieee14_case;

    fn chart(u_s: f64) -> PQChart {
        let (case, _) = bundled_ieee14_case();
        chart_params(&case, Side::One, u_s).unwrap()
    }

    #[test]
    fn current_radius_at_unit_voltage() {
        assert!((chart(1.0).current_circle.radius - 1.2).abs() < 1e-15);
    }

    #[test]
    fn voltage_circle_from_series_admittance() {
        let (case, _) = bundled_ieee14_case();
        let c = chart(1.07);
        let y = case.y_tc(Side::One);
        // Center and radius in terms of the converter admittance components.
        let g = 0.02088642511951087;
        let b = -3.618024487829013;
        assert!((y.re - g).abs() < 1e-12 && (y.im - b).abs() < 1e-12);
        assert!((c.voltage_circle.center.0 + 1.07f64.powi(2) * g).abs() < 1e-12);
        assert!((c.voltage_circle.center.1 - 1.07f64.powi(2) * b).abs() < 1e-12);
        assert!((c.voltage_circle.radius - 1.07 * 1.1 * g.hypot(b)).abs() < 1e-12);
    }

    #[test]
    fn origin_is_safe_and_far_point_is_not() {
        let c = chart(1.0);
        assert!(is_safe(OperatingPoint::new(0.0, 0.0), &c, 1.0, 1.0));
        assert!(!is_safe(OperatingPoint::new(10.0, 0.0), &c, 1.0, 1.0));
        let on = OperatingPoint::new(0.0, -1.2);
        assert!(is_safe(on, &c, 1.0, 1.0));
    }

    #[test]
    fn flat_state_sits_at_origin() {
        let (case, _) = bundled_ieee14_case();
        let pt = operating_point_from_state(&case, &StateVector::flat(14), Side::One);
        assert_eq!(pt, OperatingPoint::new(0.0, 0.0));
    }

    #[test]
    fn truth_state_violates_chart() {
        let (case, op) = bundled_ieee14_case();
        let pt = operating_point_from_state(&case, &op.state, Side::One);
        let c = chart_params(&case, Side::One, op.state.vmag[5]).unwrap();
        assert!(!is_safe(pt, &c, 1.0, 1.0));
    }

    #[test]
    fn sampled_region_points_are_safe() {
        let c = chart(1.07);
        let lines = sample_chart(&c, 1.0, 1.0, 360).unwrap();
        assert_eq!(lines.current.len(), 360);
        assert!(!lines.region_empty);
        for &(p, q) in &lines.region {
            assert!(is_safe(OperatingPoint::new(p, q), &c, 1.0, 1.0));
        }
        assert!(sample_chart(&c, 1.0, 1.0, 8).is_err());
    }
}
