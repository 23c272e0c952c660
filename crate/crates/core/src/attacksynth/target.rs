use crate::capability::{interior_point, Circle, OperatingPoint, PQChart};
use crate::{Error, Result};

/// Both chart discs scaled by the margins and pulled in by `delta`.
pub fn shrunk_discs(chart: &PQChart, r1: f64, r2: f64, delta: f64) -> [Circle; 2] {
    let mut cur = chart.current_circle.scaled(r1);
    let mut vol = chart.voltage_circle.scaled(r2);
    cur.radius -= delta;
    vol.radius -= delta;
    [cur, vol]
}

fn radial(c: &Circle, pt: OperatingPoint) -> OperatingPoint {
    let (dp, dq) = (pt.p - c.center.0, pt.q - c.center.1);
    let d = dp.hypot(dq);
    if d <= c.radius {
        return pt;
    }
    OperatingPoint::new(
        c.center.0 + dp * c.radius / d,
        c.center.1 + dq * c.radius / d,
    )
}

fn circle_intersections(a: &Circle, b: &Circle) -> Vec<OperatingPoint> {
    let (dx, dy) = (b.center.0 - a.center.0, b.center.1 - a.center.1);
    let d = dx.hypot(dy);
    if d == 0.0 || d > a.radius + b.radius || d < (a.radius - b.radius).abs() {
        return Vec::new();
    }
    let l = (a.radius * a.radius - b.radius * b.radius + d * d) / (2.0 * d);
    let h = (a.radius * a.radius - l * l).max(0.0).sqrt();
    let (ux, uy) = (dx / d, dy / d);
    let (mx, my) = (a.center.0 + l * ux, a.center.1 + l * uy);
    vec![
        OperatingPoint::new(mx - h * uy, my + h * ux),
        OperatingPoint::new(mx + h * uy, my - h * ux),
    ]
}

/// Point of the margin region nearest `current`, kept `delta` inside both
/// boundaries. Points already inside are returned unchanged.
pub fn target_point(
    chart: &PQChart,
    current: OperatingPoint,
    r1: f64,
    r2: f64,
    delta: f64,
) -> Result<OperatingPoint> {
    let [cur, vol] = shrunk_discs(chart, r1, r2, delta);
    if interior_point(&cur, &vol).is_none() {
        return Err(Error::InfeasibleTarget(format!(
            "margin region is empty for r1 = {r1}, r2 = {r2}, delta = {delta}"
        )));
    }
    if cur.contains(current) && vol.contains(current) {
        return Ok(current);
    }
    // The region is convex: its projection is the nearest admissible point
    // among the single-circle projections and the two corner points.
    let mut cands = vec![radial(&cur, current), radial(&vol, current)];
    cands.extend(circle_intersections(&cur, &vol));
    cands
        .into_iter()
        .filter(|p| cur.contains(*p) && vol.contains(*p))
        .min_by(|a, b| a.distance(&current).total_cmp(&b.distance(&current)))
        .ok_or_else(|| Error::InfeasibleTarget("projection onto margin region failed".into()))
}
