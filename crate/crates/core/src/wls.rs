//! Weighted-least-squares state estimation and largest-normalized-residual
//! bad-data processing.
//!
//! Equality constraints ride along as virtual measurements with a tiny
//! sigma. Each Gauss-Newton step solves the weighted linearized problem
//! through a QR factorization of `W^(1/2) H`, which also yields the residual
//! covariance diagonal `Omega_ii = sigma_i^2 (1 - |Q_i|^2)`.

use std::fmt::Write;

use nalgebra::{DMatrix, DVector};

use crate::measmodel::{
    check_observable, eval_h, eval_jacobian, MeasurementConfig, MeasurementVector, StateVector,
};
use crate::netcase::NetworkCase;
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 50;
pub const STEP_TOLERANCE: f64 = 1e-8;
pub const MAX_HALVINGS: usize = 10;
/// Residual variances below this mark a measurement as critical.
pub const CRITICAL_OMEGA: f64 = 1e-12;
pub const DEFAULT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub x_hat: StateVector,
    /// `z - h(x_hat)` for every measurement, removed ones included.
    pub residual: Vec<f64>,
    /// Zero for removed and critical measurements.
    pub normalized_residual: Vec<f64>,
    /// Measurements whose residual variance vanishes (no redundancy).
    pub critical: Vec<bool>,
    /// Weighted SSE over the measurements in use.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Measurements excluded from this estimate, in removal order.
    pub removed: Vec<usize>,
}

impl EstimationResult {
    pub fn max_normalized_residual(&self) -> f64 {
        self.normalized_residual.iter().fold(0.0, |m, &v| m.max(v))
    }

    /// Index of the largest normalized residual among telemetry still in
    /// use; ties go to the lowest index.
    pub fn argmax_normalized_residual(&self, config: &MeasurementConfig) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &v) in self.normalized_residual.iter().enumerate() {
            if config.spec(i).is_virtual() || self.removed.contains(&i) {
                continue;
            }
            if best.is_none_or(|b| v > self.normalized_residual[b]) {
                best = Some(i);
            }
        }
        best
    }
}

fn weighted_objective(config: &MeasurementConfig, z: &[f64], h: &[f64], active: &[bool]) -> f64 {
    config
        .specs()
        .iter()
        .enumerate()
        .filter(|(i, _)| active[*i])
        .map(|(i, s)| ((z[i] - h[i]) / s.sigma).powi(2))
        .sum()
}

/// Gauss-Newton WLS over all measurements.
pub fn estimate(
    case: &NetworkCase,
    config: &MeasurementConfig,
    z: &MeasurementVector,
    x0: &StateVector,
) -> Result<EstimationResult> {
    estimate_masked(case, config, z, x0, &[])
}

/// Gauss-Newton WLS with the listed measurements left out.
pub fn estimate_masked(
    case: &NetworkCase,
    config: &MeasurementConfig,
    z: &MeasurementVector,
    x0: &StateVector,
    removed: &[usize],
) -> Result<EstimationResult> {
    let m = config.len();
    if z.len() != m {
        return Err(Error::Config(format!(
            "measurement vector has {} entries, configuration has {m}",
            z.len()
        )));
    }
    let layout = *config.layout();
    if !x0.is_valid(&layout) {
        return Err(Error::Config("initial state is not valid".into()));
    }
    let mut active = vec![true; m];
    for &i in removed {
        active[i] = false;
    }
    check_observable(case, config, x0, &active)?;
    let rows: Vec<usize> = (0..m).filter(|&i| active[i]).collect();
    let inv_sigma: Vec<f64> = rows.iter().map(|&i| 1.0 / config.spec(i).sigma).collect();
    let zv = &z.values;

    let mut x = layout.to_vec(x0);
    let mut h = eval_h(case, config, x0);
    let mut obj = weighted_objective(config, zv, &h, &active);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let xs = layout.from_vec(&x);
        let jac = eval_jacobian(case, config, &xs);
        let (a, b) = weighted_system(&jac.dense_rows(&rows), &rows, &inv_sigma, zv, &h);
        let dx = solve_least_squares(a, b)?;
        let step_max = dx.amax();
        if step_max < STEP_TOLERANCE {
            for (xi, d) in x.iter_mut().zip(dx.iter()) {
                *xi += d;
            }
            h = eval_h(case, config, &layout.from_vec(&x));
            obj = weighted_objective(config, zv, &h, &active);
            converged = true;
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x
                .iter()
                .zip(dx.iter())
                .map(|(xi, d)| xi + alpha * d)
                .collect();
            let ts = layout.from_vec(&trial);
            if ts.is_valid(&layout) {
                let th = eval_h(case, config, &ts);
                let tobj = weighted_objective(config, zv, &th, &active);
                if tobj <= obj {
                    x = trial;
                    h = th;
                    obj = tobj;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No descent along the Gauss-Newton direction: numerically stationary.
            converged = step_max < 1e-6;
            break;
        }
    }

    let x_hat = layout.from_vec(&x);
    let residual: Vec<f64> = zv.iter().zip(&h).map(|(zi, hi)| zi - hi).collect();
    let jac = eval_jacobian(case, config, &x_hat);
    let (a, _) = weighted_system(&jac.dense_rows(&rows), &rows, &inv_sigma, zv, &h);
    let leverage = leverages(a);
    let mut normalized_residual = vec![0.0; m];
    let mut critical = vec![false; m];
    for (k, &i) in rows.iter().enumerate() {
        let s2 = config.spec(i).sigma.powi(2);
        let omega = s2 * (1.0 - leverage[k]).max(0.0);
        if omega < CRITICAL_OMEGA {
            critical[i] = true;
        } else {
            normalized_residual[i] = residual[i].abs() / omega.sqrt();
        }
    }
    Ok(EstimationResult {
        x_hat,
        residual,
        normalized_residual,
        critical,
        objective: obj,
        iterations,
        converged,
        removed: removed.to_vec(),
    })
}

fn weighted_system(
    h_rows: &DMatrix<f64>,
    rows: &[usize],
    inv_sigma: &[f64],
    z: &[f64],
    h: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = h_rows.clone();
    for (k, w) in inv_sigma.iter().enumerate() {
        a.row_mut(k).scale_mut(*w);
    }
    let b = DVector::from_iterator(
        rows.len(),
        rows.iter().zip(inv_sigma).map(|(&i, w)| (z[i] - h[i]) * w),
    );
    (a, b)
}

fn solve_least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let qr = a.qr();
    let r = qr.r();
    let rmax = (0..n).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..n).any(|j| !(r[(j, j)].abs() > 1e-14 * rmax)) {
        return Err(Error::Unobservable("gain matrix is singular".into()));
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Unobservable("gain matrix is singular".into()))
}

/// Diagonal of the weighted hat matrix `A (A^T A)^-1 A^T`, i.e. `|Q_i|^2`.
fn leverages(a: DMatrix<f64>) -> Vec<f64> {
    let q = a.qr().q();
    q.row_iter().map(|row| row.norm_squared()).collect()
}

/// Residual covariance diagonal `Omega_ii` at a converged estimate.
pub fn residual_variances(
    case: &NetworkCase,
    config: &MeasurementConfig,
    result: &EstimationResult,
) -> Vec<f64> {
    let m = config.len();
    let rows: Vec<usize> = (0..m).filter(|i| !result.removed.contains(i)).collect();
    let inv_sigma: Vec<f64> = rows.iter().map(|&i| 1.0 / config.spec(i).sigma).collect();
    let jac = eval_jacobian(case, config, &result.x_hat);
    let zeros = vec![0.0; m];
    let (a, _) = weighted_system(&jac.dense_rows(&rows), &rows, &inv_sigma, &zeros, &zeros);
    let lev = leverages(a);
    let mut omega = vec![0.0; m];
    for (k, &i) in rows.iter().enumerate() {
        omega[i] = config.spec(i).sigma.powi(2) * (1.0 - lev[k]);
    }
    omega
}

/// `|r_i| / sqrt(Omega_ii)`, zero for critical or removed measurements.
pub fn normalized_residuals(
    case: &NetworkCase,
    config: &MeasurementConfig,
    result: &EstimationResult,
) -> Vec<f64> {
    residual_variances(case, config, result)
        .into_iter()
        .enumerate()
        .map(|(i, om)| {
            if result.removed.contains(&i) || om < CRITICAL_OMEGA {
                0.0
            } else {
                result.residual[i].abs() / om.sqrt()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionStop {
    /// Every normalized residual is at or below the threshold.
    Clean,
    /// The next removal would leave the system unobservable.
    ObservabilityLoss { candidate: usize },
    /// The estimator failed to converge; the last result is returned as is.
    NotConverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub result: EstimationResult,
    pub removed: Vec<usize>,
    pub stop: DetectionStop,
    /// Estimates computed, the first one included.
    pub rounds: usize,
}

/// Repeatedly estimates and drops the telemetry measurement with the largest
/// normalized residual while it exceeds `threshold`.
pub fn detect_and_identify(
    case: &NetworkCase,
    config: &MeasurementConfig,
    z: &MeasurementVector,
    threshold: f64,
    x0: &StateVector,
) -> Result<Detection> {
    if !(threshold > 0.0) {
        return Err(Error::Config("threshold must be positive".into()));
    }
    let mut removed = Vec::new();
    let mut rounds = 0;
    let mut start = x0.clone();
    loop {
        let result = estimate_masked(case, config, z, &start, &removed)?;
        rounds += 1;
        if !result.converged {
            return Ok(Detection {
                result,
                removed,
                stop: DetectionStop::NotConverged,
                rounds,
            });
        }
        let worst = result.argmax_normalized_residual(config);
        let Some(i) = worst.filter(|&i| result.normalized_residual[i] > threshold) else {
            return Ok(Detection {
                result,
                removed,
                stop: DetectionStop::Clean,
                rounds,
            });
        };
        let mut active = vec![true; config.len()];
        for &k in removed.iter().chain([i].iter()) {
            active[k] = false;
        }
        if check_observable(case, config, &result.x_hat, &active).is_err() {
            return Ok(Detection {
                result,
                removed,
                stop: DetectionStop::ObservabilityLoss { candidate: i },
                rounds,
            });
        }
        removed.push(i);
        start = result.x_hat;
    }
}

/// CSV of `index,kind,location,z,h,r,rN,removed` followed by a `#` summary line.
pub fn estimation_report(
    config: &MeasurementConfig,
    z: &MeasurementVector,
    result: &EstimationResult,
) -> String {
    let mut out = String::from("index,kind,location,z,h,r,rN,removed\n");
    for (i, spec) in config.specs().iter().enumerate() {
        let r = result.residual[i];
        let _ = writeln!(
            out,
            "{i},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            spec.kind,
            spec.location,
            z.values[i],
            z.values[i] - r,
            r,
            result.normalized_residual[i],
            result.removed.contains(&i)
        );
    }
    let _ = writeln!(
        out,
        "# iterations={},converged={},objective={:.16e},max_rN={:.16e}",
        result.iterations,
        result.converged,
        result.objective,
        result.max_normalized_residual()
    );
    out
}
