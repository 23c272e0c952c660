//! Minimum-norm projection onto nonlinear equality constraints.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct Projection {
    pub x: DVector<f64>,
    /// Max-abs constraint residual at `x`.
    pub residual: f64,
}

/// Finds the point nearest `x0` (Euclidean, over `x0`'s coordinates) with
/// `c(x) = 0`, starting the Gauss-Newton iteration at `start`.
///
/// `c` returns the residuals and their Jacobian. Rank-deficient constraint
/// sets are handled through the pseudo-inverse of `J J^T`.
pub(crate) fn min_norm_project<F>(
    x0: &DVector<f64>,
    start: &DVector<f64>,
    mut c: F,
    tol: f64,
    max_iter: usize,
) -> Projection
where
    F: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut x = start.clone();
    let (mut r, mut j) = c(&x);
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let target = gn_target(x0, &x, &r, &j);
        let step = &target - &x;
        let merit = r.amax();
        // Damp until the residual stops growing; a full step is always tried first.
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let xn = &x + alpha * &step;
            let (rn, jn) = c(&xn);
            if rn.iter().all(|v| v.is_finite())
                && (rn.amax() <= merit.max(tol) * 1.5 || alpha < 1e-3)
            {
                accepted = Some((xn, rn, jn));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, rn, jn)) = accepted else { break };
        let moved = (&xn - &x).amax();
        x = xn;
        r = rn;
        j = jn;
        if moved < tol && r.amax() < tol {
            break;
        }
    }
    Projection {
        residual: r.amax(),
        x,
    }
}

/// Solution of `min |y - x0|` s.t. `r + J (y - x) = 0`.
fn gn_target(
    x0: &DVector<f64>,
    x: &DVector<f64>,
    r: &DVector<f64>,
    j: &DMatrix<f64>,
) -> DVector<f64> {
    if j.nrows() == 0 {
        return x0.clone();
    }
    let jjt = j * j.transpose();
    let rhs = r + j * (x0 - x);
    let eps = 1e-12 * jjt.amax().max(f64::MIN_POSITIVE);
    let mu = jjt
        .svd(true, true)
        .solve(&rhs, eps)
        .expect("SVD was computed with both factors");
    x0 - j.transpose() * mu
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projects_onto_unit_circle() {
        let x0 = DVector::from_vec(vec![3.0, 4.0]);
        let p = min_norm_project(
            &x0,
            &x0,
            |x| {
                let r = DVector::from_vec(vec![x[0] * x[0] + x[1] * x[1] - 1.0]);
                let j = DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]);
                (r, j)
            },
            1e-12,
            100,
        );
        assert!((p.x[0] - 0.6).abs() < 1e-10 && (p.x[1] - 0.8).abs() < 1e-10);
    }

    #[test]
    fn linear_constraint_is_exact_in_one_step() {
        let x0 = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let p = min_norm_project(
            &x0,
            &x0,
            |x| {
                let r = DVector::from_vec(vec![x.sum()]);
                (r, DMatrix::from_element(1, 3, 1.0))
            },
            1e-12,
            10,
        );
        assert!(p.x.iter().all(|v| v.abs() < 1e-12));
    }
}
