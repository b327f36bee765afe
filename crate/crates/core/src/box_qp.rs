//! Projected successive over-relaxation for small dense box-constrained
//! quadratic programs `min ½xᵀQx − cᵀx` subject to `lower ≤ x ≤ upper`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
#[allow(dead_code)]
pub(crate) struct BoxQpOutcome {
    pub x: DVector<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Runs projected SOR from `x0` until the largest coordinate update falls
/// below `tol` (scaled by the magnitude of the iterate).
///
/// `q` must be symmetric with a strictly positive diagonal; for symmetric
/// positive-definite `q` and `0 < omega < 2` the sweep converges to the unique
/// minimizer.
#[allow(clippy::too_many_arguments)]
pub(crate) fn projected_sor(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    lower: &[f64],
    upper: &[f64],
    x0: &DVector<f64>,
    omega: f64,
    tol: f64,
    max_sweeps: usize,
) -> BoxQpOutcome {
    let n = c.len();
    let mut x = x0.clone();
    for i in 0..n {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
    for sweep in 1..=max_sweeps {
        let mut max_step = 0.0_f64;
        let mut scale = 1.0_f64;
        for i in 0..n {
            let row = q.row(i);
            let mut r = c[i];
            for j in 0..n {
                r -= row[j] * x[j];
            }
            let updated = (x[i] + omega * r / q[(i, i)]).clamp(lower[i], upper[i]);
            max_step = max_step.max((updated - x[i]).abs());
            scale = scale.max(updated.abs());
            x[i] = updated;
        }
        if max_step <= tol * scale {
            return BoxQpOutcome { x, sweeps: sweep, converged: true };
        }
    }
    BoxQpOutcome { x, sweeps: max_sweeps, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_matches_linear_solve() {
        let q = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let c = DVector::from_vec(vec![1.0, 2.0]);
        let inf = [f64::INFINITY; 2];
        let ninf = [f64::NEG_INFINITY; 2];
        let out = projected_sor(&q, &c, &ninf, &inf, &DVector::zeros(2), 1.2, 1e-15, 10_000);
        assert!(out.converged);
        let exact = q.clone().lu().solve(&c).unwrap();
        assert!((out.x - exact).norm() < 1e-12);
    }

    #[test]
    fn active_bound_satisfies_kkt() {
        // min ½(2x²+2y²) − 4x with x ≤ 1: solution (1, 0)
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        let c = DVector::from_vec(vec![4.0, 0.0]);
        let out = projected_sor(
            &q,
            &c,
            &[f64::NEG_INFINITY; 2],
            &[1.0, f64::INFINITY],
            &DVector::zeros(2),
            1.0,
            1e-15,
            100,
        );
        assert!(out.converged);
        assert_eq!(out.x[0], 1.0);
        assert!(out.x[1].abs() < 1e-15);
    }
}
