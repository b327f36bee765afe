use dqvi::contact2d::{normal_compliance, Compliance};
use dqvi::history::{HistoryBuffer, TimeGrid};
use dqvi::spaces::{ConvexSet, Metric, MetricProjector};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spd(n: usize, entries: &[f64], shift: f64) -> DMatrix<f64> {
    let q = DMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
    q.transpose() * &q + DMatrix::identity(n, n) * shift
}

proptest! {
    #[test]
    fn metric_projection_is_feasible_and_idempotent(
        entries in prop::collection::vec(-1.0..1.0f64, 9),
        y in prop::collection::vec(-5.0..5.0f64, 3),
        bound in 0.0..2.0f64,
    ) {
        let g = spd(3, &entries, 0.3);
        let metric = Metric::new(g.clone()).unwrap();
        let set = ConvexSet::upper_bound(3, vec![0, 2], bound).unwrap();
        let proj = MetricProjector::new(&set, &metric).unwrap();
        let y = DVector::from_vec(y);
        let x = proj.project(&y);
        prop_assert!(set.violation(&x) <= 1e-10);
        let again = proj.project(&x);
        prop_assert!((&again - &x).amax() <= 1e-10);
        // variational characterization against feasible corners
        for v in [DVector::from_vec(vec![bound, 1.0, bound]), DVector::from_vec(vec![-1.0, -2.0, 0.0])] {
            prop_assert!(metric.inner(&(&y - &x), &(&v - &x)) <= 1e-8 * (1.0 + y.amax()));
        }
    }

    #[test]
    fn compliance_is_bounded_lipschitz_and_nonnegative(
        k_n in 0.0..5.0f64, a_w in 0.0..3.0f64, p_max in 0.1..4.0f64,
        w1 in -3.0..3.0f64, r1 in -3.0..3.0f64, w2 in -3.0..3.0f64, r2 in -3.0..3.0f64,
    ) {
        let c = Compliance { k_n, p_max, a_w };
        let (p1, p2) = (normal_compliance(w1, r1, &c), normal_compliance(w2, r2, &c));
        prop_assert!(p1 >= 0.0 && p1 <= k_n * p_max);
        prop_assert!((p1 - p2).abs() <= c.lipschitz() * ((w1 - w2).abs() + (r1 - r2).abs()) + 1e-12);
    }

    #[test]
    fn history_is_exact_for_linear_kernels(
        steps in 1usize..20, horizon in 0.1..3.0f64, a in -2.0..2.0f64, b in -2.0..2.0f64,
    ) {
        let grid = TimeGrid::new(horizon, steps).unwrap();
        let mut buf = HistoryBuffer::new(grid);
        for _ in 0..=steps {
            buf.append(DVector::from_element(1, 1.0), DVector::zeros(1)).unwrap();
        }
        let op = |tau: f64, u: &DVector<f64>, _: &DVector<f64>| u * (a + b * tau);
        let h = buf.history_term(op, steps).unwrap()[0];
        let exact = a * horizon + 0.5 * b * horizon * horizon;
        prop_assert!((h - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
    }
}
