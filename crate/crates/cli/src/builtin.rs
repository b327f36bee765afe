//! Small abstract instances selectable by name from a run file.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use dqvi::problem::{Constants, DqviProblem, JSpec};
use dqvi::spaces::{ConvexSet, DiscreteSpace, SpaceLabel};
use dqvi::verify::LinearSpec;
use dqvi::Result;

use crate::config::Builtin;

fn scalar(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

fn vec1(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

/// The linear data behind a builtin, when it has any.
pub fn linear_spec(b: Builtin, horizon: f64) -> Option<LinearSpec> {
    match b {
        Builtin::Zero => {
            let mut s = LinearSpec::zero(2, 1, 1, horizon);
            s.zeta0 = vec1(0.0);
            Some(s)
        }
        Builtin::ScalarLinear => {
            let mut s = LinearSpec::zero(1, 1, 1, horizon);
            s.c = scalar(2.0);
            s.a = scalar(1.0);
            s.f0 = vec1(3.0);
            Some(s)
        }
        Builtin::CoupledLinear => Some(LinearSpec { horizon, ..LinearSpec::coupled_scalar() }),
        Builtin::Reference => {
            let mut s = LinearSpec::zero(1, 1, 1, horizon);
            s.c = scalar(2.0);
            s.a = scalar(1.0);
            s.b_u = scalar(1.0);
            s.j_w = scalar(1.0);
            s.f_v = scalar(0.5);
            s.f0 = vec1(1.0);
            Some(s)
        }
        Builtin::MarginViolated => None,
    }
}

/// `u̇ + ∂j(u̇) ∋ 1` with `j(w, z, v) = 2zv`, so `α₁ = 2` exceeds `m_C = 1`.
fn margin_violated(horizon: f64, allow_violation: bool) -> Result<DqviProblem> {
    let v = DiscreteSpace::euclidean(SpaceLabel::V, 1);
    let y = DiscreteSpace::euclidean(SpaceLabel::Y, 1);
    let w = DiscreteSpace::euclidean(SpaceLabel::W, 1);
    let constants = Constants {
        l_a: 0.0,
        l_b: 0.0,
        rho: 0.0,
        l_c1: 1.0,
        l_c2: 0.0,
        m_c: 1.0,
        alpha0: 0.0,
        alpha1: 2.0,
        l_f: 0.0,
        l_phi: 0.0,
        a1: 1.0,
        a2: 1.0,
        horizon,
    };
    DqviProblem::builder(v, y, w)
        .k_v(ConvexSet::whole(1))
        .k_y(ConvexSet::unit_interval(1))
        .op_a(|_, u| u * 0.0)
        .op_b(|_, u, _| u * 0.0)
        .op_c(|_, v| v.clone())
        .op_f(|_, w, _| w * 0.0)
        .op_phi(|_, _, z| z * 0.0)
        .form_a(scalar(0.0))
        .j(JSpec::linear(Arc::new(|_, z| z * 2.0)))
        .forcing(|_| vec1(1.0))
        .initial(vec1(0.0), vec1(0.0), vec1(0.5))
        .constants(constants)
        .allow_margin_violation(allow_violation)
        .build()
}

pub fn problem(b: Builtin, horizon: f64, allow_violation: bool) -> Result<DqviProblem> {
    match linear_spec(b, horizon) {
        Some(spec) => spec.problem(),
        None => margin_violated(horizon, allow_violation),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dqvi::{contraction_constants, Error};

    #[test]
    fn reference_constants_match_hand_values() {
        let p = problem(Builtin::Reference, 1.0, false).unwrap();
        let c = &p.constants;
        assert_eq!((c.l_a, c.l_b, c.alpha0, c.alpha1, c.m_c), (1.0, 1.0, 1.0, 0.0, 2.0));
        let k = contraction_constants(c).unwrap();
        assert!((k.c_p - 0.5).abs() < 1e-15);
        assert!((k.c_q - 0.5 * 0.75_f64.exp()).abs() < 1e-12);
        assert!((k.c_r - (0.5 + 0.75_f64.exp() / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn violated_margin_is_refused_unless_allowed() {
        assert!(matches!(problem(Builtin::MarginViolated, 1.0, false), Err(Error::MarginViolated { .. })));
        assert!(problem(Builtin::MarginViolated, 1.0, true).is_ok());
    }

    #[test]
    fn every_other_builtin_builds() {
        for b in [Builtin::Zero, Builtin::ScalarLinear, Builtin::CoupledLinear, Builtin::Reference] {
            assert!(problem(b, 2.0, false).is_ok(), "{}", b.name());
        }
    }
}
