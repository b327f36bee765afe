use dqvi::contact2d::{compile, demo_model, Compliance};
use dqvi::history::TimeGrid;
use dqvi::stepper::{run, StepperConfig};
use nalgebra::{DMatrix, DVector};

// Frictionless, pressure-free, unconstrained and damage-decoupled: the scheme
// reduces to a linear viscoelastic recursion solved here by dense LU.
#[test]
fn linear_viscoelastic_case_matches_dense_recursion() {
    let mut m = demo_model(6, 3).unwrap();
    m.contact.friction = vec![0.0];
    m.contact.compliance = Compliance { k_n: 0.0, p_max: 1.0, a_w: 0.0 };
    m.contact.gap = 1e6;
    m.material.c_zeta = 0.0;
    m.loads.ramp_time = 0.3;
    let (horizon, steps) = (0.5, 25);
    let c = compile(&m, horizon).unwrap();
    let tr = run(&c.problem, TimeGrid::new(horizon, steps).unwrap(), StepperConfig::default()).unwrap();

    let d = c.disc();
    let k = &d.stiffness;
    let g = &d.gram_v;
    let mat = m.material;
    let dt = horizon / steps as f64;
    let load = |t: f64| {
        let s = (t / m.loads.ramp_time).min(1.0);
        (&d.unit_body[0] * m.loads.body[0]
            + &d.unit_body[1] * m.loads.body[1]
            + &d.unit_traction[0] * m.loads.traction[0]
            + &d.unit_traction[1] * m.loads.traction[1])
            * s
    };
    let kernel = |lag: f64| g * (mat.c_b * (-lag / mat.tau_r).exp());

    let mut us = vec![DVector::zeros(d.dim_v())];
    let v0 = (k * mat.theta_v).lu().solve(&load(0.0)).unwrap();
    assert!((&v0 - &tr.states[0].udot).amax() <= 1e-8 * v0.amax().max(1.0));
    let lhs: DMatrix<f64> = k * mat.theta_v + k * dt + g * (0.5 * dt * mat.c_b * dt);
    let lu = lhs.lu();
    for n in 1..=steps {
        let tn = n as f64 * dt;
        let mut hist = kernel(tn) * &us[0] * (0.5 * dt);
        for (i, ui) in us.iter().enumerate().skip(1) {
            hist += kernel(tn - i as f64 * dt) * ui * dt;
        }
        let prev = us[n - 1].clone();
        let rhs = load(tn) - k * &prev - hist - g * &prev * (0.5 * dt * mat.c_b);
        let v = lu.solve(&rhs).unwrap();
        let scale = v.amax().max(1.0);
        assert!((&v - &tr.states[n].udot).amax() <= 1e-8 * scale, "step {n}");
        us.push(prev + v * dt);
        assert!((&us[n] - &tr.states[n].u).amax() <= 1e-8 * scale);
    }
}
