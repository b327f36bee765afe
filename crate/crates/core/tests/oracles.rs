use dqvi::contact2d::{compile, demo_model};
use dqvi::history::TimeGrid;
use dqvi::stepper::{run, OuterGuess, Stepper, StepperConfig};
use dqvi::verify::{
    brute_force_vi, gronwall_probe, linear_closed_form, manufactured_linear_oracle, measure_contraction, observed_orders,
    LinearSpec, OracleInstance, TrajectorySamples,
};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn hundred_random_instances_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let inst = OracleInstance::random(&mut rng);
        let x = brute_force_vi(&inst, 101).unwrap();
        let y = inst.solve(1e-12).unwrap();
        worst = worst.max((&x - &y).amax());
    }
    assert!(worst <= 1e-4, "worst deviation {worst}");
}

#[test]
fn stepper_converges_to_closed_form_at_first_order() {
    let spec = LinearSpec::coupled_scalar();
    let p = spec.problem().unwrap();
    let errors: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let traj = run(&p, TimeGrid::new(1.0, n).unwrap(), StepperConfig::default()).unwrap();
            let got = TrajectorySamples::from_trajectory(&traj);
            let exact = linear_closed_form(&spec, &got.times).unwrap();
            exact.sup_distance(&got).unwrap()
        })
        .collect();
    for order in observed_orders(&errors) {
        assert!((0.9..=1.1).contains(&order), "orders {:?}", observed_orders(&errors));
    }
}

#[test]
fn manufactured_reference_is_close_to_closed_form() {
    let spec = LinearSpec::coupled_scalar();
    let reference = manufactured_linear_oracle(&spec, 16).unwrap();
    let exact = linear_closed_form(&spec, &reference.times).unwrap();
    assert!(exact.sup_distance(&reference).unwrap() < 5e-3);
}

#[test]
fn contact_outer_sweep_contracts() {
    let c = compile(&demo_model(8, 4).unwrap(), 1.0).unwrap();
    let mut stepper = Stepper::new(&c.problem, TimeGrid::new(1.0, 20).unwrap(), StepperConfig::default()).unwrap();
    for _ in 0..5 {
        stepper.step().unwrap();
    }
    let s = stepper.current().clone();
    let start = OuterGuess { udot: s.udot * 1.5, w: s.w, zeta: s.zeta };
    let p = &c.problem;
    let dist = |a: &OuterGuess, b: &OuterGuess| {
        p.space_v
            .primary()
            .norm(&(&a.udot - &b.udot))
            .max(p.space_w.primary().norm(&(&a.w - &b.w)))
            .max(p.space_y.pivot().norm(&(&a.zeta - &b.zeta)))
    };
    let seq = measure_contraction(|g| stepper.outer_sweep(g), dist, start, 10, 1e-9).unwrap();
    assert!(!seq.ratios.is_empty() || seq.landed);
    assert!(seq.ratios.iter().all(|&r| r < 1.0), "{:?}", seq.ratios);
}

#[test]
fn gronwall_constant_is_stable_on_linear_instance() {
    let spec = LinearSpec::coupled_scalar();
    let p = spec.problem().unwrap();
    let dir = DVector::from_element(1, 1.0);
    let mut constants = Vec::new();
    for n in [20, 40] {
        let probes = gronwall_probe(&p, TimeGrid::new(1.0, n).unwrap(), StepperConfig::default(), &dir, &[1e-3, 1e-2]).unwrap();
        constants.extend(probes.iter().map(|s| s.constant));
    }
    let (lo, hi) = constants.iter().fold((f64::MAX, 0.0_f64), |(a, b), &c| (a.min(c), b.max(c)));
    assert!(hi <= 1.2 * lo, "{constants:?}");
}
