//! Acceptance checks, one line per criterion. Exits nonzero when any fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dqvi::contact2d::assembly::plane_strain_tensor;
use dqvi::contact2d::{compile, demo_model, CompiledContact, Discretization, Mesh};
use dqvi::history::{HistoryBuffer, TimeGrid};
use dqvi::stepper::{run, StepperConfig, Trajectory};
use dqvi::verify::{
    brute_force_vi, gronwall_probe, linear_closed_form, observed_orders, LinearSpec, OracleInstance, TrajectorySamples,
};
use dqvi::vi::{solve_quasi_vi, QuasiViInstance, StepRule};
use dqvi::{Coeffs, ConvexSet, JSpec, Metric};
use dqvi_cli::commands::{cmd_run, Overrides};
use dqvi_cli::error::CliError;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn demo() -> CompiledContact {
    compile(&demo_model(8, 4).unwrap(), 1.0).unwrap()
}

fn demo_run(steps: usize) -> (CompiledContact, Trajectory) {
    let c = demo();
    let traj = run(&c.problem, TimeGrid::new(1.0, steps).unwrap(), StepperConfig::default()).unwrap();
    (c, traj)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let inst = OracleInstance::random(&mut rng);
        let brute = brute_force_vi(&inst, 101).map_err(|e| e.to_string())?;
        let solved = inst.solve(1e-12).map_err(|e| e.to_string())?;
        worst = worst.max((brute - solved).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-4 && secs < 10.0, format!("100 instances, worst deviation {worst:.2e}, {secs:.2} s"))
}

struct QuasiCase {
    op: DMatrix<f64>,
    m: f64,
    l: f64,
    j: JSpec,
    set: ConvexSet,
    rhs: Coeffs,
}

fn spd<R: Rng>(rng: &mut R, n: usize) -> (DMatrix<f64>, f64, f64) {
    let q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let a = q.transpose() * &q + DMatrix::identity(n, n) * rng.gen_range(0.3..1.5);
    let eig = a.clone().symmetric_eigen().eigenvalues;
    (a, eig.min(), eig.max())
}

fn random_set<R: Rng>(rng: &mut R, n: usize) -> ConvexSet {
    match rng.gen_range(0..3) {
        0 => ConvexSet::whole(n),
        1 => ConvexSet::interval(n, -0.5, 0.5).unwrap(),
        _ => ConvexSet::upper_bound(n, (0..n).collect(), rng.gen_range(0.0..0.5)).unwrap(),
    }
}

/// `G(z) = κ R z` with `‖R‖ = 1`, so `α₁ = κ`.
fn contracting_case<R: Rng>(rng: &mut R) -> QuasiCase {
    let n = rng.gen_range(1..=3);
    let (op, m, l) = spd(rng, n);
    let r = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let norm = r.clone().svd(false, false).singular_values.max();
    let kappa = rng.gen_range(0.05..=0.4) * m;
    let g = r * (kappa / norm);
    QuasiCase {
        j: JSpec::linear(Arc::new(move |_, z| &g * z)),
        set: random_set(rng, n),
        rhs: DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0)),
        op,
        m,
        l,
    }
}

/// `G(z) = κ A z` with `κ ≥ 1.2`: the frozen-argument map is `z ↦ A⁻¹f − κz`.
fn violated_case<R: Rng>(rng: &mut R) -> QuasiCase {
    let n = rng.gen_range(1..=3);
    let (op, m, l) = spd(rng, n);
    let g = &op * rng.gen_range(1.2..=2.0);
    QuasiCase {
        j: JSpec::linear(Arc::new(move |_, z| &g * z)),
        set: ConvexSet::whole(n),
        rhs: DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0)),
        op,
        m,
        l,
    }
}

fn solve_case(case: &QuasiCase, start: &Coeffs, tol: f64) -> dqvi::Result<dqvi::vi::QuasiSolveReport> {
    let n = case.rhs.len();
    let metric = Metric::identity(n);
    let projector = dqvi::spaces::MetricProjector::new(&case.set, &metric)?;
    let op = case.op.clone();
    let apply = move |v: &Coeffs| &op * v;
    let w = DVector::zeros(1);
    let inst = QuasiViInstance {
        op_c: &apply,
        m_c: case.m,
        l_c: Some(case.l),
        j: &case.j,
        w: &w,
        rhs: &case.rhs,
        projector: &projector,
        metric: &metric,
        step_rule: StepRule::Symmetric,
        start: Some(start),
    };
    solve_quasi_vi(&inst, tol, 500)
}

fn criterion_2() -> Outcome {
    let tol = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let case = contracting_case(&mut rng);
        let n = case.rhs.len();
        let far = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
        let a = solve_case(&case, &DVector::zeros(n), tol).map_err(|e| e.to_string())?;
        let b = solve_case(&case, &far, tol).map_err(|e| e.to_string())?;
        if !a.report.converged || !b.report.converged {
            return Err("a contracting instance did not converge".into());
        }
        worst = worst.max((a.report.solution - b.report.solution).amax());
    }
    let mut detected = 0;
    let mut lowest_ratio = f64::INFINITY;
    for _ in 0..20 {
        let case = violated_case(&mut rng);
        let n = case.rhs.len();
        let r = solve_case(&case, &DVector::from_element(n, 1.0), tol).map_err(|e| e.to_string())?;
        let last = r.outer_ratios.last().copied().unwrap_or(0.0);
        lowest_ratio = lowest_ratio.min(last);
        if r.stagnated && !r.report.converged && last >= 1.0 {
            detected += 1;
        }
    }

    let config = configs().join("margin_violated.toml");
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let refused = matches!(
        cmd_run(&config, &Overrides { out: Some(out.path().join("a")), ..Default::default() }),
        Err(CliError::MarginRefused(_))
    );
    let forced = cmd_run(&config, &Overrides { out: Some(out.path().join("b")), override_margin: true, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let reported = forced.exit_code == 1
        && forced.summary.run.failure.as_deref().is_some_and(|f| f.contains("ratio"))
        && forced.summary.margins.overridden;

    check(
        worst <= 2.0 * tol && detected == 20 && refused && reported,
        format!(
            "50 two-start pairs, worst gap {worst:.1e} (limit {:.0e}); {detected}/20 violated instances flagged, lowest final ratio {lowest_ratio:.2}; cli refusal {refused}, forced run reported {reported}",
            2.0 * tol
        ),
    )
}

fn criterion_3() -> Outcome {
    let (c, traj) = demo_run(200);
    let worst = traj.diagnostics.iter().flat_map(|d| d.outer_ratios.iter().copied()).fold(0.0, f64::max);
    let all_below = traj.diagnostics.iter().all(|d| d.outer_ratios.iter().all(|&r| r < 1.0));

    let mut model = demo_model(8, 4).unwrap();
    model.contact.friction = vec![200.0];
    let inflated = compile(&model, 1.0).map_err(|e| e.to_string())?;
    let flagged = !inflated.warnings.is_empty() && inflated.margins.continuum_margin < 0.0;
    let failure = match run(&inflated.problem, TimeGrid::new(1.0, 200).unwrap(), StepperConfig::default()) {
        Ok(_) => None,
        Err(f) => Some(f.error.to_string()),
    };
    let detected = failure.as_deref().is_some_and(|m| m.contains("stagnated"));
    check(
        c.margins.continuum_margin > 0.0 && all_below && flagged && detected,
        format!(
            "demo margin {:.3}, max outer ratio {worst:.2e}; inflated friction margin {:.2}, run {}",
            c.margins.continuum_margin,
            inflated.margins.continuum_margin,
            failure.unwrap_or_else(|| "completed".into())
        ),
    )
}

fn criterion_4() -> Outcome {
    let (c, traj) = demo_run(200);
    let g = c.model.contact.gap;
    let normal = c.disc().normal_dofs();
    let mut violations = 0usize;
    let mut checked = 0usize;
    for s in &traj.states {
        violations += s.zeta.iter().filter(|&&z| !(0.0..=1.0).contains(&z)).count();
        violations += normal.iter().filter(|&&d| s.udot[d] > g + 1e-12).count();
        checked += s.zeta.len() + normal.len();
    }
    for pair in traj.states.windows(2) {
        violations += pair[0].w.iter().zip(&pair[1].w).filter(|(a, b)| b < a).count();
        checked += pair[0].w.len();
    }
    violations += traj.states[0].w.iter().filter(|&&x| x != 0.0).count();
    let final_wear = traj.states.last().unwrap().w.max();
    check(
        violations == 0 && final_wear > 0.0,
        format!("{} states, {checked} checks, {violations} violations, final max wear {final_wear:.3e}", traj.states.len()),
    )
}

fn criterion_5() -> Outcome {
    let (c, traj) = demo_run(200);
    let mut product: f64 = 0.0;
    let mut sign: f64 = 0.0;
    let mut velocity: f64 = 0.0;
    for s in &traj.states[1..] {
        let r = c.complementarity(s).map_err(|e| e.to_string())?;
        product = product.max(r.relative_product);
        sign = sign.max(r.sign_violation);
        velocity = velocity.max(r.velocity_violation);
    }
    check(
        product <= 1e-6 && sign <= 1e-6 && velocity <= 1e-12,
        format!("max relative product {product:.2e}, sign {sign:.2e}, velocity {velocity:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let spec = LinearSpec::coupled_scalar();
    let p = spec.problem().map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    for n in [16, 32, 64, 128] {
        let traj = run(&p, TimeGrid::new(spec.horizon, n).unwrap(), StepperConfig::default()).map_err(|f| f.error.to_string())?;
        let got = TrajectorySamples::from_trajectory(&traj);
        let exact = linear_closed_form(&spec, &got.times).map_err(|e| e.to_string())?;
        errors.push(exact.sup_distance(&got).map_err(|e| e.to_string())?);
    }
    let orders = observed_orders(&errors);
    let orders_ok = orders.iter().all(|o| (0.9..=1.1).contains(o));

    let samples: Vec<TrajectorySamples> = [50, 100, 200, 400]
        .iter()
        .map(|&n| TrajectorySamples::from_trajectory(&demo_run(n).1))
        .collect();
    let diffs: Vec<f64> = samples
        .windows(2)
        .map(|w| w[0].sup_distance(&w[1]))
        .collect::<dqvi::Result<_>>()
        .map_err(|e| e.to_string())?;
    let decreasing = diffs.windows(2).all(|d| d[1] < d[0]);
    let secs = start.elapsed().as_secs_f64();
    let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    let fmt_e = |xs: &[f64]| xs.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ");
    check(
        orders_ok && decreasing && secs < 60.0,
        format!("linear orders [{}]; demo self-differences [{}]; {secs:.1} s", fmt(&orders), fmt_e(&diffs)),
    )
}

fn history_integral<U, B>(steps: usize, horizon: f64, u: U, kernel: B) -> f64
where
    U: Fn(f64) -> f64,
    B: Fn(f64, f64) -> f64,
{
    let grid = TimeGrid::new(horizon, steps).unwrap();
    let mut buffer = HistoryBuffer::new(grid);
    for i in 0..=steps {
        buffer.append(DVector::from_element(1, u(grid.node(i))), DVector::zeros(1)).unwrap();
    }
    let op = |lag: f64, x: &Coeffs, _: &Coeffs| DVector::from_element(1, kernel(lag, x[0]));
    buffer.history_term(op, steps).unwrap()[0]
}

fn criterion_7() -> Outcome {
    let horizon = 2.0_f64;
    let exact = (horizon.sin() - horizon.cos() + (-horizon).exp()) / 2.0;
    let errors: Vec<f64> = [16, 32, 64, 128]
        .iter()
        .map(|&n| (history_integral(n, horizon, f64::sin, |lag, x| (-lag).exp() * x) - exact).abs())
        .collect();
    let orders = observed_orders(&errors);
    let orders_ok = orders.iter().all(|o| (1.8..=2.2).contains(o));

    // constant kernel on a linear history: ∫₀ᵀ 0.7(1 + 3s) ds
    let constant = history_integral(37, horizon, |s| 1.0 + 3.0 * s, |_, x| 0.7 * x);
    let constant_err = (constant - 0.7 * (horizon + 1.5 * horizon * horizon)).abs();
    // linear-in-lag kernel on a constant history: ∫₀ᵀ (2 − 0.5(T − s))·1.5 ds
    let lagged = history_integral(41, horizon, |_| 1.5, |lag, x| (2.0 - 0.5 * lag) * x);
    let lagged_err = (lagged - 1.5 * (2.0 * horizon - 0.25 * horizon * horizon)).abs();
    let fmt = orders.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    check(
        orders_ok && constant_err <= 1e-14 && lagged_err <= 1e-14,
        format!("orders [{fmt}]; constant kernel error {constant_err:.1e}, linear-in-lag error {lagged_err:.1e}"),
    )
}

fn criterion_8() -> Outcome {
    let c = demo();
    let direction = &c.disc().unit_body[0] + &c.disc().unit_body[1];
    let mut constants = Vec::new();
    for n in [50, 100] {
        let probes = gronwall_probe(&c.problem, TimeGrid::new(1.0, n).unwrap(), StepperConfig::default(), &direction, &[1e-3, 1e-2])
            .map_err(|e| e.to_string())?;
        constants.extend(probes.iter().map(|s| s.constant));
    }
    let lo = constants.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = constants.iter().copied().fold(0.0, f64::max);
    let fmt = constants.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    check(lo > 0.0 && hi <= 1.2 * lo, format!("contact demo constants [{fmt}] (N = 50, 100; delta = 1e-3, 1e-2), spread {:.3}", hi / lo))
}

fn disc_with_threads(threads: usize) -> Discretization {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| Discretization::new(Mesh::rectangle(2.0, 1.0, 12, 6).unwrap(), &plane_strain_tensor(1.0, 1.0)).unwrap())
}

fn same_bits(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn criterion_9() -> Outcome {
    let config = configs().join("contact_demo.toml");
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    for k in 0..2 {
        let r = cmd_run(&config, &Overrides { out: Some(out.path().join(format!("run{k}"))), ..Default::default() })
            .map_err(|e| e.to_string())?;
        if r.exit_code != 0 {
            return Err(format!("demo run exited with {}", r.exit_code));
        }
    }
    let mut identical = true;
    for file in ["trajectory.csv", "diagnostics.csv"] {
        let read = |k: usize| std::fs::read(out.path().join(format!("run{k}")).join(file)).map_err(|e| e.to_string());
        let (a, b) = (read(0)?, read(1)?);
        identical &= a == b && !a.is_empty();
    }

    let (a, b) = (disc_with_threads(1), disc_with_threads(4));
    let assembled = same_bits(&a.gram_v, &b.gram_v)
        && same_bits(&a.stiffness, &b.stiffness)
        && same_bits(&a.mass_v, &b.mass_v)
        && same_bits(&a.mass_y, &b.mass_y)
        && same_bits(&a.laplace_y, &b.laplace_y)
        && same_bits(&a.divergence, &b.divergence)
        && same_bits(&a.trace, &b.trace)
        && same_bits(&a.strain, &b.strain)
        && a.contact_nodes == b.contact_nodes;
    check(identical && assembled, format!("csv outputs identical {identical}; 1- vs 4-thread assembly identical {assembled}"))
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (k, f) in criteria {
        match f() {
            Ok(detail) => println!("criterion {k}: PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {k}: FAIL  {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
