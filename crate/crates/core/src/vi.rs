//! Projected forward-backward iteration for elliptic variational
//! inequalities and the frozen-argument outer loop for quasi-VIs.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::problem::JSpec;
use crate::spaces::{Coeffs, Metric, MetricProjector};

pub type OperatorRef<'a> = &'a (dyn Fn(&Coeffs) -> Coeffs + Sync);

/// The convex perturbation `v ↦ φ(v)` of the inequality.
#[derive(Clone, Copy)]
pub enum Perturbation<'a> {
    None,
    /// `φ(v) = ⟨g, v⟩`.
    Linear(&'a Coeffs),
    /// `evaluate(v)` and `prox(point, step)`, the proximal map of `step·φ`
    /// in the solver metric.
    Proximal {
        evaluate: &'a (dyn Fn(&Coeffs) -> f64 + Sync),
        prox: &'a (dyn Fn(&Coeffs, f64) -> Coeffs + Sync),
    },
}

impl Perturbation<'_> {
    pub fn evaluate(&self, v: &Coeffs) -> f64 {
        match self {
            Perturbation::None => 0.0,
            Perturbation::Linear(g) => g.dot(v),
            Perturbation::Proximal { evaluate, .. } => evaluate(v),
        }
    }
}

/// Step size rule of the forward-backward iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// `τ = m / L²`, valid for every strongly monotone Lipschitz operator.
    #[default]
    Conservative,
    /// `τ = 2 / (m + L)`, valid only when the operator is the gradient of a
    /// convex function (symmetric Jacobian in the metric).
    Symmetric,
}

impl StepRule {
    pub fn step(self, m: f64, l: f64) -> f64 {
        match self {
            StepRule::Conservative => m / (l * l),
            StepRule::Symmetric => 2.0 / (m + l),
        }
    }
}

/// Find `u ∈ K` with `⟨Op(u) − rhs, v − u⟩ + φ(v) − φ(u) ≥ 0` for all `v ∈ K`.
pub struct ViInstance<'a> {
    pub operator: OperatorRef<'a>,
    /// Strong monotonicity constant of `operator` in `metric`.
    pub m: f64,
    /// Lipschitz constant of `operator` from `metric` to its dual; estimated
    /// from samples when absent.
    pub lipschitz: Option<f64>,
    pub perturbation: Perturbation<'a>,
    pub rhs: &'a Coeffs,
    pub projector: &'a MetricProjector,
    pub metric: &'a Metric,
    pub step_rule: StepRule,
    pub start: Option<&'a Coeffs>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Coeffs,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// Geometric mean of successive residual ratios.
    pub contraction_estimate: f64,
    pub step_size: f64,
    pub lipschitz_used: f64,
    pub lipschitz_estimated: bool,
}

const ESTIMATE_SAMPLES: usize = 16;
const ESTIMATE_INFLATION: f64 = 1.5;

fn estimate_lipschitz(op: OperatorRef<'_>, metric: &Metric, center: &Coeffs) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let n = center.len();
    let scale = 1.0 + metric.norm(center);
    let mut worst: f64 = 0.0;
    for _ in 0..ESTIMATE_SAMPLES {
        let dx = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let norm = metric.norm(&dx);
        if norm == 0.0 {
            continue;
        }
        let dx = dx * (scale / norm);
        let a = op(&(center + &dx));
        let b = op(center);
        worst = worst.max(metric.dual_norm(&(a - b)) / scale);
    }
    worst
}

fn geometric_rate(first: f64, last: f64, steps: usize) -> f64 {
    if steps == 0 || first <= 0.0 || last <= 0.0 {
        0.0
    } else {
        (last / first).powf(1.0 / steps as f64)
    }
}

/// Projected forward-backward iteration
/// `u ← P(prox_τφ(u − τ G⁻¹(Op(u) − rhs)))`.
pub fn solve_vi(inst: &ViInstance<'_>, tol: f64, max_iter: usize) -> Result<SolveReport> {
    let n = inst.metric.dim();
    check_len(n, inst.rhs.len())?;
    check_len(n, inst.projector.set().dim())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    if !(inst.m > 0.0 && inst.m.is_finite()) {
        return Err(Error::InvalidConstants(format!("strong monotonicity constant m = {} must be positive", inst.m)));
    }
    let mut u = match inst.start {
        Some(s) => {
            check_len(n, s.len())?;
            inst.projector.project(s)
        }
        None => inst.projector.project(&DVector::zeros(n)),
    };
    let (l, estimated) = match inst.lipschitz {
        Some(l) => (l, false),
        None => (ESTIMATE_INFLATION * estimate_lipschitz(inst.operator, inst.metric, &u), true),
    };
    let l = l.max(inst.m);
    let tau = inst.step_rule.step(inst.m, l);
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidConstants(format!("step size {tau} must be positive")));
    }

    let shifted_rhs;
    let rhs = match inst.perturbation {
        Perturbation::Linear(g) => {
            check_len(n, g.len())?;
            shifted_rhs = inst.rhs - g;
            &shifted_rhs
        }
        _ => inst.rhs,
    };

    let mut first_residual = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let force = (inst.operator)(&u) - rhs;
        let mut trial = &u - inst.metric.riesz(&force) * tau;
        if let Perturbation::Proximal { prox, .. } = inst.perturbation {
            trial = prox(&trial, tau);
        }
        let next = inst.projector.project(&trial);
        residual = inst.metric.norm(&(&next - &u));
        iterations += 1;
        if iterations == 1 {
            first_residual = residual;
        }
        u = next;
        if residual <= tol {
            break;
        }
    }
    let converged = residual <= tol;
    Ok(SolveReport {
        solution: u,
        iterations,
        final_residual: residual,
        converged,
        contraction_estimate: geometric_rate(first_residual, residual, iterations.saturating_sub(1)),
        step_size: tau,
        lipschitz_used: l,
        lipschitz_estimated: estimated,
    })
}

/// `⟨Op(u) − rhs, v − u⟩ + φ(v) − φ(u)`; nonnegative for every feasible `v`
/// when `u` solves the inequality.
pub fn vi_residual(inst: &ViInstance<'_>, u: &Coeffs, v: &Coeffs) -> f64 {
    let force = (inst.operator)(u) - inst.rhs;
    force.dot(&(v - u)) + inst.perturbation.evaluate(v) - inst.perturbation.evaluate(u)
}

/// Quasi-VI `⟨C(u̇) − rhs, v − u̇⟩ + j(w, u̇, v) − j(w, u̇, u̇) ≥ 0`.
pub struct QuasiViInstance<'a> {
    pub op_c: OperatorRef<'a>,
    pub m_c: f64,
    pub l_c: Option<f64>,
    pub j: &'a JSpec,
    pub w: &'a Coeffs,
    pub rhs: &'a Coeffs,
    pub projector: &'a MetricProjector,
    pub metric: &'a Metric,
    pub step_rule: StepRule,
    pub start: Option<&'a Coeffs>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiSolveReport {
    pub report: SolveReport,
    /// Outer residuals `‖z_{k+1} − z_k‖` in the metric.
    pub outer_residuals: Vec<f64>,
    pub outer_ratios: Vec<f64>,
    /// Set when the outer ratios stayed at or above one for
    /// [`STAGNATION_WINDOW`] consecutive iterations.
    pub stagnated: bool,
    pub inner_iterations: usize,
}

pub const STAGNATION_WINDOW: usize = 5;

/// Tracks successive residual ratios and flags persistent non-contraction.
#[derive(Debug, Clone, Default)]
pub(crate) struct RatioMonitor {
    pub residuals: Vec<f64>,
    pub ratios: Vec<f64>,
    streak: usize,
}

impl RatioMonitor {
    pub fn push(&mut self, r: f64) -> bool {
        if let Some(&prev) = self.residuals.last() {
            if prev > 0.0 {
                let ratio = r / prev;
                self.ratios.push(ratio);
                if ratio >= 1.0 {
                    self.streak += 1;
                } else {
                    self.streak = 0;
                }
            }
        }
        self.residuals.push(r);
        self.streak >= STAGNATION_WINDOW
    }
}

/// Freezes the second argument of `j`, solves the resulting VI and repeats.
pub fn solve_quasi_vi(inst: &QuasiViInstance<'_>, tol: f64, max_iter: usize) -> Result<QuasiSolveReport> {
    let n = inst.metric.dim();
    check_len(n, inst.rhs.len())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let inner_tol = (0.01 * tol).max(1e-15);
    let inner_max = 100_000;
    let mut z = match inst.start {
        Some(s) => {
            check_len(n, s.len())?;
            inst.projector.project(s)
        }
        None => inst.projector.project(&DVector::zeros(n)),
    };
    let mut monitor = RatioMonitor::default();
    let mut inner_iterations = 0;
    let mut last: Option<SolveReport> = None;
    let mut stagnated = false;
    let mut lipschitz = inst.l_c;

    for _ in 0..max_iter.max(1) {
        let gradient;
        let evaluate;
        let prox;
        let perturbation = match inst.j.gradient(inst.w, &z) {
            Some(g) => {
                gradient = g;
                Perturbation::Linear(&gradient)
            }
            None => {
                let (w, zf, j) = (inst.w, z.clone(), inst.j);
                let zp = zf.clone();
                evaluate = move |v: &Coeffs| j.evaluate(w, &zf, v);
                prox = move |p: &Coeffs, s: f64| j.prox(w, &zp, p, s).expect("proximal form");
                Perturbation::Proximal { evaluate: &evaluate, prox: &prox }
            }
        };
        let vi = ViInstance {
            operator: inst.op_c,
            m: inst.m_c,
            lipschitz,
            perturbation,
            rhs: inst.rhs,
            projector: inst.projector,
            metric: inst.metric,
            step_rule: inst.step_rule,
            start: Some(&z),
        };
        let report = solve_vi(&vi, inner_tol, inner_max)?;
        lipschitz = Some(report.lipschitz_used);
        inner_iterations += report.iterations;
        let change = inst.metric.norm(&(&report.solution - &z));
        z = report.solution.clone();
        last = Some(report);
        stagnated = monitor.push(change);
        if change <= tol || stagnated {
            break;
        }
    }

    let mut report = last.expect("at least one outer iteration");
    let outer_residual = *monitor.residuals.last().unwrap_or(&0.0);
    report.converged = report.converged && outer_residual <= tol && !stagnated;
    report.final_residual = outer_residual;
    report.iterations = monitor.residuals.len();
    report.contraction_estimate = monitor.ratios.last().copied().unwrap_or(0.0);
    Ok(QuasiSolveReport {
        report,
        outer_residuals: monitor.residuals,
        outer_ratios: monitor.ratios,
        stagnated,
        inner_iterations,
    })
}
