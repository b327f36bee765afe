//! Independent oracles and diagnostics: brute-force solutions of tiny
//! variational inequalities, contraction-rate measurement, linear
//! manufactured references and data-stability probes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::history::TimeGrid;
use crate::problem::{Constants, DqviProblem, JSpec};
use crate::spaces::{Coeffs, ConvexSet, DiscreteSpace, Metric, MetricProjector, SpaceLabel};
use crate::stepper::{run, StepperConfig, Trajectory};
use crate::vi::{solve_vi, Perturbation, StepRule, ViInstance};

/// A symmetric VI of dimension at most 3: find `u ∈ K` with
/// `⟨A u + g − f, v − u⟩ ≥ 0` for all `v ∈ K`, i.e. the minimizer of
/// `½uᵀAu − (f − g)ᵀu` over `K`.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub operator: DMatrix<f64>,
    pub set: ConvexSet,
    pub j_gradient: Coeffs,
    pub rhs: Coeffs,
}

impl OracleInstance {
    pub fn new(operator: DMatrix<f64>, set: ConvexSet, j_gradient: Coeffs, rhs: Coeffs) -> Result<Self> {
        let n = operator.nrows();
        if n == 0 || n > 3 || operator.ncols() != n {
            return Err(Error::Oracle(format!("oracle needs a square operator of dimension 1 to 3, got {}x{}", n, operator.ncols())));
        }
        check_len(n, set.dim())?;
        check_len(n, j_gradient.len())?;
        check_len(n, rhs.len())?;
        if (&operator - operator.transpose()).amax() > 1e-12 * operator.amax().max(1.0) {
            return Err(Error::Oracle("oracle operator must be symmetric".into()));
        }
        Ok(Self { operator, set, j_gradient, rhs })
    }

    /// Random SPD instance on a box or a coordinate half-space.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let n = rng.gen_range(1..=3);
        let q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let operator = q.transpose() * &q + DMatrix::identity(n, n) * rng.gen_range(0.2..1.5);
        let set = if rng.gen_bool(0.5) {
            let half = rng.gen_range(0.2..2.0);
            ConvexSet::interval(n, -half, half).expect("finite bounds")
        } else {
            let count = rng.gen_range(1..=n);
            let indices = (0..count).map(|_| rng.gen_range(0..n)).collect();
            ConvexSet::upper_bound(n, indices, rng.gen_range(0.0..1.0)).expect("valid indices")
        };
        let j_gradient = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let rhs = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
        Self { operator, set, j_gradient, rhs }
    }

    pub fn dim(&self) -> usize {
        self.operator.nrows()
    }

    pub fn objective(&self, x: &Coeffs) -> f64 {
        0.5 * (&self.operator * x).dot(x) - (&self.rhs - &self.j_gradient).dot(x)
    }

    /// Solves the instance with [`solve_vi`] in the Euclidean metric.
    pub fn solve(&self, tol: f64) -> Result<Coeffs> {
        let n = self.dim();
        let eig = self.operator.clone().symmetric_eigen().eigenvalues;
        let (m, l) = (eig.min(), eig.max());
        let metric = Metric::identity(n);
        let projector = MetricProjector::new(&self.set, &metric)?;
        let a = self.operator.clone();
        let op = move |u: &Coeffs| &a * u;
        let inst = ViInstance {
            operator: &op,
            m,
            lipschitz: Some(l),
            perturbation: Perturbation::Linear(&self.j_gradient),
            rhs: &self.rhs,
            projector: &projector,
            metric: &metric,
            step_rule: StepRule::Symmetric,
            start: None,
        };
        let report = solve_vi(&inst, tol, 1_000_000)?;
        if !report.converged {
            return Err(Error::Oracle(format!("solve_vi stalled at residual {}", report.final_residual)));
        }
        Ok(report.solution)
    }
}

/// Search box of the brute-force oracle: the set intersected with a ball
/// around the unconstrained minimizer that must contain the solution.
fn search_box(inst: &OracleInstance) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lower, upper) = inst.set.bounds();
    if lower.iter().chain(&upper).all(|b| b.is_finite()) {
        return Ok((lower, upper));
    }
    let chol = inst
        .operator
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Oracle("unbounded set with indefinite operator".into()))?;
    let center = chol.solve(&(&inst.rhs - &inst.j_gradient));
    let feasible = inst.set.project(&center);
    let d = &feasible - &center;
    let lambda_min = inst.operator.clone().symmetric_eigen().eigenvalues.min();
    let radius = ((&inst.operator * &d).dot(&d) / lambda_min).sqrt() * 1.01 + 1e-12;
    let lo = (0..inst.dim()).map(|i| lower[i].max(center[i] - radius)).collect();
    let hi = (0..inst.dim()).map(|i| upper[i].min(center[i] + radius)).collect();
    Ok((lo, hi))
}

/// Dense grid minimization over the (bounded) search box followed by a
/// compass-search refinement.
pub fn brute_force_vi(inst: &OracleInstance, grid_points: usize) -> Result<Coeffs> {
    if grid_points < 101 {
        return Err(Error::Oracle(format!("grid_points must be at least 101, got {grid_points}")));
    }
    let n = inst.dim();
    let (lo, hi) = search_box(inst)?;
    let counts: Vec<usize> = (0..n).map(|i| if hi[i] > lo[i] { grid_points } else { 1 }).collect();
    let coord = |i: usize, k: usize| {
        if counts[i] == 1 {
            lo[i]
        } else {
            lo[i] + (hi[i] - lo[i]) * k as f64 / (counts[i] - 1) as f64
        }
    };
    let total: usize = counts.iter().product();
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for (i, row) in a.iter_mut().enumerate().take(n) {
        b[i] = inst.rhs[i] - inst.j_gradient[i];
        for (j, aij) in row.iter_mut().enumerate().take(n) {
            *aij = inst.operator[(i, j)];
        }
    }
    let point = |mut idx: usize| {
        let mut x = [0.0; 3];
        for (i, xi) in x.iter_mut().enumerate().take(n) {
            *xi = coord(i, idx % counts[i]);
            idx /= counts[i];
        }
        x
    };
    let value = |x: &[f64; 3]| {
        let mut q = 0.0;
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            q += x[i] * (0.5 * ax - b[i]);
        }
        q
    };
    let (_, best) = (0..total)
        .into_par_iter()
        .map(|k| (value(&point(k)), k))
        .reduce(|| (f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let best = point(best);
    let mut x = DVector::from_column_slice(&best[..n]);
    let mut fx = inst.objective(&x);

    let width = (0..n).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
    let mut h = width / (grid_points - 1) as f64;
    while h > 1e-13 * width.max(1.0) {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..n {
                for s in [h, -h] {
                    let mut y = x.clone();
                    y[i] = (y[i] + s).clamp(lo[i], hi[i]);
                    let fy = inst.objective(&y);
                    if fy < fx {
                        x = y;
                        fx = fy;
                        improved = true;
                    }
                }
            }
        }
        h *= 0.5;
    }
    Ok(x)
}

/// Successive-difference ratios of an iterated map.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionSequence {
    /// `‖x_{k+1} − x_k‖` for `k = 0, 1, …`.
    pub differences: Vec<f64>,
    /// `differences[k] / differences[k − 1]`.
    pub ratios: Vec<f64>,
    /// The iteration reached a difference at or below the floor, after
    /// which ratios are undefined.
    pub landed: bool,
}

impl ContractionSequence {
    /// Largest ratio from index `skip` on (zero if none).
    pub fn max_ratio_from(&self, skip: usize) -> f64 {
        self.ratios.iter().skip(skip).copied().fold(0.0, f64::max)
    }
}

/// Iterates `map` from `start` and records successive-difference ratios,
/// stopping early once a difference is at or below `floor`.
pub fn measure_contraction<T, M, D>(mut map: M, dist: D, start: T, iterations: usize, floor: f64) -> Result<ContractionSequence>
where
    M: FnMut(&T) -> Result<T>,
    D: Fn(&T, &T) -> f64,
{
    if iterations < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 iterations, got {iterations}")));
    }
    let mut seq = ContractionSequence { differences: Vec::new(), ratios: Vec::new(), landed: false };
    let mut x = start;
    for _ in 0..iterations {
        let next = map(&x)?;
        let d = dist(&next, &x);
        if d <= floor {
            seq.landed = true;
            break;
        }
        if let Some(&prev) = seq.differences.last() {
            seq.ratios.push(d / prev);
        }
        seq.differences.push(d);
        x = next;
    }
    Ok(seq)
}

/// Linear data with an exponential memory kernel:
///
/// `C u̇ + A u + ∫₀ᵗ e^{−β(t−s)}(B_u u + B_z ζ) ds + J_w w = f₀ + f₁ t`,
/// `ẇ = F_w w + F_v u̇ + f_w`, `M ζ̇ + K ζ = M(P_u u + P_z ζ + φ₀)`.
///
/// V and W carry Euclidean inner products, Y the Gram `M + K` with pivot `M`.
#[derive(Debug, Clone)]
pub struct LinearSpec {
    pub c: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_z: DMatrix<f64>,
    pub beta: f64,
    pub j_w: DMatrix<f64>,
    pub f0: Coeffs,
    pub f1: Coeffs,
    pub f_w: DMatrix<f64>,
    pub f_v: DMatrix<f64>,
    pub f_w0: Coeffs,
    pub p_u: DMatrix<f64>,
    pub p_z: DMatrix<f64>,
    pub phi0: Coeffs,
    pub form_a: DMatrix<f64>,
    pub mass_y: DMatrix<f64>,
    pub u0: Coeffs,
    pub w0: Coeffs,
    pub zeta0: Coeffs,
    pub horizon: f64,
}

fn scalar(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

fn vec1(x: f64) -> Coeffs {
    DVector::from_element(1, x)
}

impl LinearSpec {
    /// All-zero data in dimensions `(V, W, Y)`, with unit viscosity, mass and
    /// diffusion and damage starting at ½.
    pub fn zero(nv: usize, nw: usize, ny: usize, horizon: f64) -> Self {
        Self {
            c: DMatrix::identity(nv, nv),
            a: DMatrix::zeros(nv, nv),
            b_u: DMatrix::zeros(nv, nv),
            b_z: DMatrix::zeros(nv, ny),
            beta: 0.0,
            j_w: DMatrix::zeros(nv, nw),
            f0: DVector::zeros(nv),
            f1: DVector::zeros(nv),
            f_w: DMatrix::zeros(nw, nw),
            f_v: DMatrix::zeros(nw, nv),
            f_w0: DVector::zeros(nw),
            p_u: DMatrix::zeros(ny, nv),
            p_z: DMatrix::zeros(ny, ny),
            phi0: DVector::zeros(ny),
            form_a: DMatrix::identity(ny, ny),
            mass_y: DMatrix::identity(ny, ny),
            u0: DVector::zeros(nv),
            w0: DVector::zeros(nw),
            zeta0: DVector::from_element(ny, 0.5),
            horizon,
        }
    }

    /// A fully coupled scalar instance whose damage stays inside `(0, 1)`.
    pub fn coupled_scalar() -> Self {
        Self {
            c: scalar(2.0),
            a: scalar(1.0),
            b_u: scalar(0.5),
            b_z: scalar(0.3),
            beta: 1.0,
            j_w: scalar(0.4),
            f0: vec1(1.0),
            f1: vec1(0.5),
            f_w: scalar(-0.5),
            f_v: scalar(0.3),
            f_w0: vec1(0.1),
            p_u: scalar(0.2),
            p_z: scalar(-0.3),
            phi0: vec1(0.1),
            form_a: scalar(0.5),
            mass_y: scalar(1.0),
            u0: vec1(0.0),
            w0: vec1(0.0),
            zeta0: vec1(0.5),
            horizon: 1.0,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.c.nrows(), self.f_w.nrows(), self.form_a.nrows())
    }

    fn validate(&self) -> Result<()> {
        let (nv, nw, ny) = self.dims();
        let shapes = [
            ("c", &self.c, nv, nv),
            ("a", &self.a, nv, nv),
            ("b_u", &self.b_u, nv, nv),
            ("b_z", &self.b_z, nv, ny),
            ("j_w", &self.j_w, nv, nw),
            ("f_w", &self.f_w, nw, nw),
            ("f_v", &self.f_v, nw, nv),
            ("p_u", &self.p_u, ny, nv),
            ("p_z", &self.p_z, ny, ny),
            ("form_a", &self.form_a, ny, ny),
            ("mass_y", &self.mass_y, ny, ny),
        ];
        for (name, m, r, c) in shapes {
            if m.nrows() != r || m.ncols() != c {
                return Err(Error::InvalidInput(format!("{name} must be {r}x{c}, got {}x{}", m.nrows(), m.ncols())));
            }
        }
        for (v, n) in [(&self.f0, nv), (&self.f1, nv), (&self.u0, nv), (&self.f_w0, nw), (&self.w0, nw), (&self.phi0, ny), (&self.zeta0, ny)] {
            check_len(n, v.len())?;
        }
        if !(self.horizon > 0.0) || self.beta < 0.0 {
            return Err(Error::InvalidInput("need horizon > 0 and beta >= 0".into()));
        }
        Ok(())
    }

    fn forcing(&self, t: f64) -> Coeffs {
        &self.f0 + &self.f1 * t
    }

    /// The corresponding [`DqviProblem`] with K_V = V and K_Y = [0,1]^Y.
    pub fn problem(&self) -> Result<DqviProblem> {
        self.validate()?;
        let (nv, nw, ny) = self.dims();
        let gram_y = &self.mass_y + &self.form_a;
        let space_v = DiscreteSpace::euclidean(SpaceLabel::V, nv);
        let space_w = DiscreteSpace::euclidean(SpaceLabel::W, nw);
        let space_y = DiscreteSpace::new(SpaceLabel::Y, gram_y.clone(), self.mass_y.clone())?;
        let my = Metric::new(self.mass_y.clone())?;
        let gy = Metric::new(gram_y)?;
        let spectral = |m: &DMatrix<f64>| if m.is_empty() { 0.0 } else { m.singular_values().max() };
        let from_y = |m: &DMatrix<f64>, target: &DMatrix<f64>, from: &Metric| {
            if m.is_empty() {
                0.0
            } else {
                from.generalized_extremes(&(m.transpose() * target * m)).1.max(0.0).sqrt()
            }
        };
        let c_sym = (&self.c + self.c.transpose()) * 0.5;
        let m_c = c_sym.symmetric_eigen().eigenvalues.min();
        let l_b = spectral(&self.b_u).max(from_y(&self.b_z, &DMatrix::identity(nv, nv), &gy));
        let l_phi = from_y(&self.p_u, &self.mass_y, &Metric::identity(nv)).max(from_y(&self.p_z, &self.mass_y, &my));
        let constants = Constants {
            l_a: spectral(&self.a),
            l_b,
            rho: l_b,
            l_c1: spectral(&self.c),
            l_c2: 0.0,
            m_c,
            alpha0: spectral(&self.j_w),
            alpha1: 0.0,
            l_f: spectral(&self.f_w).max(spectral(&self.f_v)),
            l_phi,
            a1: 1.0,
            a2: 1.0,
            horizon: self.horizon,
        };
        let s = Arc::new(self.clone());
        let j = {
            let jw = self.j_w.clone();
            JSpec::linear(Arc::new(move |w: &Coeffs, _: &Coeffs| &jw * w))
        };
        DqviProblem::builder(space_v, space_y, space_w)
            .k_v(ConvexSet::whole(nv))
            .k_y(ConvexSet::unit_interval(ny))
            .op_a({
                let s = s.clone();
                move |_, u| &s.a * u
            })
            .op_c({
                let s = s.clone();
                move |_, v| &s.c * v
            })
            .op_b({
                let s = s.clone();
                move |tau, u, z| (&s.b_u * u + &s.b_z * z) * (-s.beta * tau).exp()
            })
            .op_f({
                let s = s.clone();
                move |_, w, v| &s.f_w * w + &s.f_v * v + &s.f_w0
            })
            .op_phi({
                let s = s.clone();
                move |_, u, z| &s.p_u * u + &s.p_z * z + &s.phi0
            })
            .form_a(self.form_a.clone())
            .j(j)
            .forcing(move |t| s.forcing(t))
            .initial(self.u0.clone(), self.w0.clone(), self.zeta0.clone())
            .constants(constants)
            .build()
    }
}

/// Nodal values of a trajectory on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySamples {
    pub times: Vec<f64>,
    pub u: Vec<Coeffs>,
    pub udot: Vec<Coeffs>,
    pub w: Vec<Coeffs>,
    pub zeta: Vec<Coeffs>,
}

impl TrajectorySamples {
    pub fn from_trajectory(t: &Trajectory) -> Self {
        Self {
            times: t.states.iter().map(|s| s.t).collect(),
            u: t.states.iter().map(|s| s.u.clone()).collect(),
            udot: t.states.iter().map(|s| s.udot.clone()).collect(),
            w: t.states.iter().map(|s| s.w.clone()).collect(),
            zeta: t.states.iter().map(|s| s.zeta.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Every `stride`-th node, starting at node 0.
    pub fn subsample(&self, stride: usize) -> Self {
        let pick = |v: &Vec<Coeffs>| v.iter().step_by(stride).cloned().collect();
        Self {
            times: self.times.iter().step_by(stride).copied().collect(),
            u: pick(&self.u),
            udot: pick(&self.udot),
            w: pick(&self.w),
            zeta: pick(&self.zeta),
        }
    }

    /// Largest entrywise difference over all fields and nodes; `other` may
    /// be finer by an integer factor, in which case it is subsampled.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        if self.is_empty() || other.is_empty() || !(other.len() - 1).is_multiple_of((self.len() - 1).max(1)) {
            return Err(Error::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        let stride = (other.len() - 1) / (self.len() - 1).max(1);
        let o = other.subsample(stride.max(1));
        let field = |a: &[Coeffs], b: &[Coeffs]| a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
        Ok(field(&self.u, &o.u).max(field(&self.udot, &o.udot)).max(field(&self.w, &o.w)).max(field(&self.zeta, &o.zeta)))
    }

    /// Largest difference of the velocity fields only.
    pub fn velocity_distance(&self, other: &Self) -> f64 {
        self.udot.iter().zip(&other.udot).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
    }
}

fn check_interior(s: &TrajectorySamples) -> Result<()> {
    for (z, t) in s.zeta.iter().zip(&s.times) {
        if z.iter().any(|&v| v <= 0.0 || v >= 1.0) {
            return Err(Error::Oracle(format!("damage constraint active at t = {t}; linear reference invalid")));
        }
    }
    Ok(())
}

/// The time-stepping scheme of the stepper written out as one dense linear
/// solve per step (wear explicit in `w`, damage source frozen at the previous
/// step, trapezoidal memory).
pub fn linear_scheme(spec: &LinearSpec, steps: usize) -> Result<TrajectorySamples> {
    spec.validate()?;
    let (nv, _, _) = spec.dims();
    let grid = TimeGrid::new(spec.horizon, steps)?;
    let dt = grid.dt();
    let decay = (-spec.beta * dt).exp();
    let q = (&spec.mass_y + &spec.form_a * dt).lu();
    let qm = q.solve(&spec.mass_y).ok_or_else(|| Error::NotPositiveDefinite("M + dt K".into()))?;
    let z_of_eta = &qm * &spec.p_u * (dt * dt);
    let lhs = &spec.c + &spec.a * dt + &spec.b_u * (0.5 * dt * dt) + &spec.b_z * &z_of_eta * (0.5 * dt) + &spec.j_w * &spec.f_v * dt;
    let lu = lhs.lu();

    let udot0 = spec
        .c
        .clone()
        .lu()
        .solve(&(spec.forcing(0.0) - &spec.a * &spec.u0 - &spec.j_w * &spec.w0))
        .ok_or_else(|| Error::Oracle("singular viscosity".into()))?;
    let mut out = TrajectorySamples {
        times: vec![0.0],
        u: vec![spec.u0.clone()],
        udot: vec![udot0],
        w: vec![spec.w0.clone()],
        zeta: vec![spec.zeta0.clone()],
    };
    let mut memory = DVector::zeros(nv);
    for n in 1..=steps {
        let t = grid.node(n);
        let (u, w, z) = (&out.u[n - 1], &out.w[n - 1], &out.zeta[n - 1]);
        let weight = if n == 1 { 0.5 } else { 1.0 };
        memory = (memory + (&spec.b_u * u + &spec.b_z * z) * weight) * decay;
        let w_c = w + (&spec.f_w * w + &spec.f_w0) * dt;
        let z_c = &qm * (z + (&spec.p_u * u + &spec.p_z * z + &spec.phi0) * dt);
        let rhs = spec.forcing(t) - &spec.a * u - &memory * dt - (&spec.b_u * u + &spec.b_z * &z_c) * (0.5 * dt) - &spec.j_w * &w_c;
        let eta = lu.solve(&rhs).ok_or_else(|| Error::Oracle("singular step matrix".into()))?;
        out.times.push(t);
        out.u.push(u + &eta * dt);
        out.w.push(w_c + &spec.f_v * &eta * dt);
        out.zeta.push(z_c + &z_of_eta * &eta);
        out.udot.push(eta);
    }
    Ok(out)
}

/// Reference trajectory on `steps` intervals from the same scheme run with a
/// 64 times smaller step.
pub fn manufactured_linear_oracle(spec: &LinearSpec, steps: usize) -> Result<TrajectorySamples> {
    let fine = linear_scheme(spec, steps * 64)?;
    check_interior(&fine)?;
    Ok(fine.subsample(64))
}

/// Exact solution of the continuous linear system at `times`, obtained from
/// the matrix exponential of the system augmented by the memory variable
/// `h = ∫₀ᵗ e^{−β(t−s)}(B_u u + B_z ζ) ds`, time and a constant.
pub fn linear_closed_form(spec: &LinearSpec, times: &[f64]) -> Result<TrajectorySamples> {
    spec.validate()?;
    let (nv, nw, ny) = spec.dims();
    let c_inv = spec.c.clone().try_inverse().ok_or_else(|| Error::Oracle("singular viscosity".into()))?;
    let m_inv = spec.mass_y.clone().try_inverse().ok_or_else(|| Error::Oracle("singular mass".into()))?;
    let (iu, ih, iw, iz) = (0, nv, 2 * nv, 2 * nv + nw);
    let (is, ione) = (iz + ny, iz + ny + 1);
    let dim = ione + 1;
    // rows of u̇ as a map of the augmented state
    let mut udot_row = DMatrix::zeros(nv, dim);
    udot_row.view_mut((0, iu), (nv, nv)).copy_from(&(-&c_inv * &spec.a));
    udot_row.view_mut((0, ih), (nv, nv)).copy_from(&(-&c_inv));
    udot_row.view_mut((0, iw), (nv, nw)).copy_from(&(-&c_inv * &spec.j_w));
    udot_row.view_mut((0, is), (nv, 1)).copy_from(&(&c_inv * &spec.f1));
    udot_row.view_mut((0, ione), (nv, 1)).copy_from(&(&c_inv * &spec.f0));

    let mut l = DMatrix::zeros(dim, dim);
    l.view_mut((iu, 0), (nv, dim)).copy_from(&udot_row);
    l.view_mut((ih, ih), (nv, nv)).copy_from(&(DMatrix::identity(nv, nv) * -spec.beta));
    l.view_mut((ih, iu), (nv, nv)).copy_from(&spec.b_u);
    l.view_mut((ih, iz), (nv, ny)).copy_from(&spec.b_z);
    let wrow = &spec.f_v * &udot_row;
    l.view_mut((iw, 0), (nw, dim)).copy_from(&wrow);
    let fw = l.view((iw, iw), (nw, nw)) + &spec.f_w;
    l.view_mut((iw, iw), (nw, nw)).copy_from(&fw);
    let fw0 = l.view((iw, ione), (nw, 1)) + &spec.f_w0;
    l.view_mut((iw, ione), (nw, 1)).copy_from(&fw0);
    l.view_mut((iz, iu), (ny, nv)).copy_from(&spec.p_u);
    l.view_mut((iz, iz), (ny, ny)).copy_from(&(&spec.p_z - &m_inv * &spec.form_a));
    l.view_mut((iz, ione), (ny, 1)).copy_from(&spec.phi0);
    l[(is, ione)] = 1.0;

    let mut x0 = DVector::zeros(dim);
    x0.rows_mut(iu, nv).copy_from(&spec.u0);
    x0.rows_mut(iw, nw).copy_from(&spec.w0);
    x0.rows_mut(iz, ny).copy_from(&spec.zeta0);
    x0[ione] = 1.0;

    let mut out = TrajectorySamples { times: Vec::new(), u: Vec::new(), udot: Vec::new(), w: Vec::new(), zeta: Vec::new() };
    for &t in times {
        let x = (&l * t).exp() * &x0;
        out.times.push(t);
        out.u.push(x.rows(iu, nv).into_owned());
        out.udot.push(&udot_row * &x);
        out.w.push(x.rows(iw, nw).into_owned());
        out.zeta.push(x.rows(iz, ny).into_owned());
    }
    check_interior(&out)?;
    Ok(out)
}

/// `log₂(‖a − b‖ / ‖b − c‖)` for three runs whose step halves each time.
pub fn richardson_order(coarse: &TrajectorySamples, mid: &TrajectorySamples, fine: &TrajectorySamples) -> Result<f64> {
    let d1 = coarse.sup_distance(mid)?;
    let d_mid_fine = mid.sup_distance(fine)?;
    if d_mid_fine == 0.0 {
        return Err(Error::Oracle("identical refinements; order undefined".into()));
    }
    Ok((d1 / d_mid_fine).log2())
}

/// Observed orders between consecutive entries of `errors` for step sizes
/// halving each time.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}

/// Copy of `p` whose forcing is shifted by `δ · direction / ‖direction‖_{V*}`.
pub fn perturb_forcing(p: &DqviProblem, direction: &Coeffs, delta: f64) -> Result<DqviProblem> {
    check_len(p.space_v.dim(), direction.len())?;
    let norm = p.space_v.primary().dual_norm(direction);
    if norm == 0.0 {
        return Err(Error::InvalidInput("perturbation direction is zero".into()));
    }
    let shift = direction * (delta / norm);
    let base = p.forcing.clone();
    let mut q = p.clone();
    q.forcing = Arc::new(move |t| base(t) + &shift);
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityProbe {
    pub delta: f64,
    pub steps: usize,
    /// `sup_n ‖u̇ᵟ_n − u̇_n‖_V / δ`.
    pub constant: f64,
}

/// Measures how a forcing perturbation of size δ propagates to the velocity.
pub fn gronwall_probe(
    p: &DqviProblem,
    grid: TimeGrid,
    cfg: StepperConfig,
    direction: &Coeffs,
    deltas: &[f64],
) -> Result<Vec<StabilityProbe>> {
    let base = run(p, grid, cfg).map_err(|f| f.error)?;
    deltas
        .iter()
        .map(|&delta| {
            let q = perturb_forcing(p, direction, delta)?;
            let pert = run(&q, grid, cfg).map_err(|f| f.error)?;
            let sup = base
                .states
                .iter()
                .zip(&pert.states)
                .map(|(a, b)| p.space_v.primary().norm(&(&a.udot - &b.udot)))
                .fold(0.0, f64::max);
            Ok(StabilityProbe { delta, steps: grid.steps(), constant: sup / delta })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn centered_minimum_on_box() {
        let inst = OracleInstance::new(
            DMatrix::identity(2, 2),
            ConvexSet::interval(2, -1.0, 1.0).unwrap(),
            DVector::zeros(2),
            DVector::zeros(2),
        )
        .unwrap();
        let x = brute_force_vi(&inst, 101).unwrap();
        assert!(x.amax() < 1e-10);
    }

    #[test]
    fn half_space_kkt_point() {
        let inst = OracleInstance::new(
            DMatrix::identity(2, 2) * 2.0,
            ConvexSet::upper_bound(2, vec![0], 1.0).unwrap(),
            DVector::zeros(2),
            DVector::from_vec(vec![4.0, 0.0]),
        )
        .unwrap();
        let x = brute_force_vi(&inst, 101).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-8 && x[1].abs() < 1e-8);
        let y = inst.solve(1e-12).unwrap();
        assert!((&x - &y).amax() < 1e-8);
    }

    #[test]
    fn rejects_small_grid_and_large_dimension() {
        let inst = OracleInstance::new(DMatrix::identity(1, 1), ConvexSet::whole(1), DVector::zeros(1), DVector::zeros(1)).unwrap();
        assert!(brute_force_vi(&inst, 50).is_err());
        assert!(OracleInstance::new(DMatrix::identity(4, 4), ConvexSet::whole(4), DVector::zeros(4), DVector::zeros(4)).is_err());
    }

    #[test]
    fn unbounded_indefinite_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let inst = OracleInstance::new(a, ConvexSet::upper_bound(2, vec![0], 0.5).unwrap(), DVector::zeros(2), DVector::zeros(2)).unwrap();
        assert!(matches!(brute_force_vi(&inst, 101), Err(Error::Oracle(_))));
    }

    #[test]
    fn random_instances_agree_with_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let inst = OracleInstance::random(&mut rng);
            let x = brute_force_vi(&inst, 101).unwrap();
            let y = inst.solve(1e-12).unwrap();
            assert!((&x - &y).amax() < 1e-4, "{x} vs {y}");
        }
    }

    #[test]
    fn exact_linear_contraction_ratios() {
        let seq = measure_contraction(|x: &f64| Ok(0.5 * x), |a, b| (a - b).abs(), 1.0, 10, 0.0).unwrap();
        assert!(!seq.landed);
        assert_eq!(seq.ratios.len(), 9);
        assert!(seq.ratios.iter().all(|&r| r == 0.5));
    }

    #[test]
    fn identity_map_lands_immediately() {
        let seq = measure_contraction(|x: &f64| Ok(*x), |a, b| (a - b).abs(), 1.0, 5, 0.0).unwrap();
        assert!(seq.landed);
        assert!(seq.ratios.is_empty());
        assert!(measure_contraction(|x: &f64| Ok(*x), |a, b| (a - b).abs(), 1.0, 2, 0.0).is_err());
    }

    #[test]
    fn known_lipschitz_ratios_settle_below_bound() {
        let seq = measure_contraction(|x: &f64| Ok(0.7 * x.sin() + 0.1), |a, b| (a - b).abs(), 1.0, 40, 1e-14).unwrap();
        assert!(seq.max_ratio_from(3) <= 0.72);
    }

    #[test]
    fn zero_data_gives_zero_reference() {
        let mut spec = LinearSpec::zero(2, 1, 1, 1.0);
        spec.form_a = DMatrix::zeros(1, 1);
        let r = manufactured_linear_oracle(&spec, 4).unwrap();
        assert_eq!(r.len(), 5);
        assert!(r.u.iter().chain(&r.udot).chain(&r.w).all(|x| x.amax() == 0.0));
        assert!(r.zeta.iter().all(|z| z[0] == 0.5));
    }

    #[test]
    fn decoupled_wear_decay() {
        let mut spec = LinearSpec::zero(1, 1, 1, 1.0);
        spec.form_a = DMatrix::zeros(1, 1);
        spec.f_w = scalar(-1.0);
        spec.w0 = vec1(1.0);
        let r = manufactured_linear_oracle(&spec, 10).unwrap();
        let dt_ref = 1.0 / 640.0;
        for (t, w) in r.times.iter().zip(&r.w) {
            assert!((w[0] - (-t).exp()).abs() <= dt_ref);
        }
        let exact = linear_closed_form(&spec, &r.times).unwrap();
        assert!((exact.w[10][0] - (-1.0_f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn coupled_reference_is_first_order() {
        let spec = LinearSpec::coupled_scalar();
        let runs: Vec<_> = [8, 16, 32].iter().map(|&n| linear_scheme(&spec, n).unwrap()).collect();
        let order = richardson_order(&runs[0], &runs[1], &runs[2]).unwrap();
        assert!((0.9..=1.1).contains(&order), "order {order}");
    }

    #[test]
    fn scheme_matches_stepper() {
        let spec = LinearSpec::coupled_scalar();
        let p = spec.problem().unwrap();
        let traj = run(&p, TimeGrid::new(1.0, 16).unwrap(), StepperConfig::default()).unwrap();
        let a = TrajectorySamples::from_trajectory(&traj);
        let b = linear_scheme(&spec, 16).unwrap();
        assert!(a.sup_distance(&b).unwrap() < 1e-8);
    }

    #[test]
    fn active_damage_invalidates_reference() {
        let mut spec = LinearSpec::coupled_scalar();
        spec.phi0 = vec1(5.0);
        assert!(matches!(manufactured_linear_oracle(&spec, 4), Err(Error::Oracle(_))));
    }

    #[test]
    fn perturbation_has_requested_size() {
        let spec = LinearSpec::coupled_scalar();
        let p = spec.problem().unwrap();
        let q = perturb_forcing(&p, &vec1(-3.0), 0.01).unwrap();
        assert!(((q.forcing)(0.3) - (p.forcing)(0.3))[0] + 0.01 < 1e-15);
    }
}
