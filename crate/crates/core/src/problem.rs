//! The coupled problem: an evolution law for the wear variable, a
//! history-dependent quasivariational inequality for the velocity and a
//! parabolic variational inequality for the damage field.
//!
//! A [`DqviProblem`] bundles operator handles with constants declared by the
//! provider. The constants are never inferred; [`validate_hypotheses`] only
//! audits them against random samples.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::spaces::{Coeffs, ConvexSet, DiscreteSpace, Metric, NormKind};

/// `(t, x) ↦ load` for A and C.
pub type TimeOp = Arc<dyn Fn(f64, &Coeffs) -> Coeffs + Send + Sync>;
/// `(t, x, y) ↦ array` for B, F and φ.
pub type CoupledOp = Arc<dyn Fn(f64, &Coeffs, &Coeffs) -> Coeffs + Send + Sync>;
pub type Forcing = Arc<dyn Fn(f64) -> Coeffs + Send + Sync>;

type JEval = Arc<dyn Fn(&Coeffs, &Coeffs, &Coeffs) -> f64 + Send + Sync>;
type JGradient = Arc<dyn Fn(&Coeffs, &Coeffs) -> Coeffs + Send + Sync>;
type JProx = Arc<dyn Fn(&Coeffs, &Coeffs, &Coeffs, f64) -> Coeffs + Send + Sync>;

#[derive(Clone)]
enum JForm {
    Linear(JGradient),
    Proximal(JProx),
}

/// The nonsmooth functional `j(w, z, v)`, convex in `v`.
///
/// Arguments are `w` (W-array), `z` (V-array, the frozen velocity) and `v`
/// (V-array). When `j` is linear in `v` it is represented by its gradient,
/// a V*-array depending on `(w, z)`; otherwise by its proximal map.
#[derive(Clone)]
pub struct JSpec {
    evaluate: JEval,
    form: JForm,
    trace: Option<DMatrix<f64>>,
}

impl fmt::Debug for JSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JSpec").field("linear_in_v", &self.is_linear()).finish()
    }
}

impl JSpec {
    pub fn zero(dim_v: usize) -> Self {
        Self::linear(Arc::new(move |_, _| DVector::zeros(dim_v)))
    }

    /// `j(w, z, v) = ⟨gradient(w, z), v⟩`.
    pub fn linear(gradient: JGradient) -> Self {
        let g = gradient.clone();
        Self {
            evaluate: Arc::new(move |w, z, v| g(w, z).dot(v)),
            form: JForm::Linear(gradient),
            trace: None,
        }
    }

    /// General convex `j`; `prox(w, z, point, step)` must return the proximal
    /// point of `step · j(w, z, ·)` in the metric used by the solver.
    pub fn proximal(evaluate: JEval, prox: JProx) -> Self {
        Self { evaluate, form: JForm::Proximal(prox), trace: None }
    }

    /// Attaches the boundary trace matrix (trace rows × V columns).
    pub fn with_trace(mut self, trace: DMatrix<f64>) -> Self {
        self.trace = Some(trace);
        self
    }

    pub fn trace(&self) -> Option<&DMatrix<f64>> {
        self.trace.as_ref()
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.form, JForm::Linear(_))
    }

    pub fn evaluate(&self, w: &Coeffs, z: &Coeffs, v: &Coeffs) -> f64 {
        (self.evaluate)(w, z, v)
    }

    pub fn gradient(&self, w: &Coeffs, z: &Coeffs) -> Option<Coeffs> {
        match &self.form {
            JForm::Linear(g) => Some(g(w, z)),
            JForm::Proximal(_) => None,
        }
    }

    pub fn prox(&self, w: &Coeffs, z: &Coeffs, point: &Coeffs, step: f64) -> Option<Coeffs> {
        match &self.form {
            JForm::Linear(_) => None,
            JForm::Proximal(p) => Some(p(w, z, point, step)),
        }
    }
}

/// Constants declared by the problem provider.
///
/// `rho` is a uniform bound of the growth function of the memory kernel and
/// `horizon` is the final time T.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Constants {
    pub l_a: f64,
    pub l_b: f64,
    pub rho: f64,
    pub l_c1: f64,
    pub l_c2: f64,
    pub m_c: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub l_f: f64,
    pub l_phi: f64,
    pub a1: f64,
    pub a2: f64,
    pub horizon: f64,
}

impl Constants {
    /// `m_C − α₁`; the coupled problem is well posed when this is positive.
    pub fn margin(&self) -> f64 {
        self.m_c - self.alpha1
    }

    fn validate(&self) -> Result<()> {
        let named = [
            ("l_a", self.l_a),
            ("l_b", self.l_b),
            ("rho", self.rho),
            ("l_c1", self.l_c1),
            ("l_c2", self.l_c2),
            ("m_c", self.m_c),
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
            ("l_f", self.l_f),
            ("l_phi", self.l_phi),
            ("a1", self.a1),
            ("a2", self.a2),
            ("horizon", self.horizon),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConstants(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        if self.horizon <= 0.0 {
            return Err(Error::InvalidConstants("horizon must be positive".into()));
        }
        if self.a2 <= 0.0 {
            return Err(Error::InvalidConstants("a2 must be positive".into()));
        }
        Ok(())
    }
}

/// Closed-form constants bounding how the velocity reacts to perturbations of
/// wear (`c_p`, `c_q`) and damage (`c_r`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionConstants {
    pub c_p: f64,
    pub c_q: f64,
    pub c_r: f64,
}

/// Evaluates `c_p`, `c_q` and `c_r` (the latter at `t = T`).
pub fn contraction_constants(c: &Constants) -> Result<ContractionConstants> {
    let margin = c.margin();
    if margin <= 0.0 {
        return Err(Error::MarginViolated { m_c: c.m_c, alpha1: c.alpha1 });
    }
    let t = c.horizon;
    let growth = ((2.0 * c.l_a * t + c.l_b * t * t) / (2.0 * margin)).exp();
    let c_p = c.alpha0 / margin;
    let c_q = (c.l_a + c.l_b * t) * c.alpha0 / (margin * margin) * growth;
    let c_r = c.l_b * t.sqrt() / margin
        + 2.0 * c.l_b * t.powf(1.5) * (c.l_a + c.l_b * t) / (3.0 * margin * margin) * growth;
    Ok(ContractionConstants { c_p, c_q, c_r })
}

/// Metric in which the velocity inequality is iterated, with the strong
/// monotonicity and Lipschitz constants of C measured in that metric.
///
/// The default is the V inner product with `(m_C, L_C1)`. A metric close to
/// the Jacobian of C makes each forward-backward solve nearly one step.
#[derive(Debug, Clone)]
pub struct SolverMetric {
    pub metric: Metric,
    pub m: f64,
    pub l: Option<f64>,
}

/// The full operator bundle of the coupled problem.
#[derive(Clone)]
pub struct DqviProblem {
    pub space_v: DiscreteSpace,
    pub space_y: DiscreteSpace,
    pub space_w: DiscreteSpace,
    pub k_v: ConvexSet,
    pub k_y: ConvexSet,
    pub op_a: TimeOp,
    pub op_b: CoupledOp,
    pub op_c: TimeOp,
    pub op_f: CoupledOp,
    pub op_phi: CoupledOp,
    pub form_a: DMatrix<f64>,
    pub j: JSpec,
    pub forcing: Forcing,
    pub u0: Coeffs,
    pub w0: Coeffs,
    pub zeta0: Coeffs,
    pub constants: Constants,
    /// Radius (in the primary norms) of the ball the hypothesis audit samples.
    pub audit_radius: f64,
    /// Set when the problem was built despite `m_C ≤ α₁`.
    pub margin_overridden: bool,
    pub solver: SolverMetric,
}

impl fmt::Debug for DqviProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DqviProblem")
            .field("dim_v", &self.space_v.dim())
            .field("dim_y", &self.space_y.dim())
            .field("dim_w", &self.space_w.dim())
            .field("constants", &self.constants)
            .finish()
    }
}

impl DqviProblem {
    pub fn builder(space_v: DiscreteSpace, space_y: DiscreteSpace, space_w: DiscreteSpace) -> DqviBuilder {
        DqviBuilder::new(space_v, space_y, space_w)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.space_v.dim(), self.space_y.dim(), self.space_w.dim())
    }
}

/// Builder for [`DqviProblem`]; every operator defaults to zero and every
/// set to the whole space.
pub struct DqviBuilder {
    space_v: DiscreteSpace,
    space_y: DiscreteSpace,
    space_w: DiscreteSpace,
    k_v: Option<ConvexSet>,
    k_y: Option<ConvexSet>,
    op_a: Option<TimeOp>,
    op_b: Option<CoupledOp>,
    op_c: Option<TimeOp>,
    op_f: Option<CoupledOp>,
    op_phi: Option<CoupledOp>,
    form_a: Option<DMatrix<f64>>,
    j: Option<JSpec>,
    forcing: Option<Forcing>,
    u0: Option<Coeffs>,
    w0: Option<Coeffs>,
    zeta0: Option<Coeffs>,
    constants: Constants,
    audit_radius: f64,
    allow_margin_violation: bool,
    solver: Option<SolverMetric>,
}

impl DqviBuilder {
    fn new(space_v: DiscreteSpace, space_y: DiscreteSpace, space_w: DiscreteSpace) -> Self {
        Self {
            space_v,
            space_y,
            space_w,
            k_v: None,
            k_y: None,
            op_a: None,
            op_b: None,
            op_c: None,
            op_f: None,
            op_phi: None,
            form_a: None,
            j: None,
            forcing: None,
            u0: None,
            w0: None,
            zeta0: None,
            constants: Constants::default(),
            audit_radius: 1.0,
            allow_margin_violation: false,
            solver: None,
        }
    }

    pub fn k_v(mut self, set: ConvexSet) -> Self {
        self.k_v = Some(set);
        self
    }

    pub fn k_y(mut self, set: ConvexSet) -> Self {
        self.k_y = Some(set);
        self
    }

    pub fn op_a(mut self, op: impl Fn(f64, &Coeffs) -> Coeffs + Send + Sync + 'static) -> Self {
        self.op_a = Some(Arc::new(op));
        self
    }

    pub fn op_b(mut self, op: impl Fn(f64, &Coeffs, &Coeffs) -> Coeffs + Send + Sync + 'static) -> Self {
        self.op_b = Some(Arc::new(op));
        self
    }

    pub fn op_c(mut self, op: impl Fn(f64, &Coeffs) -> Coeffs + Send + Sync + 'static) -> Self {
        self.op_c = Some(Arc::new(op));
        self
    }

    pub fn op_f(mut self, op: impl Fn(f64, &Coeffs, &Coeffs) -> Coeffs + Send + Sync + 'static) -> Self {
        self.op_f = Some(Arc::new(op));
        self
    }

    pub fn op_phi(mut self, op: impl Fn(f64, &Coeffs, &Coeffs) -> Coeffs + Send + Sync + 'static) -> Self {
        self.op_phi = Some(Arc::new(op));
        self
    }

    pub fn form_a(mut self, a: DMatrix<f64>) -> Self {
        self.form_a = Some(a);
        self
    }

    pub fn j(mut self, j: JSpec) -> Self {
        self.j = Some(j);
        self
    }

    pub fn forcing(mut self, f: impl Fn(f64) -> Coeffs + Send + Sync + 'static) -> Self {
        self.forcing = Some(Arc::new(f));
        self
    }

    pub fn initial(mut self, u0: Coeffs, w0: Coeffs, zeta0: Coeffs) -> Self {
        self.u0 = Some(u0);
        self.w0 = Some(w0);
        self.zeta0 = Some(zeta0);
        self
    }

    pub fn constants(mut self, c: Constants) -> Self {
        self.constants = c;
        self
    }

    pub fn audit_radius(mut self, r: f64) -> Self {
        self.audit_radius = r;
        self
    }

    /// Accept `m_C ≤ α₁`. Used to study non-contracting configurations.
    pub fn allow_margin_violation(mut self, allow: bool) -> Self {
        self.allow_margin_violation = allow;
        self
    }

    pub fn solver_metric(mut self, solver: SolverMetric) -> Self {
        self.solver = Some(solver);
        self
    }

    pub fn build(self) -> Result<DqviProblem> {
        let (nv, ny, nw) = (self.space_v.dim(), self.space_y.dim(), self.space_w.dim());
        self.constants.validate()?;
        let margin_violated = self.constants.margin() <= 0.0;
        if margin_violated && !self.allow_margin_violation {
            return Err(Error::MarginViolated { m_c: self.constants.m_c, alpha1: self.constants.alpha1 });
        }
        if !(self.audit_radius > 0.0 && self.audit_radius.is_finite()) {
            return Err(Error::InvalidInput("audit radius must be positive".into()));
        }
        let form_a = self.form_a.unwrap_or_else(|| DMatrix::zeros(ny, ny));
        if form_a.nrows() != ny || form_a.ncols() != ny {
            return Err(Error::DimensionMismatch { expected: ny, got: form_a.nrows() });
        }
        let scale = form_a.amax().max(f64::MIN_POSITIVE);
        if (&form_a - form_a.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidInput("bilinear form a must be symmetric".into()));
        }

        let k_v = self.k_v.unwrap_or_else(|| ConvexSet::whole(nv));
        let k_y = self.k_y.unwrap_or_else(|| ConvexSet::whole(ny));
        check_len(nv, k_v.dim())?;
        check_len(ny, k_y.dim())?;

        let u0 = self.u0.unwrap_or_else(|| DVector::zeros(nv));
        let w0 = self.w0.unwrap_or_else(|| DVector::zeros(nw));
        let zeta0 = self.zeta0.unwrap_or_else(|| DVector::zeros(ny));
        check_len(nv, u0.len())?;
        check_len(nw, w0.len())?;
        check_len(ny, zeta0.len())?;
        if !k_v.contains(&u0) {
            return Err(Error::InvalidInput("initial displacement is not in K_V".into()));
        }
        if !k_y.contains(&zeta0) {
            return Err(Error::InvalidInput("initial damage is not in K_Y".into()));
        }

        let op_a: TimeOp = self.op_a.unwrap_or_else(|| Arc::new(move |_, _| DVector::zeros(nv)));
        let op_b: CoupledOp = self.op_b.unwrap_or_else(|| Arc::new(move |_, _, _| DVector::zeros(nv)));
        let op_c: TimeOp = self.op_c.unwrap_or_else(|| Arc::new(move |_, _| DVector::zeros(nv)));
        let op_f: CoupledOp = self.op_f.unwrap_or_else(|| Arc::new(move |_, _, _| DVector::zeros(nw)));
        let op_phi: CoupledOp = self.op_phi.unwrap_or_else(|| Arc::new(move |_, _, _| DVector::zeros(ny)));
        let forcing: Forcing = self.forcing.unwrap_or_else(|| Arc::new(move |_| DVector::zeros(nv)));
        let j = self.j.unwrap_or_else(|| JSpec::zero(nv));

        // probe output sizes once
        let zv = DVector::zeros(nv);
        let zy = DVector::zeros(ny);
        let zw = DVector::zeros(nw);
        check_len(nv, op_a(0.0, &zv).len())?;
        check_len(nv, op_b(0.0, &zv, &zy).len())?;
        check_len(nv, op_c(0.0, &zv).len())?;
        check_len(nw, op_f(0.0, &zw, &zv).len())?;
        check_len(ny, op_phi(0.0, &zv, &zy).len())?;
        check_len(nv, forcing(0.0).len())?;
        if let Some(g) = j.gradient(&zw, &zv) {
            check_len(nv, g.len())?;
        }

        let solver = match self.solver {
            Some(s) => {
                check_len(nv, s.metric.dim())?;
                if !(s.m > 0.0) {
                    return Err(Error::InvalidConstants("solver metric needs a positive monotonicity constant".into()));
                }
                s
            }
            None => SolverMetric {
                metric: self.space_v.primary().clone(),
                m: self.constants.m_c,
                l: (self.constants.l_c1 > 0.0).then_some(self.constants.l_c1),
            },
        };

        Ok(DqviProblem {
            space_v: self.space_v,
            space_y: self.space_y,
            space_w: self.space_w,
            k_v,
            k_y,
            op_a,
            op_b,
            op_c,
            op_f,
            op_phi,
            form_a,
            j,
            forcing,
            u0,
            w0,
            zeta0,
            constants: self.constants,
            audit_radius: self.audit_radius,
            margin_overridden: margin_violated,
            solver,
        })
    }
}

/// Outcome of auditing one declared constant.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: &'static str,
    /// Largest observed ratio of the sampled quantity to its declared bound;
    /// the hypothesis holds on the samples when this is at most one.
    pub worst_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    pub margin: f64,
    pub contraction: Option<ContractionConstants>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.margin > 0.0
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const RATIO_SLACK: f64 = 1e-9;
const ZERO_FLOOR: f64 = 1e-300;

struct Sampler {
    rng: ChaCha8Rng,
    radius: f64,
}

impl Sampler {
    fn in_ball(&mut self, space: &DiscreteSpace, which: NormKind) -> Coeffs {
        let n = space.dim();
        let x = DVector::from_fn(n, |_, _| self.rng.gen_range(-1.0..1.0));
        let norm = space.norm(&x, which).expect("sized to space");
        if norm == 0.0 {
            return x;
        }
        let r = self.radius * self.rng.gen_range(0.0..1.0_f64).sqrt();
        x * (r / norm)
    }

    fn time(&mut self, horizon: f64) -> f64 {
        self.rng.gen_range(0.0..=horizon)
    }
}

fn ratio(observed: f64, bound: f64) -> f64 {
    if bound > ZERO_FLOOR {
        observed / bound
    } else if observed.abs() <= 1e-14 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Default)]
struct Worst(f64);

impl Worst {
    fn push(&mut self, r: f64) {
        if r > self.0 || r.is_nan() {
            self.0 = r;
        }
    }
}

/// Audits the declared constants of `p` on `samples` random pairs.
///
/// Violations are reported through the returned checks rather than as errors.
pub fn validate_hypotheses(p: &DqviProblem, samples: usize, rng_seed: u64) -> Result<HypothesisReport> {
    if samples == 0 {
        return Err(Error::InvalidInput("at least one sample is required".into()));
    }
    let c = &p.constants;
    let (sv, sy, sw) = (&p.space_v, &p.space_y, &p.space_w);
    let mut s = Sampler { rng: ChaCha8Rng::seed_from_u64(rng_seed), radius: p.audit_radius };

    let mut a_lip = Worst::default();
    let mut b_lip = Worst::default();
    let mut b_growth = Worst::default();
    let mut c_lip = Worst::default();
    let mut c_time = Worst::default();
    let mut c_mono = Worst::default();
    let mut j_coupling = Worst::default();
    let mut f_lip = Worst::default();
    let mut phi_lip = Worst::default();
    let mut a_coercive = Worst::default();

    let vnorm = |x: &Coeffs| sv.primary().norm(x);
    let vdual = |f: &Coeffs| sv.primary().dual_norm(f);

    for _ in 0..samples {
        let t = s.time(c.horizon);
        let t2 = s.time(c.horizon);
        let u1 = s.in_ball(sv, NormKind::Primary);
        let u2 = s.in_ball(sv, NormKind::Primary);
        let z1 = s.in_ball(sy, NormKind::Primary);
        let z2 = s.in_ball(sy, NormKind::Primary);
        let w1 = s.in_ball(sw, NormKind::Primary);
        let w2 = s.in_ball(sw, NormKind::Primary);
        let v1 = s.in_ball(sv, NormKind::Primary);
        let v2 = s.in_ball(sv, NormKind::Primary);
        let du = vnorm(&(&u1 - &u2));

        let da = vdual(&((p.op_a)(t, &u1) - (p.op_a)(t, &u2)));
        a_lip.push(ratio(da, c.l_a * du));

        let dz_y = sy.primary().norm(&(&z1 - &z2));
        let db = vdual(&((p.op_b)(t, &u1, &z1) - (p.op_b)(t, &u2, &z2)));
        b_lip.push(ratio(db, c.l_b * (du + dz_y)));
        let bz = vdual(&(p.op_b)(t, &u1, &z1));
        b_growth.push(ratio(bz, c.rho * (sy.primary().norm(&z1) + vnorm(&u1))));

        let dc = (p.op_c)(t, &u1) - (p.op_c)(t, &u2);
        c_lip.push(ratio(vdual(&dc), c.l_c1 * du));
        let dct = vdual(&((p.op_c)(t, &u1) - (p.op_c)(t2, &u1)));
        c_time.push(ratio(dct, c.l_c2 * (t - t2).abs()));
        let mono = dc.dot(&(&u1 - &u2));
        c_mono.push(if mono > ZERO_FLOOR {
            c.m_c * du * du / mono
        } else if c.m_c * du * du <= 1e-14 {
            0.0
        } else {
            f64::INFINITY
        });

        let lhs = p.j.evaluate(&w1, &u1, &v2) - p.j.evaluate(&w1, &u1, &v1) + p.j.evaluate(&w2, &u2, &v1)
            - p.j.evaluate(&w2, &u2, &v2);
        let dv = vnorm(&(&v1 - &v2));
        let dw = sw.primary().norm(&(&w1 - &w2));
        let rhs = c.alpha0 * dw * dv + c.alpha1 * du * dv;
        j_coupling.push(if lhs <= 1e-14 * (1.0 + rhs) { 0.0_f64.max(ratio(lhs, rhs)) } else { ratio(lhs, rhs) });

        let df = sw.primary().norm(&((p.op_f)(t, &w1, &u1) - (p.op_f)(t, &w2, &u2)));
        f_lip.push(ratio(df, c.l_f * (du + dw)));

        let dz_y1 = sy.pivot().norm(&(&z1 - &z2));
        let dphi = sy.pivot().norm(&((p.op_phi)(t, &u1, &z1) - (p.op_phi)(t, &u2, &z2)));
        phi_lip.push(ratio(dphi, c.l_phi * (du + dz_y1)));

        let energy = (&p.form_a * &z1).dot(&z1) + c.a1 * sy.pivot().norm(&z1).powi(2);
        let target = c.a2 * sy.primary().norm(&z1).powi(2);
        a_coercive.push(if energy > ZERO_FLOOR {
            target / energy
        } else if target <= 1e-14 {
            0.0
        } else {
            f64::INFINITY
        });
    }

    let mk = |name: &'static str, w: Worst| HypothesisCheck {
        name,
        worst_ratio: w.0,
        passed: w.0 <= 1.0 + RATIO_SLACK,
    };
    let checks = vec![
        mk("A lipschitz", a_lip),
        mk("B lipschitz", b_lip),
        mk("B growth", b_growth),
        mk("C lipschitz", c_lip),
        mk("C time lipschitz", c_time),
        mk("C strong monotonicity", c_mono),
        mk("j coupling", j_coupling),
        mk("F lipschitz", f_lip),
        mk("phi lipschitz", phi_lip),
        mk("a coercivity", a_coercive),
        HypothesisCheck {
            name: "contraction margin",
            worst_ratio: if c.m_c > 0.0 { c.alpha1 / c.m_c } else { f64::INFINITY },
            passed: c.margin() > 0.0,
        },
    ];
    Ok(HypothesisReport { checks, margin: c.margin(), contraction: contraction_constants(c).ok() })
}
