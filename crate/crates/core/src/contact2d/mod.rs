//! Quasistatic viscoelastic frictional contact with long memory, damage and
//! wear, discretized by P1 triangles and compiled into a [`DqviProblem`].
//!
//! Constitutive choices: linear isotropic elasticity, viscosity proportional
//! to it, an exponentially fading relaxation kernel with additive damage
//! coupling, and a bounded normal compliance law.

pub mod assembly;
pub mod mesh;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use assembly::Discretization;
pub use mesh::{BoundaryEdge, BoundaryTag, Mesh};

use crate::error::{Error, Result};
use crate::problem::{Constants, DqviProblem, JSpec, SolverMetric};
use crate::spaces::{Coeffs, ConvexSet, DiscreteSpace, Metric, SpaceLabel};
use crate::stepper::State;

/// Plane strain Lamé parameters, viscosity ratio and relaxation kernel
/// `ℬ(τ, ε, ζ) = e^{−τ/τ_r}(c_B ε + c_ζ ζ I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
    pub theta_v: f64,
    pub tau_r: f64,
    pub c_b: f64,
    pub c_zeta: f64,
}

/// Which arguments the compliance function receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WearLaw {
    /// `p(w, u̇_ν)`.
    #[default]
    TwoArgument,
    /// `p(0, u̇_ν − w)`.
    Difference,
}

/// Bounded normal compliance `p(w, r) = k_n·clamp(r⁺ + a_w·w⁺, 0, p_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compliance {
    pub k_n: f64,
    pub p_max: f64,
    pub a_w: f64,
}

impl Compliance {
    pub fn pressure(&self, w: f64, r: f64) -> f64 {
        normal_compliance(w, r, self)
    }

    /// Lipschitz constant in `(w, r)` for the sum norm.
    pub fn lipschitz(&self) -> f64 {
        self.k_n * self.a_w.max(1.0)
    }
}

pub fn normal_compliance(w: f64, r: f64, c: &Compliance) -> f64 {
    c.k_n * (r.max(0.0) + c.a_w * w.max(0.0)).clamp(0.0, c.p_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactParams {
    pub compliance: Compliance,
    pub wear_law: WearLaw,
    /// Bound `g ≥ 0` on the normal velocity.
    pub gap: f64,
    /// Friction coefficient at each contact node, or one value for all.
    pub friction: Vec<f64>,
    /// Wear coefficient `k`.
    pub wear_coefficient: f64,
    /// Direction of the foundation velocity (normalized on use).
    pub foundation_direction: [f64; 2],
    /// Speed oscillates between these bounds with the given period; a zero
    /// period keeps it at `speed_max`.
    pub speed_min: f64,
    pub speed_max: f64,
    pub speed_period: f64,
}

impl ContactParams {
    pub fn speed(&self, t: f64) -> f64 {
        if self.speed_period > 0.0 {
            let phase = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * t / self.speed_period).cos());
            self.speed_min + (self.speed_max - self.speed_min) * phase
        } else {
            self.speed_max
        }
    }

    pub fn friction_max(&self) -> f64 {
        self.friction.iter().copied().fold(0.0, f64::max)
    }

    fn pressure(&self, w: f64, r: f64) -> f64 {
        match self.wear_law {
            WearLaw::TwoArgument => self.compliance.pressure(w, r),
            WearLaw::Difference => self.compliance.pressure(0.0, r - w),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageParams {
    pub kappa: f64,
    pub lambda_d: f64,
    pub lambda_e: f64,
    pub lambda_w: f64,
    pub zeta_min: f64,
    pub zeta0: f64,
}

impl DamageParams {
    /// `λ_D(1 − ζ̃)/ζ̃ − ½λ_E e + λ_w` with `ζ̃ = max(ζ, ζ_min)` and `e = ε : ε`.
    pub fn source(&self, zeta: f64, strain_energy: f64) -> f64 {
        let z = zeta.max(self.zeta_min);
        self.lambda_d * (1.0 - z) / z - 0.5 * self.lambda_e * strain_energy + self.lambda_w
    }
}

/// Uniform body force and traction scaled by `min(1, t / ramp_time)`
/// (constant when `ramp_time` is zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loads {
    pub body: [f64; 2],
    pub traction: [f64; 2],
    pub ramp_time: f64,
}

impl Loads {
    pub fn scale(&self, t: f64) -> f64 {
        if self.ramp_time > 0.0 {
            (t / self.ramp_time).min(1.0)
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContactModel {
    pub mesh: Mesh,
    pub material: Material,
    pub contact: ContactParams,
    pub damage: DamageParams,
    pub loads: Loads,
    /// Radius of the V-ball on which the damage source is declared
    /// Lipschitz; the strain term is only locally Lipschitz.
    pub audit_radius: f64,
}

impl ContactModel {
    fn validate(&self) -> Result<()> {
        let m = &self.material;
        let c = &self.contact;
        let d = &self.damage;
        let positive = [
            ("mu", m.mu),
            ("theta_v", m.theta_v),
            ("tau_r", m.tau_r),
            ("p_max", c.compliance.p_max),
            ("kappa", d.kappa),
            ("lambda_d", d.lambda_d),
            ("lambda_e", d.lambda_e),
            ("lambda_w", d.lambda_w),
            ("zeta_min", d.zeta_min),
            ("speed_min", c.speed_min),
            ("audit_radius", self.audit_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        let nonnegative = [
            ("lambda", m.lambda),
            ("c_b", m.c_b),
            ("c_zeta", m.c_zeta),
            ("k_n", c.compliance.k_n),
            ("a_w", c.compliance.a_w),
            ("gap", c.gap),
            ("wear_coefficient", c.wear_coefficient),
            ("speed_period", c.speed_period),
            ("ramp_time", self.loads.ramp_time),
        ];
        for (name, v) in nonnegative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if c.speed_max < c.speed_min {
            return Err(Error::InvalidInput("speed_max must not be below speed_min".into()));
        }
        if c.foundation_direction[0].hypot(c.foundation_direction[1]) == 0.0 {
            return Err(Error::InvalidInput("foundation direction must be nonzero".into()));
        }
        if c.friction.iter().any(|&f| !(f >= 0.0 && f.is_finite())) {
            return Err(Error::InvalidInput("friction coefficients must be nonnegative".into()));
        }
        if !(d.zeta0 > 0.0 && d.zeta0 < 1.0) || d.zeta_min >= d.zeta0 {
            return Err(Error::InvalidInput("need 0 < zeta_min < zeta0 < 1".into()));
        }
        Ok(())
    }

    /// `n* = −v*/‖v*‖`.
    pub fn sliding_direction(&self) -> [f64; 2] {
        let d = self.contact.foundation_direction;
        let len = d[0].hypot(d[1]);
        [-d[0] / len, -d[1] / len]
    }
}

/// Constants of the continuum smallness condition together with their
/// discrete counterparts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactMargins {
    /// Pointwise monotonicity constant `m_𝒞` of the viscosity tensor.
    pub m_visc: f64,
    pub friction_max: f64,
    pub compliance_lipschitz: f64,
    /// `m_𝒞 − (‖μ‖_∞ + 1)·L̃_p`.
    pub continuum_margin: f64,
    /// `‖γv‖_{L²(Γ₃)} ≤ trace_factor·‖v‖_V`.
    pub trace_factor: f64,
    /// `m_C − α₁` of the compiled problem.
    pub discrete_margin: f64,
}

/// Margin of the printed smallness condition.
pub fn continuum_margin(m_visc: f64, friction_max: f64, compliance_lipschitz: f64) -> f64 {
    m_visc - (friction_max + 1.0) * compliance_lipschitz
}

/// A compiled model: the abstract problem plus what is needed to map its
/// arrays back to the mesh.
#[derive(Clone)]
pub struct CompiledContact {
    pub problem: DqviProblem,
    pub disc: Arc<Discretization>,
    pub model: ContactModel,
    pub margins: ContactMargins,
    pub warnings: Vec<String>,
}

/// Per-node complementarity data at one accepted state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactNodeResidual {
    pub node: usize,
    pub normal_velocity: f64,
    /// `σ_ν + p` recovered from the reaction.
    pub stress_plus_pressure: f64,
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplementarityReport {
    pub nodes: Vec<ContactNodeResidual>,
    /// `max |(u̇_ν − g)(σ_ν + p)|` divided by velocity and force scales.
    pub relative_product: f64,
    /// `max (u̇_ν − g)⁺`.
    pub velocity_violation: f64,
    /// `max (σ_ν + p)⁺` relative to the force scale.
    pub sign_violation: f64,
    pub force_scale: f64,
}

impl CompiledContact {
    pub fn disc(&self) -> &Discretization {
        &self.disc
    }

    /// Pressure at each W node for wear `w` and velocity `v`.
    pub fn pressures(&self, w: &Coeffs, v: &Coeffs) -> Vec<f64> {
        nodal_pressures(&self.disc, &self.model.contact, w, v)
    }

    /// Recovers `σ_ν + p` from the reaction of a state and measures the
    /// unilateral complementarity conditions at every unclamped contact node.
    pub fn complementarity(&self, state: &State) -> Result<ComplementarityReport> {
        let reaction = state
            .reaction
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("state carries no reaction".into()))?;
        let g = self.model.contact.gap;
        let pressures = self.pressures(&state.w, &state.udot);
        let mut nodes = Vec::new();
        for (k, dof) in self.disc.contact_normal_dof.iter().enumerate() {
            if let Some(d) = *dof {
                nodes.push(ContactNodeResidual {
                    node: self.disc.contact_nodes[k],
                    normal_velocity: state.udot[d],
                    stress_plus_pressure: reaction[d] / self.disc.contact_weights[k],
                    pressure: pressures[k],
                });
            }
        }
        let force_scale = nodes
            .iter()
            .map(|n| n.stress_plus_pressure.abs().max(n.pressure))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let velocity_scale = nodes.iter().map(|n| n.normal_velocity.abs()).fold(g, f64::max).max(f64::MIN_POSITIVE);
        let relative_product = nodes
            .iter()
            .map(|n| ((n.normal_velocity - g) * n.stress_plus_pressure).abs() / (velocity_scale * force_scale))
            .fold(0.0, f64::max);
        let velocity_violation = nodes.iter().map(|n| (n.normal_velocity - g).max(0.0)).fold(0.0, f64::max);
        let sign_violation = nodes.iter().map(|n| n.stress_plus_pressure.max(0.0) / force_scale).fold(0.0, f64::max);
        Ok(ComplementarityReport { nodes, relative_product, velocity_violation, sign_violation, force_scale })
    }
}

fn nodal_pressures(disc: &Discretization, c: &ContactParams, w: &Coeffs, v: &Coeffs) -> Vec<f64> {
    disc.contact_normal_dof
        .iter()
        .enumerate()
        .map(|(k, dof)| c.pressure(w[k], dof.map_or(0.0, |d| v[d])))
        .collect()
}

fn friction_at(c: &ContactParams, k: usize) -> f64 {
    if c.friction.len() == 1 {
        c.friction[0]
    } else {
        c.friction[k]
    }
}

/// Gradient of `v ↦ j(w, z, v)`: `∫ μ p n*·v_τ + p v_ν` with nodal
/// quadrature on the contact boundary.
pub fn friction_gradient(disc: &Discretization, c: &ContactParams, n_star: [f64; 2], w: &Coeffs, z: &Coeffs) -> Coeffs {
    let mut g = DVector::zeros(disc.dim_v());
    for (k, dof) in disc.contact_normal_dof.iter().enumerate() {
        let Some(d) = *dof else { continue };
        let node = disc.contact_nodes[k];
        let tau = disc.frames[node][1];
        let m = disc.contact_weights[k];
        let p = c.pressure(w[k], z[d]);
        g[d] = p * m;
        g[d + 1] = friction_at(c, k) * p * (n_star[0] * tau[0] + n_star[1] * tau[1]) * m;
    }
    g
}

/// `α(t)·p` at each contact node.
pub fn wear_rhs(disc: &Discretization, c: &ContactParams, t: f64, w: &Coeffs, v: &Coeffs) -> Coeffs {
    let alpha = c.wear_coefficient * c.speed(t);
    DVector::from_vec(nodal_pressures(disc, c, w, v)) * alpha
}

/// Nodal damage source with strain energy recovered from elements.
pub fn damage_source(disc: &Discretization, d: &DamageParams, u: &Coeffs, zeta: &Coeffs) -> Coeffs {
    let energy = disc.recover_nodal(&disc.element_strain_energy(u));
    DVector::from_iterator(zeta.len(), zeta.iter().zip(energy.iter()).map(|(&z, &e)| d.source(z, e)))
}

/// `sup ‖M x‖_{to*} / ‖x‖_from`, the square root of the largest
/// eigenvalue of `Mᵀ G_to⁻¹ M` relative to `G_from`.
fn operator_norm(map: &DMatrix<f64>, from: &Metric, to: &Metric) -> Result<f64> {
    let chol = to
        .gram()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("target Gram matrix".into()))?;
    let k = map.transpose() * chol.solve(map);
    let k = (&k + k.transpose()) * 0.5;
    Ok(from.generalized_extremes(&k).1.max(0.0).sqrt())
}

/// Assembles the spaces and operators of `model` on `[0, horizon]`.
pub fn compile(model: &ContactModel, horizon: f64) -> Result<CompiledContact> {
    model.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let mat = model.material;
    let elastic = assembly::plane_strain_tensor(mat.lambda, mat.mu);
    let disc = Arc::new(Discretization::new(model.mesh.clone(), &elastic)?);
    let (nv, ny, nw) = (disc.dim_v(), disc.dim_y(), disc.dim_w());
    if nw == 0 {
        return Err(Error::Mesh("the contact boundary part is empty".into()));
    }
    let contact = model.contact.clone();
    if contact.friction.len() != 1 && contact.friction.len() != nw {
        return Err(Error::InvalidInput(format!(
            "friction needs one value or one per contact node ({nw}), got {}",
            contact.friction.len()
        )));
    }

    let space_v = DiscreteSpace::new(SpaceLabel::V, disc.gram_v.clone(), disc.mass_v.clone())?;
    let space_y = DiscreteSpace::new(SpaceLabel::Y, &disc.mass_y + &disc.laplace_y, disc.mass_y.clone())?;
    let w_gram = DMatrix::from_diagonal(&DVector::from_vec(disc.contact_weights.clone()));
    let space_w = DiscreteSpace::new(SpaceLabel::W, w_gram.clone(), w_gram)?;
    let k_v = ConvexSet::upper_bound(nv, disc.normal_dofs(), contact.gap)?;
    let k_y = ConvexSet::unit_interval(ny);

    // constants
    let vmetric = space_v.primary();
    let (m_a, l_a) = vmetric.generalized_extremes(&disc.stiffness);
    let m_c = mat.theta_v * m_a;
    let l_c1 = mat.theta_v * l_a;
    let div_norm = operator_norm(&disc.divergence, space_y.primary(), vmetric)?;
    let l_b = mat.c_b.max(mat.c_zeta * div_norm);
    let trace_factor = vmetric.generalized_extremes(&(disc.trace.transpose() * disc.trace_mass() * &disc.trace)).1.max(0.0).sqrt();
    let l_p = contact.compliance.lipschitz();
    let mu_max = contact.friction_max();
    let alpha0 = (mu_max + 1.0) * l_p * trace_factor;
    let alpha1 = (mu_max + 1.0) * l_p * trace_factor * trace_factor;
    let l_f = contact.wear_coefficient * contact.speed_max * l_p * trace_factor.max(1.0);
    let dmg = model.damage;
    let c_vec = DVector::from_iterator(
        ny,
        disc.node_elements.iter().map(|list| list.iter().map(|&(e, w)| w / disc.mesh.areas()[e]).sum::<f64>()),
    );
    let l_phi_u = dmg.lambda_e * model.audit_radius * (&disc.mass_y * &c_vec).dot(&c_vec).sqrt();
    let l_phi_z = dmg.lambda_d / (dmg.zeta_min * dmg.zeta_min);
    let constants = Constants {
        l_a,
        l_b,
        rho: l_b,
        l_c1,
        l_c2: 0.0,
        m_c,
        alpha0,
        alpha1,
        l_f,
        l_phi: l_phi_u.max(l_phi_z),
        a1: dmg.kappa,
        a2: dmg.kappa,
        horizon,
    };
    let m_visc = mat.theta_v * 2.0 * mat.mu.min(mat.mu + mat.lambda);
    let cont_margin = continuum_margin(m_visc, mu_max, l_p);
    let margins = ContactMargins {
        m_visc,
        friction_max: mu_max,
        compliance_lipschitz: l_p,
        continuum_margin: cont_margin,
        trace_factor,
        discrete_margin: constants.margin(),
    };
    let mut warnings = Vec::new();
    if cont_margin <= 0.0 {
        warnings.push(format!(
            "contraction margin violated: m_visc = {m_visc} <= (max friction + 1) * compliance Lipschitz = {}",
            (mu_max + 1.0) * l_p
        ));
    }
    if constants.margin() <= 0.0 {
        warnings.push(format!("discrete margin m_C - alpha_1 = {} is not positive", constants.margin()));
    }

    // operators
    let k_a = Arc::new(disc.stiffness.clone());
    let k_c = Arc::new(&disc.stiffness * mat.theta_v);
    let g_b = Arc::new(&disc.gram_v * mat.c_b);
    let d_b = Arc::new(&disc.divergence * mat.c_zeta);
    let tau_r = mat.tau_r;
    let n_star = model.sliding_direction();
    let loads = model.loads;
    let base_load = &disc.unit_body[0] * loads.body[0]
        + &disc.unit_body[1] * loads.body[1]
        + &disc.unit_traction[0] * loads.traction[0]
        + &disc.unit_traction[1] * loads.traction[1];

    let solver = SolverMetric { metric: Metric::new(k_c.as_ref().clone())?, m: 1.0, l: Some(1.0) };

    let j = {
        let (d, contact) = (disc.clone(), contact.clone());
        JSpec::linear(Arc::new(move |w: &Coeffs, z: &Coeffs| friction_gradient(&d, &contact, n_star, w, z)))
            .with_trace(disc.trace.clone())
    };

    let problem = DqviProblem::builder(space_v, space_y, space_w)
        .k_v(k_v)
        .k_y(k_y)
        .op_a({
            let k = k_a.clone();
            move |_, u| k.as_ref() * u
        })
        .op_c({
            let k = k_c.clone();
            move |_, v| k.as_ref() * v
        })
        .op_b(move |tau, u, z| (g_b.as_ref() * u + d_b.as_ref() * z) * (-tau / tau_r).exp())
        .op_f({
            let (disc, contact) = (disc.clone(), contact.clone());
            move |t, w, v| wear_rhs(&disc, &contact, t, w, v)
        })
        .op_phi({
            let disc = disc.clone();
            move |_, u, z| damage_source(&disc, &dmg, u, z)
        })
        .form_a(&disc.laplace_y * dmg.kappa)
        .j(j)
        .forcing(move |t| &base_load * loads.scale(t))
        .initial(DVector::zeros(nv), DVector::zeros(nw), DVector::from_element(ny, dmg.zeta0))
        .constants(constants)
        .audit_radius(model.audit_radius)
        .allow_margin_violation(true)
        .solver_metric(solver)
        .build()?;

    Ok(CompiledContact { problem, disc, model: model.clone(), margins, warnings })
}

/// A small bundled configuration: `[0, 2] × [0, 1]` clamped on the left,
/// in contact along the bottom and pressed down from the top while the
/// foundation slides in `+x`.
pub fn demo_model(nx: usize, ny: usize) -> Result<ContactModel> {
    Ok(ContactModel {
        mesh: Mesh::rectangle(2.0, 1.0, nx, ny)?,
        material: Material { lambda: 1.0, mu: 1.0, theta_v: 1.0, tau_r: 0.5, c_b: 0.2, c_zeta: 0.1 },
        contact: ContactParams {
            compliance: Compliance { k_n: 0.05, p_max: 0.5, a_w: 1.0 },
            wear_law: WearLaw::TwoArgument,
            gap: 0.2,
            friction: vec![0.3],
            wear_coefficient: 0.5,
            foundation_direction: [1.0, 0.0],
            speed_min: 0.5,
            speed_max: 1.0,
            speed_period: 1.0,
        },
        damage: DamageParams { kappa: 0.1, lambda_d: 0.05, lambda_e: 1.0, lambda_w: 0.02, zeta_min: 0.01, zeta0: 0.9 },
        loads: Loads { body: [0.0, -0.1], traction: [0.0, -0.2], ramp_time: 0.0 },
        audit_radius: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compliance_examples() {
        let c = Compliance { k_n: 2.0, p_max: 10.0, a_w: 1.0 };
        assert_eq!(c.pressure(0.0, 0.0), 0.0);
        assert_eq!(c.pressure(0.0, -3.0), 0.0);
        assert_eq!(c.pressure(1.0, 3.0), 8.0);
        assert_eq!(c.pressure(10.0, 10.0), 20.0);
        assert_eq!(c.lipschitz(), 2.0);
    }

    #[test]
    fn damage_source_examples() {
        let d = DamageParams { kappa: 1.0, lambda_d: 0.3, lambda_e: 2.0, lambda_w: 0.7, zeta_min: 0.01, zeta0: 0.5 };
        assert_eq!(d.source(1.0, 0.0), 0.7);
        let low = d.source(0.005, 0.25);
        assert_eq!(low, 0.3 * 0.99 / 0.01 - 0.25 + 0.7);
    }

    #[test]
    fn margin_arithmetic() {
        assert!((continuum_margin(1.0, 0.3, 0.5) - 0.35).abs() < 1e-15);
        assert!((continuum_margin(0.5, 1.0, 0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn demo_margins_are_positive() {
        let c = compile(&demo_model(8, 4).unwrap(), 1.0).unwrap();
        assert!(c.margins.continuum_margin > 0.0);
        assert!(c.margins.discrete_margin > 0.0);
        assert!(c.warnings.is_empty());
        assert_eq!(c.disc.dim_w(), 9);
    }

    #[test]
    fn inflated_friction_warns() {
        let mut m = demo_model(4, 2).unwrap();
        m.contact.friction = vec![200.0];
        let c = compile(&m, 1.0).unwrap();
        assert!(c.margins.continuum_margin < 0.0);
        assert!(c.warnings.iter().any(|w| w.contains("contraction margin violated")));
    }

    #[test]
    fn friction_gradient_by_hand() {
        let mut m = demo_model(2, 1).unwrap();
        m.contact.friction = vec![0.5];
        m.contact.compliance = Compliance { k_n: 2.0, p_max: 10.0, a_w: 1.0 };
        let c = compile(&m, 1.0).unwrap();
        let disc = c.disc();
        let w = DVector::from_element(disc.dim_w(), 0.25);
        let mut z = DVector::zeros(disc.dim_v());
        let k = disc.contact_normal_dof.iter().position(|d| d.is_some()).unwrap();
        let d = disc.contact_normal_dof[k].unwrap();
        z[d] = 0.5;
        let g = friction_gradient(disc, &m.contact, m.sliding_direction(), &w, &z);
        let weight = disc.contact_weights[k];
        // p = 2 (0.5 + 0.25); bottom edge: ν = (0, −1), τ = (1, 0), n* = (−1, 0)
        assert!((g[d] - 1.5 * weight).abs() < 1e-14);
        assert!((g[d + 1] + 0.5 * 1.5 * weight).abs() < 1e-14);
    }

    #[test]
    fn short_run_satisfies_complementarity() {
        let c = compile(&demo_model(4, 2).unwrap(), 0.1).unwrap();
        let grid = crate::history::TimeGrid::new(0.1, 10).unwrap();
        let tr = crate::stepper::run(&c.problem, grid, Default::default()).unwrap();
        for s in &tr.states[1..] {
            let r = c.complementarity(s).unwrap();
            assert!(r.relative_product < 1e-6);
            assert!(r.velocity_violation <= 1e-12);
            assert!(r.sign_violation < 1e-6);
        }
    }

    #[test]
    fn frictionless_pressure_free_limit_has_zero_coupling() {
        let mut m = demo_model(4, 2).unwrap();
        m.contact.friction = vec![0.0];
        m.contact.compliance.k_n = 0.0;
        let c = compile(&m, 1.0).unwrap();
        assert_eq!(c.problem.constants.alpha0, 0.0);
        assert_eq!(c.problem.constants.alpha1, 0.0);
        assert_eq!(c.margins.continuum_margin, c.margins.m_visc);
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn zero_inputs_give_zero_loads() {
        let c = compile(&demo_model(4, 2).unwrap(), 1.0).unwrap();
        let (nv, ny, nw) = c.problem.dims();
        let (u, z, w) = (DVector::zeros(nv), DVector::zeros(ny), DVector::zeros(nw));
        assert_eq!((c.problem.op_b)(0.3, &u, &z).amax(), 0.0);
        assert_eq!(wear_rhs(c.disc(), &c.model.contact, 0.2, &w, &u).amax(), 0.0);
        let g = c.problem.j.gradient(&w, &u).unwrap();
        assert_eq!(g.amax(), 0.0);
        let ones = DVector::from_element(ny, 1.0);
        let src = damage_source(c.disc(), &c.model.damage, &u, &ones);
        assert!(src.iter().all(|&s| s == c.model.damage.lambda_w));
    }

    #[test]
    fn single_contact_edge_has_half_length_weights() {
        let mut m = demo_model(1, 1).unwrap();
        m.mesh = Mesh::rectangle(3.0, 1.0, 1, 1).unwrap();
        let c = compile(&m, 1.0).unwrap();
        let gram = c.problem.space_w.primary().gram();
        assert_eq!(gram.nrows(), 2);
        for i in 0..2 {
            assert!((gram.row(i).sum() - 1.5).abs() < 1e-14);
        }
    }

    #[test]
    fn frictionless_gradient_has_no_tangential_part() {
        let mut m = demo_model(4, 2).unwrap();
        m.contact.friction = vec![0.0];
        let c = compile(&m, 1.0).unwrap();
        let disc = c.disc();
        let w = DVector::from_element(disc.dim_w(), 0.3);
        let g = c.problem.j.gradient(&w, &DVector::zeros(disc.dim_v())).unwrap();
        for d in disc.normal_dofs() {
            assert!(g[d] > 0.0);
            assert_eq!(g[d + 1], 0.0);
        }
    }

    #[test]
    fn speed_stays_within_bounds() {
        let m = demo_model(4, 2).unwrap();
        for i in 0..=100 {
            let s = m.contact.speed(i as f64 * 0.013);
            assert!((m.contact.speed_min..=m.contact.speed_max).contains(&s));
        }
    }
}
