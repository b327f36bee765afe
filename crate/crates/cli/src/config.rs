//! Strict TOML configuration: run files and contact model files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use dqvi::contact2d::{
    Compliance, ContactModel, ContactParams, DamageParams, Loads, Material, Mesh, WearLaw,
};
use dqvi::stepper::{DamageCoupling, StepperConfig, WearScheme};
use dqvi::vi::StepRule;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    #[serde(default)]
    pub stepper: StepperSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Exactly one of `builtin` or `contact_model` must be given.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub builtin: Option<Builtin>,
    /// Contact model file, relative to the run file.
    pub contact_model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    /// All data zero.
    Zero,
    /// `2u̇ + u = 3`, `u(0) = 0`.
    ScalarLinear,
    /// Scalar instance coupling every equation linearly.
    CoupledLinear,
    /// Scalar instance with `L_A = L_B = α₀ = 1`, `α₁ = 0`, `m_C = 2`.
    Reference,
    /// Scalar quasi-VI with `α₁ = 2 > m_C = 1`.
    MarginViolated,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Zero => "zero",
            Builtin::ScalarLinear => "scalar-linear",
            Builtin::CoupledLinear => "coupled-linear",
            Builtin::Reference => "reference",
            Builtin::MarginViolated => "margin-violated",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WearSchemeName {
    ExplicitEuler,
    BackwardEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DamageCouplingName {
    SemiImplicit,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRuleName {
    Conservative,
    Symmetric,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperSection {
    pub tol_outer: f64,
    pub tol_velocity: f64,
    pub tol_damage: f64,
    pub max_picard: usize,
    pub max_quasi: usize,
    pub wear_scheme: WearSchemeName,
    pub damage_coupling: DamageCouplingName,
    pub step_rule: StepRuleName,
}

impl Default for StepperSection {
    fn default() -> Self {
        let d = StepperConfig::default();
        Self {
            tol_outer: d.tol_outer,
            tol_velocity: d.tol_velocity,
            tol_damage: d.tol_damage,
            max_picard: d.max_picard,
            max_quasi: d.max_quasi,
            wear_scheme: WearSchemeName::ExplicitEuler,
            damage_coupling: DamageCouplingName::SemiImplicit,
            step_rule: StepRuleName::Conservative,
        }
    }
}

impl StepperSection {
    pub fn to_config(&self) -> StepperConfig {
        StepperConfig {
            tol_outer: self.tol_outer,
            tol_velocity: self.tol_velocity,
            tol_damage: self.tol_damage,
            max_picard: self.max_picard,
            max_quasi: self.max_quasi,
            wear_scheme: match self.wear_scheme {
                WearSchemeName::ExplicitEuler => WearScheme::ExplicitEuler,
                WearSchemeName::BackwardEuler => WearScheme::BackwardEuler,
            },
            damage_coupling: match self.damage_coupling {
                DamageCouplingName::SemiImplicit => DamageCoupling::SemiImplicit,
                DamageCouplingName::Picard => DamageCoupling::Picard,
            },
            step_rule: match self.step_rule {
                StepRuleName::Conservative => StepRule::Conservative,
                StepRuleName::Symmetric => StepRule::Symmetric,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verbosity {
    Quiet,
    #[default]
    Normal,
    Verbose,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Output directory, relative to the run file.
    pub dir: PathBuf,
    /// Seed of the hypothesis sampler.
    pub seed: u64,
    pub verbosity: Verbosity,
    pub hypothesis_samples: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), seed: 0, verbosity: Verbosity::Normal, hypothesis_samples: 200 }
    }
}

/// Where a problem comes from once relative paths are resolved.
#[derive(Debug, Clone)]
pub enum ProblemSource {
    Builtin(Builtin),
    Contact(PathBuf),
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::from_toml(origin, text, &e))?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    fn validate(&self, origin: &Path) -> Result<(), CliError> {
        let invalid = |m: &str| CliError::Invalid { path: origin.to_path_buf(), message: m.to_string() };
        match (&self.problem.builtin, &self.problem.contact_model) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(invalid("[problem] needs exactly one of `builtin` or `contact_model`")),
        }
        if !(self.grid.horizon > 0.0 && self.grid.horizon.is_finite()) {
            return Err(invalid("grid.horizon must be positive"));
        }
        if self.grid.steps == 0 {
            return Err(invalid("grid.steps must be at least 1"));
        }
        self.stepper.to_config().validate().map_err(|e| invalid(&e.to_string()))?;
        Ok(())
    }

    /// Problem source with paths resolved against the directory of `origin`.
    pub fn source(&self, origin: &Path) -> ProblemSource {
        match (&self.problem.builtin, &self.problem.contact_model) {
            (Some(b), _) => ProblemSource::Builtin(*b),
            (None, Some(p)) => ProblemSource::Contact(resolve(origin, p)),
            (None, None) => unreachable!("validated at parse time"),
        }
    }

    pub fn output_dir(&self, origin: &Path) -> PathBuf {
        resolve(origin, &self.output.dir)
    }
}

pub fn resolve(origin: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        origin.parent().unwrap_or(Path::new(".")).join(p)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub mesh: MeshSection,
    pub material: MaterialSection,
    pub contact: ContactSection,
    pub damage: DamageSection,
    pub loads: LoadsSection,
    pub audit_radius: f64,
}

/// Exactly one of `file` or `rectangle`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub file: Option<PathBuf>,
    pub rectangle: Option<RectangleSection>,
}

/// `[0, lx] × [0, ly]` split into `nx × ny` cells: clamped on the left,
/// contact along the bottom, traction elsewhere.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectangleSection {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub lambda: f64,
    pub mu: f64,
    pub theta_v: f64,
    pub tau_r: f64,
    pub c_b: f64,
    pub c_zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WearLawName {
    #[default]
    TwoArgument,
    Difference,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Friction {
    Uniform(f64),
    PerNode(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSection {
    pub k_n: f64,
    pub p_max: f64,
    pub a_w: f64,
    #[serde(default)]
    pub wear_law: WearLawName,
    pub gap: f64,
    pub friction: Friction,
    pub wear_coefficient: f64,
    pub foundation_direction: [f64; 2],
    pub speed_min: f64,
    pub speed_max: f64,
    pub speed_period: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DamageSection {
    pub kappa: f64,
    pub lambda_d: f64,
    pub lambda_e: f64,
    pub lambda_w: f64,
    pub zeta_min: f64,
    pub zeta0: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadsSection {
    pub body: [f64; 2],
    pub traction: [f64; 2],
    pub ramp_time: f64,
}

impl ModelFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::from_toml(origin, text, &e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Builds the model; a mesh file is resolved against `origin`.
    pub fn to_model(&self, origin: &Path) -> Result<ContactModel, CliError> {
        let mesh = match (&self.mesh.file, &self.mesh.rectangle) {
            (Some(f), None) => {
                let path = resolve(origin, f);
                let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                Mesh::parse(&text).map_err(|e| CliError::Invalid { path, message: e.to_string() })?
            }
            (None, Some(r)) => Mesh::rectangle(r.lx, r.ly, r.nx, r.ny)?,
            _ => {
                return Err(CliError::Invalid {
                    path: origin.to_path_buf(),
                    message: "[mesh] needs exactly one of `file` or `rectangle`".into(),
                })
            }
        };
        let m = self.material;
        let c = &self.contact;
        let d = self.damage;
        let l = self.loads;
        Ok(ContactModel {
            mesh,
            material: Material { lambda: m.lambda, mu: m.mu, theta_v: m.theta_v, tau_r: m.tau_r, c_b: m.c_b, c_zeta: m.c_zeta },
            contact: ContactParams {
                compliance: Compliance { k_n: c.k_n, p_max: c.p_max, a_w: c.a_w },
                wear_law: match c.wear_law {
                    WearLawName::TwoArgument => WearLaw::TwoArgument,
                    WearLawName::Difference => WearLaw::Difference,
                },
                gap: c.gap,
                friction: match &c.friction {
                    Friction::Uniform(f) => vec![*f],
                    Friction::PerNode(v) => v.clone(),
                },
                wear_coefficient: c.wear_coefficient,
                foundation_direction: c.foundation_direction,
                speed_min: c.speed_min,
                speed_max: c.speed_max,
                speed_period: c.speed_period,
            },
            damage: DamageParams {
                kappa: d.kappa,
                lambda_d: d.lambda_d,
                lambda_e: d.lambda_e,
                lambda_w: d.lambda_w,
                zeta_min: d.zeta_min,
                zeta0: d.zeta0,
            },
            loads: Loads { body: l.body, traction: l.traction, ramp_time: l.ramp_time },
            audit_radius: self.audit_radius,
        })
    }
}
