//! CSV and summary writers. Floats are written with 17 significant digits.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use dqvi::contact2d::CompiledContact;
use dqvi::problem::Constants;
use dqvi::stepper::{StepDiagnostics, Trajectory};

use crate::error::CliError;

pub const TRAJECTORY_HEADER: &str = "step,t,node,u_x,u_y,udot_x,udot_y,w,zeta";
pub const DIAGNOSTICS_HEADER: &str = "step,t,sweeps,outer_max_ratio,outer_last_residual,velocity_iterations,velocity_max_ratio,quasi_iterations,quasi_max_ratio,damage_sweeps,outer_ratios";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

/// One row per node and time node. For contact problems `node` is the mesh
/// node and the vector columns are Cartesian; `w` is zero off the contact
/// boundary. For abstract problems `node` is the coefficient index, the `x`
/// columns carry the coefficients and columns outside an array are empty.
pub fn write_trajectory(path: &Path, traj: &Trajectory, contact: Option<&CompiledContact>) -> Result<(), CliError> {
    let mut f = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(f, "{TRAJECTORY_HEADER}").map_err(io)?;
    for (step, s) in traj.states.iter().enumerate() {
        match contact {
            Some(c) => {
                let disc = c.disc();
                let u = disc.nodal_vectors(&s.u);
                let v = disc.nodal_vectors(&s.udot);
                let mut wear = vec![0.0; u.len()];
                for (k, &node) in disc.contact_nodes.iter().enumerate() {
                    wear[node] = s.w[k];
                }
                for node in 0..u.len() {
                    writeln!(
                        f,
                        "{step},{},{node},{},{},{},{},{},{}",
                        num(s.t),
                        num(u[node][0]),
                        num(u[node][1]),
                        num(v[node][0]),
                        num(v[node][1]),
                        num(wear[node]),
                        num(s.zeta[node])
                    )
                    .map_err(io)?;
                }
            }
            None => {
                let rows = s.u.len().max(s.w.len()).max(s.zeta.len());
                let at = |x: &dqvi::Coeffs, i: usize| opt(x.get(i).copied());
                for i in 0..rows {
                    writeln!(
                        f,
                        "{step},{},{i},{},,{},,{},{}",
                        num(s.t),
                        at(&s.u, i),
                        at(&s.udot, i),
                        at(&s.w, i),
                        at(&s.zeta, i)
                    )
                    .map_err(io)?;
                }
            }
        }
    }
    f.flush().map_err(io)
}

pub fn write_diagnostics(path: &Path, diagnostics: &[StepDiagnostics]) -> Result<(), CliError> {
    let mut f = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(f, "{DIAGNOSTICS_HEADER}").map_err(io)?;
    for d in diagnostics {
        let max_ratio = d.outer_ratios.iter().copied().fold(0.0, f64::max);
        let ratios: Vec<String> = d.outer_ratios.iter().map(|&r| num(r)).collect();
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{}",
            d.step,
            num(d.t),
            d.sweeps,
            num(max_ratio),
            opt(d.outer_residuals.last().copied()),
            d.velocity_iterations,
            num(d.velocity_max_ratio),
            d.quasi_iterations,
            num(d.quasi_max_ratio),
            d.damage_sweeps,
            ratios.join(";")
        )
        .map_err(io)?;
    }
    f.flush().map_err(io)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub problem: String,
    pub status: String,
    pub horizon: f64,
    pub steps_requested: usize,
    pub steps_completed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsRecord {
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

impl From<&Constants> for ConstantsRecord {
    fn from(c: &Constants) -> Self {
        Self {
            l_a: c.l_a,
            l_b: c.l_b,
            rho: c.rho,
            l_c1: c.l_c1,
            l_c2: c.l_c2,
            m_c: c.m_c,
            alpha0: c.alpha0,
            alpha1: c.alpha1,
            l_f: c.l_f,
            l_phi: c.l_phi,
            a1: c.a1,
            a2: c.a2,
            horizon: c.horizon,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionRecord {
    pub c_p: f64,
    pub c_q: f64,
    pub c_r: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginsRecord {
    /// `m_C − α₁`.
    pub discrete: f64,
    /// `m_visc − (max friction + 1)·L_p` for contact problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub friction_smallness: Option<f64>,
    pub overridden: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NotesRecord {
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub run: RunRecord,
    pub constants: ConstantsRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionRecord>,
    pub margins: MarginsRecord,
    pub notes: NotesRecord,
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), CliError> {
    let text = toml::to_string(summary).map_err(|e| CliError::Usage(format!("cannot serialize summary: {e}")))?;
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}
