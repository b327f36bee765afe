//! Rothe time stepping. Each step runs an outer fixed-point sweep over
//! velocity, wear and damage; the velocity stage is itself a fixed point
//! over the velocity that feeds the displacement and memory terms.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::box_qp::projected_sor;
use crate::error::{Error, Result};
use crate::history::{HistoryBuffer, TimeGrid};
use crate::problem::{contraction_constants, DqviProblem};
use crate::spaces::{Coeffs, MetricProjector};
use crate::vi::{solve_quasi_vi, QuasiViInstance, RatioMonitor, StepRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WearScheme {
    #[default]
    ExplicitEuler,
    BackwardEuler,
}

/// How the damage source sees the new damage value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DamageCoupling {
    /// Source frozen at the previous damage value.
    #[default]
    SemiImplicit,
    /// Source iterated to consistency with the new damage value.
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub tol_outer: f64,
    pub tol_velocity: f64,
    pub tol_damage: f64,
    pub max_picard: usize,
    /// Iteration cap for the quasi-VI loop inside each velocity iteration.
    pub max_quasi: usize,
    pub wear_scheme: WearScheme,
    pub damage_coupling: DamageCoupling,
    pub step_rule: StepRule,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            tol_outer: 1e-8,
            tol_velocity: 1e-10,
            tol_damage: 1e-12,
            max_picard: 200,
            max_quasi: 500,
            wear_scheme: WearScheme::ExplicitEuler,
            damage_coupling: DamageCoupling::SemiImplicit,
            step_rule: StepRule::Conservative,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tol_outer", self.tol_outer), ("tol_velocity", self.tol_velocity), ("tol_damage", self.tol_damage)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if self.max_picard == 0 || self.max_quasi == 0 {
            return Err(Error::InvalidInput("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// Unknowns at one grid node.
///
/// `reaction` is the V*-residual `C(u̇) + A(u) + memory + ∇j − f` of the
/// accepted velocity solve; it vanishes off the constrained degrees of
/// freedom and carries the contact multipliers on them.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Coeffs,
    pub udot: Coeffs,
    pub w: Coeffs,
    pub zeta: Coeffs,
    pub reaction: Option<Coeffs>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub sweeps: usize,
    /// Largest of the velocity, wear and damage changes per sweep.
    pub outer_residuals: Vec<f64>,
    pub outer_ratios: Vec<f64>,
    pub velocity_iterations: usize,
    pub velocity_max_ratio: f64,
    pub quasi_iterations: usize,
    pub quasi_max_ratio: f64,
    pub damage_sweeps: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// States at nodes `0..=N`; node 0 carries the initial data.
    pub states: Vec<State>,
    /// One record per accepted (or failed) step.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

/// A run that stopped at `step`, with everything accepted before it.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub step: usize,
    pub error: Error,
    pub partial: Trajectory,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run failed at step {}: {}", self.step, self.error)
    }
}

impl std::error::Error for RunFailure {}

/// Output of the velocity stage of one sweep.
#[derive(Debug, Clone)]
pub struct VelocityOutcome {
    pub udot: Coeffs,
    pub u: Coeffs,
    pub reaction: Option<Coeffs>,
    pub iterations: usize,
    pub ratios: Vec<f64>,
    pub quasi_iterations: usize,
    pub quasi_max_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct DamageOutcome {
    pub zeta: Coeffs,
    pub sweeps: usize,
    pub picard_iterations: usize,
}

/// Initial guesses for the outer sweep of one step.
#[derive(Debug, Clone)]
pub struct OuterGuess {
    pub udot: Coeffs,
    pub w: Coeffs,
    pub zeta: Coeffs,
}

/// `w_n` from `w_{n−1}` by explicit or backward Euler.
pub fn wear_update(p: &DqviProblem, w_prev: &Coeffs, udot: &Coeffs, t: f64, dt: f64, scheme: WearScheme) -> Result<Coeffs> {
    match scheme {
        WearScheme::ExplicitEuler => Ok(w_prev + (p.op_f)(t, w_prev, udot) * dt),
        WearScheme::BackwardEuler => {
            let l_f = p.constants.l_f;
            if dt * l_f >= 1.0 {
                return Err(Error::StepFailure {
                    step: 0,
                    stage: "wear".into(),
                    message: format!("backward Euler map is not contractive (dt*L_F = {}); reduce the time step", dt * l_f),
                });
            }
            let norm = |x: &Coeffs| p.space_w.primary().norm(x);
            let mut w = w_prev.clone();
            for _ in 0..10_000 {
                let next = w_prev + (p.op_f)(t, &w, udot) * dt;
                let change = norm(&(&next - &w));
                w = next;
                if change <= 1e-15 * (1.0 + norm(&w)) {
                    return Ok(w);
                }
            }
            Err(Error::StepFailure { step: 0, stage: "wear".into(), message: "backward Euler iteration did not settle".into() })
        }
    }
}

fn attach_step(err: Error, step: usize) -> Error {
    match err {
        Error::StepFailure { stage, message, .. } => Error::StepFailure { step, stage, message },
        other => other,
    }
}

/// Drives a [`DqviProblem`] across a [`TimeGrid`].
pub struct Stepper<'p> {
    p: &'p DqviProblem,
    grid: TimeGrid,
    cfg: StepperConfig,
    projector: MetricProjector,
    damage_q: DMatrix<f64>,
    damage_lower: Vec<f64>,
    damage_upper: Vec<f64>,
    buffer: HistoryBuffer,
    states: Vec<State>,
    diagnostics: Vec<StepDiagnostics>,
}

impl<'p> Stepper<'p> {
    /// Prepares the run and solves for the initial velocity at `t = 0`.
    pub fn new(p: &'p DqviProblem, grid: TimeGrid, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let projector = MetricProjector::new(&p.k_v, &p.solver.metric)?;
        let dt = grid.dt();
        let damage_q = p.space_y.pivot().gram() + &p.form_a * dt;
        let (damage_lower, damage_upper) = p.k_y.bounds();
        let mut buffer = HistoryBuffer::new(grid);
        buffer.append(p.u0.clone(), p.zeta0.clone())?;
        let mut stepper = Self {
            p,
            grid,
            cfg,
            projector,
            damage_q,
            damage_lower,
            damage_upper,
            buffer,
            states: Vec::with_capacity(grid.steps() + 1),
            diagnostics: Vec::with_capacity(grid.steps()),
        };
        let initial = stepper.initial_state().map_err(|e| attach_step(e, 0))?;
        stepper.states.push(initial);
        Ok(stepper)
    }

    fn initial_state(&self) -> Result<State> {
        let p = self.p;
        let nv = p.space_v.dim();
        let rhs = (p.forcing)(0.0) - (p.op_a)(0.0, &p.u0);
        let zero = DVector::zeros(nv);
        let (udot, reaction, ..) = self.quasi_solve(0.0, &p.w0, &rhs, &zero, 0.01 * self.cfg.tol_velocity)?;
        Ok(State { t: 0.0, u: p.u0.clone(), udot, w: p.w0.clone(), zeta: p.zeta0.clone(), reaction })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn problem(&self) -> &DqviProblem {
        self.p
    }

    pub fn current(&self) -> &State {
        self.states.last().expect("initial state present")
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn step_index(&self) -> usize {
        self.states.len() - 1
    }

    pub fn is_finished(&self) -> bool {
        self.step_index() >= self.grid.steps()
    }

    /// Memory integral without the endpoint node for step `n`.
    pub fn history_past(&self, n: usize) -> Result<Coeffs> {
        self.buffer.past_part(&*self.p.op_b, n)
    }

    /// Solves the quasi-VI `C(t, u̇) + ∇j(w, u̇) − rhs ∈ −N_K(u̇)` and returns
    /// the velocity, the reaction, the iteration count and the worst ratio.
    fn quasi_solve(&self, t: f64, w: &Coeffs, rhs: &Coeffs, start: &Coeffs, tol: f64) -> Result<(Coeffs, Option<Coeffs>, usize, f64)> {
        let p = self.p;
        let op_c = |v: &Coeffs| (p.op_c)(t, v);
        let inst = QuasiViInstance {
            op_c: &op_c,
            m_c: p.solver.m,
            l_c: p.solver.l,
            j: &p.j,
            w,
            rhs,
            projector: &self.projector,
            metric: &p.solver.metric,
            step_rule: self.cfg.step_rule,
            start: Some(start),
        };
        let out = solve_quasi_vi(&inst, tol, self.cfg.max_quasi)?;
        let worst = out.outer_ratios.iter().copied().fold(0.0, f64::max);
        if out.stagnated || !out.report.converged {
            let what = if out.stagnated { "stagnated" } else { "did not converge" };
            return Err(Error::StepFailure {
                step: 0,
                stage: "velocity quasi-VI".into(),
                message: format!(
                    "frozen-argument loop {what} (last ratio {:.4}); the friction coupling dominates the viscosity, m_C <= alpha_1 observed",
                    out.outer_ratios.last().copied().unwrap_or(f64::NAN)
                ),
            });
        }
        let udot = out.report.solution;
        let reaction = p.j.gradient(w, &udot).map(|g| op_c(&udot) + g - rhs);
        Ok((udot, reaction, out.outer_residuals.len(), worst))
    }

    /// Fixed point over the velocity `η` with `u_n = u_{n−1} + Δt·η`.
    pub fn velocity_solve(&self, n: usize, past: &Coeffs, w: &Coeffs, zeta: &Coeffs, start: &Coeffs) -> Result<VelocityOutcome> {
        let p = self.p;
        let dt = self.grid.dt();
        let t = self.grid.node(n);
        let u_prev = &self.states[n - 1].u;
        let forcing = (p.forcing)(t);
        let norm = |x: &Coeffs| p.space_v.primary().norm(x);
        let quasi_tol = 0.01 * self.cfg.tol_velocity;

        let mut eta = start.clone();
        let mut monitor = RatioMonitor::default();
        let mut quasi_iterations = 0;
        let mut quasi_max_ratio: f64 = 0.0;
        for _ in 0..self.cfg.max_picard {
            let u = u_prev + &eta * dt;
            let hist = past + self.buffer.endpoint(&*p.op_b, &u, zeta);
            let rhs = &forcing - &hist - (p.op_a)(t, &u);
            let (next, r, iters, worst) = self.quasi_solve(t, w, &rhs, &eta, quasi_tol)?;
            quasi_iterations += iters;
            quasi_max_ratio = quasi_max_ratio.max(worst);
            let change = norm(&(&next - &eta));
            eta = next;
            let stagnated = monitor.push(change);
            if change <= self.cfg.tol_velocity {
                // the reaction must match the final iterate's displacement
                let u = u_prev + &eta * dt;
                let mut reaction = r;
                if let Some(r) = reaction.as_mut() {
                    let hist = past + self.buffer.endpoint(&*p.op_b, &u, zeta);
                    let rhs_final = &forcing - &hist - (p.op_a)(t, &u);
                    *r -= &rhs_final - &rhs;
                }
                return Ok(VelocityOutcome {
                    udot: eta,
                    u,
                    reaction,
                    iterations: monitor.residuals.len(),
                    ratios: monitor.ratios,
                    quasi_iterations,
                    quasi_max_ratio,
                });
            }
            if stagnated {
                break;
            }
        }
        let c = &p.constants;
        let factor = (c.l_a + c.horizon * c.l_b) / c.margin();
        Err(Error::StepFailure {
            step: n,
            stage: "velocity".into(),
            message: format!(
                "velocity fixed point does not contract (last ratio {:.4}); reduce the time step. Theoretical factor (L_A + T L_B)/(m_C - alpha_1) = {factor:.4}",
                monitor.ratios.last().copied().unwrap_or(f64::NAN)
            ),
        })
    }

    fn damage_box_solve(&self, zeta_prev: &Coeffs, source: &Coeffs, start: &Coeffs) -> Result<(Coeffs, usize)> {
        let m = self.p.space_y.pivot().gram();
        let dt = self.grid.dt();
        let c = m * (zeta_prev + source * dt);
        let out = projected_sor(&self.damage_q, &c, &self.damage_lower, &self.damage_upper, start, 1.5, self.cfg.tol_damage, 200_000);
        if !out.converged {
            return Err(Error::StepFailure {
                step: 0,
                stage: "damage".into(),
                message: format!("projected SOR exhausted {} sweeps", out.sweeps),
            });
        }
        Ok((out.x, out.sweeps))
    }

    /// Implicit Euler step of the parabolic inequality for the damage field.
    pub fn damage_solve(&self, zeta_prev: &Coeffs, u_n: &Coeffs, t: f64, start: &Coeffs) -> Result<DamageOutcome> {
        let p = self.p;
        match self.cfg.damage_coupling {
            DamageCoupling::SemiImplicit => {
                let source = (p.op_phi)(t, u_n, zeta_prev);
                let (zeta, sweeps) = self.damage_box_solve(zeta_prev, &source, start)?;
                Ok(DamageOutcome { zeta, sweeps, picard_iterations: 1 })
            }
            DamageCoupling::Picard => {
                let norm = |x: &Coeffs| p.space_y.pivot().norm(x);
                let mut zeta = start.clone();
                let mut monitor = RatioMonitor::default();
                let mut sweeps = 0;
                for _ in 0..self.cfg.max_picard {
                    let source = (p.op_phi)(t, u_n, &zeta);
                    let (next, s) = self.damage_box_solve(zeta_prev, &source, &zeta)?;
                    sweeps += s;
                    let change = norm(&(&next - &zeta));
                    zeta = next;
                    if change <= self.cfg.tol_damage {
                        return Ok(DamageOutcome { zeta, sweeps, picard_iterations: monitor.residuals.len() + 1 });
                    }
                    if monitor.push(change) {
                        break;
                    }
                }
                Err(Error::StepFailure {
                    step: 0,
                    stage: "damage".into(),
                    message: "damage source fixed point does not contract; reduce the time step".into(),
                })
            }
        }
    }

    /// Advances one step from the previous state.
    pub fn step(&mut self) -> Result<&State> {
        self.step_from(None)
    }

    /// Advances one step starting the outer sweep at `guess` instead of the
    /// previous state.
    pub fn step_from(&mut self, guess: Option<OuterGuess>) -> Result<&State> {
        let n = self.step_index() + 1;
        if n > self.grid.steps() {
            return Err(Error::InvalidInput("time grid exhausted".into()));
        }
        let mut diag = StepDiagnostics { step: n, t: self.grid.node(n), ..Default::default() };
        let result = self.advance(n, guess, &mut diag);
        self.diagnostics.push(diag);
        let state = result.map_err(|e| attach_step(e, n))?;
        self.buffer.append(state.u.clone(), state.zeta.clone())?;
        self.states.push(state);
        Ok(self.current())
    }

    fn advance(&self, n: usize, guess: Option<OuterGuess>, diag: &mut StepDiagnostics) -> Result<State> {
        let p = self.p;
        let t = self.grid.node(n);
        let dt = self.grid.dt();
        let prev = &self.states[n - 1];
        let past = self.history_past(n)?;
        let (mut udot, mut w, mut zeta) = match guess {
            Some(g) => (g.udot, g.w, g.zeta),
            None => (prev.udot.clone(), prev.w.clone(), prev.zeta.clone()),
        };
        let mut monitor = RatioMonitor::default();
        for _ in 0..self.cfg.max_picard {
            let vel = self.velocity_solve(n, &past, &w, &zeta, &udot)?;
            let w_new = wear_update(p, &prev.w, &vel.udot, t, dt, self.cfg.wear_scheme)?;
            let dam = self.damage_solve(&prev.zeta, &vel.u, t, &zeta)?;

            let change = p
                .space_v
                .primary()
                .norm(&(&vel.udot - &udot))
                .max(p.space_w.primary().norm(&(&w_new - &w)))
                .max(p.space_y.pivot().norm(&(&dam.zeta - &zeta)));
            diag.sweeps += 1;
            diag.velocity_iterations += vel.iterations;
            diag.velocity_max_ratio = vel.ratios.iter().copied().fold(diag.velocity_max_ratio, f64::max);
            diag.quasi_iterations += vel.quasi_iterations;
            diag.quasi_max_ratio = diag.quasi_max_ratio.max(vel.quasi_max_ratio);
            diag.damage_sweeps += dam.sweeps;
            let stagnated = monitor.push(change);
            diag.outer_residuals = monitor.residuals.clone();
            diag.outer_ratios = monitor.ratios.clone();

            udot = vel.udot;
            w = w_new;
            zeta = dam.zeta;
            if change <= self.cfg.tol_outer {
                return Ok(State { t, u: vel.u, udot, w, zeta, reaction: vel.reaction });
            }
            if stagnated {
                break;
            }
        }
        let c = &p.constants;
        let consts = contraction_constants(c)
            .map(|k| format!("c_p = {:.4}, c_q = {:.4}, c_r = {:.4}", k.c_p, k.c_q, k.c_r))
            .unwrap_or_else(|_| "c_p, c_q, c_r undefined (margin violated)".into());
        Err(Error::StepFailure {
            step: n,
            stage: "outer sweep".into(),
            message: format!(
                "outer sweep does not contract (last ratio {:.4}); {consts}, dt*L_F = {:.4}",
                monitor.ratios.last().copied().unwrap_or(f64::NAN),
                dt * c.l_f
            ),
        })
    }

    /// One outer sweep (velocity, then wear, then damage) of the next step,
    /// as a self-map on guesses. The stepper state is not modified.
    pub fn outer_sweep(&self, guess: &OuterGuess) -> Result<OuterGuess> {
        let p = self.p;
        let n = self.step_index() + 1;
        if n > self.grid.steps() {
            return Err(Error::InvalidInput("time grid exhausted".into()));
        }
        let t = self.grid.node(n);
        let prev = &self.states[n - 1];
        let past = self.history_past(n)?;
        let vel = self.velocity_solve(n, &past, &guess.w, &guess.zeta, &guess.udot)?;
        let w = wear_update(p, &prev.w, &vel.udot, t, self.grid.dt(), self.cfg.wear_scheme)?;
        let dam = self.damage_solve(&prev.zeta, &vel.u, t, &guess.zeta)?;
        Ok(OuterGuess { udot: vel.udot, w, zeta: dam.zeta })
    }

    pub fn into_trajectory(self) -> Trajectory {
        Trajectory { grid: self.grid, states: self.states, diagnostics: self.diagnostics }
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }
}

/// Runs all steps of `grid`.
#[allow(clippy::result_large_err)]
pub fn run(p: &DqviProblem, grid: TimeGrid, cfg: StepperConfig) -> std::result::Result<Trajectory, RunFailure> {
    let empty = |error: Error| RunFailure {
        step: 0,
        error,
        partial: Trajectory { grid, states: Vec::new(), diagnostics: Vec::new() },
    };
    if p.constants.margin() <= 0.0 && !p.margin_overridden {
        return Err(empty(Error::MarginViolated { m_c: p.constants.m_c, alpha1: p.constants.alpha1 }));
    }
    let mut stepper = Stepper::new(p, grid, cfg).map_err(empty)?;
    while !stepper.is_finished() {
        if let Err(error) = stepper.step() {
            let step = stepper.step_index() + 1;
            return Err(RunFailure { step, error, partial: stepper.into_trajectory() });
        }
    }
    Ok(stepper.into_trajectory())
}
