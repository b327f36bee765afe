//! The three verbs: `run`, `convergence` and `validate`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use dqvi::contact2d::{compile, CompiledContact};
use dqvi::history::TimeGrid;
use dqvi::stepper::{run, RunFailure, Trajectory};
use dqvi::verify::{linear_closed_form, LinearSpec, TrajectorySamples};
use dqvi::{contraction_constants, validate_hypotheses, DqviProblem, Error};

use crate::builtin;
use crate::config::{ModelFile, ProblemSource, RunConfig, Verbosity};
use crate::error::CliError;
use crate::output::{
    num, write_diagnostics, write_summary, write_trajectory, ConstantsRecord, ContractionRecord, MarginsRecord,
    NotesRecord, RunRecord, Summary,
};

/// Command-line values that take precedence over the run file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub override_margin: bool,
}

pub struct Prepared {
    pub name: String,
    pub problem: DqviProblem,
    pub contact: Option<CompiledContact>,
    pub linear: Option<LinearSpec>,
    pub warnings: Vec<String>,
}

impl Prepared {
    fn friction_margin(&self) -> Option<f64> {
        self.contact.as_ref().map(|c| c.margins.continuum_margin)
    }
}

/// Builds the problem of a run file. Violated contraction margins are an
/// error unless `allow_violation` is set.
pub fn prepare(cfg: &RunConfig, origin: &Path, allow_violation: bool) -> Result<Prepared, CliError> {
    let horizon = cfg.grid.horizon;
    match cfg.source(origin) {
        ProblemSource::Builtin(b) => {
            let problem = builtin::problem(b, horizon, allow_violation).map_err(|e| match e {
                Error::MarginViolated { .. } => CliError::MarginRefused(e.to_string()),
                other => other.into(),
            })?;
            let warnings = if problem.constants.margin() <= 0.0 {
                vec![format!("contraction margin violated: m_C - alpha_1 = {}", problem.constants.margin())]
            } else {
                Vec::new()
            };
            Ok(Prepared { name: b.name().to_string(), problem, contact: None, linear: builtin::linear_spec(b, horizon), warnings })
        }
        ProblemSource::Contact(path) => {
            let model = ModelFile::load(&path)?.to_model(&path)?;
            let compiled = compile(&model, horizon)?;
            if !allow_violation && !compiled.warnings.is_empty() {
                return Err(CliError::MarginRefused(compiled.warnings.join("; ")));
            }
            let mut problem = compiled.problem.clone();
            problem.margin_overridden = !compiled.warnings.is_empty();
            Ok(Prepared {
                name: path.display().to_string(),
                problem,
                warnings: compiled.warnings.clone(),
                contact: Some(compiled),
                linear: None,
            })
        }
    }
}

fn load(config: &Path) -> Result<RunConfig, CliError> {
    RunConfig::load(config)
}

fn out_dir(cfg: &RunConfig, config: &Path, o: &Overrides) -> PathBuf {
    o.out.clone().unwrap_or_else(|| cfg.output_dir(config))
}

fn say(v: Verbosity, msg: &str) {
    if v != Verbosity::Quiet {
        println!("{msg}");
    }
}

pub struct RunReport {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub summary: Summary,
}

fn summary(prep: &Prepared, cfg: &RunConfig, result: &Result<Trajectory, RunFailure>, wall: f64) -> Summary {
    let c = &prep.problem.constants;
    let (status, completed, failed_step, failure) = match result {
        Ok(t) => ("ok", t.steps(), None, None),
        Err(f) => ("failed", f.partial.steps(), Some(f.step), Some(f.error.to_string())),
    };
    Summary {
        run: RunRecord {
            problem: prep.name.clone(),
            status: status.into(),
            horizon: cfg.grid.horizon,
            steps_requested: cfg.grid.steps,
            steps_completed: completed,
            failed_step,
            failure,
            wall_time_s: wall,
        },
        constants: ConstantsRecord::from(c),
        contraction: contraction_constants(c).ok().map(|k| ContractionRecord { c_p: k.c_p, c_q: k.c_q, c_r: k.c_r }),
        margins: MarginsRecord {
            discrete: c.margin(),
            friction_smallness: prep.friction_margin(),
            overridden: !prep.warnings.is_empty(),
        },
        notes: NotesRecord { warnings: prep.warnings.clone() },
    }
}

/// Runs the configured problem and writes `trajectory.csv`,
/// `diagnostics.csv` and `summary.toml`. Partial results are written when a
/// step fails.
pub fn cmd_run(config: &Path, o: &Overrides) -> Result<RunReport, CliError> {
    let cfg = load(config)?;
    let prep = prepare(&cfg, config, o.override_margin)?;
    let dir = out_dir(&cfg, config, o);
    let verbosity = cfg.output.verbosity;
    for w in &prep.warnings {
        say(verbosity, &format!("warning: {w}"));
    }
    let grid = TimeGrid::new(cfg.grid.horizon, cfg.grid.steps)?;
    let start = Instant::now();
    let result = run(&prep.problem, grid, cfg.stepper.to_config());
    let wall = start.elapsed().as_secs_f64();
    let traj = match &result {
        Ok(t) => t,
        Err(f) => &f.partial,
    };
    write_trajectory(&dir.join("trajectory.csv"), traj, prep.contact.as_ref())?;
    write_diagnostics(&dir.join("diagnostics.csv"), &traj.diagnostics)?;
    let summary = summary(&prep, &cfg, &result, wall);
    write_summary(&dir.join("summary.toml"), &summary)?;
    let exit_code = match &result {
        Ok(t) => {
            say(verbosity, &format!("completed {} steps in {wall:.3} s; results in {}", t.steps(), dir.display()));
            0
        }
        Err(f) => {
            eprintln!("{f}");
            1
        }
    };
    if verbosity == Verbosity::Verbose {
        for d in &traj.diagnostics {
            println!("step {:>5}  sweeps {:>3}  max outer ratio {:.3e}", d.step, d.sweeps, d.outer_ratios.iter().copied().fold(0.0, f64::max));
        }
    }
    Ok(RunReport { exit_code, out_dir: dir, summary })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub steps: usize,
    pub dt: f64,
    /// Sup-norm distance to the next finer level at the common nodes.
    pub difference: Option<f64>,
    /// `log₂` of the ratio of the previous difference to this one, or
    /// `"exact"` when both vanish.
    pub order: Option<String>,
    /// Distance to the closed-form solution, for linear builtins.
    pub exact_error: Option<f64>,
}

pub struct ConvergenceReport {
    pub exit_code: i32,
    pub rows: Vec<ConvergenceRow>,
    pub out_dir: PathBuf,
}

fn order_label(prev: f64, cur: f64) -> String {
    if prev == 0.0 && cur == 0.0 {
        "exact".into()
    } else if cur == 0.0 {
        "undefined".into()
    } else {
        num((prev / cur).log2())
    }
}

/// Runs the problem with `N, 2N, …, 2^{levels−1}N` steps (levels in
/// parallel, each in its own subdirectory) and tabulates successive
/// differences.
pub fn cmd_convergence(config: &Path, levels: usize, o: &Overrides) -> Result<ConvergenceReport, CliError> {
    if levels < 3 {
        return Err(CliError::Usage(format!("a convergence study needs at least 3 levels, got {levels}")));
    }
    let cfg = load(config)?;
    let prep = prepare(&cfg, config, o.override_margin)?;
    let dir = out_dir(&cfg, config, o);
    let stepper = cfg.stepper.to_config();
    let steps: Vec<usize> = (0..levels).map(|k| cfg.grid.steps << k).collect();
    let runs: Vec<Result<Trajectory, CliError>> = steps
        .par_iter()
        .enumerate()
        .map(|(k, &n)| {
            let grid = TimeGrid::new(cfg.grid.horizon, n)?;
            let result = run(&prep.problem, grid, stepper);
            let sub = dir.join(format!("level_{k}"));
            let traj = match &result {
                Ok(t) => t,
                Err(f) => &f.partial,
            };
            write_trajectory(&sub.join("trajectory.csv"), traj, prep.contact.as_ref())?;
            write_diagnostics(&sub.join("diagnostics.csv"), &traj.diagnostics)?;
            result.map_err(|f| CliError::Core(f.error))
        })
        .collect();

    let mut samples = Vec::new();
    let mut failure = None;
    for (k, r) in runs.into_iter().enumerate() {
        match r {
            Ok(t) => samples.push(TrajectorySamples::from_trajectory(&t)),
            Err(e) => {
                failure = Some(format!("level {k} ({} steps) failed: {e}", steps[k]));
                break;
            }
        }
    }
    let mut rows = Vec::new();
    let mut prev_diff: Option<f64> = None;
    for (k, s) in samples.iter().enumerate() {
        let difference = match samples.get(k + 1) {
            Some(f) => Some(s.sup_distance(f)?),
            None => None,
        };
        let order = match (prev_diff, difference) {
            (Some(p), Some(d)) => Some(order_label(p, d)),
            _ => None,
        };
        let exact_error = match &prep.linear {
            Some(spec) => match linear_closed_form(spec, &s.times) {
                Ok(exact) => Some(exact.sup_distance(s)?),
                Err(_) => None,
            },
            None => None,
        };
        rows.push(ConvergenceRow {
            level: k,
            steps: steps[k],
            dt: cfg.grid.horizon / steps[k] as f64,
            difference,
            order,
            exact_error,
        });
        prev_diff = difference;
    }

    let mut table = String::from("level,steps,dt,difference,order,exact_error\n");
    for r in &rows {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{}",
            r.level,
            r.steps,
            num(r.dt),
            r.difference.map(num).unwrap_or_default(),
            r.order.clone().unwrap_or_default(),
            r.exact_error.map(num).unwrap_or_default()
        );
    }
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let path = dir.join("convergence.csv");
    fs::write(&path, &table).map_err(|e| CliError::io(&path, e))?;
    say(cfg.output.verbosity, table.trim_end());
    let exit_code = match failure {
        Some(msg) => {
            eprintln!("study aborted: {msg}");
            1
        }
        None => 0,
    };
    Ok(ConvergenceReport { exit_code, rows, out_dir: dir })
}

pub struct ValidateReport {
    pub exit_code: i32,
    pub text: String,
}

/// Audits the declared constants against samples and reports the
/// contraction constants and margins.
pub fn cmd_validate(config: &Path, o: &Overrides) -> Result<ValidateReport, CliError> {
    let cfg = load(config)?;
    let prep = prepare(&cfg, config, true)?;
    let seed = o.seed.unwrap_or(cfg.output.seed);
    let report = validate_hypotheses(&prep.problem, cfg.output.hypothesis_samples, seed)?;
    let mut text = String::new();
    let mut ok = true;
    let _ = writeln!(text, "problem: {}", prep.name);
    for c in &report.checks {
        let _ = writeln!(text, "{:<24} {}  worst ratio {:.4e}", c.name, if c.passed { "pass" } else { "FAIL" }, c.worst_ratio);
        ok &= c.passed;
    }
    match &report.contraction {
        Some(k) => {
            let _ = writeln!(text, "contraction constants: c_p = {:.6}, c_q = {:.6}, c_r = {:.6}", k.c_p, k.c_q, k.c_r);
        }
        None => {
            let _ = writeln!(text, "contraction constants: undefined");
        }
    }
    let _ = writeln!(text, "margin m_C - alpha_1 = {:.6e}", report.margin);
    if report.margin <= 0.0 {
        let _ = writeln!(text, "FAILED: contraction margin m_C > alpha_1");
    }
    if let Some(c) = &prep.contact {
        let m = c.margins;
        let passed = m.continuum_margin > 0.0;
        let _ = writeln!(
            text,
            "friction smallness: m_visc = {:.6} vs (max friction + 1) * L_p = {:.6}, margin {:.6e}  {}",
            m.m_visc,
            (m.friction_max + 1.0) * m.compliance_lipschitz,
            m.continuum_margin,
            if passed { "pass" } else { "FAIL" }
        );
        if !passed {
            let _ = writeln!(text, "FAILED: friction smallness condition m_visc > (max friction + 1) * L_p");
        }
        ok &= passed;
    }
    for f in report.failures() {
        let _ = writeln!(text, "FAILED: {}", f.name);
    }
    Ok(ValidateReport { exit_code: if ok { 0 } else { 1 }, text })
}
