//! The `run`, `check`, `picard` and `norms` subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use plsim_core::bounds::{
    abs_set_envelope, ep_lyapunov, f1_residual, reservoir_bounds, CheckReport, DiagnosticsSeries,
};
use plsim_core::bourgain::{
    l4_ensemble_max, l4_strichartz_ratio, trilinear_ratio_scan, xsb_norm, ys_norm,
    DispersionRelation, SpaceTimeField, TrilinearParams, Window,
};
use plsim_core::grid::{Field, RealField};
use plsim_core::integrators::{integrate, Cgpe, CgpeState, Ep, EpState, IntegrateError, Trajectory};
use plsim_core::picard::{
    contraction_report, contraction_report_from_diffs, existence_time_bracket, picard_cgpe,
    picard_ep, ContractionReport, ExistenceBracket, IterateHistory, PicardError, TimeMesh,
};
use plsim_core::Complex64;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::{CheckName, ModelKind, Parsed, RunConfig};
use crate::output::{self, OutputDir};

/// Built-in configurations, selectable with `--builtin NAME`.
pub fn builtin_config(name: &str) -> Option<&'static str> {
    Some(match name {
        "flat-cgpe" => {
            r#"{"model": "cgpe", "grid": {"n_points": 64},
                "params": {"xi": 1, "sigma": 1},
                "initial": {"u": {"kind": "flat", "rho0": 0.5, "theta0": 0}},
                "dt": 1e-3, "t_end": 2, "sample_every": 10,
                "checks": ["abs_set", "f1"]}"#
        }
        // corrupts one diagnostics sample; the run must fail
        "fault-injection" => {
            r#"{"model": "cgpe", "grid": {"n_points": 64},
                "params": {"xi": 1, "sigma": 1},
                "initial": {"u": {"kind": "gaussian", "amplitude": 1, "width": 0.5}},
                "dt": 1e-3, "t_end": 1, "sample_every": 10,
                "checks": ["f1", "abs_set"], "inject_fault": true}"#
        }
        _ => return None,
    })
}

pub const BUILTIN_NAMES: [&str; 2] = ["flat-cgpe", "fault-injection"];

/// State recorded in a checkpoint.
struct Snapshot {
    t: f64,
    u: Field,
    n: Option<RealField>,
}

struct Simulation {
    diagnostics: DiagnosticsSeries,
    snapshots: Vec<Snapshot>,
    blow_up: Option<String>,
}

fn collect<S: std::fmt::Debug>(
    result: Result<Trajectory<S>, IntegrateError<S>>,
    snap: impl Fn(&S) -> Snapshot,
) -> Simulation {
    let (traj, blow_up) = match result {
        Ok(t) => (Some(t), None),
        Err(e) => (e.partial, Some(e.source.to_string())),
    };
    match traj {
        Some(t) => Simulation {
            diagnostics: t.diagnostics,
            snapshots: t.states.iter().map(snap).collect(),
            blow_up,
        },
        None => Simulation {
            diagnostics: DiagnosticsSeries::default(),
            snapshots: Vec::new(),
            blow_up,
        },
    }
}

fn simulate(c: &RunConfig) -> Result<Simulation> {
    let u = c.initial_u()?;
    Ok(match c.model {
        ModelKind::Cgpe => {
            let p = c.cgpe_params()?;
            let r = integrate(&Cgpe(&p), CgpeState { u, t: 0.0 }, c.dt, c.t_end, c.sample_every);
            collect(r, |s| Snapshot {
                t: s.t,
                u: s.u.clone(),
                n: None,
            })
        }
        ModelKind::Ep => {
            let p = c.ep_params()?;
            let n = c.initial_n()?.context("ep model needs initial.n")?;
            let r = integrate(&Ep(&p), EpState { u, n, t: 0.0 }, c.dt, c.t_end, c.sample_every);
            collect(r, |s| Snapshot {
                t: s.t,
                u: s.u.clone(),
                n: Some(s.n.clone()),
            })
        }
    })
}

/// Replace one mid-run mass sample by a value far above any envelope.
fn inject_fault(d: &mut DiagnosticsSeries) {
    if d.is_empty() {
        return;
    }
    let peak = d.mass.iter().fold(0.0f64, |a, &m| a.max(m));
    let mid = d.len() / 2;
    d.mass[mid] = 1e3 * (1.0 + peak);
}

fn failed_report(name: &str) -> CheckReport {
    CheckReport {
        name: name.to_string(),
        passed: false,
        worst_margin: f64::NAN,
        location: f64::NAN,
        tolerance: f64::NAN,
    }
}

/// Evaluate the configured checks on a diagnostics series. A check that
/// cannot be evaluated (too few samples, non-finite data) counts as failed
/// and its reason is returned alongside.
pub fn evaluate_checks(
    c: &RunConfig,
    d: &DiagnosticsSeries,
) -> Result<(Vec<CheckReport>, Vec<String>)> {
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for &check in &c.checks {
        let (name, result) = match check {
            CheckName::F1 => ("f1", f1_residual(d, &c.cgpe_params()?)),
            CheckName::AbsSet => (
                "abs_set",
                abs_set_envelope(d, &c.cgpe_params()?, c.grid.length),
            ),
            CheckName::Lyapunov => ("lyapunov", ep_lyapunov(d, &c.ep_params()?)),
            CheckName::Reservoir => ("reservoir", reservoir_bounds(d, &c.ep_params()?)),
        };
        match result {
            Ok(r) => reports.push(r),
            Err(e) => {
                errors.push(format!("{name}: {e}"));
                reports.push(failed_report(name));
            }
        }
    }
    Ok((reports, errors))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub model: ModelKind,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub dt: f64,
    pub t_end: f64,
    pub samples: usize,
    pub blow_up: Option<String>,
    pub fault_injected: bool,
    pub warnings: Vec<String>,
    pub check_errors: Vec<String>,
    pub checks: Vec<CheckReport>,
}

impl RunReport {
    /// Zero exit status: no blow-up and every check passed.
    pub fn success(&self) -> bool {
        self.blow_up.is_none() && self.checks.iter().all(|r| r.passed)
    }
}

pub fn checkpoint_name(index: usize) -> String {
    format!("checkpoint_{index:06}.plsim")
}

pub const FINAL_CHECKPOINT: &str = "final.plsim";

/// Simulate, write `diagnostics.csv`, `reports.json` and checkpoints.
pub fn run(parsed: &Parsed, out: &Path) -> Result<RunReport> {
    let c = &parsed.config;
    let dir = OutputDir::acquire(out)?;
    let hash = c.hash();
    let mut sim = simulate(c)?;
    if c.inject_fault {
        inject_fault(&mut sim.diagnostics);
    }
    output::write_diagnostics(&dir.path(output::DIAGNOSTICS_CSV), &sim.diagnostics)?;

    if c.checkpoint_every > 0 {
        for (i, s) in sim.snapshots.iter().enumerate().skip(1) {
            if i % c.checkpoint_every == 0 {
                Checkpoint::new(&hash, s.t, &s.u, s.n.as_ref()).save(&dir.path(&checkpoint_name(i)))?;
            }
        }
    }
    if let Some(s) = sim.snapshots.last() {
        Checkpoint::new(&hash, s.t, &s.u, s.n.as_ref()).save(&dir.path(FINAL_CHECKPOINT))?;
    }

    let (checks, check_errors) = evaluate_checks(c, &sim.diagnostics)?;
    let report = RunReport {
        model: c.model,
        seed: c.seed(),
        config_hash: hash,
        dt: c.dt,
        t_end: c.t_end,
        samples: sim.diagnostics.len(),
        blow_up: sim.blow_up,
        fault_injected: c.inject_fault,
        warnings: parsed.warnings.clone(),
        check_errors,
        checks,
    };
    dir.write_json(output::REPORTS_JSON, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutput {
    pub source: PathBuf,
    pub check_errors: Vec<String>,
    pub checks: Vec<CheckReport>,
}

/// Re-run the configured checks on a stored diagnostics CSV.
pub fn check(c: &RunConfig, csv: &Path) -> Result<CheckOutput> {
    let d = output::read_diagnostics(csv)?;
    let (checks, check_errors) = evaluate_checks(c, &d)?;
    Ok(CheckOutput {
        source: csv.to_path_buf(),
        check_errors,
        checks,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    pub delta: f64,
    pub n_nodes: usize,
    pub max_iter: usize,
    /// Sobolev index of the iterate distance (cgpe only).
    pub s: f64,
    pub bisect: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            delta: 0.05,
            n_nodes: 64,
            max_iter: 60,
            s: 1.0,
            bisect: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardOutput {
    pub model: ModelKind,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub delta: f64,
    pub n_nodes: usize,
    pub s: f64,
    pub iterations: usize,
    pub diverged: bool,
    pub report: ContractionReport,
    pub bracket: Option<ExistenceBracket>,
}

impl PicardOutput {
    pub fn success(&self) -> bool {
        self.report.converged && !self.diverged
    }
}

fn history_outcome(r: Result<IterateHistory, PicardError>) -> Result<(ContractionReport, usize, bool)> {
    match r {
        Ok(h) => Ok((contraction_report(&h), h.diffs.len(), false)),
        Err(PicardError::Diverged { history }) => Ok((
            contraction_report_from_diffs(&history.diffs, history.data_norm),
            history.diffs.len(),
            true,
        )),
        Err(e) => Err(e.into()),
    }
}

pub fn picard(c: &RunConfig, opts: &PicardOptions) -> Result<PicardOutput> {
    let u0 = c.initial_u()?;
    let solve = |delta: f64| -> Result<(ContractionReport, usize, bool)> {
        let mesh = TimeMesh::new(delta, opts.n_nodes)?;
        match c.model {
            ModelKind::Cgpe => history_outcome(picard_cgpe(&u0, &mesh, &c.cgpe_params()?, opts.s, opts.max_iter)),
            ModelKind::Ep => {
                let n0 = c.initial_n()?.context("ep model needs initial.n")?;
                history_outcome(picard_ep(&u0, &n0, &mesh, &c.ep_params()?, opts.max_iter))
            }
        }
    };
    let (report, iterations, diverged) = solve(opts.delta)?;
    let bracket = if opts.bisect {
        let probe = |d: f64| matches!(solve(d), Ok((r, _, false)) if r.converged);
        Some(existence_time_bracket(opts.delta, 2.0, 40, probe)?)
    } else {
        None
    };
    Ok(PicardOutput {
        model: c.model,
        seed: c.seed(),
        config_hash: c.hash(),
        delta: opts.delta,
        n_nodes: opts.n_nodes,
        s: if c.model == ModelKind::Cgpe { opts.s } else { 0.0 },
        iterations,
        diverged,
        report,
        bracket,
    })
}

/// A CSV table: header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Per-checkpoint spatial norms (`time, l2, hs, l4`) and, for eight or
/// more evenly spaced checkpoints, one space-time row with the windowed
/// `X^{s,b}` and `Y^s` norms and the `L^4` ratio.
pub fn norms_from_checkpoints(paths: &[PathBuf], s: f64, b: f64) -> Result<(Table, Option<Table>)> {
    ensure!(!paths.is_empty(), "no checkpoints given");
    let cps: Vec<Checkpoint> = paths.iter().map(|p| Checkpoint::load(p)).collect::<Result<_>>()?;
    let mut spatial = Table::new(&["time", "l2", "hs", "l4"]);
    for cp in &cps {
        spatial.rows.push(vec![
            num(cp.header.time),
            num(cp.u.mass().sqrt()),
            num(cp.u.hs_norm(s)),
            num(cp.u.l4_fourth().powf(0.25)),
        ]);
    }
    if cps.len() < 8 {
        return Ok((spatial, None));
    }
    let grid = cps[0].u.grid().clone();
    ensure!(
        cps.iter().all(|c| c.u.grid() == &grid),
        "checkpoints live on different grids"
    );
    let step = cps[1].header.time - cps[0].header.time;
    ensure!(step > 0.0, "checkpoints must be in increasing time order");
    for w in cps.windows(2) {
        let h = w[1].header.time - w[0].header.time;
        if (h - step).abs() > 1e-9 * step {
            bail!("checkpoints are not evenly spaced in time ({step} vs {h})");
        }
    }
    let values: Vec<Complex64> = cps.iter().flat_map(|c| c.u.values().iter().copied()).collect();
    let f = SpaceTimeField::new(&grid, cps.len(), step * cps.len() as f64, values, Window::SmoothBump)?;
    let d = DispersionRelation::Schroedinger;
    let mut spacetime = Table::new(&["n_time", "t_span", "s", "b", "xsb", "ys", "l4_ratio"]);
    spacetime.rows.push(vec![
        cps.len().to_string(),
        num(f.t_span()),
        num(s),
        num(b),
        num(xsb_norm(&f, s, b, d)),
        num(ys_norm(&f, s, d)),
        num(l4_strichartz_ratio(&f)?),
    ]);
    Ok((spatial, Some(spacetime)))
}

/// Ensemble maxima of the `L^4 / X^{0,3/8}` ratio, one row per
/// `(n_space, n_time)` lattice.
pub fn l4_table(sizes: &[(usize, usize)], samples: usize, seed: u64) -> Result<Table> {
    let mut t = Table::new(&["n_space", "n_time", "samples", "seed", "max_ratio"]);
    for &(n, m) in sizes {
        let r = l4_ensemble_max(n, m, samples, seed)?;
        t.rows.push(vec![n.to_string(), m.to_string(), samples.to_string(), seed.to_string(), num(r)]);
    }
    Ok(t)
}

pub fn trilinear_table(p: &TrilinearParams, sizes: &[usize], samples: usize, seed: u64) -> Result<Table> {
    let mut t = Table::new(&["size", "samples", "seed", "max_ratio", "admissible"]);
    for row in trilinear_ratio_scan(p, sizes, samples, seed)? {
        t.rows.push(vec![
            row.size.to_string(),
            samples.to_string(),
            row.seed.to_string(),
            num(row.ratio),
            row.admissible_flag.to_string(),
        ]);
    }
    Ok(t)
}
