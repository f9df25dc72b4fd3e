//! Acceptance suite: eleven end-to-end criteria, each an independent
//! experiment with a fixed seed and a pass/fail verdict.
//!
//! A criterion may carry a soft part (currently only the trilinear growth
//! scan). A soft failure is reported but blocks only in assert mode.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use plsim_core::bounds::{
    abs_set_bound, lyapunov_bound, mass_balance_residual, second_moment_bound, DiagnosticsSeries,
};
use plsim_core::bourgain::{
    bracket_integral_j, l4_ensemble_max, trilinear_ratio_scan, trilinear_s, LatticeData,
    TrilinearParams,
};
use plsim_core::grid::{Field, Grid1D, RealField};
use plsim_core::integrators::{integrate, step_count, strang_step_ep, Cgpe, CgpeState, Ep, EpState};
use plsim_core::model::{
    cgpe_flat_closed_form, ep_homogeneous_fixed_point, CgpeParams, EpParams, HomogeneousState,
};
use plsim_core::picard::{contraction_report, picard_cgpe, TimeMesh};
use plsim_core::{bracket, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct Verdict {
    pub hard_ok: bool,
    /// Outcome of the soft part; `true` when there is none.
    pub soft_ok: bool,
    pub detail: String,
}

impl Verdict {
    fn hard(ok: bool, detail: String) -> Self {
        Self {
            hard_ok: ok,
            soft_ok: true,
            detail,
        }
    }
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub time_limit: Option<Duration>,
    pub check: fn() -> Result<Verdict>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Failed only in its soft part.
    pub soft_failure: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

impl CriterionOutcome {
    /// Whether this outcome makes the suite fail.
    pub fn blocking(&self, assert_soft: bool) -> bool {
        !self.passed && (!self.soft_failure || assert_soft)
    }
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match (self.passed, self.soft_failure) {
            (true, _) => "PASS",
            (false, true) => "SOFT-FAIL",
            (false, false) => "FAIL",
        };
        write!(
            f,
            "[{tag}] C{:<2} {:<34} {:>7.2}s  {}",
            self.id, self.name, self.elapsed_s, self.detail
        )
    }
}

pub fn criteria() -> Vec<Criterion> {
    let secs = |s| Some(Duration::from_secs(s));
    vec![
        Criterion { id: 1, name: "mass balance identity", time_limit: secs(10), check: mass_balance },
        Criterion { id: 2, name: "decay envelope and absorbing set", time_limit: secs(30), check: absorbing_set },
        Criterion { id: 3, name: "exact oracle agreement", time_limit: None, check: exact_oracles },
        Criterion { id: 4, name: "reservoir positivity", time_limit: None, check: reservoir_positivity },
        Criterion { id: 5, name: "Lyapunov decay", time_limit: None, check: lyapunov_decay },
        Criterion { id: 6, name: "reservoir second moment", time_limit: None, check: second_moment },
        Criterion { id: 7, name: "Picard contraction", time_limit: None, check: picard_contraction },
        Criterion { id: 8, name: "L4 Strichartz ratio stability", time_limit: secs(60), check: l4_stability },
        Criterion { id: 9, name: "trilinear form", time_limit: None, check: trilinear },
        Criterion { id: 10, name: "bracket integral", time_limit: None, check: bracket_lemma },
        Criterion { id: 11, name: "splitting order of accuracy", time_limit: None, check: splitting_order },
    ]
}

pub fn run_criterion(c: &Criterion) -> CriterionOutcome {
    let start = Instant::now();
    let verdict = (c.check)().unwrap_or_else(|e| Verdict::hard(false, format!("error: {e:#}")));
    let elapsed = start.elapsed();
    let mut detail = verdict.detail;
    let mut hard_ok = verdict.hard_ok;
    if let Some(limit) = c.time_limit {
        if elapsed > limit {
            hard_ok = false;
            detail.push_str(&format!("; exceeded time limit {}s", limit.as_secs()));
        }
    }
    CriterionOutcome {
        id: c.id,
        name: c.name,
        passed: hard_ok && verdict.soft_ok,
        soft_failure: hard_ok && !verdict.soft_ok,
        detail,
        elapsed_s: elapsed.as_secs_f64(),
    }
}

/// Run the selected criteria (all when `only` is empty) in order.
pub fn run_all(only: &[u8]) -> Vec<CriterionOutcome> {
    criteria()
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
        .map(run_criterion)
        .collect()
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn two_pi_grid(n: usize) -> Grid1D {
    Grid1D::new(n, 2.0 * PI).expect("valid grid")
}

fn unit_params() -> CgpeParams {
    CgpeParams::new(1.0, 1.0).expect("positive")
}

fn mass_balance() -> Result<Verdict> {
    let grid = two_pi_grid(256);
    let p = unit_params();
    let u0 = Field::from_fn(&grid, |x| Complex64::new((-(x - PI).powi(2) / 0.5).exp(), 0.0));
    let traj = integrate(&Cgpe(&p), CgpeState { u: u0, t: 0.0 }, 1e-3, 5.0, 20)?;
    let coarse = traj.diagnostics.subsample(2);
    let r_fine = sup_abs(&mass_balance_residual(&traj.diagnostics, &p)?);
    let r_coarse = sup_abs(&mass_balance_residual(&coarse, &p)?);
    let ratio = r_coarse / r_fine;
    Ok(Verdict::hard(
        ratio >= 3.4,
        format!("sup residual {r_coarse:.3e} (h=0.04) -> {r_fine:.3e} (h=0.02), ratio {ratio:.3} (need >= 3.4)"),
    ))
}

fn absorbing_set() -> Result<Verdict> {
    let grid = two_pi_grid(256);
    let p = unit_params();
    let measure = grid.length();
    let radius = p.absorbing_radius_sq(measure);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let raw = Field::random_band_limited(&grid, 8, &mut rng);
    let u0 = raw.scale(Complex64::new((10.0 * radius / raw.mass()).sqrt(), 0.0));
    let traj = integrate(&Cgpe(&p), CgpeState { u: u0, t: 0.0 }, 1e-3, 10.0, 10)?;
    let d = &traj.diagnostics;
    let (m0, t_settle) = (d.mass[0], 5.0 / (2.0 * p.xi));
    let mut worst_excess = f64::NEG_INFINITY;
    let mut late_max = 0.0f64;
    // t = 0 meets the envelope with equality
    for (&t, &m) in d.times.iter().zip(&d.mass).skip(1) {
        worst_excess = worst_excess.max(m - abs_set_bound(t, m0, &p, measure));
        if t >= t_settle {
            late_max = late_max.max(m);
        }
    }
    let ok = worst_excess <= 1e-8 && late_max <= 1.05 * radius;
    Ok(Verdict::hard(
        ok,
        format!(
            "max(mass - envelope), t > 0: {worst_excess:.3e}; max mass for t >= {t_settle} is {late_max:.4} vs 1.05*4pi = {:.4}",
            1.05 * radius
        ),
    ))
}

fn exact_oracles() -> Result<Verdict> {
    // flat cGPE state against the logistic amplitude and logarithmic phase
    let grid = two_pi_grid(32);
    let p = CgpeParams::new(0.7, 1.3)?;
    let (rho0, theta0) = (0.2, 0.4);
    let u0 = Field::from_fn(&grid, |_| Complex64::from_polar(rho0, theta0));
    let traj = integrate(&Cgpe(&p), CgpeState { u: u0, t: 0.0 }, 1e-3, 10.0, 100)?;
    let mut flat_err = 0.0f64;
    for s in &traj.states {
        let exact = cgpe_flat_closed_form(rho0, theta0, s.t, &p);
        for v in s.u.values() {
            flat_err = flat_err.max((v - exact).norm() / exact.norm());
        }
    }

    // homogeneous fixed point of the reservoir system
    let grid = two_pi_grid(32);
    let ep = EpParams::new(1.0, 0.5, 2.0, 0.5, 2.0, RealField::constant(&grid, 3.0))?;
    let HomogeneousState::Condensate {
        amplitude_sq,
        n_star,
        omega,
    } = ep_homogeneous_fixed_point(&ep)?
    else {
        anyhow::bail!("pump is below threshold");
    };
    let dt = 1e-2;
    let mut state = EpState {
        u: Field::from_fn(&grid, |_| Complex64::new(amplitude_sq.sqrt(), 0.0)),
        n: RealField::constant(&grid, n_star),
        t: 0.0,
    };
    let mut fp_err = 0.0f64;
    for k in 1..=1000 {
        state = strang_step_ep(&state, dt, &ep)?;
        let exact = Complex64::from_polar(amplitude_sq.sqrt(), -omega * k as f64 * dt);
        for v in state.u.values() {
            fp_err = fp_err.max((v - exact).norm());
        }
        for n in state.n.values() {
            fp_err = fp_err.max((n - n_star).abs());
        }
    }
    Ok(Verdict::hard(
        flat_err <= 1e-8 && fp_err <= 1e-10,
        format!(
            "flat state max relative error {flat_err:.2e} (<= 1e-8); fixed point max deviation over 1000 steps {fp_err:.2e} (<= 1e-10)"
        ),
    ))
}

/// Seeded reservoir-system runs shared by the positivity, Lyapunov and
/// second-moment criteria.
struct EpRun {
    params: EpParams,
    diagnostics: DiagnosticsSeries,
}

const EP_RUNS: usize = 20;

fn ep_ensemble() -> &'static Result<Vec<EpRun>, String> {
    static RUNS: OnceLock<Result<Vec<EpRun>, String>> = OnceLock::new();
    RUNS.get_or_init(|| (0..EP_RUNS as u64).map(ep_run).collect::<Result<_>>().map_err(|e| format!("{e:#}")))
}

fn smooth_bump(x: f64, center: f64, width: f64, length: f64) -> f64 {
    let mut d = (x - center).rem_euclid(length);
    if d > 0.5 * length {
        d = length - d;
    }
    let r = 2.0 * d / width;
    if r >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

fn ep_run(seed: u64) -> Result<EpRun> {
    let length = 20.0;
    let grid = Grid1D::new(128, length)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let height = rng.random_range(1.0..4.0);
    let pump = RealField::from_fn(&grid, |x| height * smooth_bump(x, 10.0, 2.5, length));
    let params = EpParams::new(1.0, 0.5, 2.0, 0.5, 2.0, pump)?;
    let (center, n_height) = (rng.random_range(0.0..length), rng.random_range(0.0..2.0));
    let n0 = RealField::from_fn(&grid, |x| n_height * smooth_bump(x, center, 4.0, length));
    let raw = Field::random_band_limited(&grid, 6, &mut rng);
    let mass = rng.random_range(0.5..4.0);
    let u0 = raw.scale(Complex64::new((mass / raw.mass()).sqrt(), 0.0));
    let traj = integrate(&Ep(&params), EpState { u: u0, n: n0, t: 0.0 }, 2e-3, 4.0, 10)?;
    Ok(EpRun {
        params,
        diagnostics: traj.diagnostics,
    })
}

fn ep_runs() -> Result<&'static [EpRun]> {
    match ep_ensemble() {
        Ok(runs) => Ok(runs),
        Err(e) => anyhow::bail!("reservoir ensemble failed: {e}"),
    }
}

fn reservoir_positivity() -> Result<Verdict> {
    let runs = ep_runs()?;
    let mut worst = f64::INFINITY;
    for run in runs {
        let r = run.diagnostics.reservoir.as_ref().expect("reservoir series");
        ensure!(r.n_min[0] >= 0.0, "initial reservoir must be nonnegative");
        worst = r.n_min.iter().fold(worst, |a, &v| a.min(v));
    }
    Ok(Verdict::hard(
        worst >= -1e-12,
        format!("min n over {} runs and all samples: {worst:.3e} (>= -1e-12)", runs.len()),
    ))
}

fn lyapunov_decay() -> Result<Verdict> {
    let runs = &ep_runs()?[..10];
    let mut worst = f64::INFINITY;
    for run in runs {
        let d = &run.diagnostics;
        let r = d.reservoir.as_ref().expect("reservoir series");
        let (s, gamma) = (run.params.pump.integral(), run.params.gamma());
        let l0 = 0.5 * d.mass[0] + r.n_integral[0];
        for i in 1..d.len() {
            let l = 0.5 * d.mass[i] + r.n_integral[i];
            worst = worst.min(lyapunov_bound(d.times[i], l0, s, gamma) - l);
        }
    }
    Ok(Verdict::hard(
        worst >= -1e-8,
        format!("min(bound - L) over {} runs, t > 0: {worst:.3e} (>= -1e-8)", runs.len()),
    ))
}

fn second_moment() -> Result<Verdict> {
    let runs = &ep_runs()?[..10];
    let mut worst = f64::INFINITY;
    for run in runs {
        let d = &run.diagnostics;
        let r = d.reservoir.as_ref().expect("reservoir series");
        let p2 = run.params.pump.sq_integral();
        for i in 1..d.len() {
            let bound = second_moment_bound(d.times[i], r.n_sq_integral[0], p2, run.params.beta);
            worst = worst.min(bound - r.n_sq_integral[i]);
        }
    }
    Ok(Verdict::hard(
        worst >= -1e-8,
        format!("min(bound - int n^2) over {} runs, t > 0: {worst:.3e} (>= -1e-8)", runs.len()),
    ))
}

fn relative_l2(a: &Field, b: &Field) -> f64 {
    let diff: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let base: f64 = b.values().iter().map(|y| y.norm_sqr()).sum();
    (diff / base).sqrt()
}

fn picard_contraction() -> Result<Verdict> {
    let grid = two_pi_grid(64);
    let p = unit_params();
    let delta = 0.05;
    let (mut worst_r, mut worst_err) = (0.0f64, 0.0f64);
    let (mut all_converged, mut monotone) = (true, true);
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = Field::random_band_limited(&grid, 4, &mut rng);
        let u0 = raw.scale(Complex64::new(1.0 / raw.hs_norm(1.0), 0.0));
        let h = picard_cgpe(&u0, &TimeMesh::new(delta, 64)?, &p, 1.0, 60)?;
        let rep = contraction_report(&h);
        let half = contraction_report(&picard_cgpe(&u0, &TimeMesh::new(delta / 2.0, 64)?, &p, 1.0, 60)?);
        all_converged &= rep.converged && half.converged;
        monotone &= half.measured_ratio <= rep.measured_ratio;
        worst_r = worst_r.max(rep.measured_ratio);

        let traj = integrate(&Cgpe(&p), CgpeState { u: u0, t: 0.0 }, delta / 256.0, delta, 256)?;
        let strang = &traj.states.last().expect("final state").u;
        let fixed_point = h.last().u.last().expect("final node");
        worst_err = worst_err.max(relative_l2(fixed_point, strang));
    }
    Ok(Verdict::hard(
        all_converged && monotone && worst_r < 0.9 && worst_err <= 1e-4,
        format!(
            "10 instances: converged {all_converged}, max ratio {worst_r:.4} (< 0.9), r(delta/2) <= r(delta) {monotone}, max error vs splitting {worst_err:.2e} (<= 1e-4)"
        ),
    ))
}

fn l4_stability() -> Result<Verdict> {
    let coarse = l4_ensemble_max(32, 64, 200, 2024)?;
    let fine = l4_ensemble_max(64, 128, 200, 2024)?;
    let change = coarse.max(fine) / coarse.min(fine);
    Ok(Verdict::hard(
        change < 2.0,
        format!("ensemble max {coarse:.4} (32x64) vs {fine:.4} (64x128), change {change:.3}x (< 2)"),
    ))
}

/// Exhaustive six-fold sum over all lattice triples, constraint checked
/// explicitly and weights written out from the definition.
fn brute_force_trilinear(v: &LatticeData, v1: &LatticeData, v2: &LatticeData, p: &TrilinearParams) -> f64 {
    let (nx, nt) = (v.n_xi, v.n_tau);
    let (cx, ct) = ((nx / 2) as i64, (nt / 2) as i64);
    let br = |x: f64, e: f64| (1.0 + x * x).powf(e / 2.0);
    let mut total = 0.0;
    for i in 0..nx {
        for j in 0..nt {
            for i1 in 0..nx {
                for j1 in 0..nt {
                    for i2 in 0..nx {
                        for j2 in 0..nt {
                            let (oi, oi1, oi2) = (i as i64 - cx, i1 as i64 - cx, i2 as i64 - cx);
                            let (oj, oj1, oj2) = (j as i64 - ct, j1 as i64 - ct, j2 as i64 - ct);
                            if oi != oi1 - oi2 || oj != oj1 - oj2 {
                                continue;
                            }
                            let xi = [oi, oi1, oi2].map(|o| o as f64 * v.d_xi);
                            let tau = [oj, oj1, oj2].map(|o| o as f64 * v.d_tau);
                            let w = br(xi[1], p.k)
                                / (br(tau[0], p.a)
                                    * br(tau[1] + xi[1] * xi[1], p.a1)
                                    * br(tau[2] + xi[2] * xi[2], p.a2)
                                    * br(xi[2], p.k)
                                    * br(xi[0], p.l));
                            total += v.at(i, j) * v1.at(i1, j1) * v2.at(i2, j2) * w;
                        }
                    }
                }
            }
        }
    }
    total * (v.d_xi * v.d_tau).powi(2)
}

fn trilinear() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let params = [
        TrilinearParams::default(),
        TrilinearParams { k: 1.0, l: -0.5, a: 0.3, a1: 0.6, a2: 0.4 },
    ];
    let mut worst = 0.0f64;
    let mut cases = 0;
    for nx in 1..=8 {
        for nt in 1..=8 {
            let (dx, dt) = (rng.random_range(0.2..2.0), rng.random_range(0.2..2.0));
            let v = LatticeData::random(nx, nt, dx, dt, &mut rng);
            let v1 = LatticeData::random(nx, nt, dx, dt, &mut rng);
            let v2 = LatticeData::random(nx, nt, dx, dt, &mut rng);
            for p in &params {
                let fast = trilinear_s(&v, &v1, &v2, p)?;
                let slow = brute_force_trilinear(&v, &v1, &v2, p);
                worst = worst.max((fast - slow).abs() / slow.abs().max(1.0));
                cases += 1;
            }
        }
    }
    let p = TrilinearParams::default();
    ensure!(p.admissible(), "default exponents must be admissible");
    let scan = trilinear_ratio_scan(&p, &[8, 16, 32], 8, 1)?;
    let growth = scan[2].ratio / scan[0].ratio;
    Ok(Verdict {
        hard_ok: worst <= 1e-12,
        soft_ok: growth <= 3.0,
        detail: format!(
            "oracle: {cases} lattices, max relative deviation {worst:.2e} (<= 1e-12); admissible scan max ratio {:.4} (N=8) -> {:.4} (N=32), growth {growth:.3}x (soft, <= 3)",
            scan[0].ratio, scan[2].ratio
        ),
    })
}

fn bracket_lemma() -> Result<Verdict> {
    let j0 = bracket_integral_j(0.0, 0.5, 0.5)?;
    let scaled: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0]
        .iter()
        .map(|&s| Ok(bracket_integral_j(s, 0.5, 0.4)? * bracket(s).powf(0.8)))
        .collect::<Result<_>>()?;
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let err = (j0 - PI).abs();
    Ok(Verdict::hard(
        err <= 1e-9 && hi / lo <= 3.0,
        format!(
            "|J(0) - pi| = {err:.2e} (<= 1e-9); J(s)<s>^0.8 in [{lo:.4}, {hi:.4}] for s = 1..16, max/min {:.3} (<= 3)",
            hi / lo
        ),
    ))
}

fn smooth_data(grid: &Grid1D) -> Field {
    Field::from_fn(grid, |x| Complex64::new(0.8 + 0.3 * x.cos(), 0.2 * (2.0 * x).sin()))
}

fn cgpe_final(dt: f64) -> Result<Field> {
    let grid = two_pi_grid(64);
    let p = unit_params();
    let traj = integrate(&Cgpe(&p), CgpeState { u: smooth_data(&grid), t: 0.0 }, dt, 1.0, step_count(dt, 1.0))?;
    Ok(traj.states.last().expect("final state").u.clone())
}

fn ep_final(dt: f64) -> Result<(Field, RealField)> {
    let grid = two_pi_grid(64);
    let pump = RealField::from_fn(&grid, |x| 1.0 + 0.5 * x.cos());
    let p = EpParams::new(1.0, 0.5, 2.0, 0.5, 2.0, pump)?;
    let n0 = RealField::from_fn(&grid, |x| 0.4 + 0.1 * (x - 1.0).sin());
    let traj = integrate(
        &Ep(&p),
        EpState { u: smooth_data(&grid), n: n0, t: 0.0 },
        dt,
        1.0,
        step_count(dt, 1.0),
    )?;
    let last = traj.states.last().expect("final state");
    Ok((last.u.clone(), last.n.clone()))
}

fn splitting_order() -> Result<Verdict> {
    let reference = cgpe_final(0.1 / 256.0)?;
    let e1 = cgpe_final(0.025)?.max_abs_diff(&reference);
    let e2 = cgpe_final(0.0125)?.max_abs_diff(&reference);
    let cgpe_ratio = e1 / e2;

    let (u_ref, n_ref) = ep_final(0.1 / 256.0)?;
    let ep_err = |dt: f64| -> Result<f64> {
        let (u, n) = ep_final(dt)?;
        let dn = n.values().iter().zip(n_ref.values()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        Ok(u.max_abs_diff(&u_ref).max(dn))
    };
    let ep_ratio = ep_err(0.025)? / ep_err(0.0125)?;
    let within = |r: f64| (3.4..=4.6).contains(&r);
    Ok(Verdict::hard(
        within(cgpe_ratio) && within(ep_ratio),
        format!("error ratio under dt halving: cgpe {cgpe_ratio:.3}, ep {ep_ratio:.3} (in [3.4, 4.6])"),
    ))
}
