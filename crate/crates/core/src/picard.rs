//! Picard iteration on the Duhamel formulation over a short interval
//! `[0, delta]`, measuring the contraction that local well-posedness rests on.
//!
//! Every iterate is stored at the uniform nodes of a [`TimeMesh`]. The time
//! integral is the trapezoid rule in the interaction picture, so the free
//! propagator `e^{-ik^2 t}` is applied exactly. Nonlinear terms are formed
//! pointwise without dealiasing, like the splitting steppers, so a converged
//! fixed point can be compared with their trajectories directly.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{Field, Grid1D, RealField, Representation};
use crate::model::{CgpeParams, EpParams};

/// Converged when the last difference is at most this times `1 + ||data||`.
pub const CONVERGED_TOL: f64 = 1e-10;
/// Differences below this (relative to `1 + ||data||`) are roundoff and do
/// not enter the measured contraction ratio.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;
/// Consecutive growing differences that count as divergence.
pub const DIVERGENCE_RUN: usize = 3;

#[derive(Debug, Error)]
pub enum PicardError {
    #[error("time mesh needs delta > 0 and at least 3 nodes (delta = {delta}, n_nodes = {n_nodes})")]
    BadMesh { delta: f64, n_nodes: usize },
    #[error("at least 2 iterations are required, got {0}")]
    TooFewIterations(usize),
    #[error("initial fields live on different grids")]
    GridMismatch,
    #[error("Picard iteration diverged after {} iterates", .history.iterates.len())]
    Diverged { history: Box<IterateHistory> },
    #[error("bisection probe never {what} within {tries} tries from delta = {delta}")]
    NoBracket {
        what: &'static str,
        tries: usize,
        delta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeMesh {
    delta: f64,
    n_nodes: usize,
}

impl TimeMesh {
    pub fn new(delta: f64, n_nodes: usize) -> Result<Self, PicardError> {
        if !(delta > 0.0 && delta.is_finite()) || n_nodes < 3 {
            return Err(PicardError::BadMesh { delta, n_nodes });
        }
        Ok(Self { delta, n_nodes })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn step(&self) -> f64 {
        self.delta / (self.n_nodes - 1) as f64
    }

    /// `t_j = j delta / (n_nodes - 1)`; the last node is exactly `delta`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.n_nodes)
            .map(|j| {
                if j + 1 == self.n_nodes {
                    self.delta
                } else {
                    j as f64 * h
                }
            })
            .collect()
    }
}

/// One iterate: `u` at every node, and `n` for the reservoir system.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub u: Vec<Field>,
    pub n: Option<Vec<RealField>>,
}

#[derive(Debug, Clone)]
pub struct IterateHistory {
    pub mesh: TimeMesh,
    /// Sobolev index of the distance used for `diffs`.
    pub s: f64,
    /// Size of the data, `||u0||_{H^s}` (plus `||n0||_{L^2}` for the
    /// reservoir system).
    pub data_norm: f64,
    pub iterates: Vec<Iterate>,
    /// `diffs[m]` is the sup over nodes of the distance between iterates
    /// `m` and `m + 1`.
    pub diffs: Vec<f64>,
}

impl IterateHistory {
    pub fn last(&self) -> &Iterate {
        self.iterates.last().expect("history holds the starting iterate")
    }
}

/// `e^{-i k^2 t}` for every wavenumber.
fn propagator(grid: &Grid1D, t: f64) -> Vec<Complex64> {
    grid.wavenumbers()
        .iter()
        .map(|k| Complex64::from_polar(1.0, -k * k * t))
        .collect()
}

fn spectral(field: &Field) -> Vec<Complex64> {
    field.to_spectral().into_values()
}

fn physical(grid: &Grid1D, coeffs: Vec<Complex64>) -> Field {
    Field::new(grid, coeffs, Representation::Spectral)
        .expect("coefficient count matches grid")
        .to_physical()
}

/// `S(t_j) u0 + int_0^{t_j} S(t_j - t') f(t') dt'` at every node, trapezoid
/// rule in `t'`.
fn duhamel(u0_hat: &[Complex64], forcing: &[Field], mesh: &TimeMesh) -> Vec<Field> {
    let grid = forcing[0].grid();
    let nodes = mesh.nodes();
    let h = mesh.step();
    // interaction picture: g_i = S(-t_i) f_i
    let pulled: Vec<Vec<Complex64>> = forcing
        .par_iter()
        .zip(&nodes)
        .map(|(f, &t)| {
            spectral(f)
                .into_iter()
                .zip(propagator(grid, -t))
                .map(|(c, m)| c * m)
                .collect()
        })
        .collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); u0_hat.len()];
    let mut partial = Vec::with_capacity(nodes.len());
    partial.push(acc.clone());
    for j in 1..nodes.len() {
        for (a, (g0, g1)) in acc.iter_mut().zip(pulled[j - 1].iter().zip(&pulled[j])) {
            *a += (g0 + g1) * (0.5 * h);
        }
        partial.push(acc.clone());
    }
    partial
        .into_par_iter()
        .zip(nodes)
        .map(|(acc, t)| {
            let coeffs = u0_hat
                .iter()
                .zip(acc)
                .zip(propagator(grid, t))
                .map(|((u, a), m)| (u + a) * m)
                .collect();
            physical(grid, coeffs)
        })
        .collect()
}

/// `n0 + int_0^{t_j} q` at every node, trapezoid rule.
fn cumulative_integral(n0: &RealField, q: &[Vec<f64>], h: f64) -> Vec<RealField> {
    let grid = n0.grid();
    let mut acc = n0.values().to_vec();
    let mut out = vec![n0.clone()];
    for j in 1..q.len() {
        for (a, (q0, q1)) in acc.iter_mut().zip(q[j - 1].iter().zip(&q[j])) {
            *a += 0.5 * h * (q0 + q1);
        }
        out.push(RealField::new(grid, acc.clone()).expect("length matches grid"));
    }
    out
}

fn free_flow(u0_hat: &[Complex64], grid: &Grid1D, mesh: &TimeMesh) -> Vec<Field> {
    mesh.nodes()
        .into_iter()
        .map(|t| {
            let coeffs = u0_hat.iter().zip(propagator(grid, t)).map(|(u, m)| u * m).collect();
            physical(grid, coeffs)
        })
        .collect()
}

fn real_difference(a: &RealField, b: &RealField) -> Field {
    let vals = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| Complex64::new(x - y, 0.0))
        .collect();
    Field::new(a.grid(), vals, Representation::Physical).expect("same grid")
}

fn complex_difference(a: &Field, b: &Field) -> Field {
    let vals = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    Field::new(a.grid(), vals, Representation::Physical).expect("same grid")
}

fn distance(a: &Iterate, b: &Iterate, s: f64) -> f64 {
    let mut sup: f64 = 0.0;
    for j in 0..a.u.len() {
        let mut d = complex_difference(&a.u[j], &b.u[j]).hs_norm(s);
        if let (Some(na), Some(nb)) = (&a.n, &b.n) {
            d += real_difference(&na[j], &nb[j]).hs_norm(0.0);
        }
        // NaN must not be swallowed by max
        if !d.is_finite() {
            return f64::INFINITY;
        }
        sup = sup.max(d);
    }
    sup
}

/// Shared driver: `step` maps an iterate to the next.
fn iterate(
    start: Iterate,
    mesh: TimeMesh,
    s: f64,
    data_norm: f64,
    max_iter: usize,
    step: impl Fn(&Iterate) -> Iterate,
) -> Result<IterateHistory, PicardError> {
    if max_iter < 2 {
        return Err(PicardError::TooFewIterations(max_iter));
    }
    let mut history = IterateHistory {
        mesh,
        s,
        data_norm,
        iterates: vec![start],
        diffs: Vec::new(),
    };
    let converged_at = CONVERGED_TOL * (1.0 + data_norm);
    let mut rising = 0;
    for _ in 0..max_iter {
        let next = step(history.last());
        let d = distance(history.last(), &next, s);
        if !d.is_finite() {
            return Err(PicardError::Diverged {
                history: Box::new(history),
            });
        }
        rising = match history.diffs.last() {
            Some(&prev) if d > prev => rising + 1,
            _ => 0,
        };
        history.iterates.push(next);
        history.diffs.push(d);
        if rising >= DIVERGENCE_RUN {
            return Err(PicardError::Diverged {
                history: Box::new(history),
            });
        }
        if d <= converged_at {
            break;
        }
    }
    Ok(history)
}

/// Picard iteration for the cGPE Duhamel equation
/// `u(t) = S(t) u0 + int_0^t S(t - t') (xi u - (sigma + i)|u|^2 u)(t') dt'`,
/// starting from the free flow.
pub fn picard_cgpe(
    u0: &Field,
    mesh: &TimeMesh,
    p: &CgpeParams,
    s: f64,
    max_iter: usize,
) -> Result<IterateHistory, PicardError> {
    let grid = u0.grid().clone();
    let u0_hat = spectral(u0);
    let start = Iterate {
        u: free_flow(&u0_hat, &grid, mesh),
        n: None,
    };
    let coupling = Complex64::new(p.sigma, 1.0);
    let step = |it: &Iterate| {
        let forcing: Vec<Field> = it
            .u
            .par_iter()
            .map(|u| {
                let vals = u
                    .values()
                    .iter()
                    .map(|&v| v * p.xi - coupling * v.norm_sqr() * v)
                    .collect();
                Field::new(&grid, vals, Representation::Physical).expect("same grid")
            })
            .collect();
        Iterate {
            u: duhamel(&u0_hat, &forcing, mesh),
            n: None,
        }
    };
    iterate(start, *mesh, s, u0.hs_norm(s), max_iter, step)
}

/// Simultaneous Picard iteration for the reservoir system: the `u` equation
/// in Duhamel form with the free propagator, the `n` equation as a plain
/// time integral. Distances are `L^2` in both components.
pub fn picard_ep(
    u0: &Field,
    n0: &RealField,
    mesh: &TimeMesh,
    p: &EpParams,
    max_iter: usize,
) -> Result<IterateHistory, PicardError> {
    let grid = u0.grid().clone();
    if n0.grid() != &grid || p.pump.grid() != &grid {
        return Err(PicardError::GridMismatch);
    }
    let u0_hat = spectral(u0);
    let start = Iterate {
        u: free_flow(&u0_hat, &grid, mesh),
        n: Some(vec![n0.clone(); mesh.n_nodes()]),
    };
    let step = |it: &Iterate| {
        let ns = it.n.as_ref().expect("reservoir iterate");
        let forcing: Vec<Field> = it
            .u
            .par_iter()
            .zip(ns)
            .map(|(u, n)| {
                let vals = u
                    .values()
                    .iter()
                    .zip(n.values())
                    .map(|(&v, &nv)| {
                        let rate = Complex64::new(p.r * nv - p.alpha, -(p.g * v.norm_sqr() + p.lambda * nv));
                        rate * v
                    })
                    .collect();
                Field::new(&grid, vals, Representation::Physical).expect("same grid")
            })
            .collect();
        let sources: Vec<Vec<f64>> = it
            .u
            .iter()
            .zip(ns)
            .map(|(u, n)| {
                u.values()
                    .iter()
                    .zip(n.values())
                    .zip(p.pump.values())
                    .map(|((v, &nv), &pv)| pv - (p.r * v.norm_sqr() + p.beta) * nv)
                    .collect()
            })
            .collect();
        Iterate {
            u: duhamel(&u0_hat, &forcing, mesh),
            n: Some(cumulative_integral(n0, &sources, mesh.step())),
        }
    };
    let data_norm = u0.hs_norm(0.0) + n0.sq_integral().sqrt();
    iterate(start, *mesh, 0.0, data_norm, max_iter, step)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    /// `diffs[m + 1] / diffs[m]` (0 where `diffs[m]` vanishes).
    pub ratios: Vec<f64>,
    /// Largest ratio for `m >= 1` whose denominator is above roundoff; 0
    /// when there is none.
    pub measured_ratio: f64,
    pub converged: bool,
    pub final_residual: f64,
}

pub fn contraction_report(h: &IterateHistory) -> ContractionReport {
    contraction_report_from_diffs(&h.diffs, h.data_norm)
}

pub fn contraction_report_from_diffs(diffs: &[f64], data_norm: f64) -> ContractionReport {
    let ratios: Vec<f64> = diffs
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let floor = ROUNDOFF_FLOOR * (1.0 + data_norm);
    let measured_ratio = diffs
        .windows(2)
        .zip(&ratios)
        .skip(1)
        .filter(|(w, _)| w[0] > floor)
        .map(|(_, &r)| r)
        .fold(0.0, f64::max);
    let final_residual = diffs.last().copied().unwrap_or(0.0);
    ContractionReport {
        ratios,
        measured_ratio,
        converged: final_residual <= CONVERGED_TOL * (1.0 + data_norm),
        final_residual,
    }
}

/// Empirical existence-time bracket: `probe(delta_ok)` succeeded,
/// `probe(delta_fail)` failed, `delta_fail / delta_ok <= max_ratio`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceBracket {
    pub delta_ok: f64,
    pub delta_fail: f64,
    /// Every probed `(delta, converged)` in order.
    pub probes: Vec<(f64, bool)>,
}

/// Double (or halve) from `delta0` until the probe changes outcome, then
/// bisect geometrically until the bracket ratio is at most `max_ratio`
/// (which must exceed 1).
pub fn existence_time_bracket(
    delta0: f64,
    max_ratio: f64,
    max_tries: usize,
    mut probe: impl FnMut(f64) -> bool,
) -> Result<ExistenceBracket, PicardError> {
    let mut probes = Vec::new();
    let mut run = |d: f64, probes: &mut Vec<(f64, bool)>| {
        let ok = probe(d);
        probes.push((d, ok));
        ok
    };
    let first = run(delta0, &mut probes);
    let (mut lo, mut hi) = (delta0, delta0);
    let mut tries = 0;
    if first {
        while run(hi * 2.0, &mut probes) {
            hi *= 2.0;
            tries += 1;
            if tries >= max_tries {
                return Err(PicardError::NoBracket {
                    what: "failed",
                    tries,
                    delta: delta0,
                });
            }
        }
        lo = hi;
        hi *= 2.0;
    } else {
        while !run(lo * 0.5, &mut probes) {
            lo *= 0.5;
            tries += 1;
            if tries >= max_tries {
                return Err(PicardError::NoBracket {
                    what: "converged",
                    tries,
                    delta: delta0,
                });
            }
        }
        hi = lo;
        lo *= 0.5;
    }
    while hi / lo > max_ratio {
        let mid = (lo * hi).sqrt();
        if run(mid, &mut probes) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ExistenceBracket {
        delta_ok: lo,
        delta_fail: hi,
        probes,
    })
}

/// Probe for [`existence_time_bracket`]: does cGPE Picard iteration converge
/// on `[0, delta]`?
pub fn cgpe_converges<'a>(
    u0: &'a Field,
    p: &CgpeParams,
    s: f64,
    n_nodes: usize,
    max_iter: usize,
) -> impl Fn(f64) -> bool + 'a {
    let p = *p;
    move |delta| {
        let Ok(mesh) = TimeMesh::new(delta, n_nodes) else {
            return false;
        };
        match picard_cgpe(u0, &mesh, &p, s, max_iter) {
            Ok(h) => contraction_report(&h).converged,
            Err(_) => false,
        }
    }
}
