//! Diagnostics series and checks of the global a priori bounds against
//! simulated trajectories.
//!
//! Inequality checks report a relative slack
//! `(bound - value) / (1 + |bound|)` per sample and pass when the worst slack
//! is at least `-INEQUALITY_TOL`. The mass-balance identity check reports the
//! negated residual and passes when it stays within a tolerance that scales
//! like the square of the sampling interval.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CgpeParams, EpParams};

/// Slack allowed by the inequality checks (relative to `1 + |bound|`).
pub const INEQUALITY_TOL: f64 = 1e-8;
/// Allowed undershoot of `min_x n` below zero.
pub const POSITIVITY_TOL: f64 = 1e-12;
/// Absolute floor of the mass-balance tolerance, relative to the size of the
/// balance terms.
pub const IDENTITY_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sampling is not uniform (step {first} vs {other})")]
    NonUniformSampling { first: f64, other: f64 },
    #[error("series has no reservoir diagnostics")]
    MissingReservoir,
    #[error("initial reservoir density is negative (min {0}); bound does not apply")]
    NegativeInitialReservoir(f64),
    #[error("series columns have inconsistent lengths")]
    Ragged,
    #[error("series contains non-finite values")]
    NonFinite,
}

/// One diagnostics row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub mass: f64,
    pub l4_fourth: f64,
    /// `[int n, int n^2, min n]` for the exciton-polariton model.
    pub reservoir: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSeries {
    pub n_integral: Vec<f64>,
    pub n_sq_integral: Vec<f64>,
    pub n_min: Vec<f64>,
}

/// Time-stamped scalar diagnostics along a trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub l4_fourth: Vec<f64>,
    pub reservoir: Option<ReservoirSeries>,
}

impl DiagnosticsSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, s: Sample) {
        self.times.push(s.t);
        self.mass.push(s.mass);
        self.l4_fourth.push(s.l4_fourth);
        if let Some([a, b, c]) = s.reservoir {
            let r = self.reservoir.get_or_insert_with(ReservoirSeries::default);
            r.n_integral.push(a);
            r.n_sq_integral.push(b);
            r.n_min.push(c);
        }
    }

    pub fn get(&self, i: usize) -> Sample {
        Sample {
            t: self.times[i],
            mass: self.mass[i],
            l4_fourth: self.l4_fourth[i],
            reservoir: self
                .reservoir
                .as_ref()
                .map(|r| [r.n_integral[i], r.n_sq_integral[i], r.n_min[i]]),
        }
    }

    /// Every `stride`-th sample, starting with the first.
    pub fn subsample(&self, stride: usize) -> DiagnosticsSeries {
        let mut out = DiagnosticsSeries::default();
        for i in (0..self.len()).step_by(stride.max(1)) {
            out.push(self.get(i));
        }
        out
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        let n = self.len();
        let mut cols = vec![&self.mass, &self.l4_fourth];
        if let Some(r) = &self.reservoir {
            cols.extend([&r.n_integral, &r.n_sq_integral, &r.n_min]);
        }
        if cols.iter().any(|c| c.len() != n) {
            return Err(BoundsError::Ragged);
        }
        if cols
            .iter()
            .chain(std::iter::once(&&self.times))
            .any(|c| c.iter().any(|v| !v.is_finite()))
        {
            return Err(BoundsError::NonFinite);
        }
        Ok(())
    }

    /// Common sample spacing; errors when spacing varies by more than 1e-9
    /// relative.
    pub fn uniform_spacing(&self) -> Result<f64, BoundsError> {
        if self.len() < 2 {
            return Err(BoundsError::TooFewSamples {
                needed: 2,
                got: self.len(),
            });
        }
        let h = self.times[1] - self.times[0];
        for w in self.times.windows(2) {
            let other = w[1] - w[0];
            if (other - h).abs() > 1e-9 * h.abs().max(1e-300) {
                return Err(BoundsError::NonUniformSampling { first: h, other });
            }
        }
        Ok(h)
    }
}

/// Outcome of one bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Most negative slack over the series.
    pub worst_margin: f64,
    /// Time at which the worst slack occurs.
    pub location: f64,
    pub tolerance: f64,
}

impl CheckReport {
    fn from_margins(name: &str, times: &[f64], margins: &[f64], tolerance: f64) -> Self {
        let (idx, worst) = margins
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, m)| if m < acc.1 { (i, m) } else { acc });
        Self {
            name: name.to_string(),
            passed: worst >= -tolerance,
            worst_margin: worst,
            location: times.get(idx).copied().unwrap_or(0.0),
            tolerance,
        }
    }

    /// Same report judged at a different tolerance.
    pub fn with_tolerance(&self, tolerance: f64) -> Self {
        Self {
            passed: self.worst_margin >= -tolerance,
            tolerance,
            ..self.clone()
        }
    }
}

fn relative_slack(bound: f64, value: f64) -> f64 {
    (bound - value) / (1.0 + bound.abs())
}

/// Second-order derivative of uniformly sampled data (centered inside,
/// one-sided three-point stencils at the ends).
pub fn sampled_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 3, "need at least three samples");
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h)
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Pointwise residual of `dM/dt - 2 xi M + 2 sigma int|u|^4` along the series.
pub fn mass_balance_residual(d: &DiagnosticsSeries, p: &CgpeParams) -> Result<Vec<f64>, BoundsError> {
    if d.len() < 3 {
        return Err(BoundsError::TooFewSamples {
            needed: 3,
            got: d.len(),
        });
    }
    let h = d.uniform_spacing()?;
    let dm = sampled_derivative(&d.mass, h);
    Ok(dm
        .iter()
        .zip(&d.mass)
        .zip(&d.l4_fourth)
        .map(|((dm, m), q)| dm - 2.0 * p.xi * m + 2.0 * p.sigma * q)
        .collect())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Mass balance identity `d/dt int|u|^2 = 2 xi int|u|^2 - 2 sigma int|u|^4`.
///
/// The tolerance is calibrated by Richardson extrapolation between the
/// series and its 2x subsample: the `O(h^2)` part of the residual is
/// estimated as `|r_{2h} - r_h| / 3` and twice that is allowed, on top of a
/// small floor. A violation that does not shrink with `h` is therefore
/// detected.
pub fn f1_residual(d: &DiagnosticsSeries, p: &CgpeParams) -> Result<CheckReport, BoundsError> {
    d.validate()?;
    let res = mass_balance_residual(d, p)?;
    let scale = d.mass.iter().fold(0.0f64, |a, m| a.max(2.0 * p.xi * m.abs()));
    let floor = IDENTITY_FLOOR * (1.0 + scale);
    let coarse = d.subsample(2);
    let tolerance = if coarse.len() >= 3 {
        let r_h = sup(&res);
        let r_2h = sup(&mass_balance_residual(&coarse, p)?);
        2.0 * (r_2h - r_h).abs() / 3.0 + floor
    } else {
        floor
    };
    let margins: Vec<f64> = res.iter().map(|r| -r.abs()).collect();
    Ok(CheckReport::from_margins("f1", &d.times, &margins, tolerance))
}

/// `||u0||^2 e^{-2 xi t} + (2 xi / sigma)|T| (1 - e^{-2 xi t})`.
pub fn abs_set_bound(t: f64, mass0: f64, p: &CgpeParams, domain_measure: f64) -> f64 {
    let decay = (-2.0 * p.xi * t).exp();
    mass0 * decay + p.absorbing_radius_sq(domain_measure) * (1.0 - decay)
}

/// Decay envelope of the `L^2` norm (absorbing-set estimate).
pub fn abs_set_envelope(
    d: &DiagnosticsSeries,
    p: &CgpeParams,
    domain_measure: f64,
) -> Result<CheckReport, BoundsError> {
    d.validate()?;
    if d.is_empty() {
        return Err(BoundsError::TooFewSamples { needed: 1, got: 0 });
    }
    let (t0, m0) = (d.times[0], d.mass[0]);
    let margins: Vec<f64> = d
        .times
        .iter()
        .zip(&d.mass)
        .map(|(&t, &m)| relative_slack(abs_set_bound(t - t0, m0, p, domain_measure), m))
        .collect();
    Ok(CheckReport::from_margins(
        "abs_set",
        &d.times,
        &margins,
        INEQUALITY_TOL,
    ))
}

/// `e^{-gamma t}(L0 - S/gamma) + S/gamma`.
pub fn lyapunov_bound(t: f64, l0: f64, pump_integral: f64, gamma: f64) -> f64 {
    let asymptote = pump_integral / gamma;
    (-gamma * t).exp() * (l0 - asymptote) + asymptote
}

fn reservoir(d: &DiagnosticsSeries) -> Result<&ReservoirSeries, BoundsError> {
    d.validate()?;
    if d.is_empty() {
        return Err(BoundsError::TooFewSamples { needed: 1, got: 0 });
    }
    d.reservoir.as_ref().ok_or(BoundsError::MissingReservoir)
}

/// Lyapunov functional `L = (1/2) int|u|^2 + int n` against its exponential
/// envelope with rate `gamma = min(2 alpha, beta)`.
pub fn ep_lyapunov(d: &DiagnosticsSeries, p: &EpParams) -> Result<CheckReport, BoundsError> {
    let r = reservoir(d)?;
    if r.n_min[0] < 0.0 {
        return Err(BoundsError::NegativeInitialReservoir(r.n_min[0]));
    }
    let s = p.pump.integral();
    let gamma = p.gamma();
    let t0 = d.times[0];
    let l0 = 0.5 * d.mass[0] + r.n_integral[0];
    let margins: Vec<f64> = (0..d.len())
        .map(|i| {
            let l = 0.5 * d.mass[i] + r.n_integral[i];
            relative_slack(lyapunov_bound(d.times[i] - t0, l0, s, gamma), l)
        })
        .collect();
    Ok(CheckReport::from_margins(
        "lyapunov",
        &d.times,
        &margins,
        INEQUALITY_TOL,
    ))
}

/// Integrated pointwise second-moment bound
/// `e^{-beta t} int n0^2 + (1 - e^{-beta t}) int P^2 / beta^2`.
pub fn second_moment_bound(t: f64, n0_sq_integral: f64, pump_sq_integral: f64, beta: f64) -> f64 {
    let decay = (-beta * t).exp();
    decay * n0_sq_integral + (1.0 - decay) * pump_sq_integral / (beta * beta)
}

pub fn reservoir_positivity(d: &DiagnosticsSeries) -> Result<CheckReport, BoundsError> {
    let r = reservoir(d)?;
    Ok(CheckReport::from_margins(
        "reservoir_positivity",
        &d.times,
        &r.n_min,
        POSITIVITY_TOL,
    ))
}

pub fn reservoir_second_moment(
    d: &DiagnosticsSeries,
    p: &EpParams,
) -> Result<CheckReport, BoundsError> {
    let r = reservoir(d)?;
    let p2 = p.pump.sq_integral();
    let t0 = d.times[0];
    let n0_sq = r.n_sq_integral[0];
    let margins: Vec<f64> = (0..d.len())
        .map(|i| {
            relative_slack(
                second_moment_bound(d.times[i] - t0, n0_sq, p2, p.beta),
                r.n_sq_integral[i],
            )
        })
        .collect();
    Ok(CheckReport::from_margins(
        "reservoir_second_moment",
        &d.times,
        &margins,
        INEQUALITY_TOL,
    ))
}

/// Positivity of `n` and the second-moment bound, combined. The combined
/// report carries the sub-report that is closest to (or furthest past) its
/// own tolerance.
pub fn reservoir_bounds(d: &DiagnosticsSeries, p: &EpParams) -> Result<CheckReport, BoundsError> {
    let pos = reservoir_positivity(d)?;
    let moment = reservoir_second_moment(d, p)?;
    let severity = |r: &CheckReport| r.worst_margin / r.tolerance;
    let worst = if severity(&pos) <= severity(&moment) {
        pos.clone()
    } else {
        moment.clone()
    };
    Ok(CheckReport {
        name: "reservoir".into(),
        passed: pos.passed && moment.passed,
        ..worst
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid1D, RealField};
    use crate::model::cgpe_flat_closed_form;
    use std::f64::consts::PI;

    fn flat_series(p: &CgpeParams, rho0: f64, h: f64, n: usize, measure: f64) -> DiagnosticsSeries {
        let mut d = DiagnosticsSeries::default();
        for i in 0..n {
            let t = i as f64 * h;
            let r2 = cgpe_flat_closed_form(rho0, 0.0, t, p).norm_sqr();
            d.push(Sample {
                t,
                mass: r2 * measure,
                l4_fourth: r2 * r2 * measure,
                reservoir: None,
            });
        }
        d
    }

    #[test]
    fn derivative_stencils_are_exact_for_quadratics() {
        let h = 0.1;
        let v: Vec<f64> = (0..6).map(|i| (i as f64 * h).powi(2) + 1.0).collect();
        let d = sampled_derivative(&v, h);
        for (i, di) in d.iter().enumerate() {
            assert!((di - 2.0 * i as f64 * h).abs() < 1e-12);
        }
    }

    #[test]
    fn f1_at_fixed_point() {
        let p = CgpeParams::new(1.0, 1.0).unwrap();
        let d = flat_series(&p, 1.0, 0.1, 20, 2.0 * PI);
        let res = mass_balance_residual(&d, &p).unwrap();
        assert!(sup(&res) <= 1e-10);
        assert!(f1_residual(&d, &p).unwrap().passed);
    }

    #[test]
    fn f1_tolerance_tracks_sampling() {
        let p = CgpeParams::new(1.0, 1.0).unwrap();
        let coarse = f1_residual(&flat_series(&p, 0.1, 0.04, 126, 2.0 * PI), &p).unwrap();
        let fine = f1_residual(&flat_series(&p, 0.1, 0.02, 251, 2.0 * PI), &p).unwrap();
        assert!(coarse.passed && fine.passed);
        let ratio = coarse.tolerance / fine.tolerance;
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn f1_detects_injected_violation() {
        let p = CgpeParams::new(1.0, 1.0).unwrap();
        let mut d = flat_series(&p, 0.1, 0.02, 251, 2.0 * PI);
        // residual picks up +1 everywhere
        for q in d.l4_fourth.iter_mut() {
            *q += 0.5;
        }
        let r = f1_residual(&d, &p).unwrap();
        assert!(!r.passed);
        assert!((r.worst_margin + 1.0).abs() < 1e-3, "{}", r.worst_margin);
    }

    #[test]
    fn f1_needs_three_uniform_samples() {
        let p = CgpeParams::new(1.0, 1.0).unwrap();
        let d = flat_series(&p, 0.1, 0.1, 2, 1.0);
        assert!(matches!(
            f1_residual(&d, &p),
            Err(BoundsError::TooFewSamples { .. })
        ));
        let mut d = flat_series(&p, 0.1, 0.1, 5, 1.0);
        d.times[3] += 0.01;
        assert!(matches!(
            f1_residual(&d, &p),
            Err(BoundsError::NonUniformSampling { .. })
        ));
    }

    #[test]
    fn abs_set_envelope_properties() {
        let p = CgpeParams::new(1.0, 1.0).unwrap();
        let t = 2.0 * PI;
        assert_eq!(abs_set_bound(0.0, 7.5, &p, t), 7.5);
        assert!((abs_set_bound(1e3, 7.5, &p, t) - 4.0 * PI).abs() < 1e-12);
        // monotone toward the asymptote from above and below
        let mut prev = abs_set_bound(0.0, 100.0, &p, t);
        for i in 1..100 {
            let v = abs_set_bound(i as f64 * 0.1, 100.0, &p, t);
            assert!(v <= prev && v >= 4.0 * PI);
            prev = v;
        }
        let mut prev = abs_set_bound(0.0, 1.0, &p, t);
        for i in 1..100 {
            let v = abs_set_bound(i as f64 * 0.1, 1.0, &p, t);
            assert!(v >= prev && v <= 4.0 * PI);
            prev = v;
        }
    }

    #[test]
    fn abs_set_passes_flat_and_flags_injection() {
        let p = CgpeParams::new(1.0, 1.0).unwrap();
        let d = flat_series(&p, 3.0, 0.05, 100, 2.0 * PI);
        let r = abs_set_envelope(&d, &p, 2.0 * PI).unwrap();
        assert!(r.passed);
        let mut bad = d.clone();
        let bound = abs_set_bound(bad.times[40], bad.mass[0], &p, 2.0 * PI);
        bad.mass[40] = 1.01 * bound;
        let r = abs_set_envelope(&bad, &p, 2.0 * PI).unwrap();
        assert!(!r.passed);
        assert_eq!(r.location, bad.times[40]);
        // loosening the tolerance never un-passes a passing report
        let ok = abs_set_envelope(&d, &p, 2.0 * PI).unwrap();
        for tol in [1e-8, 1e-6, 1.0] {
            assert!(ok.with_tolerance(tol).passed);
        }
    }

    fn ep_params(g: &Grid1D, pump: f64, alpha: f64, beta: f64) -> EpParams {
        EpParams::new(1.0, 1.0, 1.0, alpha, beta, RealField::constant(g, pump)).unwrap()
    }

    fn decay_series(n0_int: f64, n0_sq: f64, beta: f64, h: f64, n: usize) -> DiagnosticsSeries {
        let mut d = DiagnosticsSeries::default();
        for i in 0..n {
            let t = i as f64 * h;
            let e = (-beta * t).exp();
            d.push(Sample {
                t,
                mass: 0.0,
                l4_fourth: 0.0,
                reservoir: Some([n0_int * e, n0_sq * e * e, 0.5 * e]),
            });
        }
        d
    }

    #[test]
    fn gamma_is_min_of_rates() {
        let g = Grid1D::new(8, 1.0).unwrap();
        assert_eq!(ep_params(&g, 0.0, 0.5, 2.0).gamma(), 1.0);
        assert_eq!(ep_params(&g, 0.0, 2.0, 0.3).gamma(), 0.3);
    }

    #[test]
    fn lyapunov_pure_decay() {
        let g = Grid1D::new(8, 1.0).unwrap();
        let p = ep_params(&g, 0.0, 0.5, 2.0);
        let d = decay_series(3.0, 4.0, p.beta, 0.1, 50);
        let r = ep_lyapunov(&d, &p).unwrap();
        assert!(r.passed);
        assert!(r.worst_margin >= 0.0);
        let mut bad = d.clone();
        let env = lyapunov_bound(bad.times[10], 3.0, 0.0, p.gamma());
        bad.reservoir.as_mut().unwrap().n_integral[10] = 1.01 * env;
        assert!(!ep_lyapunov(&bad, &p).unwrap().passed);

        let mut neg = d.clone();
        neg.reservoir.as_mut().unwrap().n_min[0] = -0.1;
        assert!(matches!(
            ep_lyapunov(&neg, &p),
            Err(BoundsError::NegativeInitialReservoir(_))
        ));
        let cg = flat_series(&CgpeParams::new(1.0, 1.0).unwrap(), 1.0, 0.1, 5, 1.0);
        assert_eq!(ep_lyapunov(&cg, &p), Err(BoundsError::MissingReservoir));
    }

    #[test]
    fn lyapunov_envelope_shape() {
        assert_eq!(lyapunov_bound(0.0, 2.5, 3.0, 0.7), 2.5);
        let asym = 3.0 / 0.7;
        let mut prev = 2.5;
        for i in 1..50 {
            let v = lyapunov_bound(i as f64 * 0.2, 2.5, 3.0, 0.7);
            assert!(v > prev && v < asym);
            prev = v;
        }
    }

    #[test]
    fn reservoir_equilibrium_saturates_bound() {
        let g = Grid1D::new(8, 2.0).unwrap();
        let p = ep_params(&g, 0.6, 0.5, 1.5);
        let neq = 0.6 / 1.5;
        let mut d = DiagnosticsSeries::default();
        for i in 0..10 {
            d.push(Sample {
                t: i as f64,
                mass: 0.0,
                l4_fourth: 0.0,
                reservoir: Some([neq * 2.0, neq * neq * 2.0, neq]),
            });
        }
        let bound = second_moment_bound(5.0, neq * neq * 2.0, p.pump.sq_integral(), p.beta);
        assert!((bound - neq * neq * 2.0).abs() < 1e-15);
        let r = reservoir_bounds(&d, &p).unwrap();
        assert!(r.passed);
        assert!(r.worst_margin.abs() < 1e-15);
    }

    #[test]
    fn reservoir_zero_state_and_faults() {
        let g = Grid1D::new(8, 2.0).unwrap();
        let p = ep_params(&g, 0.0, 0.5, 1.5);
        let d = decay_series(0.0, 0.0, 1.5, 0.1, 10);
        let mut zero = d.clone();
        zero.reservoir.as_mut().unwrap().n_min.iter_mut().for_each(|v| *v = 0.0);
        let r = reservoir_bounds(&zero, &p).unwrap();
        assert!(r.passed);
        assert_eq!(r.worst_margin, 0.0);

        let mut neg = zero.clone();
        neg.reservoir.as_mut().unwrap().n_min[4] = -1e-6;
        let r = reservoir_bounds(&neg, &p).unwrap();
        assert!(!r.passed);
        assert_eq!(r.location, neg.times[4]);

        let q = ep_params(&g, 0.3, 0.5, 1.5);
        let d = decay_series(1.0, 2.0, 1.5, 0.1, 30);
        assert!(reservoir_bounds(&d, &q).unwrap().passed);
        let mut bad = d.clone();
        let b = second_moment_bound(bad.times[7], 2.0, q.pump.sq_integral(), q.beta);
        bad.reservoir.as_mut().unwrap().n_sq_integral[7] = 1.01 * b;
        let r = reservoir_bounds(&bad, &q).unwrap();
        assert!(!r.passed);
        assert_eq!(r.name, "reservoir");
    }

    #[test]
    fn checks_are_deterministic() {
        let p = CgpeParams::new(1.0, 1.0).unwrap();
        let d = flat_series(&p, 0.4, 0.05, 60, 2.0 * PI);
        assert_eq!(f1_residual(&d, &p), f1_residual(&d, &p));
        assert_eq!(
            abs_set_envelope(&d, &p, 2.0 * PI),
            abs_set_envelope(&d, &p, 2.0 * PI)
        );
    }
}
