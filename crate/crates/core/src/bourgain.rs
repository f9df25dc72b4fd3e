//! Discrete space-time Fourier analysis: windowed `X^{s,b}` and `Y^s` norms
//! for a selectable dispersion relation, the `L^4` / `X^{0,3/8}` ratio, the
//! constrained trilinear lattice form `S` and the bracket integral `J`.
//!
//! Time is sampled on `[0, t_span)` and localized by a smooth bump before
//! any temporal transform, so every norm here is the windowed surrogate of
//! the corresponding continuum norm over `t` in the real line, never the
//! restricted (infimum over extensions) norm.
//!
//! The space-time transform approximates
//! `g^(k, tau) = iint e^{-ikx - it tau} g dx dt` and is scaled so that
//! `sum |g|^2 dx dt = sum |g^|^2 dk dtau`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bracket;
use crate::grid::{mode_index, Field, Grid1D};
use crate::integrators::dispersion_half_step;
use crate::quadrature::{self, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("space-time field needs at least 8 time samples, got {0}")]
    TooFewTimeSamples(usize),
    #[error("time span must be positive, got {0}")]
    BadTimeSpan(f64),
    #[error("value array has {found} entries, expected {expected}")]
    Shape { expected: usize, found: usize },
    #[error("X^{{0,3/8}} norm vanishes; ratio undefined")]
    ZeroDenominator,
    #[error("lattice arrays have different shapes or spacings")]
    LatticeMismatch,
    #[error("bracket integral diverges unless 0 <= a_minus <= a_plus and a_plus + a_minus > 1/2 (got {a_plus}, {a_minus})")]
    Divergent { a_plus: f64, a_minus: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    None,
    SmoothBump,
}

/// Time cutoff: 1 on the middle half of `[0, 1]`, `exp(1 - 1/(1 - r^2))`
/// tapers on the outer quarters, 0 at both ends.
pub fn bump(u: f64) -> f64 {
    let r = if u < 0.25 {
        (0.25 - u) / 0.25
    } else if u > 0.75 {
        (u - 0.75) / 0.25
    } else {
        return 1.0;
    };
    if r >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

/// Window weight for time sample `j` of `n_time` (cell-centred, symmetric).
pub fn window_weight(j: usize, n_time: usize) -> f64 {
    bump((j as f64 + 0.5) / n_time as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionRelation {
    /// `phi(xi) = xi^2`.
    Schroedinger,
    /// `phi(xi) = 0`.
    None,
}

impl DispersionRelation {
    pub fn phi(self, k: f64) -> f64 {
        match self {
            DispersionRelation::Schroedinger => k * k,
            DispersionRelation::None => 0.0,
        }
    }
}

/// Complex samples on a space x time lattice, stored time-major
/// (`values[jt * n_points + jx]`), `t_j = j t_span / n_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid1D,
    n_time: usize,
    t_span: f64,
    values: Vec<Complex64>,
    window: Window,
}

impl SpaceTimeField {
    pub fn new(
        grid: &Grid1D,
        n_time: usize,
        t_span: f64,
        values: Vec<Complex64>,
        window: Window,
    ) -> Result<Self, NormError> {
        if n_time < 8 {
            return Err(NormError::TooFewTimeSamples(n_time));
        }
        if !(t_span > 0.0 && t_span.is_finite()) {
            return Err(NormError::BadTimeSpan(t_span));
        }
        let expected = n_time * grid.n_points();
        if values.len() != expected {
            return Err(NormError::Shape {
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            n_time,
            t_span,
            values,
            window,
        })
    }

    /// Samples `f(x, t)`; no window applied.
    pub fn from_fn(
        grid: &Grid1D,
        n_time: usize,
        t_span: f64,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self, NormError> {
        let dt = t_span / n_time as f64;
        let xs: Vec<f64> = grid.points().collect();
        let values = (0..n_time)
            .flat_map(|j| {
                let t = j as f64 * dt;
                xs.iter().map(move |&x| (x, t))
            })
            .map(|(x, t)| f(x, t))
            .collect();
        Self::new(grid, n_time, t_span, values, Window::None)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn t_span(&self) -> f64 {
        self.t_span
    }

    pub fn dt(&self) -> f64 {
        self.t_span / self.n_time as f64
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn scale(&self, factor: f64) -> SpaceTimeField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Cyclic shift by `shift` lattice sites in space.
    pub fn shift_space(&self, shift: usize) -> SpaceTimeField {
        let n = self.grid.n_points();
        let mut out = self.clone();
        for (dst, src) in out.values.chunks_mut(n).zip(self.values.chunks(n)) {
            for (j, v) in src.iter().enumerate() {
                dst[(j + shift) % n] = *v;
            }
        }
        out
    }

    /// Multiply by the smooth bump in time. Idempotent on the window flag:
    /// an already windowed field is returned unchanged.
    pub fn windowed(&self) -> SpaceTimeField {
        if self.window == Window::SmoothBump {
            return self.clone();
        }
        let n = self.grid.n_points();
        let mut out = self.clone();
        for (j, row) in out.values.chunks_mut(n).enumerate() {
            let w = window_weight(j, self.n_time);
            row.iter_mut().for_each(|v| *v *= w);
        }
        out.window = Window::SmoothBump;
        out
    }

    /// `(iint |u|^p dx dt)^{1/p}` over the sampled samples as stored.
    fn lebesgue(&self, p: i32) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm().powi(p)).sum();
        (sum * self.grid.dx() * self.dt()).powf(1.0 / p as f64)
    }

    pub fn l2_norm(&self) -> f64 {
        self.lebesgue(2)
    }

    pub fn l4_norm(&self) -> f64 {
        self.lebesgue(4)
    }
}

/// Space-time Fourier coefficients on the `(k, tau)` lattice, time-major
/// like [`SpaceTimeField`], both axes in DFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSpectrum {
    pub k: Vec<f64>,
    pub tau: Vec<f64>,
    pub dk: f64,
    pub dtau: f64,
    pub coeffs: Vec<Complex64>,
}

impl SpaceTimeSpectrum {
    pub fn zeros(grid: &Grid1D, n_time: usize, t_span: f64) -> Self {
        let tau = (0..n_time)
            .map(|j| mode_index(j, n_time) as f64 * 2.0 * PI / t_span)
            .collect();
        Self {
            k: grid.wavenumbers().to_vec(),
            tau,
            dk: 2.0 * PI / grid.length(),
            dtau: 2.0 * PI / t_span,
            coeffs: vec![Complex64::new(0.0, 0.0); n_time * grid.n_points()],
        }
    }

    fn n_k(&self) -> usize {
        self.k.len()
    }

    pub fn get(&self, ik: usize, itau: usize) -> Complex64 {
        self.coeffs[itau * self.n_k() + ik]
    }

    pub fn set(&mut self, ik: usize, itau: usize, v: Complex64) {
        let n = self.n_k();
        self.coeffs[itau * n + ik] = v;
    }

    /// `sum |c|^2 dk dtau`.
    pub fn l2_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.dk * self.dtau
    }
}

/// Two-dimensional transform of the windowed field (the bump is applied
/// first if the field carries no window).
pub fn spacetime_transform(f: &SpaceTimeField) -> SpaceTimeSpectrum {
    let f = f.windowed();
    let n = f.grid.n_points();
    let m = f.n_time;
    let mut spec = SpaceTimeSpectrum::zeros(&f.grid, m, f.t_span);
    let mut planner = FftPlanner::new();
    let fx = planner.plan_fft_forward(n);
    let ft = planner.plan_fft_forward(m);
    let mut buf = f.values.clone();
    for row in buf.chunks_mut(n) {
        fx.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    let scale = f.grid.dx() * f.dt() / (2.0 * PI);
    for ik in 0..n {
        for (jt, c) in col.iter_mut().enumerate() {
            *c = buf[jt * n + ik];
        }
        ft.process(&mut col);
        for (jt, c) in col.iter().enumerate() {
            spec.coeffs[jt * n + ik] = c * scale;
        }
    }
    spec
}

/// Weighted `l^2` sum with weight `<k>^{2s} <tau + phi(k)>^{2b}`.
pub fn xsb_norm_spectrum(spec: &SpaceTimeSpectrum, s: f64, b: f64, d: DispersionRelation) -> f64 {
    let n = spec.n_k();
    let sum: f64 = spec
        .coeffs
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let k = spec.k[idx % n];
            let tau = spec.tau[idx / n];
            bracket(k).powf(2.0 * s) * bracket(tau + d.phi(k)).powf(2.0 * b) * c.norm_sqr()
        })
        .sum();
    (sum * spec.dk * spec.dtau).sqrt()
}

/// `||u||_{X^{s,b}}` of the windowed field.
pub fn xsb_norm(f: &SpaceTimeField, s: f64, b: f64, d: DispersionRelation) -> f64 {
    xsb_norm_spectrum(&spacetime_transform(f), s, b, d)
}

/// `l^2_k l^1_tau` norm with weight `<k>^s <tau + phi(k)>^{-1}`.
pub fn ys_norm_spectrum(spec: &SpaceTimeSpectrum, s: f64, d: DispersionRelation) -> f64 {
    let n = spec.n_k();
    let m = spec.tau.len();
    let sum: f64 = (0..n)
        .map(|ik| {
            let k = spec.k[ik];
            let inner: f64 = (0..m)
                .map(|it| spec.get(ik, it).norm() / bracket(spec.tau[it] + d.phi(k)))
                .sum::<f64>()
                * spec.dtau;
            bracket(k).powf(2.0 * s) * inner * inner
        })
        .sum();
    (sum * spec.dk).sqrt()
}

pub fn ys_norm(f: &SpaceTimeField, s: f64, d: DispersionRelation) -> f64 {
    ys_norm_spectrum(&spacetime_transform(f), s, d)
}

/// Cauchy-Schwarz constant of `||u||_{Y^s} <= C ||u||_{X^{s,-1/2+eps}}` on
/// this lattice: `sup_k (sum_tau <tau + phi(k)>^{-1-2 eps} dtau)^{1/2}`.
pub fn ys_xsb_lattice_constant(spec: &SpaceTimeSpectrum, eps: f64, d: DispersionRelation) -> f64 {
    spec.k
        .iter()
        .map(|&k| {
            spec.tau
                .iter()
                .map(|&tau| bracket(tau + d.phi(k)).powf(-1.0 - 2.0 * eps))
                .sum::<f64>()
                * spec.dtau
        })
        .fold(0.0f64, f64::max)
        .sqrt()
}

/// `||u||_{L^4} / ||u||_{X^{0,3/8}}` of the windowed field.
pub fn l4_strichartz_ratio(f: &SpaceTimeField) -> Result<f64, NormError> {
    let w = f.windowed();
    let denom = xsb_norm(&w, 0.0, 3.0 / 8.0, DispersionRelation::Schroedinger);
    if !(denom > 0.0) {
        return Err(NormError::ZeroDenominator);
    }
    Ok(w.l4_norm() / denom)
}

/// Samples of the free flow `e^{it d_xx} u0` on `[0, t_span)`; no window.
pub fn free_evolution(u0: &Field, n_time: usize, t_span: f64) -> Result<SpaceTimeField, NormError> {
    let dt = t_span / n_time as f64;
    let u0 = u0.to_physical();
    let values = (0..n_time)
        .flat_map(|j| dispersion_half_step(&u0, 2.0 * j as f64 * dt).into_values())
        .collect();
    SpaceTimeField::new(u0.grid(), n_time, t_span, values, Window::None)
}

/// Superposition of free Schrödinger waves with complex Gaussian amplitudes
/// on `|k| <= band` and a small Gaussian detuning off the dispersion curve.
/// No window is applied.
pub fn random_free_waves(
    grid: &Grid1D,
    n_time: usize,
    t_span: f64,
    band: usize,
    rng: &mut impl Rng,
) -> Result<SpaceTimeField, NormError> {
    let scale = 2.0 * PI / grid.length();
    let modes: Vec<(f64, Complex64, f64)> = (-(band as i64)..=band as i64)
        .map(|m| {
            let k = m as f64 * scale;
            let amp = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let detune: f64 = rng.sample::<f64, _>(StandardNormal);
            (k, amp, detune)
        })
        .collect();
    SpaceTimeField::from_fn(grid, n_time, t_span, |x, t| {
        modes
            .iter()
            .map(|&(k, a, nu)| a * Complex64::from_polar(1.0, k * x - (k * k + nu) * t))
            .sum()
    })
}

/// Ensemble maximum of [`l4_strichartz_ratio`] over `samples` seeded
/// free-wave superpositions on `L = 2 pi`, `t_span = 1`, band `n_space / 8`.
pub fn l4_ensemble_max(
    n_space: usize,
    n_time: usize,
    samples: usize,
    seed: u64,
) -> Result<f64, NormError> {
    let grid = Grid1D::new(n_space, 2.0 * PI).map_err(|_| NormError::LatticeMismatch)?;
    let band = (n_space / 8).max(1);
    let ratios: Result<Vec<f64>, NormError> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, n_space as u64, i as u64);
            let f = random_free_waves(&grid, n_time, 1.0, band, &mut rng)?;
            l4_strichartz_ratio(&f)
        })
        .collect();
    Ok(ratios?.into_iter().fold(0.0, f64::max))
}

/// Independent generator per `(seed, size, sample)`, so ensembles are
/// reproducible regardless of evaluation order.
pub fn sample_rng(seed: u64, size: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((size << 32) ^ sample);
    rng
}

/// Nonnegative data on a centred `(xi, tau)` lattice:
/// `xi_i = (i - n_xi/2) d_xi`, `tau_j = (j - n_tau/2) d_tau`, stored
/// `values[i * n_tau + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeData {
    pub n_xi: usize,
    pub n_tau: usize,
    pub d_xi: f64,
    pub d_tau: f64,
    pub values: Vec<f64>,
}

impl LatticeData {
    pub fn zeros(n_xi: usize, n_tau: usize, d_xi: f64, d_tau: f64) -> Self {
        Self {
            n_xi,
            n_tau,
            d_xi,
            d_tau,
            values: vec![0.0; n_xi * n_tau],
        }
    }

    pub fn random(n_xi: usize, n_tau: usize, d_xi: f64, d_tau: f64, rng: &mut impl Rng) -> Self {
        let values = (0..n_xi * n_tau).map(|_| rng.random::<f64>()).collect();
        Self {
            n_xi,
            n_tau,
            d_xi,
            d_tau,
            values,
        }
    }

    pub fn xi(&self, i: usize) -> f64 {
        (i as f64 - (self.n_xi / 2) as f64) * self.d_xi
    }

    pub fn tau(&self, j: usize) -> f64 {
        (j as f64 - (self.n_tau / 2) as f64) * self.d_tau
    }

    /// Index of the lattice point with value `xi`, given as an offset in
    /// lattice units from the centre.
    fn xi_index(&self, offset: i64) -> Option<usize> {
        let i = offset + (self.n_xi / 2) as i64;
        (0..self.n_xi as i64).contains(&i).then_some(i as usize)
    }

    fn tau_index(&self, offset: i64) -> Option<usize> {
        let j = offset + (self.n_tau / 2) as i64;
        (0..self.n_tau as i64).contains(&j).then_some(j as usize)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_tau + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_tau + j] = v;
    }

    /// `(sum v^2 d_xi d_tau)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.d_xi * self.d_tau).sqrt()
    }

    fn same_lattice(&self, other: &Self) -> bool {
        self.n_xi == other.n_xi
            && self.n_tau == other.n_tau
            && self.d_xi == other.d_xi
            && self.d_tau == other.d_tau
    }
}

/// Exponents of the trilinear form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrilinearParams {
    pub k: f64,
    pub l: f64,
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
}

impl TrilinearParams {
    /// `k = l = 0`, `a = 1/4 + 3 eps`, `a1 = 1/2 - 2 eps`, `a2 = 1/2 + eps`.
    pub fn proposition(eps: f64) -> Self {
        Self {
            k: 0.0,
            l: 0.0,
            a: 0.25 + 3.0 * eps,
            a1: 0.5 - 2.0 * eps,
            a2: 0.5 + eps,
        }
    }

    /// Hypotheses under which `|S| <= C ||v|| ||v1|| ||v2||` is known.
    pub fn admissible(&self) -> bool {
        self.l >= -0.5
            && self.k >= 0.0
            && self.k - self.l <= 1.0
            && self.a > 0.25
            && self.a1 > 0.25
            && self.a2 > 0.25
            && self.a + self.a1 > 0.75
            && self.a + self.a2 > 0.75
            && self.k - self.l <= 2.0 * self.a1
    }
}

impl Default for TrilinearParams {
    fn default() -> Self {
        Self::proposition(0.05)
    }
}

/// Frequencies of one term of the constrained sum, `xi = xi1 - xi2`,
/// `tau = tau1 - tau2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modes {
    pub xi: f64,
    pub tau: f64,
    pub xi1: f64,
    pub tau1: f64,
    pub xi2: f64,
    pub tau2: f64,
}

impl TrilinearParams {
    /// `<xi1>^k / (<sigma>^a <sigma1>^a1 <sigma2>^a2 <xi2>^k <xi>^l)` with
    /// `sigma = tau`, `sigma_i = tau_i + xi_i^2`.
    pub fn weight(&self, m: &Modes) -> f64 {
        let sigma = m.tau;
        let sigma1 = m.tau1 + m.xi1 * m.xi1;
        let sigma2 = m.tau2 + m.xi2 * m.xi2;
        bracket(m.xi1).powf(self.k)
            / (bracket(sigma).powf(self.a)
                * bracket(sigma1).powf(self.a1)
                * bracket(sigma2).powf(self.a2)
                * bracket(m.xi2).powf(self.k)
                * bracket(m.xi).powf(self.l))
    }
}

/// Constrained lattice sum
/// `sum v(xi, tau) v1(xi1, tau1) v2(xi2, tau2) w(...) dxi1 dxi2 dtau1 dtau2`
/// over all `(xi1, tau1, xi2, tau2)` whose difference lies on the lattice.
///
/// The outer `(xi1, tau1)` loop runs in parallel; partial sums are reduced
/// in index order so the result is bit-stable.
pub fn trilinear_form(
    v: &LatticeData,
    v1: &LatticeData,
    v2: &LatticeData,
    weight: impl Fn(&Modes) -> f64 + Sync,
) -> Result<f64, NormError> {
    if !v.same_lattice(v1) || !v.same_lattice(v2) {
        return Err(NormError::LatticeMismatch);
    }
    let (nx, nt) = (v.n_xi, v.n_tau);
    let partial: Vec<f64> = (0..nx * nt)
        .into_par_iter()
        .map(|outer| {
            let (i1, j1) = (outer / nt, outer % nt);
            let a1 = v1.at(i1, j1);
            if a1 == 0.0 {
                return 0.0;
            }
            let mut acc = 0.0;
            for i2 in 0..nx {
                let Some(i) = v.xi_index(i1 as i64 - i2 as i64) else {
                    continue;
                };
                for j2 in 0..nt {
                    let a2 = v2.at(i2, j2);
                    if a2 == 0.0 {
                        continue;
                    }
                    let Some(j) = v.tau_index(j1 as i64 - j2 as i64) else {
                        continue;
                    };
                    let a0 = v.at(i, j);
                    if a0 == 0.0 {
                        continue;
                    }
                    let m = Modes {
                        xi: v.xi(i),
                        tau: v.tau(j),
                        xi1: v.xi(i1),
                        tau1: v.tau(j1),
                        xi2: v.xi(i2),
                        tau2: v.tau(j2),
                    };
                    acc += a0 * a1 * a2 * weight(&m);
                }
            }
            acc
        })
        .collect();
    let measure = (v.d_xi * v.d_tau).powi(2);
    Ok(partial.iter().sum::<f64>() * measure)
}

pub fn trilinear_s(
    v: &LatticeData,
    v1: &LatticeData,
    v2: &LatticeData,
    p: &TrilinearParams,
) -> Result<f64, NormError> {
    trilinear_form(v, v1, v2, |m| p.weight(m))
}

/// One row of a trilinear scan: ensemble maximum of
/// `S / (||v|| ||v1|| ||v2||)` on an `size x size` lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub size: usize,
    pub seed: u64,
    pub ratio: f64,
    pub admissible_flag: bool,
}

/// Seeded ensemble maxima of the normalized trilinear form with uniform
/// `[0, 1)` data. Lattices have unit spacing, so a larger `size` widens the
/// frequency range `[-size/2, size/2)` in both `xi` and `tau`; growth across
/// sizes therefore measures how the estimate constant depends on the
/// frequencies involved.
pub fn trilinear_ratio_scan(
    p: &TrilinearParams,
    sizes: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<ScanRow>, NormError> {
    sizes
        .iter()
        .map(|&size| {
            let h = 1.0;
            let ratios: Result<Vec<f64>, NormError> = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = sample_rng(seed, size as u64, i as u64);
                    let v = LatticeData::random(size, size, h, h, &mut rng);
                    let v1 = LatticeData::random(size, size, h, h, &mut rng);
                    let v2 = LatticeData::random(size, size, h, h, &mut rng);
                    let denom = v.l2_norm() * v1.l2_norm() * v2.l2_norm();
                    if denom == 0.0 {
                        return Ok(0.0);
                    }
                    Ok(trilinear_s(&v, &v1, &v2, p)? / denom)
                })
                .collect();
            Ok(ScanRow {
                size,
                seed,
                ratio: ratios?.into_iter().fold(0.0, f64::max),
                admissible_flag: p.admissible(),
            })
        })
        .collect()
}

/// Full discrete convolution of two centred profiles of odd length
/// `2m + 1` (index `m` is the origin). The result has length `4m + 1`.
pub fn centred_convolution(f: &[f64], g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len() + g.len() - 1];
    for (i, a) in f.iter().enumerate() {
        for (j, b) in g.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// `J(s) = int <y - s>^{-2 a_plus} <y + s>^{-2 a_minus} dy` by adaptive
/// quadrature to absolute accuracy `1e-10`.
pub fn bracket_integral_j(s: f64, a_plus: f64, a_minus: f64) -> Result<f64, NormError> {
    if !(0.0 <= a_minus && a_minus <= a_plus && a_plus + a_minus > 0.5) {
        return Err(NormError::Divergent { a_plus, a_minus });
    }
    const TOL: f64 = 1e-10;
    let f = move |y: f64| bracket(y - s).powf(-2.0 * a_plus) * bracket(y + s).powf(-2.0 * a_minus);
    let cut = s.abs() + 1.0;
    let mut total = 0.0;
    // core: split at the two bracket peaks
    let knots = [-cut, -s.abs(), 0.0, s.abs(), cut];
    for w in knots.windows(2) {
        if w[1] > w[0] {
            total += quadrature::integrate(f, w[0], w[1], TOL / 8.0)?;
        }
    }
    // tails: y = cut * t^{-1/(2p-1)} maps [cut, inf) onto (0, 1] and absorbs
    // the y^{-2p} decay, 2p = 2(a_plus + a_minus) > 1
    let two_p = 2.0 * (a_plus + a_minus);
    let q = 1.0 / (two_p - 1.0);
    let prefactor = cut.powf(1.0 - two_p) * q;
    let tail = |sign: f64| {
        move |t: f64| {
            let y = cut * t.powf(-q);
            if !y.is_finite() {
                return prefactor;
            }
            // y^{2p} f(sign * y), written as ratios to stay finite
            let r_minus = y / bracket(sign * y - s);
            let r_plus = y / bracket(sign * y + s);
            prefactor * r_minus.powf(2.0 * a_plus) * r_plus.powf(2.0 * a_minus)
        }
    };
    total += quadrature::integrate(tail(1.0), 0.0, 1.0, TOL / 4.0)?;
    total += quadrature::integrate(tail(-1.0), 0.0, 1.0, TOL / 4.0)?;
    Ok(total)
}

/// Decay exponent `2 a_minus - [1 - 2 a_plus]_+` of the bracket lemma.
pub fn bracket_decay_exponent(a_plus: f64, a_minus: f64) -> f64 {
    2.0 * a_minus - (1.0 - 2.0 * a_plus).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bump_profile() {
        assert_eq!(bump(0.0), 0.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(0.25), 1.0);
        assert_eq!(bump(0.5), 1.0);
        assert_eq!(bump(0.75), 1.0);
        assert!(bump(0.1) > 0.0 && bump(0.1) < 1.0);
        assert!((bump(0.1) - bump(0.9)).abs() < 1e-15);
        for j in 0..64 {
            assert_eq!(window_weight(j, 64), window_weight(63 - j, 64));
        }
    }

    #[test]
    fn field_validation() {
        let g = Grid1D::new(8, 1.0).unwrap();
        assert_eq!(
            SpaceTimeField::from_fn(&g, 4, 1.0, |_, _| c(0.0, 0.0)).unwrap_err(),
            NormError::TooFewTimeSamples(4)
        );
        assert!(SpaceTimeField::from_fn(&g, 8, 0.0, |_, _| c(0.0, 0.0)).is_err());
        assert!(SpaceTimeField::new(&g, 8, 1.0, vec![c(0.0, 0.0); 10], Window::None).is_err());
    }

    #[test]
    fn transform_of_zero_and_parseval() {
        let g = Grid1D::new(16, 2.0 * PI).unwrap();
        let z = SpaceTimeField::from_fn(&g, 16, 1.0, |_, _| c(0.0, 0.0)).unwrap();
        assert!(spacetime_transform(&z).coeffs.iter().all(|v| v.norm() == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vals: Vec<Complex64> = (0..16 * 32)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let f = SpaceTimeField::new(&g, 32, 2.5, vals, Window::None).unwrap().windowed();
        let spec = spacetime_transform(&f);
        let lhs = f.l2_norm().powi(2);
        assert!((spec.l2_sq() - lhs).abs() <= 1e-12 * lhs);
        // s = b = 0 reproduces the space-time L^2 norm
        let x = xsb_norm(&f, 0.0, 0.0, DispersionRelation::Schroedinger);
        assert!((x - f.l2_norm()).abs() <= 1e-12 * x);
    }

    #[test]
    fn single_windowed_mode_concentrates() {
        let g = Grid1D::new(16, 2.0 * PI).unwrap();
        let t_span = 8.0;
        let dtau = 2.0 * PI / t_span;
        let tau0 = 5.0 * dtau;
        let f = SpaceTimeField::from_fn(&g, 64, t_span, |x, t| Complex64::from_polar(1.0, x - tau0 * t))
            .unwrap();
        let spec = spacetime_transform(&f);
        let it_peak = spec.tau.iter().position(|&t| (t + tau0).abs() < 1e-9).unwrap();
        let peak = spec.get(1, it_peak).norm();
        for ik in 0..16 {
            for it in 0..64 {
                let v = spec.get(ik, it).norm();
                if ik != 1 {
                    assert!(v <= 1e-12 * peak);
                } else {
                    assert!(v <= peak);
                    // main lobe of the bump spans six lattice steps each side
                    if (spec.tau[it] + tau0).abs() > 6.5 * dtau {
                        assert!(v <= 1e-2 * peak, "tau {} v {v}", spec.tau[it]);
                    }
                }
            }
        }
    }

    #[test]
    fn single_lattice_mode_norms() {
        let g = Grid1D::new(8, 2.0 * PI).unwrap();
        let mut spec = SpaceTimeSpectrum::zeros(&g, 16, 2.0 * PI);
        let (ik, it) = (2, 13);
        let amp = 1.7;
        spec.set(ik, it, c(amp, 0.0));
        let (k0, tau0) = (spec.k[ik], spec.tau[it]);
        let scale = (spec.dk * spec.dtau).sqrt();
        for (s, b) in [(0.0, 0.0), (1.0, 0.5), (-0.5, 3.0 / 8.0)] {
            let x = xsb_norm_spectrum(&spec, s, b, DispersionRelation::Schroedinger);
            let expect = amp * bracket(k0).powf(s) * bracket(tau0 + k0 * k0).powf(b) * scale;
            assert!((x - expect).abs() < 1e-13 * expect);
        }
        let y = ys_norm_spectrum(&spec, 1.0, DispersionRelation::Schroedinger);
        let expect = bracket(k0) / bracket(tau0 + k0 * k0) * amp * spec.dtau * spec.dk.sqrt();
        assert!((y - expect).abs() < 1e-13 * expect);
        let zero = SpaceTimeSpectrum::zeros(&g, 16, 1.0);
        assert_eq!(ys_norm_spectrum(&zero, 1.0, DispersionRelation::None), 0.0);
    }

    #[test]
    fn trilinear_delta_masses() {
        let mut v = LatticeData::zeros(8, 8, 1.0, 1.0);
        let mut v1 = v.clone();
        let mut v2 = v.clone();
        // centre index 4 is frequency 0
        v2.set(4, 4, 1.0);
        v1.set(5, 4, 1.0);
        v.set(5, 4, 1.0);
        let p = TrilinearParams {
            k: 0.0,
            l: 0.0,
            a: 0.5,
            a1: 0.5,
            a2: 0.5,
        };
        let s = trilinear_s(&v, &v1, &v2, &p).unwrap();
        assert!((s - 2f64.powf(-0.25)).abs() < 1e-15);
        assert!((s - 0.8409).abs() < 1e-4);
        let zero = LatticeData::zeros(8, 8, 1.0, 1.0);
        assert_eq!(trilinear_s(&zero, &v1, &v2, &p).unwrap(), 0.0);
        let other = LatticeData::zeros(8, 4, 1.0, 1.0);
        assert_eq!(
            trilinear_s(&other, &v1, &v2, &p),
            Err(NormError::LatticeMismatch)
        );
    }

    #[test]
    fn admissibility() {
        assert!(TrilinearParams::proposition(0.05).admissible());
        let mut p = TrilinearParams::proposition(0.05);
        p.k = 2.0;
        assert!(!p.admissible());
        assert!(!TrilinearParams::proposition(0.2).admissible());
    }

    #[test]
    fn bracket_integral_values() {
        let j = bracket_integral_j(0.0, 0.5, 0.5).unwrap();
        assert!((j - PI).abs() < 1e-9, "{j}");
        for s in [0.3, 2.0, 17.0] {
            let a = bracket_integral_j(s, 0.7, 0.2).unwrap();
            let b = bracket_integral_j(-s, 0.7, 0.2).unwrap();
            assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
        let alpha = bracket_decay_exponent(0.5, 0.4);
        assert!((alpha - 0.8).abs() < 1e-15);
        let scaled: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&s| bracket_integral_j(s, 0.5, 0.4).unwrap() * bracket(s).powf(alpha))
            .collect();
        // a_plus = 1/2 sits on the borderline of the lemma: the scaled values
        // still creep up like log s, so only the spread is bounded
        let (lo, hi) = scaled
            .iter()
            .fold((f64::MAX, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        assert!(hi / lo <= 3.0, "{scaled:?}");
        assert!(matches!(
            bracket_integral_j(1.0, 0.3, 0.2),
            Err(NormError::Divergent { .. })
        ));
        assert!(bracket_integral_j(1.0, 0.2, 0.4).is_err());
    }

    #[test]
    fn bracket_integral_matches_direct_quadrature() {
        // heavy decay: a long finite interval is accurate enough to compare
        for (s, ap, am) in [(0.0, 1.0, 1.0), (3.0, 1.5, 0.75), (10.0, 1.0, 1.0)] {
            let direct = crate::quadrature::integrate(
                |y| bracket(y - s).powf(-2.0 * ap) * bracket(y + s).powf(-2.0 * am),
                -4000.0,
                4000.0,
                1e-12,
            )
            .unwrap();
            let j = bracket_integral_j(s, ap, am).unwrap();
            assert!((j - direct).abs() < 1e-7, "s={s}: {j} vs {direct}");
        }
    }
}
