//! Periodic 1-D lattice, unitary spectral transforms, 2/3 dealiasing and
//! discrete Lebesgue/Sobolev norms.
//!
//! Spectral coefficients are stored with the unitary `1/sqrt(N)` scaling, so
//! `sum |c_k|^2 == sum |u_j|^2`. Continuum integrals are recovered with the
//! rectangle rule, i.e. by multiplying lattice sums with `dx`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::bracket;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid point count must be even, got {0}")]
    OddPoints(usize),
    #[error("domain length must be positive and finite, got {0}")]
    NonPositiveLength(f64),
    #[error("expected {expected:?} representation, found {found:?}")]
    RepresentationMismatch {
        expected: Representation,
        found: Representation,
    },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("value vector has length {found}, grid has {expected} points")]
    LengthMismatch { expected: usize, found: usize },
    #[error("unsupported Lebesgue exponent p = {0} (supported: 2, 4)")]
    UnsupportedExponent(f64),
}

pub type Result<T> = std::result::Result<T, GridError>;

/// Uniform periodic lattice on `[0, length)`.
#[derive(Clone)]
pub struct Grid1D {
    n_points: usize,
    length: f64,
    wavenumbers: Arc<[f64]>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("n_points", &self.n_points)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.n_points == other.n_points && self.length == other.length
    }
}

/// Standard DFT mode ordering: `0..N/2-1` then `-N/2..-1`.
pub fn mode_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl Grid1D {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < 4 {
            return Err(GridError::TooFewPoints(n_points));
        }
        if n_points % 2 != 0 {
            return Err(GridError::OddPoints(n_points));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(GridError::NonPositiveLength(length));
        }
        let scale = 2.0 * PI / length;
        let wavenumbers: Arc<[f64]> = (0..n_points)
            .map(|j| mode_index(j, n_points) as f64 * scale)
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        Ok(Self {
            n_points,
            length,
            wavenumbers,
            forward,
            inverse,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Sample positions `x_j = j dx`.
    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let dx = self.dx();
        (0..self.n_points).map(move |j| j as f64 * dx)
    }

    /// Unitary in-place DFT of a buffer of length `n_points`.
    pub(crate) fn fft_in_place(&self, buf: &mut [Complex64], direction: Direction) {
        debug_assert_eq!(buf.len(), self.n_points);
        match direction {
            Direction::Forward => self.forward.process(buf),
            Direction::Inverse => self.inverse.process(buf),
        }
        let norm = 1.0 / (self.n_points as f64).sqrt();
        buf.iter_mut().for_each(|c| *c *= norm);
    }

    /// Largest retained integer mode index under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> f64 {
        (2.0 / 3.0) * (self.n_points / 2) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Physical,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Complex samples of a function on a [`Grid1D`], in either representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<Complex64>,
    repr: Representation,
}

impl Field {
    pub fn new(grid: &Grid1D, values: Vec<Complex64>, repr: Representation) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(GridError::LengthMismatch {
                expected: grid.n_points(),
                found: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            repr,
        })
    }

    pub fn zeros(grid: &Grid1D) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.n_points()],
            repr: Representation::Physical,
        }
    }

    /// Physical field sampled from `f(x)`.
    pub fn from_fn(grid: &Grid1D, f: impl FnMut(f64) -> Complex64) -> Self {
        Self {
            grid: grid.clone(),
            values: grid.points().map(f).collect(),
            repr: Representation::Physical,
        }
    }

    /// Physical field whose Fourier modes with `|m| <= band` carry
    /// independent standard complex Gaussian amplitudes; all others vanish.
    pub fn random_band_limited(grid: &Grid1D, band: usize, rng: &mut impl Rng) -> Self {
        let n = grid.n_points();
        let coeffs = (0..n)
            .map(|j| {
                if mode_index(j, n).unsigned_abs() as usize <= band {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Self {
            grid: grid.clone(),
            values: coeffs,
            repr: Representation::Spectral,
        }
        .to_physical()
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Forward (physical -> spectral) or inverse (spectral -> physical)
    /// unitary transform.
    pub fn transform(&self, direction: Direction) -> Result<Field> {
        let (expected, target) = match direction {
            Direction::Forward => (Representation::Physical, Representation::Spectral),
            Direction::Inverse => (Representation::Spectral, Representation::Physical),
        };
        if self.repr != expected {
            return Err(GridError::RepresentationMismatch {
                expected,
                found: self.repr,
            });
        }
        let mut values = self.values.clone();
        self.grid.fft_in_place(&mut values, direction);
        Ok(Field {
            grid: self.grid.clone(),
            values,
            repr: target,
        })
    }

    pub fn to_spectral(&self) -> Field {
        match self.repr {
            Representation::Spectral => self.clone(),
            Representation::Physical => self.transform(Direction::Forward).unwrap(),
        }
    }

    pub fn to_physical(&self) -> Field {
        match self.repr {
            Representation::Physical => self.clone(),
            Representation::Spectral => self.transform(Direction::Inverse).unwrap(),
        }
    }

    /// Zero every coefficient whose integer mode index exceeds `(2/3)(N/2)`.
    pub fn dealias(&self) -> Result<Field> {
        if self.repr != Representation::Spectral {
            return Err(GridError::RepresentationMismatch {
                expected: Representation::Spectral,
                found: self.repr,
            });
        }
        let mut out = self.clone();
        dealias_in_place(&self.grid, &mut out.values);
        Ok(out)
    }

    /// `(sum_k <k>^{2s} |c_k|^2 dx)^{1/2}`; reduces to the continuum `L^2`
    /// norm at `s = 0`.
    pub fn hs_norm(&self, s: f64) -> f64 {
        let spec = self.to_spectral();
        let sum: f64 = spec
            .values
            .iter()
            .zip(self.grid.wavenumbers())
            .map(|(c, &k)| bracket(k).powf(2.0 * s) * c.norm_sqr())
            .sum();
        (sum * self.grid.dx()).sqrt()
    }

    /// Rectangle-rule `L^p` norm for `p` in `{2, 4}`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if self.repr != Representation::Physical {
            return Err(GridError::RepresentationMismatch {
                expected: Representation::Physical,
                found: self.repr,
            });
        }
        if p == 2.0 {
            Ok(self.mass().sqrt())
        } else if p == 4.0 {
            Ok(self.l4_fourth().sqrt().sqrt())
        } else {
            Err(GridError::UnsupportedExponent(p))
        }
    }

    /// `int |u|^2 dx` of a physical field.
    pub fn mass(&self) -> f64 {
        debug_assert_eq!(self.repr, Representation::Physical);
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// `int |u|^4 dx` of a physical field.
    pub fn l4_fourth(&self) -> f64 {
        debug_assert_eq!(self.repr, Representation::Physical);
        self.values
            .iter()
            .map(|c| {
                let m = c.norm_sqr();
                m * m
            })
            .sum::<f64>()
            * self.grid.dx()
    }

    /// Pointwise product with a constant.
    pub fn scale(&self, factor: Complex64) -> Field {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|c| *c *= factor);
        out
    }

    /// Maximum pointwise modulus of the difference with `other`.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn dealias_in_place(grid: &Grid1D, coeffs: &mut [Complex64]) {
    let n = grid.n_points();
    let cutoff = grid.dealias_cutoff();
    for (j, c) in coeffs.iter_mut().enumerate() {
        if (mode_index(j, n).abs() as f64) > cutoff {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// Real samples on a [`Grid1D`] (reservoir density, pump profile).
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: &Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(GridError::LengthMismatch {
                expected: grid.n_points(),
                found: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn constant(grid: &Grid1D, value: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![value; grid.n_points()],
        }
    }

    pub fn from_fn(grid: &Grid1D, f: impl FnMut(f64) -> f64) -> Self {
        Self {
            grid: grid.clone(),
            values: grid.points().map(f).collect(),
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn sq_integral(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dx()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Constant value if every sample is identical.
    pub fn as_constant(&self) -> Option<f64> {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first).then_some(first)
    }
}
