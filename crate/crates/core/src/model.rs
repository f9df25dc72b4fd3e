//! Model constants, right-hand sides of both PDE systems and the closed-form
//! homogeneous solutions used as test oracles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{dealias_in_place, Direction, Field, GridError, RealField, Representation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("pump must be finite and nonnegative (min {min})")]
    NegativePump { min: f64 },
    #[error("homogeneous fixed point needs a constant pump")]
    NonConstantPump,
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}

/// Gain `xi` and nonlinear saturation `sigma` of the cGPE.
///
/// Fields are public so that tests can switch the dissipative terms off
/// (`xi = sigma = 0`); [`CgpeParams::new`] enforces positivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgpeParams {
    pub xi: f64,
    pub sigma: f64,
}

impl CgpeParams {
    pub fn new(xi: f64, sigma: f64) -> Result<Self, ModelError> {
        Ok(Self {
            xi: positive("xi", xi)?,
            sigma: positive("sigma", sigma)?,
        })
    }

    /// Radius `(2 xi / sigma) |T|` of the `L^2` absorbing ball (squared norm).
    pub fn absorbing_radius_sq(&self, domain_measure: f64) -> f64 {
        2.0 * self.xi / self.sigma * domain_measure
    }
}

/// Constants of the exciton-polariton system and the pump profile `P(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpParams {
    pub g: f64,
    pub lambda: f64,
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    pub pump: RealField,
}

impl EpParams {
    pub fn new(
        g: f64,
        lambda: f64,
        r: f64,
        alpha: f64,
        beta: f64,
        pump: RealField,
    ) -> Result<Self, ModelError> {
        let min = pump.min();
        if !(min >= 0.0) || !pump.is_finite() {
            return Err(ModelError::NegativePump { min });
        }
        Ok(Self {
            g: positive("g", g)?,
            lambda: positive("lambda", lambda)?,
            r: positive("R", r)?,
            alpha: positive("alpha", alpha)?,
            beta: positive("beta", beta)?,
            pump,
        })
    }

    /// Decay rate `gamma = min(2 alpha, beta)` of the Lyapunov functional.
    pub fn gamma(&self) -> f64 {
        (2.0 * self.alpha).min(self.beta)
    }

    /// Condensation threshold `alpha beta / R` for a constant pump.
    pub fn threshold(&self) -> f64 {
        self.alpha * self.beta / self.r
    }
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `i u_xx` evaluated spectrally, returned in physical representation.
fn dispersion_term(u: &Field) -> Field {
    let mut spec = u.to_spectral();
    let ks = u.grid().wavenumbers().to_vec();
    for (c, k) in spec.values_mut().iter_mut().zip(ks) {
        *c *= -I * k * k;
    }
    spec.to_physical()
}

/// Pointwise `coef(|u|^2) * u` with the product projected onto the 2/3 band.
fn dealiased_product(u: &Field, coef: impl Fn(f64) -> Complex64) -> Field {
    let grid = u.grid().clone();
    let mut buf: Vec<Complex64> = u.values().iter().map(|&v| coef(v.norm_sqr()) * v).collect();
    grid.fft_in_place(&mut buf, Direction::Forward);
    dealias_in_place(&grid, &mut buf);
    grid.fft_in_place(&mut buf, Direction::Inverse);
    Field::new(&grid, buf, Representation::Physical).expect("grid length")
}

fn require_physical(u: &Field) -> Result<(), GridError> {
    if u.representation() != Representation::Physical {
        return Err(GridError::RepresentationMismatch {
            expected: Representation::Physical,
            found: u.representation(),
        });
    }
    Ok(())
}

/// `u_t = i u_xx - i|u|^2 u + (xi - sigma|u|^2) u`.
pub fn cgpe_rhs(u: &Field, p: &CgpeParams) -> Result<Field, ModelError> {
    require_physical(u)?;
    let mut out = dispersion_term(u);
    let cubic = dealiased_product(u, |m| -(p.sigma + I) * m);
    for ((o, c), v) in out.values_mut().iter_mut().zip(cubic.values()).zip(u.values()) {
        *o += c + p.xi * v;
    }
    Ok(out)
}

/// Right-hand side `(u_t, n_t)` of the exciton-polariton system.
pub fn ep_rhs(u: &Field, n: &RealField, p: &EpParams) -> Result<(Field, RealField), ModelError> {
    require_physical(u)?;
    if u.grid() != n.grid() || u.grid() != p.pump.grid() {
        return Err(GridError::GridMismatch.into());
    }
    let mut du = dispersion_term(u);
    let cubic = dealiased_product(u, |m| -I * p.g * m);
    for (((o, c), v), &nj) in du
        .values_mut()
        .iter_mut()
        .zip(cubic.values())
        .zip(u.values())
        .zip(n.values())
    {
        *o += c + (-I * p.lambda * nj + (p.r * nj - p.alpha)) * v;
    }
    let dn: Vec<f64> = u
        .values()
        .iter()
        .zip(n.values())
        .zip(p.pump.values())
        .map(|((v, &nj), &pj)| pj - (p.r * v.norm_sqr() + p.beta) * nj)
        .collect();
    Ok((du, RealField::new(n.grid(), dn)?))
}

/// `int_0^t e^{2 c s} ds`, continuous through `c = 0`.
pub(crate) fn exp_growth_integral(c: f64, t: f64) -> f64 {
    let x = 2.0 * c * t;
    if x.abs() < 1e-300 || c == 0.0 {
        t
    } else {
        x.exp_m1() / (2.0 * c)
    }
}

/// `ln(1 + a x) / a`, continuous through `a = 0`.
fn log1p_scaled(a: f64, x: f64) -> f64 {
    if a == 0.0 {
        x
    } else {
        (a * x).ln_1p() / a
    }
}

/// Exact solution of the x-independent cGPE (no dispersion), as
/// `(rho^2, theta)` at time `t` from `(rho0, theta0)`.
pub(crate) fn flat_amplitude_phase(rho0_sq: f64, theta0: f64, t: f64, p: &CgpeParams) -> (f64, f64) {
    // d rho^2/dt = 2 (xi - sigma rho^2) rho^2,  d theta/dt = -rho^2
    // rho^2 = rho0^2 / (e^{-2 xi t} + 2 sigma rho0^2 int_0^t e^{-2 xi s} ds)
    let decay = (-2.0 * p.xi * t).exp();
    let back = exp_growth_integral(-p.xi, t);
    let rho_sq = rho0_sq / (decay + 2.0 * p.sigma * rho0_sq * back);
    // int_0^t rho^2 = ln(1 + 2 sigma rho0^2 int_0^t e^{2 xi s} ds) / (2 sigma)
    let phase_integral = if 2.0 * p.xi * t < 1.0 || p.sigma == 0.0 {
        log1p_scaled(2.0 * p.sigma, rho0_sq * exp_growth_integral(p.xi, t))
    } else {
        // large-t form, avoids overflow of e^{2 xi t}
        (2.0 * p.xi * t + (decay + 2.0 * p.sigma * rho0_sq * back).ln()) / (2.0 * p.sigma)
    };
    (rho_sq, theta0 - phase_integral)
}

/// Homogeneous cGPE solution `rho(t) e^{i theta(t)}` (logistic amplitude,
/// logarithmic phase).
pub fn cgpe_flat_closed_form(rho0: f64, theta0: f64, t: f64, p: &CgpeParams) -> Complex64 {
    let (rho_sq, theta) = flat_amplitude_phase(rho0 * rho0, theta0, t, p);
    Complex64::from_polar(rho_sq.max(0.0).sqrt(), theta)
}

/// Homogeneous stationary state of the exciton-polariton system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HomogeneousState {
    /// `u(t) = sqrt(amplitude_sq) e^{-i omega t}`, `n = n_star`.
    Condensate {
        amplitude_sq: f64,
        n_star: f64,
        omega: f64,
    },
    NoCondensate,
}

pub fn ep_homogeneous_fixed_point(p: &EpParams) -> Result<HomogeneousState, ModelError> {
    let p0 = p.pump.as_constant().ok_or(ModelError::NonConstantPump)?;
    if p0 <= p.threshold() {
        return Ok(HomogeneousState::NoCondensate);
    }
    let n_star = p.alpha / p.r;
    let amplitude_sq = p0 / p.alpha - p.beta / p.r;
    Ok(HomogeneousState::Condensate {
        amplitude_sq,
        n_star,
        omega: p.g * amplitude_sq + p.lambda * n_star,
    })
}
