//! Strang-splitting steppers for both models and a fixed-step trajectory
//! driver.
//!
//! Every substep is an exact flow: the free Schrödinger propagator is a
//! spectral multiplier, the x-local cGPE part has a logistic closed form,
//! and the reservoir equation is affine in `n` once `|u|^2` is frozen.

use num_complex::Complex64;
use thiserror::Error;

use crate::bounds::{DiagnosticsSeries, Sample};
use crate::grid::{Field, GridError, RealField};
use crate::model::{exp_growth_integral, flat_amplitude_phase, CgpeParams, EpParams};

/// Growth of `int |u|^2` (relative to the initial mass) treated as blow-up.
pub const BLOWUP_MASS_FACTOR: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("non-finite values after step ending at t = {time}")]
    BlowUp { time: f64 },
    #[error("mass grew past {factor:e} x initial at t = {time}")]
    MassBlowUp { time: f64, factor: f64 },
    #[error("time step must be nonnegative and finite, got {0}")]
    BadStep(f64),
    #[error("t_end = {t_end} is shorter than one step dt = {dt}")]
    ShortRun { dt: f64, t_end: f64 },
    #[error("sample_every must be at least 1")]
    BadSampling,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgpeState {
    pub u: Field,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpState {
    pub u: Field,
    pub n: RealField,
    pub t: f64,
}

/// Free Schrödinger flow over `dt / 2`: coefficient `k` picks up
/// `e^{-i k^2 dt / 2}`. The output keeps the input representation.
pub fn dispersion_half_step(field: &Field, dt: f64) -> Field {
    let mut spec = field.to_spectral();
    let ks = field.grid().wavenumbers().to_vec();
    for (c, k) in spec.values_mut().iter_mut().zip(ks) {
        *c *= Complex64::from_polar(1.0, -k * k * dt * 0.5);
    }
    match field.representation() {
        crate::grid::Representation::Spectral => spec,
        crate::grid::Representation::Physical => spec.to_physical(),
    }
}

/// Exact pointwise flow of `u_t = -i|u|^2 u + (xi - sigma|u|^2) u`.
pub fn cgpe_local_step(u: &Field, dt: f64, p: &CgpeParams) -> Field {
    let mut out = u.clone();
    for v in out.values_mut() {
        let rho0_sq = v.norm_sqr();
        if rho0_sq == 0.0 {
            continue;
        }
        let (rho_sq, theta) = flat_amplitude_phase(rho0_sq, v.arg(), dt, p);
        *v = Complex64::from_polar(rho_sq.sqrt(), theta);
    }
    out
}

fn check_step(dt: f64) -> Result<(), StepError> {
    if dt >= 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(StepError::BadStep(dt))
    }
}

pub fn strang_step_cgpe(s: &CgpeState, dt: f64, p: &CgpeParams) -> Result<CgpeState, StepError> {
    check_step(dt)?;
    let u = dispersion_half_step(&s.u.to_physical(), dt);
    let u = cgpe_local_step(&u, dt, p);
    let u = dispersion_half_step(&u, dt);
    let t = s.t + dt;
    if !u.is_finite() {
        return Err(StepError::BlowUp { time: t });
    }
    Ok(CgpeState { u, t })
}

/// Exact reservoir flow with `|u|^2` frozen:
/// `n <- n e^{-G dt} + (P / G)(1 - e^{-G dt})`, `G = R|u|^2 + beta`.
pub fn reservoir_exact_update(n: &RealField, u_frozen: &Field, dt: f64, p: &EpParams) -> RealField {
    let mut out = n.clone();
    for ((nj, v), &pj) in out
        .values_mut()
        .iter_mut()
        .zip(u_frozen.values())
        .zip(p.pump.values())
    {
        let gamma = p.r * v.norm_sqr() + p.beta;
        let keep = (-gamma * dt).exp();
        let fill = -(-gamma * dt).exp_m1() / gamma;
        *nj = *nj * keep + pj * fill;
    }
    out
}

/// Exact flow of `u_t = (-i g|u|^2 - i lambda n + R n - alpha) u` with `n`
/// frozen: `|u|^2` evolves exponentially and the phase integral is closed
/// form.
pub fn ep_local_u_step(u: &Field, n: &RealField, dt: f64, p: &EpParams) -> Field {
    let mut out = u.clone();
    for (v, &nj) in out.values_mut().iter_mut().zip(n.values()) {
        let m0 = v.norm_sqr();
        if m0 == 0.0 {
            continue;
        }
        let rate = p.r * nj - p.alpha;
        let phase = -(p.lambda * nj * dt + p.g * m0 * exp_growth_integral(rate, dt));
        *v *= Complex64::from_polar((rate * dt).exp(), phase);
    }
    out
}

pub fn strang_step_ep(s: &EpState, dt: f64, p: &EpParams) -> Result<EpState, StepError> {
    check_step(dt)?;
    if s.u.grid() != s.n.grid() || s.u.grid() != p.pump.grid() {
        return Err(GridError::GridMismatch.into());
    }
    let u = dispersion_half_step(&s.u.to_physical(), dt);
    let n = reservoir_exact_update(&s.n, &u, 0.5 * dt, p);
    let u = ep_local_u_step(&u, &n, dt, p);
    let n = reservoir_exact_update(&n, &u, 0.5 * dt, p);
    let u = dispersion_half_step(&u, dt);
    let t = s.t + dt;
    if !u.is_finite() || !n.is_finite() {
        return Err(StepError::BlowUp { time: t });
    }
    Ok(EpState { u, n, t })
}

/// A model that can be advanced by one fixed step and sampled.
pub trait Stepper {
    type State: Clone;

    fn step(&self, state: &Self::State, dt: f64) -> Result<Self::State, StepError>;
    fn sample(&self, state: &Self::State) -> Sample;
    fn time(state: &Self::State) -> f64;
    fn set_time(state: &mut Self::State, t: f64);
}

#[derive(Debug, Clone, Copy)]
pub struct Cgpe<'a>(pub &'a CgpeParams);

#[derive(Debug, Clone, Copy)]
pub struct Ep<'a>(pub &'a EpParams);

impl Stepper for Cgpe<'_> {
    type State = CgpeState;

    fn step(&self, state: &CgpeState, dt: f64) -> Result<CgpeState, StepError> {
        strang_step_cgpe(state, dt, self.0)
    }

    fn sample(&self, state: &CgpeState) -> Sample {
        Sample {
            t: state.t,
            mass: state.u.mass(),
            l4_fourth: state.u.l4_fourth(),
            reservoir: None,
        }
    }

    fn time(state: &CgpeState) -> f64 {
        state.t
    }

    fn set_time(state: &mut CgpeState, t: f64) {
        state.t = t;
    }
}

impl Stepper for Ep<'_> {
    type State = EpState;

    fn step(&self, state: &EpState, dt: f64) -> Result<EpState, StepError> {
        strang_step_ep(state, dt, self.0)
    }

    fn sample(&self, state: &EpState) -> Sample {
        Sample {
            t: state.t,
            mass: state.u.mass(),
            l4_fourth: state.u.l4_fourth(),
            reservoir: Some([
                state.n.integral(),
                state.n.sq_integral(),
                state.n.min(),
            ]),
        }
    }

    fn time(state: &EpState) -> f64 {
        state.t
    }

    fn set_time(state: &mut EpState, t: f64) {
        state.t = t;
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    /// States at the sampled steps (step 0 included).
    pub states: Vec<S>,
    pub diagnostics: DiagnosticsSeries,
    pub dt: f64,
    /// Number of steps actually taken.
    pub steps: usize,
}

#[derive(Debug, Clone, Error)]
#[error("integration stopped: {source}")]
pub struct IntegrateError<S: std::fmt::Debug> {
    pub source: StepError,
    /// Everything recorded before the failing step.
    pub partial: Option<Trajectory<S>>,
}

/// Number of fixed steps covering `[0, t_end]`.
pub fn step_count(dt: f64, t_end: f64) -> usize {
    (t_end / dt).round() as usize
}

/// Advance `initial` by `round(t_end / dt)` fixed steps, recording the state
/// and its diagnostics at step 0 and at every multiple of `sample_every`.
pub fn integrate<M>(
    model: &M,
    initial: M::State,
    dt: f64,
    t_end: f64,
    sample_every: usize,
) -> Result<Trajectory<M::State>, IntegrateError<M::State>>
where
    M: Stepper,
    M::State: std::fmt::Debug,
{
    let fail = |source: StepError| IntegrateError {
        source,
        partial: None,
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(fail(StepError::BadStep(dt)));
    }
    if !(t_end >= dt * (1.0 - 1e-12)) {
        return Err(fail(StepError::ShortRun { dt, t_end }));
    }
    if sample_every == 0 {
        return Err(fail(StepError::BadSampling));
    }
    let steps = step_count(dt, t_end);
    let t0 = M::time(&initial);
    let first = model.sample(&initial);
    let mass0 = first.mass;
    let mut traj = Trajectory {
        states: vec![initial.clone()],
        diagnostics: DiagnosticsSeries::default(),
        dt,
        steps: 0,
    };
    traj.diagnostics.push(first);
    let mut state = initial;
    for k in 1..=steps {
        let mut next = match model.step(&state, dt) {
            Ok(s) => s,
            Err(source) => {
                return Err(IntegrateError {
                    source,
                    partial: Some(traj),
                })
            }
        };
        let t = t0 + k as f64 * dt;
        M::set_time(&mut next, t);
        state = next;
        traj.steps = k;
        let wants_sample = k % sample_every == 0;
        let check = model.sample(&state);
        if mass0 > 0.0 && check.mass > BLOWUP_MASS_FACTOR * mass0 {
            return Err(IntegrateError {
                source: StepError::MassBlowUp {
                    time: t,
                    factor: BLOWUP_MASS_FACTOR,
                },
                partial: Some(traj),
            });
        }
        if wants_sample {
            traj.states.push(state.clone());
            traj.diagnostics.push(check);
        }
    }
    Ok(traj)
}
