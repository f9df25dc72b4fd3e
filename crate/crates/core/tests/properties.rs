use std::f64::consts::PI;

use plsim_core::bounds::*;
use plsim_core::grid::{Field, Grid1D, RealField};
use plsim_core::integrators::{dispersion_half_step, integrate, strang_step_ep, Ep, EpState};
use plsim_core::model::{cgpe_rhs, CgpeParams, EpParams};
use plsim_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn field(n: usize, length: f64, seed: u64) -> Field {
    let grid = Grid1D::new(n, length).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(&grid, |_| {
        Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
    })
}

fn sizes() -> impl Strategy<Value = usize> {
    prop_oneof![Just(4usize), Just(8), Just(16), Just(64), Just(256), Just(6), Just(30)]
}

proptest! {
    #[test]
    fn transform_round_trip(n in sizes(), length in 0.1f64..100.0, seed in any::<u64>()) {
        let f = field(n, length, seed);
        let back = f.to_spectral().to_physical();
        prop_assert!(back.max_abs_diff(&f) <= 1e-12 * f.max_abs());
    }

    #[test]
    fn plancherel(n in sizes(), length in 0.1f64..100.0, seed in any::<u64>()) {
        let f = field(n, length, seed);
        let a = f.hs_norm(0.0);
        let b = f.lp_norm(2.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn sobolev_norms_grow_with_index(seed in any::<u64>(), s in -2.0f64..2.0, ds in 0.0f64..2.0) {
        let f = field(32, 2.0 * PI, seed);
        prop_assert!(f.hs_norm(s + ds) >= f.hs_norm(s));
    }

    #[test]
    fn dealias_is_idempotent(n in sizes(), seed in any::<u64>()) {
        let once = field(n, 1.0, seed).to_spectral().dealias().unwrap();
        let twice = once.dealias().unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn cgpe_rhs_gauge_covariant(seed in any::<u64>(), phi in 0.0f64..(2.0 * PI)) {
        let p = CgpeParams::new(1.3, 0.7).unwrap();
        let u = field(64, 2.0 * PI, seed);
        let rot = Complex64::from_polar(1.0, phi);
        let lhs = cgpe_rhs(&u.scale(rot), &p).unwrap();
        let rhs = cgpe_rhs(&u, &p).unwrap().scale(rot);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-13 * rhs.max_abs());
    }

    #[test]
    fn dispersion_half_step_reverses(seed in any::<u64>(), dt in -1.0f64..1.0) {
        let u = field(64, 2.0 * PI, seed);
        let back = dispersion_half_step(&dispersion_half_step(&u, dt), -dt);
        prop_assert!(back.max_abs_diff(&u) <= 1e-14 * 16.0 * u.max_abs());
    }

    #[test]
    fn reservoir_stays_nonnegative(seed in any::<u64>(), dt in 1e-3f64..0.5) {
        let grid = Grid1D::new(32, 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pump = RealField::from_fn(&grid, |_| rng.random_range(0.0..3.0));
        let p = EpParams::new(1.0, 0.5, 2.0, 0.5, 1.0, pump).unwrap();
        let n = RealField::from_fn(&grid, |_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..2.0) });
        let mut s = EpState { u: Field::random_band_limited(&grid, 6, &mut rng), n, t: 0.0 };
        for _ in 0..20 {
            s = strang_step_ep(&s, dt, &p).unwrap();
            prop_assert!(s.n.min() >= 0.0);
        }
    }
}

fn ep_series() -> (DiagnosticsSeries, EpParams) {
    let grid = Grid1D::new(64, 16.0).unwrap();
    let pump = RealField::from_fn(&grid, |x| 2.0 * (-(x - 8.0).powi(2)).exp());
    let p = EpParams::new(1.0, 0.5, 2.0, 0.5, 2.0, pump).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = Field::random_band_limited(&grid, 4, &mut rng).scale(Complex64::new(0.3, 0.0));
    let n = RealField::constant(&grid, 0.2);
    let traj = integrate(&Ep(&p), EpState { u, n, t: 0.0 }, 1e-2, 4.0, 10).unwrap();
    (traj.diagnostics, p)
}

type Check = fn(&DiagnosticsSeries, &EpParams) -> Result<CheckReport, BoundsError>;

#[test]
fn loosening_tolerance_never_fails_a_passing_check() {
    let (d, p) = ep_series();
    let checks: [Check; 3] = [ep_lyapunov, reservoir_second_moment, |d, _| reservoir_positivity(d)];
    for check in checks {
        let r = check(&d, &p).unwrap();
        assert!(r.passed, "{r:?}");
        for scale in [1.0, 2.0, 10.0, 1e3] {
            assert!(r.with_tolerance(r.tolerance * scale).passed);
        }
    }
}

#[test]
fn one_percent_violation_is_detected() {
    let (d, p) = ep_series();
    let mid = d.len() / 2;

    // Lyapunov: raise one sample of L = mass/2 + int n by 1% of its bound
    let mut bad = d.clone();
    let r = bad.reservoir.as_mut().unwrap();
    let l0 = 0.5 * d.mass[0] + d.reservoir.as_ref().unwrap().n_integral[0];
    let bound = lyapunov_bound(d.times[mid], l0, p.pump.integral(), p.gamma());
    let current = 0.5 * d.mass[mid] + r.n_integral[mid];
    r.n_integral[mid] += bound - current + 0.01 * bound;
    assert!(!ep_lyapunov(&bad, &p).unwrap().passed);

    let mut bad = d.clone();
    let r = bad.reservoir.as_mut().unwrap();
    let n0_sq = d.reservoir.as_ref().unwrap().n_sq_integral[0];
    let bound = second_moment_bound(d.times[mid], n0_sq, p.pump.sq_integral(), p.beta);
    r.n_sq_integral[mid] = 1.01 * bound;
    assert!(!reservoir_second_moment(&bad, &p).unwrap().passed);

    let mut bad = d.clone();
    let r = bad.reservoir.as_mut().unwrap();
    r.n_min[mid] = -0.01 * r.n_integral[mid].abs().max(1.0);
    assert!(!reservoir_positivity(&bad).unwrap().passed);
}

#[test]
fn cgpe_checks_detect_one_percent_violation() {
    let grid = Grid1D::new(64, 2.0 * PI).unwrap();
    let p = CgpeParams::new(1.0, 1.0).unwrap();
    let u = Field::from_fn(&grid, |x| Complex64::new(1.0 + 0.5 * x.cos(), 0.0));
    let traj = integrate(
        &plsim_core::integrators::Cgpe(&p),
        plsim_core::integrators::CgpeState { u, t: 0.0 },
        1e-3,
        2.0,
        10,
    )
    .unwrap();
    let d = traj.diagnostics;
    let measure = 2.0 * PI;
    assert!(f1_residual(&d, &p).unwrap().passed);
    assert!(abs_set_envelope(&d, &p, measure).unwrap().passed);

    let mid = d.len() / 2;
    let mut bad = d.clone();
    bad.mass[mid] *= 1.01;
    assert!(!f1_residual(&bad, &p).unwrap().passed);

    let mut bad = d.clone();
    bad.mass[mid] = 1.01 * abs_set_bound(d.times[mid], d.mass[0], &p, measure);
    assert!(!abs_set_envelope(&bad, &p, measure).unwrap().passed);
}
