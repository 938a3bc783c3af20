use proptest::prelude::*;
use quenchwave::wave::{build_wave, solve_width, wave_drive, TravelingWave, WaveError};
use quenchwave::ModelParams;

const FD_STEP: f64 = 1e-8;

fn fd_residual(wave: &TravelingWave, p: f64) -> f64 {
    let dx = (wave.eval(p + FD_STEP) - wave.eval(p - FD_STEP)) / (2.0 * FD_STEP);
    wave.ode_residual_with(p, wave.eval(p), dx)
}

/// Sample points on both sides of each interface that keep the stencil on
/// one branch.
fn samples(wave: &TravelingWave, per_branch: usize) -> Vec<f64> {
    let gap = 2.0 * FD_STEP;
    let w = wave.width();
    let span = 0.5;
    let mut out = Vec::new();
    for k in 0..per_branch {
        let u = (k as f64 + 0.5) / per_branch as f64;
        out.push(wave.xi_lo - gap - span * u);
        out.push(wave.xi_lo + gap + (w - 2.0 * gap) * u);
        out.push(wave.xi_hi + gap + span * u);
    }
    out
}

fn params_strategy() -> impl Strategy<Value = (ModelParams, f64)> {
    (0.1f64..0.9, 0.25f64..4.0, -3.0f64..-0.7, 0.2f64..5.0, any::<bool>()).prop_map(|(k, d, lt, om, neg)| {
        let tau = 10f64.powf(lt);
        (ModelParams::new(k, d, tau).unwrap(), if neg { -om } else { om })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn profile_solves_the_branch_equations((params, omega) in params_strategy(), center in 0.3f64..0.7) {
        let wave = build_wave(&params, omega, center).unwrap();
        for p in samples(&wave, 200) {
            prop_assert!(wave.ode_residual(p).abs() <= 1e-12 * (1.0 + wave.eval(p).abs() + p.abs()));
            prop_assert!(fd_residual(&wave, p).abs() <= 1e-6);
        }
        let k = params.kappa();
        prop_assert!((wave.eval(wave.xi_lo) + k).abs() <= 1e-10);
        prop_assert!((wave.eval(wave.xi_hi) - k).abs() <= 1e-10);
    }

    #[test]
    fn profile_is_strictly_increasing((params, omega) in params_strategy()) {
        let wave = build_wave(&params, omega, 0.5).unwrap();
        let n = 4000;
        let (a, b) = (wave.xi_lo - 0.3, wave.xi_hi + 0.3);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=n {
            let (x, dx) = wave.eval_with_derivative(a + (b - a) * i as f64 / n as f64);
            prop_assert!(x > prev && dx > 0.0);
            prev = x;
        }
    }

    #[test]
    fn translation_is_an_exact_shift((params, omega) in params_strategy(), c in -0.2f64..0.2) {
        let a = build_wave(&params, omega, 0.5).unwrap();
        let b = build_wave(&params, omega, 0.5 + c).unwrap();
        for i in 0..100 {
            let p = a.xi_lo - 0.2 + 0.4 * i as f64 / 100.0 + a.width() * 0.01 * i as f64;
            prop_assert!((a.eval(p) - b.eval(p + c)).abs() <= 1e-12 * (1.0 + a.eval(p).abs()));
        }
        prop_assert!((b.xi_hi - b.xi_lo - solve_width(&params, omega).unwrap()).abs() < 1e-15);
    }
}

#[test]
fn drive_rate_is_the_derivative_of_the_drive() {
    for omega in [-1.5, 0.8] {
        let params = ModelParams::new(0.4, 1.2, 0.02).unwrap();
        let wave = build_wave(&params, omega, 0.5).unwrap();
        for t in [0.0, 0.05, 0.1] {
            let h = 1e-5;
            let fd = (wave.drive_exact(t + h) - wave.drive_exact(t - h)) / (2.0 * h);
            assert!((fd - wave.drive_rate(t)).abs() < 1e-6, "{fd} vs {}", wave.drive_rate(t));
        }
    }
}

#[test]
fn leading_order_drive_is_accurate_for_small_tau() {
    let mut last = f64::INFINITY;
    for tau in [1e-2, 1e-3, 1e-4] {
        let params = ModelParams::new(0.5, 1.0, tau).unwrap();
        let wave = build_wave(&params, -1.0, 0.6).unwrap();
        let v = wave_drive(&wave, 0.1).unwrap();
        let gap = (v.exact - v.leading).abs();
        assert!(gap < last);
        last = gap;
    }
    assert!(last < 1e-3);
}

#[test]
fn drive_rejects_interfaces_leaving_the_domain() {
    let params = ModelParams::new(0.5, 1.0, 0.01).unwrap();
    let wave = build_wave(&params, 1.0, 0.5).unwrap();
    assert!(wave_drive(&wave, 0.3).is_ok());
    assert!(matches!(wave_drive(&wave, 0.6), Err(WaveError::InterfaceOutOfDomain { .. })));
}
