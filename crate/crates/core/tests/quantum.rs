use std::f64::consts::PI;

use proptest::prelude::*;
use quadfluid::coherent::{coherent_wavefunction, PhaseConvention};
use quadfluid::diagnostics::{excess_kurtosis, moments_from_wave};
use quadfluid::envelope::{integrate, GaussianBeamState, OdeSettings};
use quadfluid::profiles::Table;
use quadfluid::qsolver::{
    classicality_residual, enforce_alpha_sigma_lock, madelung_decompose, QuantumPropagator,
    WaveField,
};
use quadfluid::{CoherentSpec, EmittanceProfile, GridSpec, StrengthProfile};

fn state(x0: f64, p0: f64, sigma: f64, dsigma: f64) -> GaussianBeamState {
    GaussianBeamState::new(0.0, x0, p0, sigma, dsigma).unwrap()
}

fn tight(cadence: f64) -> OdeSettings {
    OdeSettings {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        ..OdeSettings::default().with_cadence(cadence)
    }
}

/// RK4 for `x'' = d x' - k(s) x`, sampled every `every` steps.
fn damped_oscillator(
    x0: f64,
    k: impl Fn(f64) -> f64,
    d: f64,
    s_end: f64,
    steps: usize,
    every: usize,
) -> Vec<f64> {
    let f = |s: f64, y: [f64; 2]| [y[1], d * y[1] - k(s) * y[0]];
    let h = s_end / steps as f64;
    let mut y = [x0, 0.0];
    let mut out = vec![x0];
    for i in 0..steps {
        let s = i as f64 * h;
        let a = f(s, y);
        let b = f(s + h / 2.0, [y[0] + h / 2.0 * a[0], y[1] + h / 2.0 * a[1]]);
        let c = f(s + h / 2.0, [y[0] + h / 2.0 * b[0], y[1] + h / 2.0 * b[1]]);
        let e = f(s + h, [y[0] + h * c[0], y[1] + h * c[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (a[j] + 2.0 * b[j] + 2.0 * c[j] + e[j]);
        }
        if (i + 1) % every == 0 {
            out.push(y[0]);
        }
    }
    out
}

#[test]
fn coherent_state_returns_after_one_period() {
    let grid = GridSpec::symmetric(1.0, 1024).unwrap();
    let st = state(0.05, 0.0, 0.1, 0.0);
    let field = WaveField::from_fn(grid, 0.0, |x| {
        coherent_wavefunction(x, &st, 0.02, PhaseConvention::Full)
    });
    let k = StrengthProfile::constant(1.0).unwrap();
    let e = EmittanceProfile::constant(0.02).unwrap();
    let prop = QuantumPropagator::new(grid);
    let last = prop
        .evolve(&field, &k, &e, 2.0 * PI, 1e-3, 2.0 * PI, |_| Ok(()))
        .unwrap();
    assert!((last.overlap(&field).unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn free_dispersion_width() {
    let grid = GridSpec::symmetric(12.0, 4096).unwrap();
    let field = WaveField::gaussian(grid, &state(0.0, 0.0, 0.1, 0.0), 0.02, PhaseConvention::Full)
        .unwrap();
    let k = StrengthProfile::constant(0.0).unwrap();
    let e = EmittanceProfile::constant(0.02).unwrap();
    let last = QuantumPropagator::new(grid)
        .evolve(&field, &k, &e, 10.0, 0.05, 10.0, |_| Ok(()))
        .unwrap();
    let sigma = moments_from_wave(&last, 0.02).unwrap().record.sigma;
    let closed = 0.1 * (1.0f64 + 0.0004 * 100.0 / (4.0 * 1e-4)).sqrt();
    assert!((sigma - closed).abs() < 1e-4, "{sigma} vs {closed}");
}

/// Under a decaying emittance the wave width follows the envelope equation,
/// while the wave centroid picks up the damping `(alpha'/alpha) x'` that the
/// undamped centroid equation leaves out.
#[test]
fn varying_emittance_width_and_centroid() {
    let gamma = 0.01;
    let k = StrengthProfile::modulated(1.0, 0.1, 1.0, 0.0).unwrap();
    let e = EmittanceProfile::exponential(0.02, gamma).unwrap();
    let init = state(0.05, 0.0, 0.12, 0.0);
    let s_end = 2.0 * PI;
    let cadence = s_end / 32.0;
    let grid = GridSpec::symmetric(1.0, 2048).unwrap();
    let field = WaveField::gaussian(grid, &init, 0.02, PhaseConvention::Full).unwrap();
    let mut rows = Vec::new();
    QuantumPropagator::new(grid)
        .evolve(&field, &k, &e, s_end, 1e-3, cadence, |f| {
            let m = moments_from_wave(f, e.eval(f.s)?)?.record;
            rows.push((m.mean_x, m.sigma));
            Ok(())
        })
        .unwrap();
    let traj = integrate(&init, &k, &e, s_end, &tight(cadence)).unwrap();
    let damped = damped_oscillator(0.05, |s| 1.0 + 0.1 * s.sin(), -gamma, s_end, 32 * 100, 100);

    let mut width = 0.0f64;
    let mut centroid = 0.0f64;
    let mut undamped_gap = 0.0f64;
    for ((row, t), xd) in rows.iter().zip(&traj).zip(&damped) {
        width = width.max((row.1 - t.sigma).abs() / t.sigma);
        centroid = centroid.max((row.0 - xd).abs() / 0.05);
        undamped_gap = undamped_gap.max((row.0 - t.x0).abs() / 0.05);
    }
    assert!(width < 1e-4, "width {width:e}");
    assert!(centroid < 1e-4, "centroid {centroid:e}");
    assert!(undamped_gap > 1e-3, "{undamped_gap:e}");
}

#[test]
fn madelung_round_trip() {
    let grid = GridSpec::symmetric(1.0, 2048).unwrap();
    let field = WaveField::gaussian(grid, &state(0.1, 0.04, 0.1, 0.05), 0.02, PhaseConvention::Full)
        .unwrap();
    let m = madelung_decompose(&field, 0.02).unwrap();
    let back = m.recompose();
    for j in (0..back.len()).filter(|&j| m.valid[j]) {
        assert!((back[j] - field.psi[j]).norm() < 1e-10);
    }
}

#[test]
fn breathing_gaussian_stays_gaussian() {
    let grid = GridSpec::symmetric(1.0, 2048).unwrap();
    let field = WaveField::gaussian(grid, &state(0.05, 0.0, 0.15, 0.0), 0.02, PhaseConvention::Full)
        .unwrap();
    let k = StrengthProfile::constant(1.0).unwrap();
    let e = EmittanceProfile::constant(0.02).unwrap();
    let mut worst = 0.0f64;
    QuantumPropagator::new(grid)
        .evolve(&field, &k, &e, 2.0 * PI, 2e-3, PI / 8.0, |f| {
            worst = worst.max(excess_kurtosis(&f.density(), &f.grid).abs());
            Ok(())
        })
        .unwrap();
    assert!(worst < 1e-3, "{worst:e}");
}

#[test]
fn matched_state_is_classical() {
    let grid = GridSpec::symmetric(1.0, 2048).unwrap();
    let st = state(0.0, 0.0, 0.1, 0.0);
    let field = WaveField::from_fn(grid, 0.0, |x| {
        coherent_wavefunction(x, &st, 0.02, PhaseConvention::Full)
    });
    // eta0 = sigma0^2 K with K = 1
    let r = classicality_residual(&field, 0.02, 0.0, 0.01).unwrap();
    assert!(r < 1e-6, "{r:e}");
}

#[test]
fn dissipative_coherent_state_breaks_the_lock() {
    let gamma = 0.01;
    let spec = CoherentSpec::dissipative(1.0, gamma, 0.1, 0.05, 0.0).unwrap();
    let (k, e, _) = spec.profiles().unwrap();
    let traj = integrate(&spec.initial_state(), &k, &e, 10.0, &tight(0.1)).unwrap();
    let s: Vec<f64> = traj.iter().map(|t| t.s).collect();
    let sigma: Vec<f64> = traj.iter().map(|t| t.sigma).collect();
    let alpha: Vec<f64> = s.iter().map(|&s| e.eval(s).unwrap()).collect();
    let r = enforce_alpha_sigma_lock(&s, &sigma, &alpha).unwrap();
    assert!((r - gamma).abs() < 1e-6, "{r}");
}

/// Self-similar free expansion with the emittance slaved to the size,
/// `alpha = c sigma`: the envelope equation becomes
/// `sigma'' = sigma'^2 / sigma + c^2 / (4 sigma)`.
#[test]
fn slaved_emittance_satisfies_the_lock() {
    let c = 0.2;
    let h = 1e-3;
    let n = 5000;
    let f = |y: [f64; 2]| [y[1], y[1] * y[1] / y[0] + c * c / (4.0 * y[0])];
    let mut y = [0.1, 0.0];
    let mut knots = vec![(0.0, c * y[0])];
    for i in 0..n {
        let a = f(y);
        let b = f([y[0] + h / 2.0 * a[0], y[1] + h / 2.0 * a[1]]);
        let cc = f([y[0] + h / 2.0 * b[0], y[1] + h / 2.0 * b[1]]);
        let d = f([y[0] + h * cc[0], y[1] + h * cc[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (a[j] + 2.0 * b[j] + 2.0 * cc[j] + d[j]);
        }
        knots.push(((i + 1) as f64 * h, c * y[0]));
    }
    let e = EmittanceProfile::Tabulated(Table::new(&knots).unwrap());
    let k = StrengthProfile::constant(0.0).unwrap();
    let traj = integrate(&state(0.0, 0.0, 0.1, 0.0), &k, &e, 4.9, &tight(0.05)).unwrap();
    let s: Vec<f64> = traj.iter().map(|t| t.s).collect();
    let sigma: Vec<f64> = traj.iter().map(|t| t.sigma).collect();
    let alpha: Vec<f64> = s.iter().map(|&s| e.eval(s).unwrap()).collect();
    let r = enforce_alpha_sigma_lock(&s, &sigma, &alpha).unwrap();
    assert!(r < 1e-4, "{r:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn steps_preserve_the_norm(
        k0 in 0.0f64..2.0,
        alpha in 0.01f64..0.04,
        gamma in 0.0f64..0.05,
        ds in 1e-4f64..5e-3,
    ) {
        // wide enough for the freely spreading case k0 -> 0 over s = 1
        let grid = GridSpec::symmetric(3.0, 1024).unwrap();
        let mut field = WaveField::gaussian(grid, &state(0.02, 0.0, 0.1, 0.0), alpha, PhaseConvention::Full)
            .unwrap();
        let k = StrengthProfile::constant(k0).unwrap();
        let e = EmittanceProfile::exponential(alpha, gamma).unwrap();
        let prop = QuantumPropagator::new(grid);
        let n0 = field.norm();
        for _ in 0..200 {
            field = prop.qstep(&field, &k, &e, ds).unwrap();
        }
        prop_assert!((field.norm() - n0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_emittance_equals_alpha(
        sigma in 0.06f64..0.12,
        dsigma in -0.1f64..0.1,
        p0 in -0.1f64..0.1,
        alpha in 0.01f64..0.04,
    ) {
        let grid = GridSpec::symmetric(1.0, 2048).unwrap();
        let field = WaveField::gaussian(grid, &state(0.0, p0, sigma, dsigma), alpha, PhaseConvention::Full)
            .unwrap();
        let m = moments_from_wave(&field, alpha).unwrap().record;
        prop_assert!((m.emit_rms - alpha).abs() / alpha < 1e-4);
    }
}
