//! Cross-checks of the closed-form numerics against independent oracles:
//! fine-step Runge-Kutta integration, bisection root finding, quadrature of
//! the variance equation and an explicit design-matrix least squares solve.

use etpulse::pulse::{plan_pulse, ActuatorLimits};
use etpulse::sde::{discretize, propagate_noiseless, ContinuousModel, NoiseStream};
use etpulse::stopping::{estimate_expected_tau, sigma0, McConfig};
use etpulse::sysid::{least_squares_fit, Dataset, FitMode, Sample};

/// Classic fixed-step RK4 for dx/dt = a x + g over a horizon t.
fn rk4(a: f64, g: f64, x0: f64, t: f64, n_steps: usize) -> f64 {
    let h = t / n_steps as f64;
    let f = |x: f64| a * x + g;
    let mut x = x0;
    for _ in 0..n_steps {
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

/// RK4 for the variance equation dV/dt = 2 a V + q^2, V(0) = 0.
fn variance_quadrature(a: f64, q: f64, t: f64, n_steps: usize) -> f64 {
    let h = t / n_steps as f64;
    let f = |v: f64| 2.0 * a * v + q * q;
    let mut v = 0.0;
    for _ in 0..n_steps {
        let k1 = f(v);
        let k2 = f(v + 0.5 * h * k1);
        let k3 = f(v + 0.5 * h * k2);
        let k4 = f(v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    v
}

/// Time at which the RK4 trajectory from x0 under drift g first hits target,
/// assuming monotone approach inside [0, hi].
fn bisect_crossing(a: f64, g: f64, x0: f64, target: f64, hi: f64) -> f64 {
    let side = |t: f64| (rk4(a, g, x0, t, 400) - target).signum();
    let start = side(0.0);
    assert!(side(hi) != start, "bracket [0, {hi}] must straddle the crossing");
    let (mut lo, mut hi) = (0.0, hi);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            return mid;
        }
        if side(mid) == start {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

fn rel_close(got: f64, want: f64, rel: f64, abs_floor: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(abs_floor)
}

const REFERENCE_MODELS: [(f64, f64, f64); 6] = [
    (-0.01, -0.01, -0.05),
    (-5.0, 2.0, -1.0),
    (2.0, 1.5, 0.3),
    (0.0, 1.0, 0.7),
    (1e-9, 1.0, 0.2),
    (-0.5, 1.0, 0.3),
];

#[test]
fn discretization_matches_fine_ode_integration() {
    for (a, b, eps) in REFERENCE_MODELS {
        let m = ContinuousModel::new(a, b, eps, 0.0).unwrap();
        for dt in [1e-3, 0.05, 0.7] {
            let disc = discretize(&m, dt).unwrap();
            for (x0, u) in [(0.0, 0.0), (0.3, 0.0), (-1.2, 2.0), (0.7, -1.5)] {
                let want = rk4(a, b * u + eps, x0, dt, 512);
                let got = disc.step(x0, u, 0.0);
                assert!(
                    rel_close(got, want, 1e-11, 1e-12),
                    "a={a} b={b} eps={eps} dt={dt} x0={x0} u={u}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn noiseless_propagation_matches_fine_ode_integration() {
    for (a, b, eps) in REFERENCE_MODELS {
        let m = ContinuousModel::new(a, b, eps, 0.0).unwrap();
        for t in [0.0, 0.02, 0.37, 1.4] {
            let want = if t == 0.0 { 0.4 } else { rk4(a, b * 0.8 + eps, 0.4, t, 1024) };
            let got = propagate_noiseless(&m, 0.4, 0.8, t);
            assert!(
                rel_close(got, want, 1e-11, 1e-12),
                "a={a} b={b} eps={eps} t={t}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn pulse_duration_matches_bisection_on_rk4() {
    let cases = [
        // (a, b, eps_eff, x0, u_max)
        (-0.01, -0.01, -0.05, 0.02, 100.0),
        (-0.01, -0.01, -0.05, -0.013, 100.0),
        (-2.0, 1.5, 0.4, 0.8, 3.0),
        (1.2, 0.7, -0.1, -0.5, 5.0),
        (0.0, 1.0, 0.25, 0.6, 2.0),
    ];
    for (a, b, eps, x0, u_max) in cases {
        let m = ContinuousModel::new(a, b, eps, 0.0).unwrap();
        let limits = ActuatorLimits::new(u_max).unwrap();
        let cmd = plan_pulse(&m, x0, &limits).unwrap();
        assert!(!cmd.clipped, "oracle cases must stay under the duration cap");
        let g = b * cmd.amplitude + eps;
        let oracle = bisect_crossing(a, g, x0, 0.0, 2.0 * cmd.duration);
        assert!(
            (cmd.duration - oracle).abs() <= 1e-10 * cmd.duration.max(1e-6),
            "a={a} x0={x0}: planned {} vs bisection {oracle}",
            cmd.duration
        );
    }
}

#[test]
fn reference_pulse_duration_frozen() {
    // drift-dominated plant, reset from the trigger threshold
    let m = ContinuousModel::new(-0.01, -0.01, -0.05, 1e-4).unwrap();
    let limits = ActuatorLimits::new(100.0).unwrap();
    let cmd = plan_pulse(&m, 0.02, &limits).unwrap();
    let g = m.b * cmd.amplitude + m.eps_eff;
    let oracle = bisect_crossing(m.a, g, 0.02, 0.0, 0.1);
    assert!((cmd.duration - oracle).abs() < 1e-12);
    assert!((oracle - 0.0190458).abs() < 1e-6, "bisection gives {oracle}");
    assert!((cmd.duration - 0.01905).abs() < 1e-5);
}

#[test]
fn step_noise_variance_matches_quadrature() {
    for (a, q) in [(-0.01, 1e-4), (-0.5, 0.05), (2.0, 0.01), (0.0, 0.3)] {
        let m = ContinuousModel::new(a, 1.0, 0.0, q).unwrap();
        for dt in [1e-3, 0.2] {
            let disc = discretize(&m, dt).unwrap();
            let want = variance_quadrature(a, q, dt, 2048);
            assert!(
                rel_close(disc.noise_var, want, 1e-10, 1e-30),
                "a={a} q={q} dt={dt}: {} vs {want}",
                disc.noise_var
            );
        }
    }
}

#[test]
fn restart_variance_matches_quadrature_over_pulse() {
    let cases = [
        (-0.01, -0.01, -0.05, 1e-4, 100.0),
        (-0.5, 1.0, 0.3, 0.05, 2.0),
        (1.5, 0.8, -0.2, 0.01, 4.0),
    ];
    for (a, b, eps, q, u_max) in cases {
        let m = ContinuousModel::new(a, b, eps, q).unwrap();
        let limits = ActuatorLimits::new(u_max).unwrap();
        let cmd = plan_pulse(&m, 0.02, &limits).unwrap();
        let got = sigma0(&m, 0.02, &limits).unwrap();
        let want = variance_quadrature(a, q, cmd.duration, 2048);
        assert!(
            rel_close(got, want, 1e-10, 1e-30),
            "a={a} q={q}: sigma0 {got} vs quadrature {want}"
        );
    }
}

#[test]
fn stopping_time_against_grid_and_continuous_oracles() {
    // zero input, pure drift: the state ramps from 0 to -delta
    let drift = ContinuousModel::new(-0.01, -0.01, -0.05, 0.0).unwrap();
    let dt = 1e-3;
    let disc = discretize(&drift, dt).unwrap();
    let mut x = 0.0f64;
    let mut k = 0usize;
    while x.abs() < 0.02 {
        x = disc.step(x, 0.0, 0.0);
        k += 1;
        assert!(k < 10000);
    }
    assert_eq!(k, 401, "grid crossing index");

    let continuous = bisect_crossing(-0.01, -0.05, 0.0, -0.02, 1.0);
    assert!((continuous - 0.400802136).abs() < 1e-6, "continuous crossing {continuous}");

    // the Monte Carlo mean under weak noise stays at the drift crossing
    let noisy = ContinuousModel::new(-0.01, -0.01, -0.05, 1e-4).unwrap();
    let limits = ActuatorLimits::new(100.0).unwrap();
    let sig0 = sigma0(&noisy, 0.02, &limits).unwrap();
    let cfg = McConfig::new(10000, dt, 1.0, sig0, 42).unwrap();
    let est = estimate_expected_tau(&noisy, 0.02, &cfg).unwrap();
    assert!((est.mean - k as f64 * dt).abs() < 2e-3, "mc mean {} vs grid {}", est.mean, k as f64 * dt);
}

#[test]
fn least_squares_matches_explicit_matrix_solve() {
    let m = ContinuousModel::new(-0.8, 1.3, -0.2, 0.02).unwrap();
    let dt = 1e-3;
    let disc = discretize(&m, dt).unwrap();
    let mut noise = NoiseStream::new(99, 0);
    let mut samples = Vec::with_capacity(2000);
    let mut x = 0.1;
    for k in 0..2000 {
        let u = ((k as f64) * 0.61).sin() * 1.7 + if k % 11 < 5 { 0.9 } else { -0.9 };
        let x_next = disc.step(x, u, noise.next_normal());
        samples.push(Sample { x, u, x_next });
        x = x_next;
    }
    let data = Dataset::new(samples, dt).unwrap();
    let est = least_squares_fit(&data, FitMode::LoadDisturbance).unwrap();

    let n = data.samples.len();
    let mut xmat = nalgebra::DMatrix::zeros(n, 3);
    let mut y = nalgebra::DVector::zeros(n);
    for (i, s) in data.samples.iter().enumerate() {
        xmat[(i, 0)] = s.x;
        xmat[(i, 1)] = s.u;
        xmat[(i, 2)] = 1.0;
        y[i] = s.x_next;
    }
    let theta = xmat.clone().svd(true, true).solve(&y, 1e-14).unwrap();
    let resid = &y - &xmat * &theta;
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let var = rss / (n - 3) as f64;
    let inv = (xmat.transpose() * &xmat).try_inverse().unwrap();

    assert!(rel_close(est.a_d, theta[0], 1e-9, 1e-12));
    assert!(rel_close(est.b_d, theta[1], 1e-9, 1e-12));
    assert!(rel_close(est.dist_term, theta[2], 1e-9, 1e-12));
    assert!(rel_close(est.resid_var, var, 1e-9, 1e-30));
    for j in 0..3 {
        let want = (var * inv[(j, j)]).sqrt();
        assert!(
            rel_close(est.std_err[j], want, 1e-6, 1e-30),
            "coefficient {j}: {} vs {want}",
            est.std_err[j]
        );
    }
}
