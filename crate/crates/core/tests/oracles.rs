//! Closed forms and quadratures checked against independent evaluations.

use approx::assert_relative_eq;
use statrs::function::gamma::{gamma, gamma_lr};

use peano_core::analysis::{
    averaged_drift, exit_probability_quadrature, exit_time_functional, exit_time_limit_constant, gamma_asymptotic,
    invariant_density, scale_function, selection_probabilities, FrozenParams,
};
use peano_core::coeffs::{Regime, Side, SmallNoiseModel};
use peano_core::extremal::{extremal_solution, forced_solution};
use peano_core::sim::{simulate_small_noise_from, StepPolicy};

/// Composite trapezoid rule on `n` equal panels.
fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + h * i as f64)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// `int_0^delta exp(-k z^p) dz` through the lower incomplete gamma function.
fn stretched_exp_exact(k: f64, p: f64, delta: f64) -> f64 {
    let a = 1.0 / p;
    a * k.powf(-a) * gamma(a) * gamma_lr(a, k * delta.powf(p))
}

fn exit_probability_oracle(phi_plus: f64, phi_minus: f64, beta: f64, gamma_: f64, eps: f64, delta: f64) -> f64 {
    let p = gamma_ + 1.0;
    let k = |phi: f64| 2.0 * phi / (eps * eps * p * beta * beta);
    let up = stretched_exp_exact(k(phi_plus), p, delta);
    let down = stretched_exp_exact(k(phi_minus), p, delta);
    down / (up + down)
}

#[test]
fn selection_probability_reference_value() {
    let p = FrozenParams::new(0.5, 4.0, 1.0, 1.0, 1.0).unwrap();
    let s = selection_probabilities(&p).unwrap();
    // w = (phi / beta^2)^(1/(gamma+1)): 4^(2/3) against 1.
    let w = 4f64.powf(2.0 / 3.0);
    assert_relative_eq!(s.plus, w / (1.0 + w), max_relative = 1e-14);
    assert!((s.plus - 0.7159).abs() < 5e-5);
}

#[test]
fn exit_probability_matches_incomplete_gamma() {
    for (pp, pm, eps, delta) in [(4.0, 1.0, 1e-3, 0.1), (4.0, 1.0, 0.1, 0.1), (0.5, 3.0, 0.05, 0.2), (2.0, 2.0, 0.3, 1.0)] {
        let q = exit_probability_quadrature(delta, &FrozenParams::new(0.5, pp, pm, 1.0, 1.0).unwrap(), eps).unwrap();
        let o = exit_probability_oracle(pp, pm, 1.0, 0.5, eps, delta);
        assert!((q - o).abs() < 1e-8, "phi = ({pp}, {pm}), eps = {eps}: {q} vs {o}");
    }
}

#[test]
fn exit_probability_tends_to_selection() {
    let p = FrozenParams::new(0.5, 4.0, 1.0, 1.0, 1.0).unwrap();
    let q = exit_probability_quadrature(0.1, &p, 1e-3).unwrap();
    assert!((q - selection_probabilities(&p).unwrap().plus).abs() < 0.01);
}

#[test]
fn scale_function_matches_trapezoid() {
    let p = FrozenParams::new(0.5, 4.0, 1.0, 1.0, 1.0).unwrap();
    let eps = 0.2;
    for y in [0.05f64, 0.3, -0.3] {
        let phi = if y >= 0.0 { 4.0 } else { 1.0 };
        let k = 2.0 * phi / (eps * eps * 1.5);
        let oracle = y.signum() * trapezoid(|z: f64| (-k * z.powf(1.5)).exp(), 0.0, y.abs(), 200_000);
        assert_relative_eq!(scale_function(y, &p, eps, 0.0).unwrap(), oracle, max_relative = 1e-8);
    }
    assert_eq!(scale_function(0.0, &p, eps, 0.0).unwrap(), 0.0);
}

#[test]
fn scale_function_slack_matches_trapezoid() {
    let p = FrozenParams::new(0.5, 4.0, 1.0, 1.0, 1.0).unwrap();
    let (eps, nu) = (0.2, 0.25);
    let k = 2.0 * (4.0 + nu) / (eps * eps * 1.5 * (1.0 - nu));
    let oracle = trapezoid(|z: f64| (-k * z.powf(1.5)).exp(), 0.0, 0.3, 200_000);
    assert_relative_eq!(scale_function(0.3, &p, eps, nu).unwrap(), oracle, max_relative = 1e-8);
}

#[test]
fn invariant_masses_match_numerical_integration() {
    for (pp, pm, bp, bm) in [(-8.0, -1.0, 1.0, 1.0), (-2.0, -2.0, 1.0, 1.0), (-1.0, -3.0, 0.7, 1.4)] {
        let p = FrozenParams::new(0.5, pp, pm, bp, bm).unwrap();
        let d = invariant_density(&p).unwrap();
        let side = |phi: f64, beta: f64| {
            let k = 2.0 * f64::abs(phi) / (beta * beta * 1.5);
            let width = k.powf(-1.0 / 1.5);
            trapezoid(|y: f64| (-k * y.powf(1.5)).exp(), 0.0, 60.0 * width, 400_000) / (beta * beta)
        };
        let (a, b) = (side(pp, bp), side(pm, bm));
        assert_relative_eq!(d.mass(Side::Plus), a / (a + b), max_relative = 1e-9);
        assert_relative_eq!(d.mass(Side::Plus) + d.mass(Side::Minus), 1.0, max_relative = 1e-15);
        // The density integrates to one. It jumps at zero when the betas differ.
        let total = trapezoid(|y| d.pdf(y), -80.0 * d.width(Side::Minus), -f64::MIN_POSITIVE, 400_000)
            + trapezoid(|y| d.pdf(y), 0.0, 80.0 * d.width(Side::Plus), 400_000);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }
}

#[test]
fn averaged_drift_reference_value() {
    let model = SmallNoiseModel::constant_1d(0.5, (1.0, 0.0), (-8.0, -1.0), (1.0, 1.0), Regime::Attractive).unwrap();
    let psibar = averaged_drift(&[0.0], &model).unwrap();
    // (1/8)^(2/3) = 1/4 on the plus side against 1: mass 0.2.
    assert_relative_eq!(psibar[0], 0.2, max_relative = 1e-12);
}

#[test]
fn gamma_asymptotic_against_tabulated_gamma() {
    // Gamma(2/3) = 1.3541179394264004169...
    let gamma_two_thirds = 1.354_117_939_426_400_4;
    let (a, eps) = (4.0f64, 1e-3f64);
    let expected = (eps * eps / a).powf(2.0 / 3.0) * gamma_two_thirds / 1.5;
    let g = gamma_asymptotic(a, eps, 0.5, 0.1).unwrap();
    assert_relative_eq!(g.asymptotic, expected, max_relative = 1e-12);
    assert!(g.relative_gap < 0.01);
    // Far from the small-eps regime the two disagree.
    assert!(gamma_asymptotic(a, 1.0, 0.5, 0.1).unwrap().relative_gap > 0.5);
}

#[test]
fn exit_time_functional_matches_nested_quadrature() {
    let (a, eps, g) = (1.0f64, 0.5f64, 0.5f64);
    let p = g + 1.0;
    let c = 2.0 * a / (p * eps * eps);
    let n = 20_000;
    for x in [0.3, 0.8] {
        let h = x / n as f64;
        let mut inner = 0.0;
        let mut prev_inner_integrand = 2.0 / (eps * eps);
        let mut prev_outer = 0.0;
        let mut outer = 0.0;
        for i in 1..=n {
            let y = h * i as f64;
            let f = 2.0 / (eps * eps) * (c * y.powf(p)).exp();
            inner += 0.5 * h * (prev_inner_integrand + f);
            prev_inner_integrand = f;
            let o = (-c * y.powf(p)).exp() * inner;
            outer += 0.5 * h * (prev_outer + o);
            prev_outer = o;
        }
        let v = exit_time_functional(x, a, eps, g).unwrap();
        assert_relative_eq!(v, outer, max_relative = 1e-6);
    }
}

#[test]
fn exit_time_functional_solves_its_equation() {
    // (eps^2/2) v'' + A y^gamma v' = 1 on y > 0.
    let (a, eps, g) = (2.0, 0.3, 0.5);
    let v = |y: f64| exit_time_functional(y, a, eps, g).unwrap();
    for y in [0.1, 0.4, 0.9] {
        let h = 1e-3;
        let d1 = (v(y + h) - v(y - h)) / (2.0 * h);
        let d2 = (v(y + h) - 2.0 * v(y) + v(y - h)) / (h * h);
        let lv = 0.5 * eps * eps * d2 + a * y.powf(g) * d1;
        assert!((lv - 1.0).abs() < 1e-3, "y = {y}: L v = {lv}");
    }
}

#[test]
fn exit_time_functional_approaches_travel_time() {
    let (a, g, x) = (4.0f64, 0.5f64, 0.1f64);
    let limit = exit_time_limit_constant(a, g) * x.powf(1.0 - g);
    let gaps: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|e| (exit_time_functional(x, a, *e, g).unwrap() - limit).abs() / limit)
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 0.05, "{gaps:?}");
}

#[test]
fn extremal_solutions_of_the_square_root_example() {
    let model = SmallNoiseModel::constant_1d(0.5, (0.0, 0.0), (1.0, 1.0), (1.0, 1.0), Regime::Repulsive).unwrap();
    let plus = extremal_solution(&model, Side::Plus, 2.0, 1e-3).unwrap();
    let minus = extremal_solution(&model, Side::Minus, 2.0, 1e-3).unwrap();
    assert_relative_eq!(plus.eval(1.0).1, 0.25, max_relative = 1e-12);
    assert_relative_eq!(minus.eval(2.0).1, -1.0, max_relative = 1e-12);
    for t in [0.0, 0.37, 1.5] {
        assert_relative_eq!(plus.eval(t).1, t * t / 4.0, epsilon = 1e-13);
        assert_relative_eq!(minus.eval(t).1, -t * t / 4.0, epsilon = 1e-13);
    }
}

#[test]
fn extremal_solutions_with_slow_drift() {
    // Y = sgn ((1-gamma) phi t)^(1/(1-gamma)), X = x0 + psi t on each side.
    let g = 0.3;
    let mut model = SmallNoiseModel::constant_1d(g, (1.5, -0.5), (4.0, 2.0), (1.0, 1.0), Regime::Repulsive).unwrap();
    model.x0 = vec![0.2];
    let plus = extremal_solution(&model, Side::Plus, 1.0, 1e-3).unwrap();
    let minus = extremal_solution(&model, Side::Minus, 1.0, 1e-3).unwrap();
    for t in [0.25, 1.0] {
        let (x, y) = plus.eval(t);
        assert_relative_eq!(x[0], 0.2 + 1.5 * t, max_relative = 1e-12);
        assert_relative_eq!(y, ((1.0 - g) * 4.0 * t).powf(1.0 / (1.0 - g)), max_relative = 1e-10);
        let (x, y) = minus.eval(t);
        assert_relative_eq!(x[0], 0.2 - 0.5 * t, max_relative = 1e-12);
        assert_relative_eq!(y, -((1.0 - g) * 2.0 * t).powf(1.0 / (1.0 - g)), max_relative = 1e-10);
    }
}

#[test]
fn noiseless_simulation_follows_the_ode() {
    // y' = sqrt(y), y(0) = y0 > 0: y = (sqrt(y0) + t/2)^2.
    let model = SmallNoiseModel::constant_1d(0.5, (0.0, 0.0), (1.0, 1.0), (1.0, 1.0), Regime::Repulsive).unwrap();
    let y0 = 0.01;
    for dt in [1e-2, 1e-3] {
        let path = simulate_small_noise_from(&model, y0, 0.0, 1.0, &StepPolicy::uniform(dt).unwrap(), 0, 0.0).unwrap();
        let exact = (y0.sqrt() + 0.5).powi(2);
        let err = (path.last_y()[0] - exact).abs();
        // First-order Euler error.
        assert!(err < 2.0 * dt, "dt = {dt}: error {err}");
    }
}

#[test]
fn forced_solution_shrinks_with_the_forcing() {
    let model = SmallNoiseModel::constant_1d(0.5, (1.0, 0.0), (1.0, 1.0), (1.0, 1.0), Regime::Repulsive).unwrap();
    let zero = forced_solution(&model, Side::Plus, &[0.0], 0.2, |_| (vec![0.0], 0.0), 1.0, 1e-3).unwrap();
    assert_eq!(zero.distance, 0.0);
    let mut last = f64::INFINITY;
    for amp in [0.05, 0.01, 0.002] {
        let f = forced_solution(&model, Side::Plus, &[0.0], 0.2, |t| (vec![amp * t], amp * t.sin()), 1.0, 1e-3).unwrap();
        assert!(f.converged);
        assert!(f.distance <= last && f.distance > 0.0);
        last = f.distance;
    }
    assert!(last < 0.01);
}
