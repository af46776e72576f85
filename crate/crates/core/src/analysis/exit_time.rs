use super::quad::{self, Tolerance};
use crate::error::{Error, Result};

/// Beyond this many decay lengths the kernel `exp(-alpha (t - s))` is dropped.
const KERNEL_CUTOFF: f64 = 60.0;

/// Expected-exit-time functional for `dy = A sgnpow(y, gamma) dt + eps dW`:
///
/// ```text
/// v(x) = int_0^|x| exp{-2A y^(g+1) / ((g+1) eps^2)} int_0^y (2/eps^2) exp{2A z^(g+1) / ((g+1) eps^2)} dz dy
/// ```
///
/// It solves `L v = 1` with `v(0) = v'(0) = 0`, so `v(delta)` bounds the mean
/// exit time from `(-delta, delta)`. Evaluated after the substitution
/// `t = y^(g+1) / eps^2`, which turns the nested integral into
///
/// ```text
/// v = 2/(g+1)^2 eps^(2(1-g)/(g+1)) int_0^U t^b int_0^t exp(-alpha (t - s)) s^b ds dt
/// ```
///
/// with `alpha = 2A/(g+1)`, `b = -g/(g+1)`, `U = |x|^(g+1)/eps^2`; the inner
/// kernel never overflows.
pub fn exit_time_functional(x: f64, a: f64, eps: f64, gamma: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) || !(eps > 0.0 && eps.is_finite()) || !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need A > 0, eps > 0 and gamma in (0, 1); got A = {a}, eps = {eps}, gamma = {gamma}"
        )));
    }
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("x = {x} must be finite")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let g1 = gamma + 1.0;
    let alpha = 2.0 * a / g1;
    let b = -gamma / g1;
    let upper = x.abs().powf(g1) / (eps * eps);
    let tol = Tolerance {
        abs: 1e-14,
        rel: 1e-10,
        ..Tolerance::default()
    };
    let decay = 1.0 / alpha;
    let inner = |t: f64| -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let lo = (t - KERNEL_CUTOFF * decay).max(0.0);
        let f = |s: f64| (-alpha * (t - s)).exp() * s.powf(b);
        let breaks = quad::geometric_breaks(0.0, t - lo, decay)
            .into_iter()
            .map(|d| t - d)
            .collect::<Vec<_>>();
        quad::integrate_with_breaks(f, lo, t, &breaks, &tol)
            .map(|e| e.value)
            .unwrap_or(f64::NAN)
    };
    let breaks = quad::geometric_breaks(0.0, upper, decay);
    let outer = quad::integrate_with_breaks(|t: f64| t.powf(b) * inner(t), 0.0, upper, &breaks, &tol)?;
    Ok(2.0 / (g1 * g1) * eps.powf(2.0 * (1.0 - gamma) / g1) * outer.value)
}

/// Small-noise limit `v(x) -> K2 |x|^(1-gamma)`, `K2 = 1 / (A (1 - gamma))`:
/// the travel time of `y' = A y^gamma` from 0 to `|x|`.
pub fn exit_time_limit_constant(a: f64, gamma: f64) -> f64 {
    1.0 / (a * (1.0 - gamma))
}

/// Upper bound for the mean exit time from `(-delta, delta)` of
/// `dy = phi sgnpow(y, gamma) dt + eps beta dW` with `phi >= phi_min > 0` and
/// `beta_min <= beta <= beta_max`: the functional at the weakest drift
/// relative to the diffusion, slowed by the smallest diffusion.
pub fn exit_time_bound(delta: f64, phi_min: f64, beta_min: f64, beta_max: f64, eps: f64, gamma: f64) -> Result<f64> {
    if !(beta_min > 0.0 && beta_max >= beta_min) {
        return Err(Error::InvalidParameter(format!(
            "diffusion range [{beta_min}, {beta_max}] must be positive and ordered"
        )));
    }
    // Time change by beta^2 maps the diffusion to unit size; the drift
    // becomes phi / beta^2 >= phi_min / beta_max^2.
    let a = phi_min / (beta_max * beta_max);
    Ok(exit_time_functional(delta, a, eps, gamma)? / (beta_min * beta_min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_origin() {
        assert_eq!(exit_time_functional(0.0, 1.0, 1e-2, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn even_in_x() {
        let a = exit_time_functional(0.1, 2.0, 1e-2, 0.5).unwrap();
        let b = exit_time_functional(-0.1, 2.0, 1e-2, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn increases_with_x() {
        let v: Vec<f64> = [0.05, 0.1, 0.2]
            .iter()
            .map(|x| exit_time_functional(*x, 1.0, 1e-3, 0.5).unwrap())
            .collect();
        assert!(v[0] < v[1] && v[1] < v[2]);
    }

    #[test]
    fn bound_reduces_to_functional_for_unit_diffusion() {
        let v = exit_time_functional(0.1, 3.0, 1e-3, 0.5).unwrap();
        assert_eq!(exit_time_bound(0.1, 3.0, 1.0, 1.0, 1e-3, 0.5).unwrap(), v);
    }
}
