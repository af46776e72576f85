use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use super::frozen::FrozenParams;
use super::quad::{self, Tolerance};
use crate::error::{Error, Result};

/// `int_0^y exp(-k |z|^p) dz` for `y >= 0`.
fn stretched_exp_integral(k: f64, p: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(0.0);
    }
    if k == 0.0 {
        return Ok(y);
    }
    // Length over which the integrand changes; breakpoints keep the
    // Kronrod nodes from straddling it.
    let width = k.abs().powf(-1.0 / p);
    let tol = Tolerance {
        abs: 1e-10 * width.min(y),
        rel: 1e-10,
        ..Tolerance::default()
    };
    let breaks = quad::geometric_breaks(0.0, y, width);
    Ok(quad::integrate_with_breaks(|z: f64| (-k * z.powf(p)).exp(), 0.0, y, &breaks, &tol)?.value)
}

/// Scale function of the fast component near the hyperplane with slack `nu`:
///
/// ```text
/// s(y) = int_0^y exp{-2 (phi+ + nu) z^(gamma+1) / (eps^2 (gamma+1) (beta+^2 - nu))} dz,   y >= 0
/// s(y) = int_0^y exp{-2 (phi- - nu) |z|^(gamma+1) / (eps^2 (gamma+1) (beta-^2 + nu))} dz, y < 0
/// ```
pub fn scale_function(y: f64, p: &FrozenParams, eps: f64, nu: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    if !(nu >= 0.0 && nu < p.beta_plus * p.beta_plus) {
        return Err(Error::InvalidParameter(format!(
            "slack nu = {nu} must lie in [0, beta+^2 = {})",
            p.beta_plus * p.beta_plus
        )));
    }
    if !y.is_finite() {
        return Err(Error::InvalidParameter(format!("y = {y} must be finite")));
    }
    let power = p.gamma.value() + 1.0;
    let scale = eps * eps * power;
    if y >= 0.0 {
        let k = 2.0 * (p.phi_plus + nu) / (scale * (p.beta_plus * p.beta_plus - nu));
        stretched_exp_integral(k, power, y)
    } else {
        let k = 2.0 * (p.phi_minus - nu) / (scale * (p.beta_minus * p.beta_minus + nu));
        Ok(-stretched_exp_integral(k, power, -y)?)
    }
}

/// Probability that the fast component started at zero reaches `+delta`
/// before `-delta`: `-s(-delta) / (s(delta) - s(-delta))`.
pub fn exit_probability_quadrature(delta: f64, p: &FrozenParams, eps: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    let up = scale_function(delta, p, eps, 0.0)?;
    let down = scale_function(-delta, p, eps, 0.0)?;
    Ok(-down / (up - down))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaAsymptotic {
    pub quadrature: f64,
    pub asymptotic: f64,
    /// `|quadrature / asymptotic - 1|`.
    pub relative_gap: f64,
}

/// Compares `int_0^delta exp(-A z^(gamma+1) / eps^2) dz` with its small-eps
/// form `(1/(1+gamma)) (eps^2/A)^(1/(1+gamma)) Gamma(1/(1+gamma))`.
pub fn gamma_asymptotic(a: f64, eps: f64, gamma: f64, delta: f64) -> Result<GammaAsymptotic> {
    if !(a > 0.0 && eps > 0.0 && delta > 0.0) || !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need A > 0, eps > 0, delta > 0 and gamma in (0, 1); got A = {a}, eps = {eps}, delta = {delta}, gamma = {gamma}"
        )));
    }
    let power = 1.0 + gamma;
    let quadrature = stretched_exp_integral(a / (eps * eps), power, delta)?;
    let asymptotic = (eps * eps / a).powf(1.0 / power) * gamma_fn(1.0 / power) / power;
    Ok(GammaAsymptotic {
        quadrature,
        asymptotic,
        relative_gap: (quadrature / asymptotic - 1.0).abs(),
    })
}
