use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use super::quad::{self, Tolerance};
use super::tv::Binning;
use crate::coeffs::{Regime, Side, SignedPowerExponent, SmallNoiseModel};
use crate::error::{Error, Result};

/// Values `phi^+-(x, 0)` and `beta^+-(x, 0)` of the frozen fast equation
///
/// ```text
/// dy = (phi^+ 1_{y>0} + phi^- 1_{y<0}) sgnpow(y, gamma) dt + (beta^+ 1_{y>=0} + beta^- 1_{y<0}) dW
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenParams {
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub gamma: SignedPowerExponent,
}

impl FrozenParams {
    pub fn new(gamma: f64, phi_plus: f64, phi_minus: f64, beta_plus: f64, beta_minus: f64) -> Result<Self> {
        let p = Self {
            phi_plus,
            phi_minus,
            beta_plus,
            beta_minus,
            gamma: SignedPowerExponent::new(gamma)?,
        };
        if [phi_plus, phi_minus, beta_plus, beta_minus].iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite frozen parameters {p:?}")));
        }
        if beta_plus <= 0.0 || beta_minus <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "diffusion values must be positive, got beta+ = {beta_plus}, beta- = {beta_minus}"
            )));
        }
        Ok(p)
    }

    pub fn symmetric(gamma: f64, phi: f64, beta: f64) -> Result<Self> {
        Self::new(gamma, phi, phi, beta, beta)
    }

    pub fn phi(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.phi_plus,
            Side::Minus => self.phi_minus,
        }
    }

    pub fn beta(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.beta_plus,
            Side::Minus => self.beta_minus,
        }
    }

    pub fn require(&self, regime: Regime) -> Result<()> {
        let ok = match regime {
            Regime::Repulsive => self.phi_plus > 0.0 && self.phi_minus > 0.0,
            Regime::Attractive => self.phi_plus < 0.0 && self.phi_minus < 0.0,
        };
        if !(self.beta_plus > 0.0 && self.beta_minus > 0.0) {
            return Err(Error::Domain(format!(
                "diffusion values must be positive, got beta+ = {}, beta- = {}",
                self.beta_plus, self.beta_minus
            )));
        }
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "phi+ = {}, phi- = {} do not have the signs of the {} regime",
                self.phi_plus,
                self.phi_minus,
                regime.as_str()
            )))
        }
    }
}

/// Probabilities of leaving the hyperplane downward and upward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionProbabilities {
    pub minus: f64,
    pub plus: f64,
}

/// `p_+ = w+ / (w- + w+)` with `w = (phi / beta^2)^(1/(gamma+1))`.
pub fn selection_probabilities(p: &FrozenParams) -> Result<SelectionProbabilities> {
    p.require(Regime::Repulsive)?;
    let e = 1.0 / (p.gamma.value() + 1.0);
    let w_plus = (p.phi_plus / (p.beta_plus * p.beta_plus)).powf(e);
    let w_minus = (p.phi_minus / (p.beta_minus * p.beta_minus)).powf(e);
    let total = w_plus + w_minus;
    Ok(SelectionProbabilities {
        minus: w_minus / total,
        plus: w_plus / total,
    })
}

/// Stationary law of the frozen equation in the attractive regime.
///
/// On each half-line the density is `c / beta^2 * exp(-k |y|^(gamma+1))` with
/// `k = 2 |phi| / (beta^2 (gamma+1))`: the speed measure of the diffusion,
/// which is continuous at zero only when `beta+ = beta-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantDensity {
    pub params: FrozenParams,
    /// Normalization constant.
    pub c: f64,
    pub rate_plus: f64,
    pub rate_minus: f64,
    pub mass_plus: f64,
    pub mass_minus: f64,
}

/// `int_0^inf exp(-k y^p) dy = Gamma(1/p) / p * k^(-1/p)`.
fn half_line_integral(k: f64, p: f64) -> f64 {
    gamma_fn(1.0 / p) / p * k.powf(-1.0 / p)
}

pub fn invariant_density(p: &FrozenParams) -> Result<InvariantDensity> {
    p.require(Regime::Attractive)?;
    let power = p.gamma.value() + 1.0;
    let rate = |phi: f64, beta: f64| 2.0 * phi.abs() / (beta * beta * power);
    let rate_plus = rate(p.phi_plus, p.beta_plus);
    let rate_minus = rate(p.phi_minus, p.beta_minus);
    let w_plus = half_line_integral(rate_plus, power) / (p.beta_plus * p.beta_plus);
    let w_minus = half_line_integral(rate_minus, power) / (p.beta_minus * p.beta_minus);
    let total = w_plus + w_minus;
    Ok(InvariantDensity {
        params: *p,
        c: 1.0 / total,
        rate_plus,
        rate_minus,
        mass_plus: w_plus / total,
        mass_minus: w_minus / total,
    })
}

impl InvariantDensity {
    fn power(&self) -> f64 {
        self.params.gamma.value() + 1.0
    }

    pub fn rate(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.rate_plus,
            Side::Minus => self.rate_minus,
        }
    }

    pub fn mass(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.mass_plus,
            Side::Minus => self.mass_minus,
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let side = Side::of(y);
        let beta = self.params.beta(side);
        self.c / (beta * beta) * (-self.rate(side) * y.abs().powf(self.power())).exp()
    }

    /// Length on which the density of one side decays, `k^(-1/(gamma+1))`.
    pub fn width(&self, side: Side) -> f64 {
        self.rate(side).powf(-1.0 / self.power())
    }

    /// `|phi|^-1 * width^(1-gamma)`, the larger of the two sides.
    pub fn relaxation_time(&self) -> f64 {
        let g = self.params.gamma.complement();
        [Side::Plus, Side::Minus]
            .into_iter()
            .map(|s| self.width(s).powf(g) / self.params.phi(s).abs())
            .fold(0.0, f64::max)
    }

    /// `pi([a, b])` by adaptive quadrature of the density.
    pub fn interval_mass(&self, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let tol = Tolerance {
            abs: 1e-13,
            rel: 1e-10,
            ..Tolerance::default()
        };
        let mut total = 0.0;
        if a < 0.0 {
            let hi = b.min(0.0);
            let breaks = quad::geometric_breaks(hi, -a, self.width(Side::Minus));
            let flipped: Vec<f64> = breaks.iter().map(|v| -v).collect();
            total += if a.is_infinite() {
                quad::integrate_to_infinity(|u| self.pdf(-u), -hi, self.width(Side::Minus), &tol)?.value
            } else {
                quad::integrate_with_breaks(|y| self.pdf(y), a, hi, &flipped, &tol)?.value
            };
        }
        if b > 0.0 {
            let lo = a.max(0.0);
            total += if b.is_infinite() {
                quad::integrate_to_infinity(|y| self.pdf(y), lo, self.width(Side::Plus), &tol)?.value
            } else {
                let breaks = quad::geometric_breaks(lo, b, self.width(Side::Plus));
                quad::integrate_with_breaks(|y| self.pdf(y), lo, b, &breaks, &tol)?.value
            };
        }
        Ok(total)
    }

    /// Probability of each bin of `binning`, under- and overflow included.
    pub fn bin_masses(&self, binning: &Binning) -> Result<Vec<f64>> {
        let edges = binning.edges();
        let mut out = Vec::with_capacity(edges.len() + 1);
        out.push(self.interval_mass(f64::NEG_INFINITY, edges[0])?);
        for w in edges.windows(2) {
            out.push(self.interval_mass(w[0], w[1])?);
        }
        out.push(self.interval_mass(edges[edges.len() - 1], f64::INFINITY)?);
        Ok(out)
    }

    /// Exact draw: the side by its mass, then `k |y|^(gamma+1) ~ Gamma(1/(gamma+1), 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let side = if rng.gen::<f64>() < self.mass_plus {
            Side::Plus
        } else {
            Side::Minus
        };
        let power = self.power();
        let shape = Gamma::new(1.0 / power, 1.0).expect("shape is positive");
        let t: f64 = shape.sample(rng);
        side.sign() * (t / self.rate(side)).powf(1.0 / power)
    }
}

/// `psi^+(x,0) pi([0,inf)) + psi^-(x,0) pi((-inf,0))` with `pi` the
/// stationary law of the frozen equation at `x`.
pub fn averaged_drift(x: &[f64], model: &SmallNoiseModel) -> Result<Vec<f64>> {
    let params = model.frozen_params(x)?;
    let density = invariant_density(&params)?;
    let mut plus = vec![0.0; model.d];
    let mut minus = vec![0.0; model.d];
    model.psi.eval_branch_into(Side::Plus, x, &[0.0], &mut plus)?;
    model.psi.eval_branch_into(Side::Minus, x, &[0.0], &mut minus)?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| p * density.mass_plus + m * density.mass_minus)
        .collect())
}
