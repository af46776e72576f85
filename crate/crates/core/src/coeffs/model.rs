use serde::{Deserialize, Serialize};

use super::field::{CoefficientField, Side};
use super::jumps::JumpMeasure;
use super::{signed_pow_raw, SignedPowerExponent};
use crate::analysis::FrozenParams;
use crate::error::{Error, Result};

/// Sign regime of the fast drift on the hyperplane `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `phi^+(x,0) > 0` and `phi^-(x,0) > 0`: the drift pushes off the hyperplane.
    Repulsive,
    /// `phi^+(x,0) < 0` and `phi^-(x,0) < 0`: the drift pulls toward it.
    Attractive,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Repulsive => "repulsive",
            Regime::Attractive => "attractive",
        }
    }
}

/// Small-noise system
///
/// ```text
/// dX = psi(X, Y) dt + eps b(X, Y) dB
/// dY = phi(X, Y) sgnpow(Y, gamma) dt + eps beta(X, Y) dW
/// X(0) = x0, Y(0) = 0
/// ```
///
/// with `X` in `R^d`, `Y` scalar and every coefficient split on the sign of `Y`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallNoiseModel {
    pub d: usize,
    pub gamma: SignedPowerExponent,
    /// Slow drift, `d` components.
    pub psi: CoefficientField,
    /// Scalar factor of the fast drift.
    pub phi: CoefficientField,
    /// Scalar fast diffusion.
    pub beta: CoefficientField,
    /// Slow diffusion, `d x d` row-major.
    pub b: CoefficientField,
    pub x0: Vec<f64>,
    pub regime: Regime,
}

impl SmallNoiseModel {
    pub fn check_shape(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParameter("slow dimension d must be positive".into()));
        }
        if self.x0.len() != self.d {
            return Err(Error::InvalidParameter(format!(
                "x0 has {} components, expected {}",
                self.x0.len(),
                self.d
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("x0 must be finite".into()));
        }
        let arity = self.d + 1;
        self.psi.check_dims("psi", self.d, arity)?;
        self.phi.check_dims("phi", 1, arity)?;
        self.beta.check_dims("beta", 1, arity)?;
        self.b.check_dims("b", self.d * self.d, arity)?;
        Ok(())
    }

    /// One-dimensional model with constant branches and no slow diffusion.
    pub fn constant_1d(
        gamma: f64,
        psi: (f64, f64),
        phi: (f64, f64),
        beta: (f64, f64),
        regime: Regime,
    ) -> Result<Self> {
        let model = Self {
            d: 1,
            gamma: SignedPowerExponent::new(gamma)?,
            psi: CoefficientField::constant(psi.0, psi.1),
            phi: CoefficientField::constant(phi.0, phi.1),
            beta: CoefficientField::constant(beta.0, beta.1),
            b: CoefficientField::zeros(1),
            x0: vec![0.0],
            regime,
        };
        model.check_shape()?;
        Ok(model)
    }

    /// Coefficients of the frozen fast equation at `x`.
    pub fn frozen_params(&self, x: &[f64]) -> Result<FrozenParams> {
        Ok(FrozenParams {
            phi_plus: self.phi.eval_branch_scalar(Side::Plus, x, 0.0)?,
            phi_minus: self.phi.eval_branch_scalar(Side::Minus, x, 0.0)?,
            beta_plus: self.beta.eval_branch_scalar(Side::Plus, x, 0.0)?,
            beta_minus: self.beta.eval_branch_scalar(Side::Minus, x, 0.0)?,
            gamma: self.gamma,
        })
    }

    /// Smallest `|phi^+-(x0, 0)|`.
    pub fn min_phi_at_start(&self) -> Result<f64> {
        let p = self.frozen_params(&self.x0)?;
        Ok(p.phi_plus.abs().min(p.phi_minus.abs()))
    }

    pub fn require_regime(&self, regime: Regime) -> Result<()> {
        if self.regime != regime {
            return Err(Error::Domain(format!(
                "operation requires the {} regime, model is {}",
                regime.as_str(),
                self.regime.as_str()
            )));
        }
        Ok(())
    }
}

/// Dissipativity constants of the fast drift: `A(x,y).y <= -c |y|^(kappa+1)`
/// for `|y| >= r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftCondition {
    pub kappa: f64,
    pub c: f64,
    pub r: f64,
}

/// Deterministic residual `xi(t) = amplitude * eps^eps_power * sin(2 pi frequency t)`
/// added to every slow coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub amplitude: f64,
    #[serde(default = "default_frequency")]
    pub frequency: f64,
    #[serde(default = "default_eps_power")]
    pub eps_power: f64,
}

fn default_frequency() -> f64 {
    1.0
}

fn default_eps_power() -> f64 {
    1.0
}

impl Residual {
    pub fn value(&self, t: f64, eps: f64) -> f64 {
        self.amplitude * eps.powf(self.eps_power) * (2.0 * std::f64::consts::PI * self.frequency * t).sin()
    }
}

/// Two-scale jump-diffusion system with slow `X` in `R^d` and fast `Y` in `R^k`:
///
/// ```text
/// dX = a(X,Y) dt + sigma(X,Y) dB + int c(X,Y,u) [N(du,dt) - 1_{|u|<=rho} nu(du) dt] + dxi
/// dY = eps^-1 A(X,Y) dt + eps^-1/2 Sigma(X,Y) dW + int C(X,Y,z) [Q(dz,dt) - 1_{|z|<=rho} eps^-1 mu(dz) dt]
/// ```
///
/// where `N` and `Q` have intensities `nu(du) dt` and `eps^-1 mu(dz) dt`.
/// Jump amplitudes are linear in the mark: `c(x,y,u) = G(x,y) u` and
/// `C(x,y,z) = H(x,y) z`. The fast drift is `A_i = F_i(x,y)` or, when
/// `fast_drift_power` is set, `A_i = F_i(x,y) sgnpow(y_i, power)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoScaleModel {
    pub d: usize,
    pub k: usize,
    /// `a`, `d` components.
    pub slow_drift: CoefficientField,
    /// `sigma`, `d x d` row-major.
    pub slow_diffusion: CoefficientField,
    /// `G`, `d x m` row-major.
    pub slow_jump: CoefficientField,
    /// `F`, `k` components.
    pub fast_drift: CoefficientField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fast_drift_power: Option<f64>,
    /// `Sigma`, `k x k` row-major.
    pub fast_diffusion: CoefficientField,
    /// `H`, `k x l` row-major.
    pub fast_jump: CoefficientField,
    /// `nu` on `R^m`.
    pub slow_jumps: JumpMeasure,
    /// `mu` on `R^l`.
    pub fast_jumps: JumpMeasure,
    pub rho: f64,
    pub drift_condition: DriftCondition,
    /// Moment exponent `p` of the fast jump measure.
    pub moment_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<Residual>,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

impl TwoScaleModel {
    pub fn check_shape(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 {
            return Err(Error::InvalidParameter("dimensions d and k must be positive".into()));
        }
        if self.x0.len() != self.d || self.y0.len() != self.k {
            return Err(Error::InvalidParameter("initial state has wrong dimension".into()));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!("cutoff rho = {} must be positive", self.rho)));
        }
        if let Some(p) = self.fast_drift_power {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidParameter(format!("fast drift power {p} must be positive")));
            }
        }
        let arity = self.d + self.k;
        let m = self.slow_jumps.dim;
        let l = self.fast_jumps.dim;
        self.slow_drift.check_dims("a", self.d, arity)?;
        self.slow_diffusion.check_dims("sigma", self.d * self.d, arity)?;
        self.slow_jump.check_dims("c", self.d * m, arity)?;
        self.fast_drift.check_dims("A", self.k, arity)?;
        self.fast_diffusion.check_dims("Sigma", self.k * self.k, arity)?;
        self.fast_jump.check_dims("C", self.k * l, arity)?;
        self.slow_jumps.check()?;
        self.fast_jumps.check()?;
        Ok(())
    }

    /// Fast drift `A(x, y)` into `out`.
    #[inline]
    pub fn fast_drift_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        self.fast_drift.eval_into(x, y, out)?;
        if let Some(p) = self.fast_drift_power {
            for (o, yi) in out.iter_mut().zip(y) {
                *o *= signed_pow_raw(*yi, p);
            }
        }
        Ok(())
    }

    /// Two-scale form of a small-noise model in the attractive regime after the
    /// boundary-layer rescaling, with the slow noise dropped: slow drift
    /// `psi(x, 0+-)`, fast drift `phi(x, 0+-) sgnpow(y, gamma)`, fast
    /// diffusion `beta(x, 0+-)`.
    pub fn from_attractive(model: &SmallNoiseModel, y0: f64) -> Result<Self> {
        model.require_regime(Regime::Attractive)?;
        let d = model.d;
        let freeze = |f: &CoefficientField| -> CoefficientField {
            // Drop the y dependence: evaluate weights on x only.
            let strip = |g: &super::field::ParametricFunction| {
                use super::field::ParametricFunction as P;
                match g {
                    P::Affine {
                        constant,
                        coeffs,
                        lower,
                        upper,
                    } => P::Affine {
                        constant: *constant,
                        coeffs: coeffs.iter().take(d).copied().collect(),
                        lower: *lower,
                        upper: *upper,
                    },
                    P::BoundedSmooth {
                        offset,
                        scale,
                        constant,
                        coeffs,
                    } => P::BoundedSmooth {
                        offset: *offset,
                        scale: *scale,
                        constant: *constant,
                        coeffs: coeffs.iter().take(d).copied().collect(),
                    },
                    other => other.clone(),
                }
            };
            CoefficientField {
                plus: f.plus.iter().map(strip).collect(),
                minus: f.minus.iter().map(strip).collect(),
                bounds: f.bounds,
            }
        };
        let params = model.frozen_params(&model.x0)?;
        let kappa = model.gamma.value();
        let c = params.phi_plus.abs().min(params.phi_minus.abs());
        let tm = Self {
            d,
            k: 1,
            slow_drift: freeze(&model.psi),
            slow_diffusion: CoefficientField::zeros(d * d),
            slow_jump: CoefficientField::zeros(0),
            fast_drift: freeze(&model.phi),
            fast_drift_power: Some(model.gamma.value()),
            fast_diffusion: freeze(&model.beta),
            fast_jump: CoefficientField::zeros(0),
            slow_jumps: JumpMeasure::none(0),
            fast_jumps: JumpMeasure::none(0),
            rho: 1.0,
            drift_condition: DriftCondition { kappa, c, r: 1.0 },
            moment_p: 2.0,
            residual: None,
            x0: model.x0.clone(),
            y0: vec![y0],
        };
        tm.check_shape()?;
        Ok(tm)
    }
}
