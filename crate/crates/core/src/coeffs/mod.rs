//! Model vocabulary: the signed power nonlinearity, two-sided coefficient
//! fields, and the two model records (small-noise system and two-scale
//! jump-diffusion system) together with grid-based assumption checks.

mod field;
mod jumps;
mod model;
mod validate;

pub use field::{CoefficientField, CustomFn, FieldBounds, ParametricFunction, Side};
pub(crate) use jumps::norm;
pub use jumps::{Atom, CompiledJumps, DensityShape, JumpDensity, JumpMeasure};
pub use model::{DriftCondition, Regime, Residual, SmallNoiseModel, TwoScaleModel};
pub use validate::{AssumptionCheck, GridSpec, ValidationReport, Witness};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent of the signed power drift, restricted to the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SignedPowerExponent(f64);

impl SignedPowerExponent {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 && gamma < 1.0 {
            Ok(Self(gamma))
        } else {
            Err(Error::InvalidParameter(format!(
                "exponent gamma = {gamma} must lie in the open interval (0, 1)"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - gamma`.
    #[inline]
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }

    /// Width `eps^(2/(gamma+1))` of the boundary layer around the hyperplane.
    pub fn layer_width(self, eps: f64) -> f64 {
        eps.powf(2.0 / (self.0 + 1.0))
    }

    /// Time scale `eps^(2(1-gamma)/(gamma+1))` of the fast motion inside the layer.
    pub fn layer_time_scale(self, eps: f64) -> f64 {
        eps.powf(2.0 * (1.0 - self.0) / (self.0 + 1.0))
    }
}

impl TryFrom<f64> for SignedPowerExponent {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SignedPowerExponent> for f64 {
    fn from(value: SignedPowerExponent) -> Self {
        value.0
    }
}

/// `|y|^gamma * sgn(y)`, exactly zero at `y = 0`.
#[inline]
pub fn signed_pow(y: f64, gamma: SignedPowerExponent) -> f64 {
    signed_pow_raw(y, gamma.0)
}

/// Signed power for an arbitrary positive exponent.
#[inline]
pub fn signed_pow_raw(y: f64, p: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let magnitude = if p == 0.5 {
        y.abs().sqrt()
    } else if p == 1.0 {
        y.abs()
    } else {
        y.abs().powf(p)
    };
    if y > 0.0 {
        magnitude
    } else {
        -magnitude
    }
}
