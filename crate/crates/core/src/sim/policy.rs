use serde::{Deserialize, Serialize};

use crate::coeffs::SignedPowerExponent;
use crate::error::{Error, Result};

/// Smallest refinement factor applied inside the boundary layer.
pub const MIN_REFINEMENT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `base_dt` everywhere.
    Uniform,
    /// `base_dt` outside the layer `|y| <= eps^(2/(gamma+1))`, `base_dt * f` inside,
    /// with `f = max(eps^(2(1-gamma)/(gamma+1)), 1e-4)`.
    TwoLevel,
    /// `base_dt * min(1, max(f, |y|^(1-gamma)))`: equal to the two-level step
    /// inside the layer and growing continuously to `base_dt` at `|y| = 1`.
    Graded,
}

impl StepRule {
    pub fn as_str(self) -> &'static str {
        match self {
            StepRule::Uniform => "uniform",
            StepRule::TwoLevel => "two_level",
            StepRule::Graded => "graded",
        }
    }
}

/// Local step size as a function of the fast state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub base_dt: f64,
    #[serde(default = "default_rule")]
    pub rule: StepRule,
}

fn default_rule() -> StepRule {
    StepRule::Graded
}

impl StepPolicy {
    pub fn new(base_dt: f64, rule: StepRule) -> Result<Self> {
        let p = Self { base_dt, rule };
        p.check()?;
        Ok(p)
    }

    pub fn graded(base_dt: f64) -> Result<Self> {
        Self::new(base_dt, StepRule::Graded)
    }

    pub fn uniform(base_dt: f64) -> Result<Self> {
        Self::new(base_dt, StepRule::Uniform)
    }

    pub fn check(&self) -> Result<()> {
        if self.base_dt > 0.0 && self.base_dt.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("base step {} must be positive", self.base_dt)))
        }
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.rule.as_str(), self.base_dt)
    }

    /// Precomputes the layer quantities for one `(eps, gamma)`.
    pub fn resolve(&self, eps: f64, gamma: SignedPowerExponent) -> ResolvedPolicy {
        let (layer, factor) = if eps > 0.0 {
            (
                gamma.layer_width(eps),
                gamma.layer_time_scale(eps).max(MIN_REFINEMENT).min(1.0),
            )
        } else {
            (0.0, 1.0)
        };
        let rule = if eps > 0.0 { self.rule } else { StepRule::Uniform };
        ResolvedPolicy {
            base_dt: self.base_dt,
            rule,
            layer,
            factor,
            complement: gamma.complement(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedPolicy {
    pub base_dt: f64,
    pub rule: StepRule,
    /// Boundary-layer half-width.
    pub layer: f64,
    /// Refinement factor inside the layer.
    pub factor: f64,
    complement: f64,
}

impl ResolvedPolicy {
    #[inline]
    pub fn dt(&self, y: f64) -> f64 {
        match self.rule {
            StepRule::Uniform => self.base_dt,
            StepRule::TwoLevel => {
                if y.abs() <= self.layer {
                    self.base_dt * self.factor
                } else {
                    self.base_dt
                }
            }
            StepRule::Graded => {
                let a = y.abs();
                if a >= 1.0 {
                    return self.base_dt;
                }
                let g = if self.complement == 0.5 { a.sqrt() } else { a.powf(self.complement) };
                self.base_dt * g.max(self.factor)
            }
        }
    }
}
