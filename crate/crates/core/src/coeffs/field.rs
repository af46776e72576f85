use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-space selector: `Plus` is `y >= 0`, `Minus` is `y < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    /// Branch used at `y`; the hyperplane itself belongs to `Plus`.
    #[inline]
    pub fn of(y: f64) -> Side {
        if y >= 0.0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }
}

/// User supplied scalar function of `(x, y)`.
#[derive(Clone)]
pub struct CustomFn {
    pub name: String,
    pub func: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

impl CustomFn {
    pub fn new(name: impl Into<String>, func: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            func: Arc::new(func),
        }
    }
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomFn({})", self.name)
    }
}

/// A scalar function of the concatenated argument `(x_1..x_d, y_1..y_k)`,
/// drawn from the registered families.
///
/// `coeffs` are weights on the concatenated argument; missing trailing
/// weights are zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParametricFunction {
    Constant {
        value: f64,
    },
    /// `constant + coeffs . (x, y)`, clipped to `[lower, upper]`.
    Affine {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        coeffs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<f64>,
    },
    /// `offset + scale * tanh(constant + coeffs . (x, y))`.
    BoundedSmooth {
        #[serde(default)]
        offset: f64,
        scale: f64,
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        coeffs: Vec<f64>,
    },
    /// Extension hook for programmatic models; cannot be serialized.
    #[serde(skip)]
    Custom(CustomFn),
}

#[inline]
fn dot(coeffs: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, w) in coeffs.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let v = if i < x.len() {
            x[i]
        } else {
            match y.get(i - x.len()) {
                Some(v) => *v,
                None => continue,
            }
        };
        acc += w * v;
    }
    acc
}

impl ParametricFunction {
    pub fn constant(value: f64) -> Self {
        ParametricFunction::Constant { value }
    }

    pub fn affine(constant: f64, coeffs: Vec<f64>) -> Self {
        ParametricFunction::Affine {
            constant,
            coeffs,
            lower: None,
            upper: None,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            ParametricFunction::Constant { value } => *value,
            ParametricFunction::Affine {
                constant,
                coeffs,
                lower,
                upper,
            } => {
                let mut v = constant + dot(coeffs, x, y);
                if let Some(lo) = lower {
                    v = v.max(*lo);
                }
                if let Some(hi) = upper {
                    v = v.min(*hi);
                }
                v
            }
            ParametricFunction::BoundedSmooth {
                offset,
                scale,
                constant,
                coeffs,
            } => offset + scale * (constant + dot(coeffs, x, y)).tanh(),
            ParametricFunction::Custom(c) => (c.func)(x, y),
        }
    }

    /// Number of argument slots the weights refer to.
    pub fn arity(&self) -> usize {
        match self {
            ParametricFunction::Affine { coeffs, .. } | ParametricFunction::BoundedSmooth { coeffs, .. } => {
                coeffs.len()
            }
            _ => 0,
        }
    }

    /// Whether the value can change with `x` (first `d` slots).
    pub fn depends_on_x(&self, d: usize) -> bool {
        match self {
            ParametricFunction::Constant { .. } => false,
            ParametricFunction::Affine { coeffs, .. } | ParametricFunction::BoundedSmooth { coeffs, .. } => {
                coeffs.iter().take(d).any(|w| *w != 0.0)
            }
            ParametricFunction::Custom(_) => true,
        }
    }

    /// Whether the value can change with `y` (slots after the first `d`).
    pub fn depends_on_y(&self, d: usize) -> bool {
        match self {
            ParametricFunction::Constant { .. } => false,
            ParametricFunction::Affine { coeffs, .. } | ParametricFunction::BoundedSmooth { coeffs, .. } => {
                coeffs.iter().skip(d).any(|w| *w != 0.0)
            }
            ParametricFunction::Custom(_) => true,
        }
    }
}

/// Declared bounds, checked on the validation grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldBounds {
    /// `|f| <= max_abs` everywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs: Option<f64>,
    /// `|f| >= min_abs` everywhere (separation from zero).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_abs: Option<f64>,
}

/// Piecewise coefficient: the `plus` components apply on `y_1 >= 0` and the
/// `minus` components on `y_1 < 0`. Both branches are defined everywhere.
///
/// Vector or matrix valued coefficients are stored component-wise (matrices
/// row-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientField {
    pub plus: Vec<ParametricFunction>,
    pub minus: Vec<ParametricFunction>,
    #[serde(default)]
    pub bounds: FieldBounds,
}

impl CoefficientField {
    pub fn new(plus: Vec<ParametricFunction>, minus: Vec<ParametricFunction>) -> Result<Self> {
        if plus.len() != minus.len() {
            return Err(Error::InvalidParameter(format!(
                "branch dimensions differ: plus has {}, minus has {}",
                plus.len(),
                minus.len()
            )));
        }
        Ok(Self {
            plus,
            minus,
            bounds: FieldBounds::default(),
        })
    }

    /// Scalar field that is `plus` on `y >= 0` and `minus` on `y < 0`.
    pub fn constant(plus: f64, minus: f64) -> Self {
        Self {
            plus: vec![ParametricFunction::constant(plus)],
            minus: vec![ParametricFunction::constant(minus)],
            bounds: FieldBounds::default(),
        }
    }

    /// Vector field with constant branches.
    pub fn constant_vector(plus: &[f64], minus: &[f64]) -> Self {
        assert_eq!(plus.len(), minus.len(), "branch dimensions differ");
        Self {
            plus: plus.iter().copied().map(ParametricFunction::constant).collect(),
            minus: minus.iter().copied().map(ParametricFunction::constant).collect(),
            bounds: FieldBounds::default(),
        }
    }

    /// Identically zero field with `dim` components.
    pub fn zeros(dim: usize) -> Self {
        Self::constant_vector(&vec![0.0; dim], &vec![0.0; dim])
    }

    /// Same function on both sides.
    pub fn symmetric(f: ParametricFunction) -> Self {
        Self {
            plus: vec![f.clone()],
            minus: vec![f],
            bounds: FieldBounds::default(),
        }
    }

    pub fn two_sided(plus: ParametricFunction, minus: ParametricFunction) -> Self {
        Self {
            plus: vec![plus],
            minus: vec![minus],
            bounds: FieldBounds::default(),
        }
    }

    pub fn with_bounds(mut self, bounds: FieldBounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn dim(&self) -> usize {
        self.plus.len()
    }

    pub fn branch(&self, side: Side) -> &[ParametricFunction] {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }

    pub fn check_dims(&self, name: &str, dim: usize, arity: usize) -> Result<()> {
        if self.plus.len() != self.minus.len() {
            return Err(Error::InvalidParameter(format!(
                "{name}: branch dimensions differ ({} vs {})",
                self.plus.len(),
                self.minus.len()
            )));
        }
        if self.plus.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "{name}: expected {dim} components, found {}",
                self.plus.len()
            )));
        }
        if let Some(f) = self.plus.iter().chain(&self.minus).find(|f| f.arity() > arity) {
            return Err(Error::InvalidParameter(format!(
                "{name}: function weights refer to {} arguments but only {arity} exist",
                f.arity()
            )));
        }
        Ok(())
    }

    pub fn depends_on_x(&self, d: usize) -> bool {
        self.plus.iter().chain(&self.minus).any(|f| f.depends_on_x(d))
    }

    pub fn depends_on_y(&self, d: usize) -> bool {
        self.plus.iter().chain(&self.minus).any(|f| f.depends_on_y(d))
    }

    /// Whether every component is the same constant on both branches.
    pub fn is_zero(&self) -> bool {
        self.plus
            .iter()
            .chain(&self.minus)
            .all(|f| matches!(f, ParametricFunction::Constant { value } if *value == 0.0))
    }

    /// Evaluates one branch regardless of the sign of `y`.
    pub fn eval_branch_into(&self, side: Side, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        let branch = self.branch(side);
        debug_assert_eq!(out.len(), branch.len());
        for (o, f) in out.iter_mut().zip(branch) {
            let v = f.eval(x, y);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    x: x.to_vec(),
                    y: y.to_vec(),
                });
            }
            *o = v;
        }
        Ok(())
    }

    /// Evaluates the field: `plus` iff `y_1 >= 0`.
    #[inline]
    pub fn eval_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        let side = Side::of(y.first().copied().unwrap_or(0.0));
        self.eval_branch_into(side, x, y, out)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, y, &mut out)?;
        Ok(out)
    }

    /// First component of one branch at a scalar `y`.
    #[inline]
    pub fn eval_branch_scalar(&self, side: Side, x: &[f64], y: f64) -> Result<f64> {
        let v = self.branch(side)[0].eval(x, std::slice::from_ref(&y));
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation {
                x: x.to_vec(),
                y: vec![y],
            })
        }
    }

    /// First component at a scalar `y`, using the indicator split.
    #[inline]
    pub fn eval_scalar(&self, x: &[f64], y: f64) -> Result<f64> {
        self.eval_branch_scalar(Side::of(y), x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperplane_belongs_to_plus_branch() {
        let f = CoefficientField::constant(2.0, -3.0);
        assert_eq!(f.eval_scalar(&[0.0], 0.0).unwrap(), 2.0);
        assert_eq!(f.eval_scalar(&[0.0], -0.0).unwrap(), 2.0);
        assert_eq!(f.eval_scalar(&[0.0], -0.1).unwrap(), -3.0);
    }

    #[test]
    fn affine_evaluation() {
        let f = CoefficientField::symmetric(ParametricFunction::affine(0.0, vec![1.0, 1.0]));
        assert_eq!(f.eval_scalar(&[1.0], 0.5).unwrap(), 1.5);
    }

    #[test]
    fn affine_clipping_and_tanh() {
        let clipped = ParametricFunction::Affine {
            constant: 0.0,
            coeffs: vec![10.0],
            lower: Some(-1.0),
            upper: Some(1.0),
        };
        assert_eq!(clipped.eval(&[5.0], &[]), 1.0);
        assert_eq!(clipped.eval(&[-5.0], &[]), -1.0);
        let smooth = ParametricFunction::BoundedSmooth {
            offset: 1.0,
            scale: 2.0,
            constant: 0.0,
            coeffs: vec![0.0, 1.0],
        };
        assert!((smooth.eval(&[3.0], &[0.5]) - (1.0 + 2.0 * 0.5f64.tanh())).abs() < 1e-15);
    }

    #[test]
    fn minus_branch_never_consulted_for_nonnegative_y() {
        let poison = ParametricFunction::Custom(CustomFn::new("poison", |_, _| f64::NAN));
        let f = CoefficientField::two_sided(ParametricFunction::constant(1.0), poison);
        for y in [0.0, 1e-300, 1.0, 1e9] {
            assert_eq!(f.eval_scalar(&[0.0], y).unwrap(), 1.0);
        }
        match f.eval_scalar(&[0.25], -1.0) {
            Err(Error::Evaluation { x, y }) => {
                assert_eq!(x, vec![0.25]);
                assert_eq!(y, vec![-1.0]);
            }
            other => panic!("expected evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn field_round_trips_through_toml() {
        let f = CoefficientField::two_sided(
            ParametricFunction::affine(1.0, vec![0.5, -2.0]),
            ParametricFunction::BoundedSmooth {
                offset: 0.0,
                scale: 1.0,
                constant: 0.1,
                coeffs: vec![1.0],
            },
        );
        let text = toml::to_string(&f).unwrap();
        let back: CoefficientField = toml::from_str(&text).unwrap();
        for (x, y) in [(0.3, 0.2), (-1.0, -0.7)] {
            assert_eq!(
                f.eval_scalar(&[x], y).unwrap(),
                back.eval_scalar(&[x], y).unwrap()
            );
        }
    }
}
