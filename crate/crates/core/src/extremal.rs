//! Deterministic solvers: the two extremal solutions leaving the hyperplane,
//! the averaged ODE, and the forced integral system.

use serde::{Deserialize, Serialize};

use crate::coeffs::{signed_pow, Regime, Side, SmallNoiseModel};
use crate::error::{Error, Result};

/// Node values and derivatives of an ODE solution, interpolated by cubic
/// Hermite polynomials between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensePath {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Row-major, `dim` values per node.
    pub states: Vec<f64>,
    pub derivatives: Vec<f64>,
}

impl DensePath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// State at `t`, clamped to the solved interval.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let n = self.len();
        if t <= self.times[0] {
            return self.state(0).to_vec();
        }
        if t >= self.times[n - 1] {
            return self.state(n - 1).to_vec();
        }
        let i = self.times.partition_point(|s| *s <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let d = self.dim;
        (0..d)
            .map(|j| {
                let (y0, y1) = (self.states[i * d + j], self.states[(i + 1) * d + j]);
                let (m0, m1) = (self.derivatives[i * d + j], self.derivatives[(i + 1) * d + j]);
                h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W, names: &[String]) -> std::io::Result<()> {
        writeln!(w, "t,{}", names.join(","))?;
        for i in 0..self.len() {
            write!(w, "{}", self.times[i])?;
            for v in self.state(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Classical fourth-order Runge-Kutta on `[0, t_end]` with step `h`; the last
/// step is shortened to land on `t_end`.
pub fn rk4<F>(f: F, z0: &[f64], t_end: f64, h: f64) -> Result<DensePath>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(h > 0.0 && h.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("need h > 0 and T >= 0, got h = {h}, T = {t_end}")));
    }
    let n = z0.len();
    let mut z = z0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut out = DensePath {
        dim: n,
        times: vec![0.0],
        states: z.clone(),
        derivatives: Vec::new(),
    };
    f(0.0, &z, &mut k1)?;
    out.derivatives.extend_from_slice(&k1);
    let steps = (t_end / h).ceil() as usize;
    let mut t = 0.0;
    for i in 0..steps {
        let t_next = if i + 1 == steps { t_end } else { (i + 1) as f64 * h };
        let hs = t_next - t;
        if hs <= 0.0 {
            break;
        }
        for j in 0..n {
            tmp[j] = z[j] + 0.5 * hs * k1[j];
        }
        f(t + 0.5 * hs, &tmp, &mut k2)?;
        for j in 0..n {
            tmp[j] = z[j] + 0.5 * hs * k2[j];
        }
        f(t + 0.5 * hs, &tmp, &mut k3)?;
        for j in 0..n {
            tmp[j] = z[j] + hs * k3[j];
        }
        f(t + hs, &tmp, &mut k4)?;
        for j in 0..n {
            z[j] += hs / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        t = t_next;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                time: t,
                x: out.last().to_vec(),
                y: Vec::new(),
            });
        }
        f(t, &z, &mut k1)?;
        out.times.push(t);
        out.states.extend_from_slice(&z);
        out.derivatives.extend_from_slice(&k1);
    }
    Ok(out)
}

/// Solution leaving the hyperplane on one side, solved in the coordinate
/// `u = |Y|^(1-gamma)` where the system
///
/// ```text
/// X' = psi^s(X, Y),   u' = (1-gamma) phi^s(X, Y),   Y = s u^(1/(1-gamma))
/// ```
///
/// is locally Lipschitz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalSolution {
    pub sign: Side,
    pub gamma: f64,
    /// Dense output of `(X, u)`.
    pub transformed: DensePath,
}

impl ExtremalSolution {
    pub fn d(&self) -> usize {
        self.transformed.dim - 1
    }

    fn to_y(&self, u: f64) -> f64 {
        self.sign.sign() * u.max(0.0).powf(1.0 / (1.0 - self.gamma))
    }

    pub fn times(&self) -> &[f64] {
        &self.transformed.times
    }

    /// `(X, Y)` at node `i`.
    pub fn node(&self, i: usize) -> (Vec<f64>, f64) {
        let s = self.transformed.state(i);
        let d = self.d();
        (s[..d].to_vec(), self.to_y(s[d]))
    }

    /// `(X, Y)` at any time in the solved interval.
    pub fn eval(&self, t: f64) -> (Vec<f64>, f64) {
        let mut s = self.transformed.eval(t);
        let u = s.pop().expect("state has the u component");
        (s, self.to_y(u))
    }

    /// Nodes in original coordinates, as a path with `d + 1` columns.
    pub fn original(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.times().len();
        let d = self.d();
        let mut xs = Vec::with_capacity(n * d);
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            let (x, y) = self.node(i);
            xs.extend(x);
            ys.push(y);
        }
        (xs, ys)
    }
}

/// Extremal solution `(X^s, Y^s)` from `(x0, 0)` on `[0, t_end]`.
///
/// The step from the tie `u = 0` is an ordinary Runge-Kutta step: the
/// transformed right-hand side is regular there.
pub fn extremal_solution(model: &SmallNoiseModel, sign: Side, t_end: f64, h: f64) -> Result<ExtremalSolution> {
    model.check_shape()?;
    model.require_regime(Regime::Repulsive)?;
    let phi0 = model.phi.eval_branch_scalar(sign, &model.x0, 0.0)?;
    if !(phi0 > 0.0) {
        return Err(Error::Domain(format!(
            "phi{}(x0, 0) = {phi0} does not push the solution off the hyperplane",
            if sign == Side::Plus { "+" } else { "-" }
        )));
    }
    let d = model.d;
    let g = model.gamma.value();
    let inv = 1.0 / (1.0 - g);
    let mut z0 = model.x0.clone();
    z0.push(0.0);
    let rhs = |_t: f64, z: &[f64], out: &mut [f64]| -> Result<()> {
        let y = sign.sign() * z[d].max(0.0).powf(inv);
        let yv = [y];
        model.psi.eval_branch_into(sign, &z[..d], &yv, &mut out[..d])?;
        out[d] = (1.0 - g) * model.phi.eval_branch_scalar(sign, &z[..d], y)?;
        Ok(())
    };
    Ok(ExtremalSolution {
        sign,
        gamma: g,
        transformed: rk4(rhs, &z0, t_end, h)?,
    })
}

/// Fourth-order solution of `x' = psibar(x)`.
pub fn averaged_ode_solve<F>(psibar: F, x0: &[f64], t_end: f64, h: f64) -> Result<DensePath>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    rk4(
        |_t, z, out| {
            let v = psibar(z)?;
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Evaluation {
                    x: z.to_vec(),
                    y: Vec::new(),
                });
            }
            out.copy_from_slice(&v);
            Ok(())
        },
        x0,
        t_end,
        h,
    )
}

/// Solution of the forced integral system and its distance to the unforced one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcedSolution {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `sup_t |X_f - X| + |Y_f - Y|` against the unforced solution.
    pub distance: f64,
    pub sweeps: usize,
    pub converged: bool,
}

pub const FORCED_TOLERANCE: f64 = 1e-10;
pub const FORCED_MAX_SWEEPS: usize = 200;

struct Iterate {
    xs: Vec<f64>,
    ys: Vec<f64>,
    sweeps: usize,
    converged: bool,
}

/// Picard iteration for
/// `X(t) = x + int_0^t psi(X,Y) ds + f_X(t)`, `Y(t) = y + int_0^t phi(X,Y) sgnpow(Y) ds + f_Y(t)`
/// with cumulative trapezoid sums on the grid.
fn picard<F>(model: &SmallNoiseModel, side: Side, x: &[f64], y: f64, times: &[f64], forcing: &F) -> Result<Iterate>
where
    F: Fn(f64) -> (Vec<f64>, f64),
{
    let d = model.d;
    let n = times.len();
    let mut fx = Vec::with_capacity(n * d);
    let mut fy = Vec::with_capacity(n);
    for t in times {
        let (a, b) = forcing(*t);
        if a.len() != d {
            return Err(Error::InvalidParameter(format!("forcing has {} slow components, expected {d}", a.len())));
        }
        fx.extend(a);
        fy.push(b);
    }
    let mut xs: Vec<f64> = (0..n).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| x[j] + fx[i * d + j]).collect();
    let mut ys: Vec<f64> = (0..n).map(|i| y + fy[i]).collect();
    let mut drift_x = vec![0.0; n * d];
    let mut drift_y = vec![0.0; n];
    for sweep in 1..=FORCED_MAX_SWEEPS {
        for i in 0..n {
            if Side::of(ys[i]) != side || ys[i] == 0.0 {
                return Err(Error::StabilityViolation { time: times[i] });
            }
            let xi = &xs[i * d..(i + 1) * d];
            model.psi.eval_into(xi, &[ys[i]], &mut drift_x[i * d..(i + 1) * d])?;
            drift_y[i] = model.phi.eval_scalar(xi, ys[i])? * signed_pow(ys[i], model.gamma);
        }
        let mut new_xs = vec![0.0; n * d];
        let mut new_ys = vec![0.0; n];
        let mut acc_x = vec![0.0; d];
        let mut acc_y = 0.0;
        for i in 0..n {
            if i > 0 {
                let h = times[i] - times[i - 1];
                for j in 0..d {
                    acc_x[j] += 0.5 * h * (drift_x[(i - 1) * d + j] + drift_x[i * d + j]);
                }
                acc_y += 0.5 * h * (drift_y[i - 1] + drift_y[i]);
            }
            for j in 0..d {
                new_xs[i * d + j] = x[j] + acc_x[j] + fx[i * d + j];
            }
            new_ys[i] = y + acc_y + fy[i];
        }
        let change = sup_distance(d, &new_xs, &new_ys, &xs, &ys);
        xs = new_xs;
        ys = new_ys;
        if change < FORCED_TOLERANCE {
            return Ok(Iterate {
                xs,
                ys,
                sweeps: sweep,
                converged: true,
            });
        }
    }
    Ok(Iterate {
        xs,
        ys,
        sweeps: FORCED_MAX_SWEEPS,
        converged: false,
    })
}

fn sup_distance(d: usize, xa: &[f64], ya: &[f64], xb: &[f64], yb: &[f64]) -> f64 {
    (0..ya.len())
        .map(|i| {
            let dx: f64 = (0..d).map(|j| (xa[i * d + j] - xb[i * d + j]).powi(2)).sum::<f64>().sqrt();
            dx + (ya[i] - yb[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// Solves the forced system from `(x, y)`, `y != 0` on side `sign`, and
/// reports its sup-distance to the unforced solution computed by the same
/// scheme.
pub fn forced_solution<F>(model: &SmallNoiseModel, sign: Side, x: &[f64], y: f64, forcing: F, t_end: f64, h: f64) -> Result<ForcedSolution>
where
    F: Fn(f64) -> (Vec<f64>, f64),
{
    model.check_shape()?;
    if y == 0.0 || Side::of(y) != sign {
        return Err(Error::Domain(format!("start y = {y} must be non-zero and on the requested side")));
    }
    if x.len() != model.d {
        return Err(Error::InvalidParameter(format!("x has {} components, expected {}", x.len(), model.d)));
    }
    if !(h > 0.0 && h.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("need h > 0 and T > 0, got h = {h}, T = {t_end}")));
    }
    let steps = (t_end / h).ceil() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| if i == steps { t_end } else { i as f64 * h }).collect();
    let zero = |_t: f64| (vec![0.0; model.d], 0.0);
    let reference = picard(model, sign, x, y, &times, &zero)?;
    let forced = picard(model, sign, x, y, &times, &forcing)?;
    let distance = sup_distance(model.d, &forced.xs, &forced.ys, &reference.xs, &reference.ys);
    Ok(ForcedSolution {
        times,
        xs: forced.xs,
        ys: forced.ys,
        distance,
        sweeps: forced.sweeps,
        converged: forced.converged && reference.converged,
    })
}
