use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::path::PathSample;
use super::policy::StepPolicy;
use super::{rng_for, Control};
use crate::coeffs::{CompiledJumps, TwoScaleModel};
use crate::error::{Error, Result};

/// Largest expected number of jumps per path before a run is refused.
pub const JUMP_BUDGET: f64 = 1e7;

/// Euler-Maruyama stepper for the two-scale jump-diffusion system. Steps are
/// `base_dt * min(1, eps)` and are cut at jump times, which are drawn exactly
/// from exponential waiting times.
pub struct TwoScaleStepper<'m> {
    model: &'m TwoScaleModel,
    eps: f64,
    dt: f64,
    slow: CompiledJumps,
    fast: CompiledJumps,
    slow_rate: f64,
    fast_rate: f64,
    a: Vec<f64>,
    sigma: Vec<f64>,
    g: Vec<f64>,
    drift_fast: Vec<f64>,
    big_sigma: Vec<f64>,
    h: Vec<f64>,
    noise_x: Vec<f64>,
    noise_y: Vec<f64>,
    mark_slow: Vec<f64>,
    mark_fast: Vec<f64>,
    pub slow_jumps: u64,
    pub fast_jumps: u64,
}

impl<'m> TwoScaleStepper<'m> {
    pub fn new(model: &'m TwoScaleModel, eps: f64, policy: &StepPolicy, horizon: f64) -> Result<Self> {
        model.check_shape()?;
        policy.check()?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
        }
        let slow = model.slow_jumps.compile(model.rho)?;
        let fast = model.fast_jumps.compile(model.rho)?;
        let slow_rate = slow.total_rate();
        let fast_rate = fast.total_rate() / eps;
        let expected = (slow_rate + fast_rate) * horizon;
        if expected > JUMP_BUDGET {
            return Err(Error::Resource(format!(
                "about {expected:.3e} jumps expected per path (budget {JUMP_BUDGET:e}); use a larger eps or a smaller T"
            )));
        }
        let (d, k, m, l) = (model.d, model.k, model.slow_jumps.dim, model.fast_jumps.dim);
        Ok(Self {
            model,
            eps,
            dt: policy.base_dt * eps.min(1.0),
            slow,
            fast,
            slow_rate,
            fast_rate,
            a: vec![0.0; d],
            sigma: vec![0.0; d * d],
            g: vec![0.0; d * m],
            drift_fast: vec![0.0; k],
            big_sigma: vec![0.0; k * k],
            h: vec![0.0; k * l],
            noise_x: vec![0.0; d],
            noise_y: vec![0.0; k],
            mark_slow: vec![0.0; m],
            mark_fast: vec![0.0; l],
            slow_jumps: 0,
            fast_jumps: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn next_wait<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
        if rate > 0.0 {
            Exp::new(rate).expect("positive rate").sample(rng)
        } else {
            f64::INFINITY
        }
    }

    fn diffuse<R: Rng + ?Sized>(&mut self, t: f64, x: &mut [f64], y: &mut [f64], h: f64, rng: &mut R) -> Result<()> {
        let m = self.model;
        let (d, k) = (m.d, m.k);
        let (ms, ls) = (m.slow_jumps.dim, m.fast_jumps.dim);
        m.slow_drift.eval_into(x, y, &mut self.a)?;
        m.slow_diffusion.eval_into(x, y, &mut self.sigma)?;
        m.fast_drift_into(x, y, &mut self.drift_fast)?;
        m.fast_diffusion.eval_into(x, y, &mut self.big_sigma)?;
        if ms > 0 {
            m.slow_jump.eval_into(x, y, &mut self.g)?;
        }
        if ls > 0 {
            m.fast_jump.eval_into(x, y, &mut self.h)?;
        }
        let sq = h.sqrt();
        for n in self.noise_x.iter_mut().chain(self.noise_y.iter_mut()) {
            let z: f64 = rng.sample(StandardNormal);
            *n = sq * z;
        }
        let xi = match &m.residual {
            Some(r) => r.value(t + h, self.eps) - r.value(t, self.eps),
            None => 0.0,
        };
        let y_old = y.to_vec();
        for i in 0..d {
            let mut v = self.a[i] * h + xi;
            for j in 0..d {
                v += self.sigma[i * d + j] * self.noise_x[j];
            }
            for j in 0..ms {
                v -= self.g[i * ms + j] * self.slow.small_mean[j] * h;
            }
            x[i] += v;
        }
        let inv = 1.0 / self.eps;
        let inv_sqrt = inv.sqrt();
        for i in 0..k {
            let mut v = self.drift_fast[i] * h * inv;
            for j in 0..k {
                v += inv_sqrt * self.big_sigma[i * k + j] * self.noise_y[j];
            }
            for j in 0..ls {
                v -= inv * self.h[i * ls + j] * self.fast.small_mean[j] * h;
            }
            y[i] += v;
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                time: t,
                x: x.to_vec(),
                y: y_old,
            });
        }
        Ok(())
    }

    /// Integrates to `t_end`, landing on every time in `stops`; `observe`
    /// sees `(t, x, y)` initially and after every step.
    pub fn run<R, F>(&mut self, x: &mut [f64], y: &mut [f64], t_end: f64, stops: &[f64], rng: &mut R, mut observe: F) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(f64, &[f64], &[f64]) -> Control,
    {
        let mut t = 0.0;
        if observe(t, x, y) == Control::Stop {
            return Ok(());
        }
        let mut next_slow = Self::next_wait(self.slow_rate, rng);
        let mut next_fast = Self::next_wait(self.fast_rate, rng);
        let mut stop_iter = stops.iter().copied().filter(|v| *v > 0.0 && *v < t_end).chain(std::iter::once(t_end));
        let mut target = stop_iter.next().unwrap_or(t_end);
        let snap = 1e-12 * t_end.abs().max(1.0);
        let (d, k) = (self.model.d, self.model.k);
        let (ms, ls) = (self.model.slow_jumps.dim, self.model.fast_jumps.dim);
        while t < t_end {
            let h = self.dt.min(target - t).min(next_slow - t).min(next_fast - t).max(0.0);
            if h > 0.0 {
                self.diffuse(t, x, y, h, rng)?;
                t += h;
            }
            if (target - t).abs() <= snap {
                t = target;
                target = stop_iter.next().unwrap_or(t_end);
            }
            if next_slow <= t + snap {
                // Amplitudes at the pre-jump state.
                self.model.slow_jump.eval_into(x, y, &mut self.g)?;
                self.slow.sample_mark(rng, &mut self.mark_slow);
                for i in 0..d {
                    x[i] += (0..ms).map(|j| self.g[i * ms + j] * self.mark_slow[j]).sum::<f64>();
                }
                self.slow_jumps += 1;
                next_slow = t + Self::next_wait(self.slow_rate, rng);
            }
            if next_fast <= t + snap {
                self.model.fast_jump.eval_into(x, y, &mut self.h)?;
                self.fast.sample_mark(rng, &mut self.mark_fast);
                for i in 0..k {
                    y[i] += (0..ls).map(|j| self.h[i * ls + j] * self.mark_fast[j]).sum::<f64>();
                }
                self.fast_jumps += 1;
                next_fast = t + Self::next_wait(self.fast_rate, rng);
            }
            if observe(t, x, y) == Control::Stop {
                break;
            }
        }
        Ok(())
    }
}

/// Records every step of the two-scale system from `(x0, y0)`.
pub fn simulate_two_scale(model: &TwoScaleModel, eps: f64, t_end: f64, policy: &StepPolicy, seed: u64) -> Result<PathSample> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon T = {t_end} must be positive")));
    }
    let mut stepper = TwoScaleStepper::new(model, eps, policy, t_end)?;
    let mut rng = rng_for(seed);
    let mut x = model.x0.clone();
    let mut y = model.y0.clone();
    let mut path = PathSample::new(model.d, model.k, seed, policy.label());
    stepper.run(&mut x, &mut y, t_end, &[], &mut rng, |t, x, y| {
        path.push(t, x, y);
        Control::Continue
    })?;
    path.slow_jumps = stepper.slow_jumps;
    path.fast_jumps = stepper.fast_jumps;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{CoefficientField, DriftCondition, JumpMeasure, ParametricFunction};

    pub(crate) fn ou_model() -> TwoScaleModel {
        TwoScaleModel {
            d: 1,
            k: 1,
            slow_drift: CoefficientField::zeros(1),
            slow_diffusion: CoefficientField::zeros(1),
            slow_jump: CoefficientField::zeros(0),
            fast_drift: CoefficientField::symmetric(ParametricFunction::affine(0.0, vec![0.0, -1.0])),
            fast_drift_power: None,
            fast_diffusion: CoefficientField::constant(1.0, 1.0),
            fast_jump: CoefficientField::zeros(0),
            slow_jumps: JumpMeasure::none(0),
            fast_jumps: JumpMeasure::none(0),
            rho: 0.5,
            drift_condition: DriftCondition { kappa: 1.0, c: 0.5, r: 1.0 },
            moment_p: 2.0,
            residual: None,
            x0: vec![1.0],
            y0: vec![0.0],
        }
    }

    #[test]
    fn zero_model_is_constant() {
        let mut m = ou_model();
        m.fast_drift = CoefficientField::zeros(1);
        m.fast_diffusion = CoefficientField::zeros(1);
        let p = simulate_two_scale(&m, 0.1, 1.0, &StepPolicy::uniform(0.1).unwrap(), 0).unwrap();
        assert!(p.xs.iter().all(|v| *v == 1.0));
        assert!(p.ys.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn jump_budget_is_enforced() {
        let mut m = ou_model();
        m.fast_jumps = JumpMeasure::single_atom(vec![1.0], 1.0);
        m.fast_jump = CoefficientField::constant(1.0, 1.0);
        let err = simulate_two_scale(&m, 1e-9, 100.0, &StepPolicy::uniform(0.1).unwrap(), 0).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn deterministic() {
        let mut m = ou_model();
        m.fast_jumps = JumpMeasure::single_atom(vec![1.0], 1.0);
        m.fast_jump = CoefficientField::constant(1.0, 1.0);
        let pol = StepPolicy::uniform(0.1).unwrap();
        let a = simulate_two_scale(&m, 0.1, 1.0, &pol, 5).unwrap();
        let b = simulate_two_scale(&m, 0.1, 1.0, &pol, 5).unwrap();
        assert_eq!(a, b);
    }
}
