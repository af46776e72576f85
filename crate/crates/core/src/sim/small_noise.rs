use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::path::PathSample;
use super::policy::{ResolvedPolicy, StepPolicy};
use super::{rng_for, Control};
use crate::coeffs::{signed_pow, Side, SmallNoiseModel};
use crate::error::{Error, Result};

/// Current time and state of the small-noise system.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallNoiseState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: f64,
}

/// First exit of `|Y|` through `delta`, or `side = None` when the time cap
/// was reached first.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitOutcome {
    pub side: Option<Side>,
    pub time: f64,
    pub steps: u64,
}

/// Euler-Maruyama stepper for
/// `dX = psi dt + eps b dB`, `dY = phi sgnpow(Y, gamma) dt + eps beta dW`,
/// with the first component of `B` correlated to `W` by `corr`.
pub struct SmallNoiseStepper<'m> {
    model: &'m SmallNoiseModel,
    eps: f64,
    policy: ResolvedPolicy,
    corr: f64,
    corr_c: f64,
    psi_zero: bool,
    b_zero: bool,
    psi: Vec<f64>,
    b: Vec<f64>,
    db: Vec<f64>,
    y_buf: [f64; 1],
}

impl<'m> SmallNoiseStepper<'m> {
    pub fn new(model: &'m SmallNoiseModel, eps: f64, policy: &StepPolicy, corr: f64) -> Result<Self> {
        model.check_shape()?;
        policy.check()?;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps = {eps} must be non-negative")));
        }
        if !(-1.0..=1.0).contains(&corr) {
            return Err(Error::InvalidParameter(format!("driver correlation {corr} must lie in [-1, 1]")));
        }
        let d = model.d;
        Ok(Self {
            model,
            eps,
            policy: policy.resolve(eps, model.gamma),
            corr,
            corr_c: (1.0 - corr * corr).sqrt(),
            psi_zero: model.psi.is_zero(),
            b_zero: model.b.is_zero(),
            psi: vec![0.0; d],
            b: vec![0.0; d * d],
            db: vec![0.0; d],
            y_buf: [0.0],
        })
    }

    pub fn start(&self) -> SmallNoiseState {
        SmallNoiseState {
            t: 0.0,
            x: self.model.x0.clone(),
            y: 0.0,
        }
    }

    #[inline]
    pub fn dt(&self, y: f64) -> f64 {
        self.policy.dt(y)
    }

    /// One step of size `h`.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&mut self, s: &mut SmallNoiseState, h: f64, rng: &mut R) -> Result<()> {
        self.step_with_normals(s, h, || rng.sample(StandardNormal))
    }

    /// One step of size `h` driven by the standard normals `normal()`: first
    /// the fast driver, then the `d` slow ones. Used to couple paths.
    #[inline]
    pub fn step_with_normals<F: FnMut() -> f64>(&mut self, s: &mut SmallNoiseState, h: f64, mut normal: F) -> Result<()> {
        let m = self.model;
        let d = m.d;
        let y = s.y;
        self.y_buf[0] = y;
        let phi = m.phi.eval_scalar(&s.x, y)?;
        let mut y_new = y + phi * signed_pow(y, m.gamma) * h;
        let sq = h.sqrt();
        let mut dw = 0.0;
        if self.eps > 0.0 {
            let beta = m.beta.eval_scalar(&s.x, y)?;
            dw = sq * normal();
            y_new += self.eps * beta * dw;
        }
        if !self.psi_zero {
            m.psi.eval_into(&s.x, &self.y_buf, &mut self.psi)?;
        }
        if self.eps > 0.0 && !self.b_zero {
            m.b.eval_into(&s.x, &self.y_buf, &mut self.b)?;
            for j in 0..d {
                self.db[j] = sq * normal();
            }
            self.db[0] = self.corr * dw + self.corr_c * self.db[0];
            for i in 0..d {
                let mut v = if self.psi_zero { 0.0 } else { self.psi[i] * h };
                for j in 0..d {
                    v += self.eps * self.b[i * d + j] * self.db[j];
                }
                self.psi[i] = v;
            }
            for i in 0..d {
                s.x[i] += self.psi[i];
            }
        } else if !self.psi_zero {
            for i in 0..d {
                s.x[i] += self.psi[i] * h;
            }
        }
        if !y_new.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                time: s.t,
                x: s.x.clone(),
                y: vec![y],
            });
        }
        s.y = y_new;
        s.t += h;
        Ok(())
    }

    /// Integrates to `t_end`, landing exactly on every time in `stops`
    /// (sorted) and on `t_end`. `observe` sees the state after every step
    /// and the initial state.
    pub fn run<R, F>(&mut self, s: &mut SmallNoiseState, t_end: f64, stops: &[f64], rng: &mut R, mut observe: F) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(&SmallNoiseState) -> Control,
    {
        if observe(s) == Control::Stop {
            return Ok(());
        }
        let t0 = s.t;
        let mut next = stops.iter().copied().filter(move |v| *v > t0 && *v < t_end).chain(std::iter::once(t_end));
        let mut target = next.next().unwrap_or(t_end);
        let snap = 1e-12 * t_end.abs().max(1.0);
        while s.t < t_end {
            let h = self.dt(s.y).min(target - s.t);
            self.step(s, h, rng)?;
            if (target - s.t).abs() <= snap {
                s.t = target;
                target = next.next().unwrap_or(t_end);
            }
            if observe(s) == Control::Stop {
                break;
            }
        }
        Ok(())
    }

    /// Runs until `|Y| >= delta` or `cap`; the exit time is interpolated
    /// linearly inside the crossing step.
    pub fn run_to_exit<R: Rng + ?Sized>(&mut self, s: &mut SmallNoiseState, delta: f64, cap: f64, rng: &mut R) -> Result<ExitOutcome> {
        let mut steps = 0;
        while s.t < cap {
            let y_old = s.y;
            let t_old = s.t;
            let h = self.dt(y_old).min(cap - t_old);
            self.step(s, h, rng)?;
            steps += 1;
            if s.y.abs() >= delta {
                let side = Side::of(s.y);
                let level = side.sign() * delta;
                let frac = ((level - y_old) / (s.y - y_old)).clamp(0.0, 1.0);
                return Ok(ExitOutcome {
                    side: Some(side),
                    time: t_old + frac * h,
                    steps,
                });
            }
        }
        Ok(ExitOutcome {
            side: None,
            time: cap,
            steps,
        })
    }
}

/// Records every accepted step of the small-noise system started at `(x0, 0)`.
pub fn simulate_small_noise(
    model: &SmallNoiseModel,
    eps: f64,
    t_end: f64,
    policy: &StepPolicy,
    seed: u64,
    corr: f64,
) -> Result<PathSample> {
    simulate_small_noise_from(model, 0.0, eps, t_end, policy, seed, corr)
}

/// As [`simulate_small_noise`] with `Y(0) = y0`.
pub fn simulate_small_noise_from(
    model: &SmallNoiseModel,
    y0: f64,
    eps: f64,
    t_end: f64,
    policy: &StepPolicy,
    seed: u64,
    corr: f64,
) -> Result<PathSample> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon T = {t_end} must be positive")));
    }
    let mut stepper = SmallNoiseStepper::new(model, eps, policy, corr)?;
    let mut rng: ChaCha8Rng = rng_for(seed);
    let mut s = stepper.start();
    s.y = y0;
    let mut path = PathSample::new(model.d, 1, seed, policy.label());
    stepper.run(&mut s, t_end, &[], &mut rng, |st| {
        path.push(st.t, &st.x, &[st.y]);
        Control::Continue
    })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{CoefficientField, Regime};

    fn zero_model() -> SmallNoiseModel {
        let mut m = SmallNoiseModel::constant_1d(0.5, (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), Regime::Repulsive).unwrap();
        m.x0 = vec![0.3];
        m
    }

    #[test]
    fn all_zero_coefficients_give_constant_path() {
        let p = simulate_small_noise(&zero_model(), 0.1, 1.0, &StepPolicy::uniform(0.01).unwrap(), 3, 0.0).unwrap();
        assert!(p.xs.iter().all(|v| *v == 0.3));
        assert!(p.ys.iter().all(|v| *v == 0.0));
        assert_eq!(*p.times.last().unwrap(), 1.0);
    }

    #[test]
    fn zero_noise_sits_on_unstable_point() {
        let m = SmallNoiseModel::constant_1d(0.5, (1.0, 1.0), (2.0, 2.0), (1.0, 1.0), Regime::Repulsive).unwrap();
        let p = simulate_small_noise(&m, 0.0, 2.0, &StepPolicy::graded(0.01).unwrap(), 1, 0.0).unwrap();
        assert!(p.ys.iter().all(|v| *v == 0.0));
        assert!((p.last_x()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_separable_solution() {
        let m = SmallNoiseModel::constant_1d(0.5, (0.0, 0.0), (1.5, 1.5), (1.0, 1.0), Regime::Repulsive).unwrap();
        let (y0, t, c, g) = (0.2f64, 1.0, 1.5, 0.5);
        let exact = (y0.powf(1.0 - g) + (1.0 - g) * c * t).powf(1.0 / (1.0 - g));
        let mut errs = Vec::new();
        for h in [1e-2, 5e-3] {
            let p = simulate_small_noise_from(&m, y0, 0.0, t, &StepPolicy::uniform(h).unwrap(), 0, 0.0).unwrap();
            errs.push((p.last_y()[0] - exact).abs());
        }
        assert!(errs[1] < 1e-2);
        // First order: halving the step roughly halves the error.
        assert!(errs[0] / errs[1] > 1.7 && errs[0] / errs[1] < 2.3, "{errs:?}");
    }

    #[test]
    fn seed_determinism() {
        let mut m = SmallNoiseModel::constant_1d(0.5, (1.0, -1.0), (1.0, 2.0), (1.0, 0.5), Regime::Repulsive).unwrap();
        m.b = CoefficientField::constant(0.7, 0.2);
        let pol = StepPolicy::graded(1e-2).unwrap();
        let a = simulate_small_noise(&m, 0.05, 1.0, &pol, 42, 0.3).unwrap();
        let b = simulate_small_noise(&m, 0.05, 1.0, &pol, 42, 0.3).unwrap();
        assert_eq!(a, b);
        let c = simulate_small_noise(&m, 0.05, 1.0, &pol, 43, 0.3).unwrap();
        assert_ne!(a.ys, c.ys);
    }

    #[test]
    fn correlation_out_of_range() {
        let m = zero_model();
        assert!(simulate_small_noise(&m, 0.1, 1.0, &StepPolicy::uniform(0.1).unwrap(), 0, 1.5).is_err());
    }

    #[test]
    fn blow_up_reports_last_finite_state() {
        // Huge drift with a coarse step overflows.
        let m = SmallNoiseModel::constant_1d(0.5, (0.0, 0.0), (1e300, 1e300), (1.0, 1.0), Regime::Repulsive).unwrap();
        let err = simulate_small_noise_from(&m, 1e10, 0.0, 10.0, &StepPolicy::uniform(1.0).unwrap(), 0, 0.0).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }));
    }
}
