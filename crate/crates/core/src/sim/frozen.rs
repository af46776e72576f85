use rand::Rng;
use rand_distr::StandardNormal;

use super::path::PathSample;
use super::rng_for;
use crate::analysis::FrozenParams;
use crate::coeffs::{signed_pow_raw, Regime, SmallNoiseModel};
use crate::error::{Error, Result};

/// Euler-Maruyama stepper for the frozen fast equation
/// `dy = (phi+ 1_{y>0} + phi- 1_{y<0}) sgnpow(y, gamma) dt + (beta+ 1_{y>=0} + beta- 1_{y<0}) dW`.
#[derive(Debug, Clone, Copy)]
pub struct FrozenStepper {
    phi_plus: f64,
    phi_minus: f64,
    beta_plus: f64,
    beta_minus: f64,
    gamma: f64,
}

impl FrozenStepper {
    /// Diffusion values may be zero here (deterministic relaxation).
    pub fn new(p: &FrozenParams, regime: Regime) -> Result<Self> {
        let signs_ok = match regime {
            Regime::Attractive => p.phi_plus < 0.0 && p.phi_minus < 0.0,
            Regime::Repulsive => p.phi_plus > 0.0 && p.phi_minus > 0.0,
        };
        if !signs_ok {
            return Err(Error::Domain(format!(
                "phi+ = {}, phi- = {} do not have the signs of the {} regime",
                p.phi_plus,
                p.phi_minus,
                regime.as_str()
            )));
        }
        Ok(Self {
            phi_plus: p.phi_plus,
            phi_minus: p.phi_minus,
            beta_plus: p.beta_plus,
            beta_minus: p.beta_minus,
            gamma: p.gamma.value(),
        })
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, y: f64, h: f64, sqrt_h: f64, rng: &mut R) -> f64 {
        let (phi, beta) = if y >= 0.0 {
            (self.phi_plus, self.beta_plus)
        } else {
            (self.phi_minus, self.beta_minus)
        };
        let z: f64 = rng.sample(StandardNormal);
        y + phi * signed_pow_raw(y, self.gamma) * h + beta * sqrt_h * z
    }

    /// Runs `steps` steps of size `h`, returning the terminal value and the
    /// number of steps that ended with `y > 0`.
    pub fn run<R: Rng + ?Sized>(&self, y0: f64, h: f64, steps: u64, rng: &mut R) -> Result<(f64, u64)> {
        let sq = h.sqrt();
        let mut y = y0;
        let mut positive = 0;
        for i in 0..steps {
            let next = self.step(y, h, sq, rng);
            if !next.is_finite() {
                return Err(Error::Integration {
                    time: i as f64 * h,
                    x: Vec::new(),
                    y: vec![y],
                });
            }
            y = next;
            positive += (y > 0.0) as u64;
        }
        Ok((y, positive))
    }
}

/// Path of the frozen fast equation at slow point `x`; the record has no
/// slow component.
pub fn simulate_frozen(x: &[f64], model: &SmallNoiseModel, y0: f64, t_end: f64, dt: f64, seed: u64) -> Result<PathSample> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("need dt > 0 and T > 0, got dt = {dt}, T = {t_end}")));
    }
    let stepper = FrozenStepper::new(&model.frozen_params(x)?, Regime::Attractive)?;
    let mut rng = rng_for(seed);
    let mut path = PathSample::new(0, 1, seed, format!("uniform:{dt}"));
    let mut y = y0;
    let mut t = 0.0;
    path.push(t, &[], &[y]);
    let snap = 1e-12 * t_end.max(1.0);
    while t < t_end {
        let h = dt.min(t_end - t);
        let next = stepper.step(y, h, h.sqrt(), &mut rng);
        if !next.is_finite() {
            return Err(Error::Integration {
                time: t,
                x: x.to_vec(),
                y: vec![y],
            });
        }
        y = next;
        t += h;
        if (t_end - t).abs() <= snap {
            t = t_end;
        }
        path.push(t, &[], &[y]);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(phi: (f64, f64), beta: (f64, f64)) -> SmallNoiseModel {
        SmallNoiseModel::constant_1d(0.5, (0.0, 0.0), phi, beta, Regime::Attractive).unwrap()
    }

    #[test]
    fn zero_start_without_noise_stays_zero() {
        let p = simulate_frozen(&[0.0], &model((-1.0, -1.0), (0.0, 0.0)), 0.0, 5.0, 0.01, 9).unwrap();
        assert!(p.ys.iter().all(|v| *v == 0.0));
        assert_eq!(p.d, 0);
    }

    #[test]
    fn deterministic_relaxation_reaches_zero_in_finite_time() {
        let y0 = 0.64f64;
        let p = simulate_frozen(&[0.0], &model((-1.0, -1.0), (0.0, 0.0)), y0, 3.0, 1e-5, 0).unwrap();
        // Monotone until the first step that would cross zero.
        let hit = p.ys.iter().position(|v| *v <= 1e-6).unwrap();
        assert!(p.ys[..hit].windows(2).all(|w| w[1] < w[0]));
        let expected = y0.powf(0.5) / 0.5;
        assert!((p.times[hit] - expected).abs() < 5e-3, "{} vs {expected}", p.times[hit]);
    }

    #[test]
    fn repulsive_signs_rejected() {
        let m = SmallNoiseModel::constant_1d(0.5, (0.0, 0.0), (1.0, 1.0), (1.0, 1.0), Regime::Repulsive).unwrap();
        assert!(matches!(simulate_frozen(&[0.0], &m, 0.0, 1.0, 0.1, 0), Err(Error::Domain(_))));
    }
}
