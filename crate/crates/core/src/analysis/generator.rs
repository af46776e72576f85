use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::frozen::{invariant_density, FrozenParams};
use crate::coeffs::{norm, Side, TwoScaleModel};
use crate::error::{Error, Result};

/// `prod_i (x_i - c_i)^(k_i)` times the C^2 bump `(1 - |x - c|^2 / R^2)^3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub exponents: Vec<u32>,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl TestFunction {
    pub const MAX_DEGREE: u32 = 3;

    pub fn new(exponents: Vec<u32>, center: Vec<f64>, radius: f64) -> Result<Self> {
        if exponents.len() != center.len() || center.is_empty() {
            return Err(Error::InvalidParameter("exponents and center must have the same positive length".into()));
        }
        if exponents.iter().sum::<u32>() > Self::MAX_DEGREE {
            return Err(Error::InvalidParameter(format!(
                "polynomial degree {} exceeds {}",
                exponents.iter().sum::<u32>(),
                Self::MAX_DEGREE
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("bump radius {radius} must be positive")));
        }
        Ok(Self {
            exponents,
            center,
            radius,
        })
    }

    /// Every monomial of total degree at most 3 on a common bump.
    pub fn registry(center: &[f64], radius: f64) -> Result<Vec<Self>> {
        let d = center.len();
        let mut out = Vec::new();
        let mut exps = vec![0u32; d];
        loop {
            if exps.iter().sum::<u32>() <= Self::MAX_DEGREE {
                out.push(Self::new(exps.clone(), center.to_vec(), radius)?);
            }
            // Odometer over {0..=3}^d.
            let mut i = 0;
            loop {
                if i == d {
                    return Ok(out);
                }
                exps[i] += 1;
                if exps[i] <= Self::MAX_DEGREE {
                    break;
                }
                exps[i] = 0;
                i += 1;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn label(&self) -> String {
        let e: Vec<String> = self.exponents.iter().map(|k| k.to_string()).collect();
        format!("poly[{}]", e.join(","))
    }

    fn monomials(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut m = Vec::with_capacity(self.dim());
        let mut m1 = Vec::with_capacity(self.dim());
        let mut m2 = Vec::with_capacity(self.dim());
        for ((xi, ci), k) in x.iter().zip(&self.center).zip(&self.exponents) {
            let z = xi - ci;
            let k = *k as i32;
            m.push(z.powi(k));
            m1.push(if k >= 1 { k as f64 * z.powi(k - 1) } else { 0.0 });
            m2.push(if k >= 2 { (k * (k - 1)) as f64 * z.powi(k - 2) } else { 0.0 });
        }
        (m, m1, m2)
    }

    fn q(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let q = self.q(x);
        if q >= 1.0 {
            return 0.0;
        }
        let (m, _, _) = self.monomials(x);
        m.iter().product::<f64>() * (1.0 - q).powi(3)
    }

    /// Gradient and row-major Hessian.
    pub fn derivatives(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        let q = self.q(x);
        if q >= 1.0 {
            return (grad, hess);
        }
        let r2 = self.radius * self.radius;
        let (m, m1, m2) = self.monomials(x);
        let prod_except = |skip: &[usize]| -> f64 {
            m.iter()
                .enumerate()
                .filter(|(i, _)| !skip.contains(i))
                .map(|(_, v)| v)
                .product()
        };
        let p: f64 = m.iter().product();
        let dp: Vec<f64> = (0..d).map(|i| m1[i] * prod_except(&[i])).collect();
        let bump = (1.0 - q).powi(3);
        let dq: Vec<f64> = (0..d).map(|i| 2.0 * (x[i] - self.center[i]) / r2).collect();
        let db: Vec<f64> = dq.iter().map(|v| -3.0 * (1.0 - q).powi(2) * v).collect();
        for i in 0..d {
            grad[i] = p * db[i] + bump * dp[i];
            for j in 0..d {
                let ddp = if i == j {
                    m2[i] * prod_except(&[i])
                } else {
                    m1[i] * m1[j] * prod_except(&[i, j])
                };
                let mut ddb = 6.0 * (1.0 - q) * dq[i] * dq[j];
                if i == j {
                    ddb -= 3.0 * (1.0 - q).powi(2) * 2.0 / r2;
                }
                hess[i * d + j] = p * ddb + dp[i] * db[j] + db[i] * dp[j] + bump * ddp;
            }
        }
        (grad, hess)
    }
}

/// Jump vector with its intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelAtom {
    pub jump: Vec<f64>,
    pub weight: f64,
}

/// Coefficients of the limit generator at one slow point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedCharacteristics {
    pub drift: Vec<f64>,
    /// Row-major `d x d`.
    pub diffusion: Vec<f64>,
    /// Image of the marks with `|u| <= rho`, integrated with compensation.
    pub small_jumps: Vec<KernelAtom>,
    /// Image of the marks with `|u| > rho`.
    pub large_jumps: Vec<KernelAtom>,
    pub drift_stderr: Vec<f64>,
    pub samples: usize,
}

impl AveragedCharacteristics {
    pub fn drift_only(drift: Vec<f64>) -> Self {
        let d = drift.len();
        Self {
            drift,
            diffusion: vec![0.0; d * d],
            small_jumps: Vec::new(),
            large_jumps: Vec::new(),
            drift_stderr: vec![0.0; d],
            samples: 0,
        }
    }
}

/// `L phi(x) = grad phi . a + 1/2 tr(b D^2 phi)
///   + int [phi(x+v) - phi(x) - grad phi . v] K_small(dv) + int [phi(x+v) - phi(x)] K_large(dv)`.
pub fn generator_apply(phi: &TestFunction, x: &[f64], avg: &AveragedCharacteristics) -> f64 {
    let d = x.len();
    let (grad, hess) = phi.derivatives(x);
    let mut out: f64 = grad.iter().zip(&avg.drift).map(|(g, a)| g * a).sum();
    let mut trace = 0.0;
    for i in 0..d {
        for j in 0..d {
            trace += avg.diffusion[i * d + j] * hess[j * d + i];
        }
    }
    out += 0.5 * trace;
    let base = phi.value(x);
    let mut shifted = vec![0.0; d];
    for atom in &avg.small_jumps {
        for i in 0..d {
            shifted[i] = x[i] + atom.jump[i];
        }
        let lin: f64 = grad.iter().zip(&atom.jump).map(|(g, v)| g * v).sum();
        out += atom.weight * (phi.value(&shifted) - base - lin);
    }
    for atom in &avg.large_jumps {
        for i in 0..d {
            shifted[i] = x[i] + atom.jump[i];
        }
        out += atom.weight * (phi.value(&shifted) - base);
    }
    out
}

/// How draws from the stationary law of the frozen fast equation are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FrozenSampler {
    /// Exact iid draws; requires a scalar fast equation of signed-power form
    /// with coefficients constant on each half-line and no fast jumps.
    ClosedForm { samples: usize, seed: u64 },
    /// Independent Euler chains of the frozen equation in fast time.
    Chains {
        chains: usize,
        samples_per_chain: usize,
        burn_in: f64,
        spacing: f64,
        dt: f64,
        seed: u64,
        #[serde(default = "default_rhat")]
        rhat_threshold: f64,
    },
}

fn default_rhat() -> f64 {
    1.1
}

/// Mark atoms used for the image kernels of density-valued jump measures.
const DENSITY_NODES: usize = 32;

/// Frozen parameters when the fast equation of `tm` has the signed-power form.
pub fn closed_form_params(tm: &TwoScaleModel, x: &[f64]) -> Result<FrozenParams> {
    let gamma = match tm.fast_drift_power {
        Some(g) if tm.k == 1 && g > 0.0 && g < 1.0 => g,
        _ => {
            return Err(Error::Precondition(
                "closed-form sampling needs a scalar fast drift F(x) sgnpow(y, gamma) with gamma in (0, 1)".into(),
            ))
        }
    };
    if tm.fast_drift.depends_on_y(tm.d) || tm.fast_diffusion.depends_on_y(tm.d) || !tm.fast_jumps.is_zero() {
        return Err(Error::Precondition(
            "closed-form sampling needs fast coefficients independent of y and no fast jumps".into(),
        ));
    }
    let zero = [0.0];
    FrozenParams::new(
        gamma,
        tm.fast_drift.branch(Side::Plus)[0].eval(x, &zero),
        tm.fast_drift.branch(Side::Minus)[0].eval(x, &zero),
        tm.fast_diffusion.branch(Side::Plus)[0].eval(x, &zero).abs(),
        tm.fast_diffusion.branch(Side::Minus)[0].eval(x, &zero).abs(),
    )
}

/// Split-chain potential scale reduction factor.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[h..2 * h]]
        })
        .collect();
    let m = halves.len() as f64;
    let n = halves[0].len() as f64;
    if m < 2.0 || n < 2.0 {
        return f64::INFINITY;
    }
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|v| (v - grand).powi(2)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

fn run_chains(tm: &TwoScaleModel, x: &[f64], sampler: &FrozenSampler) -> Result<Vec<Vec<Vec<f64>>>> {
    let FrozenSampler::Chains {
        chains,
        samples_per_chain,
        burn_in,
        spacing,
        dt,
        seed,
        rhat_threshold,
    } = *sampler
    else {
        unreachable!("called with chain sampler only");
    };
    if chains < 2 || samples_per_chain < 4 || !(dt > 0.0 && spacing > 0.0 && burn_in >= 0.0) {
        return Err(Error::InvalidParameter(
            "chain sampler needs >= 2 chains, >= 4 samples each and positive steps".into(),
        ));
    }
    let k = tm.k;
    let l = tm.fast_jumps.dim;
    let jumps = tm.fast_jumps.compile(tm.rho)?;
    let rate = jumps.total_rate();
    let mut drift = vec![0.0; k];
    let mut diff = vec![0.0; k * k];
    let mut hmat = vec![0.0; k * l];
    let mut mark = vec![0.0; l];
    let mut noise = vec![0.0; k];
    let mut out = Vec::with_capacity(chains);
    for c in 0..chains {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
        // Overdispersed starts.
        let mut y: Vec<f64> = (0..k).map(|_| 2.0 * { let z: f64 = StandardNormal.sample(&mut rng); z }).collect();
        let mut next_jump = if rate > 0.0 {
            Exp::new(rate).expect("positive rate").sample(&mut rng)
        } else {
            f64::INFINITY
        };
        let mut t = 0.0;
        let mut samples = Vec::with_capacity(samples_per_chain);
        for s in 0..samples_per_chain {
            let target = burn_in + s as f64 * spacing;
            while t < target {
                let h = dt.min(target - t);
                tm.fast_drift_into(x, &y, &mut drift)?;
                tm.fast_diffusion.eval_into(x, &y, &mut diff)?;
                for n in noise.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *n = z * h.sqrt();
                }
                if rate > 0.0 {
                    tm.fast_jump.eval_into(x, &y, &mut hmat)?;
                }
                let mut y_new = y.clone();
                for i in 0..k {
                    let mut v = drift[i] * h;
                    for j in 0..k {
                        v += diff[i * k + j] * noise[j];
                    }
                    for j in 0..l {
                        v -= hmat[i * l + j] * jumps.small_mean[j] * h;
                    }
                    y_new[i] += v;
                }
                t += h;
                while next_jump <= t {
                    jumps.sample_mark(&mut rng, &mut mark);
                    for i in 0..k {
                        for j in 0..l {
                            y_new[i] += hmat[i * l + j] * mark[j];
                        }
                    }
                    next_jump += Exp::new(rate).expect("positive rate").sample(&mut rng);
                }
                if y_new.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Integration {
                        time: t,
                        x: x.to_vec(),
                        y: y.clone(),
                    });
                }
                y = y_new;
            }
            samples.push(y.clone());
        }
        out.push(samples);
    }
    let first: Vec<Vec<f64>> = out.iter().map(|c| c.iter().map(|s| s[0]).collect()).collect();
    let rhat = split_rhat(&first);
    if !(rhat <= rhat_threshold) {
        return Err(Error::Sampling(format!(
            "split-chain R-hat {rhat:.4} exceeds {rhat_threshold} at x = {x:?}"
        )));
    }
    Ok(out)
}

/// Averages of the slow coefficients of `tm` against the stationary law of
/// the frozen fast equation at `x`.
pub fn averaged_characteristics(tm: &TwoScaleModel, x: &[f64], sampler: &FrozenSampler) -> Result<AveragedCharacteristics> {
    tm.check_shape()?;
    // Draws grouped in batches; standard errors come from batch means.
    let batches: Vec<Vec<Vec<f64>>> = match sampler {
        FrozenSampler::ClosedForm { samples, seed } => {
            if *samples < 2 {
                return Err(Error::InvalidParameter("closed-form sampler needs at least 2 draws".into()));
            }
            let density = invariant_density(&closed_form_params(tm, x)?)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*samples).map(|_| vec![vec![density.sample(&mut rng)]]).collect()
        }
        FrozenSampler::Chains { .. } => run_chains(tm, x, sampler)?,
    };
    let d = tm.d;
    let m = tm.slow_jumps.dim;
    let atoms = tm.slow_jumps.discretize(DENSITY_NODES);
    let mut drift = vec![0.0; d];
    let mut diffusion = vec![0.0; d * d];
    let mut small: BTreeMap<Vec<u64>, (Vec<f64>, f64)> = BTreeMap::new();
    let mut large: BTreeMap<Vec<u64>, (Vec<f64>, f64)> = BTreeMap::new();
    let mut a = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    let mut g = vec![0.0; d * m];
    let mut batch_means = Vec::with_capacity(batches.len());
    let total: usize = batches.iter().map(|b| b.len()).sum();
    let w = 1.0 / total as f64;
    for batch in &batches {
        let mut bm = vec![0.0; d];
        for y in batch {
            tm.slow_drift.eval_into(x, y, &mut a)?;
            tm.slow_diffusion.eval_into(x, y, &mut sigma)?;
            for i in 0..d {
                drift[i] += w * a[i];
                bm[i] += a[i] / batch.len() as f64;
                for j in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += sigma[i * d + l] * sigma[j * d + l];
                    }
                    diffusion[i * d + j] += w * s;
                }
            }
            if !atoms.is_empty() {
                tm.slow_jump.eval_into(x, y, &mut g)?;
                for atom in &atoms {
                    let jump: Vec<f64> = (0..d)
                        .map(|i| (0..m).map(|j| g[i * m + j] * atom.location[j]).sum())
                        .collect();
                    let key: Vec<u64> = jump.iter().map(|v| v.to_bits()).collect();
                    let target = if norm(&atom.location) <= tm.rho {
                        &mut small
                    } else {
                        &mut large
                    };
                    target.entry(key).or_insert_with(|| (jump, 0.0)).1 += w * atom.weight;
                }
            }
        }
        batch_means.push(bm);
    }
    let nb = batch_means.len() as f64;
    let drift_stderr = (0..d)
        .map(|i| {
            let mean = batch_means.iter().map(|b| b[i]).sum::<f64>() / nb;
            let var = batch_means.iter().map(|b| (b[i] - mean).powi(2)).sum::<f64>() / (nb - 1.0);
            (var / nb).sqrt()
        })
        .collect();
    let collect = |map: BTreeMap<Vec<u64>, (Vec<f64>, f64)>| {
        map.into_values()
            .filter(|(jump, _)| jump.iter().any(|v| *v != 0.0))
            .map(|(jump, weight)| KernelAtom { jump, weight })
            .collect()
    };
    Ok(AveragedCharacteristics {
        drift,
        diffusion,
        small_jumps: collect(small),
        large_jumps: collect(large),
        drift_stderr,
        samples: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(exps: Vec<u32>, d: usize) -> TestFunction {
        TestFunction::new(exps, vec![0.3; d], 1.5).unwrap()
    }

    #[test]
    fn registry_sizes() {
        assert_eq!(TestFunction::registry(&[0.0], 1.0).unwrap().len(), 4);
        assert_eq!(TestFunction::registry(&[0.0, 0.0], 1.0).unwrap().len(), 10);
        assert!(TestFunction::new(vec![2, 2], vec![0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = bump(vec![2, 1], 2);
        let x = [0.7, -0.2];
        let (g, h) = f.derivatives(&x);
        let e = 1e-5;
        for i in 0..2 {
            let mut p = x;
            let mut m = x;
            p[i] += e;
            m[i] -= e;
            let fd = (f.value(&p) - f.value(&m)) / (2.0 * e);
            assert!((fd - g[i]).abs() < 1e-8, "grad {i}: {fd} vs {}", g[i]);
            let (gp, _) = f.derivatives(&p);
            let (gm, _) = f.derivatives(&m);
            for j in 0..2 {
                let fd2 = (gp[j] - gm[j]) / (2.0 * e);
                assert!((fd2 - h[j * 2 + i]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn pure_drift_term() {
        let f = bump(vec![1], 1);
        let avg = AveragedCharacteristics::drift_only(vec![0.8]);
        let (g, _) = f.derivatives(&[0.0]);
        assert!((generator_apply(&f, &[0.0], &avg) - 0.8 * g[0]).abs() < 1e-15);
    }

    #[test]
    fn uncompensated_atom_term() {
        let f = bump(vec![1], 1);
        let mut avg = AveragedCharacteristics::drift_only(vec![0.0]);
        avg.large_jumps.push(KernelAtom {
            jump: vec![0.4],
            weight: 2.5,
        });
        let x = [0.1];
        let expected = 2.5 * (f.value(&[0.5]) - f.value(&x));
        assert!((generator_apply(&f, &x, &avg) - expected).abs() < 1e-15);
    }

    #[test]
    fn linear_in_characteristics() {
        let f = bump(vec![1, 1], 2);
        let x = [0.2, 0.5];
        let mut a = AveragedCharacteristics::drift_only(vec![1.0, -0.5]);
        a.diffusion = vec![0.3, 0.1, 0.1, 0.2];
        let mut b = AveragedCharacteristics::drift_only(vec![-2.0, 0.25]);
        b.diffusion = vec![1.0, 0.0, 0.0, 0.4];
        let mut sum = a.clone();
        for i in 0..2 {
            sum.drift[i] += b.drift[i];
        }
        for i in 0..4 {
            sum.diffusion[i] += b.diffusion[i];
        }
        let lhs = generator_apply(&f, &x, &sum);
        let rhs = generator_apply(&f, &x, &a) + generator_apply(&f, &x, &b);
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn rhat_of_identical_chains_is_near_one() {
        let c: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let r = split_rhat(&[c.clone(), c.clone(), c]);
        assert!(r < 1.05, "{r}");
        let a: Vec<f64> = vec![0.0; 100].into_iter().enumerate().map(|(i, _)| (i % 3) as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
        assert!(split_rhat(&[a, b]) > 2.0);
    }
}
