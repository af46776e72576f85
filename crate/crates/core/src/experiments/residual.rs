use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::ladder::check_ladder;
use super::parallel::{map_indexed, worker_count};
use super::stats::bootstrap_se;
use super::table::{cell, Table};
use crate::analysis::{averaged_characteristics, generator_apply, AveragedCharacteristics, FrozenSampler, TestFunction};
use crate::coeffs::{Side, TwoScaleModel};
use crate::error::{Error, Result};
use crate::sim::{rng_for, Control, StepPolicy, TwoScaleStepper};

/// Resamples used for the bootstrap noise floor.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSettings {
    pub policy: StepPolicy,
    pub sampler: FrozenSampler,
    /// Spacing of the grid on which characteristics are computed and cached.
    pub grid: f64,
    pub bootstrap: usize,
    pub workers: Option<usize>,
}

/// Which drift enters the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorChoice {
    /// The averaged characteristics.
    Averaged,
    /// Pure drift `a(x, 0+)`: the slow drift on the upper branch only.
    UpperBranchDrift,
}

impl GeneratorChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorChoice::Averaged => "averaged",
            GeneratorChoice::UpperBranchDrift => "upper_branch_drift",
        }
    }
}

/// Memoized characteristics on a grid of slow points; each grid cell gets
/// its own sampler seed so values do not depend on the order of requests.
struct CharacteristicsCache<'m> {
    model: &'m TwoScaleModel,
    sampler: FrozenSampler,
    grid: f64,
    choice: GeneratorChoice,
    x_dependent: bool,
    cells: Mutex<BTreeMap<Vec<i64>, Arc<AveragedCharacteristics>>>,
}

fn reseed(sampler: &FrozenSampler, mix: u64) -> FrozenSampler {
    let mut s = *sampler;
    match &mut s {
        FrozenSampler::ClosedForm { seed, .. } | FrozenSampler::Chains { seed, .. } => {
            *seed = seed.wrapping_add(mix.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        }
    }
    s
}

impl<'m> CharacteristicsCache<'m> {
    fn new(model: &'m TwoScaleModel, sampler: FrozenSampler, grid: f64, choice: GeneratorChoice) -> Self {
        let d = model.d;
        let x_dependent = model.slow_drift.depends_on_x(d)
            || model.slow_diffusion.depends_on_x(d)
            || model.slow_jump.depends_on_x(d)
            || model.fast_drift.depends_on_x(d)
            || model.fast_diffusion.depends_on_x(d)
            || model.fast_jump.depends_on_x(d);
        Self {
            model,
            sampler,
            grid,
            choice,
            x_dependent,
            cells: Mutex::new(BTreeMap::new()),
        }
    }

    fn get(&self, x: &[f64]) -> Result<Arc<AveragedCharacteristics>> {
        let key: Vec<i64> = if self.x_dependent {
            x.iter().map(|v| (v / self.grid).round() as i64).collect()
        } else {
            Vec::new()
        };
        if let Some(c) = self.cells.lock().expect("cache lock").get(&key) {
            return Ok(c.clone());
        }
        let point: Vec<f64> = if self.x_dependent {
            key.iter().map(|k| *k as f64 * self.grid).collect()
        } else {
            self.model.x0.clone()
        };
        let value = match self.choice {
            GeneratorChoice::Averaged => {
                let mix = key.iter().fold(0u64, |acc, k| acc.wrapping_mul(31).wrapping_add(*k as u64));
                averaged_characteristics(self.model, &point, &reseed(&self.sampler, mix))?
            }
            GeneratorChoice::UpperBranchDrift => {
                let mut a = vec![0.0; self.model.d];
                let y = vec![0.0; self.model.k];
                self.model.slow_drift.eval_branch_into(Side::Plus, &point, &y, &mut a)?;
                AveragedCharacteristics::drift_only(a)
            }
        };
        let value = Arc::new(value);
        self.cells.lock().expect("cache lock").insert(key, value.clone());
        Ok(value)
    }
}

/// Bounded weight of the past: `(1 + tanh(x_1(s1) - x0_1)) / 2`.
fn history_weight(x: &[f64], x0: &[f64]) -> f64 {
    0.5 * (1.0 + (x[0] - x0[0]).tanh())
}

pub const WEIGHT_LABELS: [&str; 2] = ["one", "history"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub eps: f64,
    pub generator: GeneratorChoice,
    pub test: String,
    pub weight: String,
    /// Monte Carlo mean of `Phi (phi(X_t) - phi(X_s) - int_s^t L phi(X_r) dr)`.
    pub residual: f64,
    /// Bootstrap standard error of the mean.
    pub floor: f64,
    pub n_paths: u64,
}

impl ResidualRow {
    pub fn ratio(&self) -> f64 {
        self.residual.abs() / self.floor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTable {
    pub times: (f64, f64, f64),
    pub rows: Vec<ResidualRow>,
}

impl ResidualTable {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["eps", "generator", "test", "weight", "residual", "floor", "ratio", "n_paths"]);
        for r in &self.rows {
            t.push(vec![
                cell(r.eps),
                r.generator.as_str().into(),
                r.test.clone(),
                r.weight.clone(),
                cell(r.residual),
                cell(r.floor),
                cell(r.ratio()),
                cell(r.n_paths),
            ]);
        }
        t
    }

    /// Rows for one generator, test and weight in ladder order.
    pub fn series(&self, generator: GeneratorChoice, test: &str, weight: &str) -> Vec<&ResidualRow> {
        self.rows
            .iter()
            .filter(|r| r.generator == generator && r.test == test && r.weight == weight)
            .collect()
    }

    /// Distinct `(test, weight)` pairs in first-appearance order.
    pub fn keys(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            let k = (r.test.clone(), r.weight.clone());
            if !out.contains(&k) {
                out.push(k);
            }
        }
        out
    }
}

/// Whether a residual series settles to the noise floor: each rung is no
/// larger than the previous one up to one floor, and the last rung lies
/// within `factor` floors of zero.
pub fn settles_to_floor(series: &[&ResidualRow], factor: f64) -> bool {
    let Some(last) = series.last() else {
        return false;
    };
    series
        .windows(2)
        .all(|w| w[1].residual.abs() <= w[0].residual.abs() + w[1].floor.max(w[0].floor))
        && last.residual.abs() <= factor * last.floor
}

/// Empirical check of the limit martingale problem: for observation times
/// `s1 = T/4 < s = T/2 < t = T`, estimates
/// `E Phi(X(s1)) [phi(X(t)) - phi(X(s)) - int_s^t L phi(X(r)) dr]`
/// for each test function, each weight and each eps.
#[allow(clippy::too_many_arguments)]
pub fn run_martingale_residual(
    model: &TwoScaleModel,
    eps_ladder: &[f64],
    horizon: f64,
    n_paths: u64,
    tests: &[TestFunction],
    seed0: u64,
    settings: &ResidualSettings,
    generators: &[GeneratorChoice],
) -> Result<ResidualTable> {
    model.check_shape()?;
    check_ladder("eps", eps_ladder)?;
    if n_paths < 2 {
        return Err(Error::Precondition("n_paths must be at least 2".into()));
    }
    if tests.is_empty() || tests.iter().any(|t| t.dim() != model.d) {
        return Err(Error::InvalidParameter("need test functions of the slow dimension".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) || !(settings.grid > 0.0) {
        return Err(Error::InvalidParameter("need T > 0 and a positive grid spacing".into()));
    }
    let (s1, s, t) = (0.25 * horizon, 0.5 * horizon, horizon);
    let caches: Vec<CharacteristicsCache> = generators
        .iter()
        .map(|g| CharacteristicsCache::new(model, settings.sampler, settings.grid, *g))
        .collect();
    let workers = worker_count(settings.workers);
    let nt = tests.len();
    let ng = generators.len();
    let mut rows = Vec::new();
    for &eps in eps_ladder {
        // Per path: weights, then per generator and test the bracket.
        let per_path = map_indexed(0..n_paths, workers, |i| {
            let mut stepper = TwoScaleStepper::new(model, eps, &settings.policy, horizon)?;
            let mut rng = rng_for(seed0.wrapping_add(i));
            let mut x = model.x0.clone();
            let mut y = model.y0.clone();
            let mut weights = [1.0, 0.0];
            let mut at_s = vec![0.0; nt];
            let mut at_t = vec![0.0; nt];
            let mut integral = vec![0.0; ng * nt];
            let mut prev: Option<(f64, Vec<f64>)> = None;
            let mut failure = None;
            stepper.run(&mut x, &mut y, horizon, &[s1, s], &mut rng, |time, xs, _| {
                if time == s1 {
                    weights[1] = history_weight(xs, &model.x0);
                }
                if time >= s {
                    let mut values = vec![0.0; ng * nt];
                    for (gi, cache) in caches.iter().enumerate() {
                        let avg = match cache.get(xs) {
                            Ok(a) => a,
                            Err(e) => {
                                failure = Some(e);
                                return Control::Stop;
                            }
                        };
                        for (ti, f) in tests.iter().enumerate() {
                            values[gi * nt + ti] = generator_apply(f, xs, &avg);
                        }
                    }
                    if time == s {
                        for (ti, f) in tests.iter().enumerate() {
                            at_s[ti] = f.value(xs);
                        }
                    } else if let Some((t_prev, v_prev)) = &prev {
                        let h = time - t_prev;
                        for j in 0..values.len() {
                            integral[j] += 0.5 * h * (v_prev[j] + values[j]);
                        }
                    }
                    if time == t {
                        for (ti, f) in tests.iter().enumerate() {
                            at_t[ti] = f.value(xs);
                        }
                    }
                    prev = Some((time, values));
                }
                Control::Continue
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            let mut brackets = vec![0.0; ng * nt];
            for gi in 0..ng {
                for ti in 0..nt {
                    brackets[gi * nt + ti] = at_t[ti] - at_s[ti] - integral[gi * nt + ti];
                }
            }
            Ok((weights, brackets))
        })?;
        for (gi, g) in generators.iter().enumerate() {
            for (ti, f) in tests.iter().enumerate() {
                for (wi, label) in WEIGHT_LABELS.iter().enumerate() {
                    let values: Vec<f64> = per_path.iter().map(|(w, b)| w[wi] * b[gi * nt + ti]).collect();
                    let mean = values.iter().sum::<f64>() / n_paths as f64;
                    let boot_seed = seed0 ^ ((gi * 1_000 + ti * 10 + wi) as u64);
                    rows.push(ResidualRow {
                        eps,
                        generator: *g,
                        test: f.label(),
                        weight: label.to_string(),
                        residual: mean,
                        floor: bootstrap_se(&values, settings.bootstrap, boot_seed),
                        n_paths,
                    });
                }
            }
        }
    }
    Ok(ResidualTable { times: (s1, s, t), rows })
}
