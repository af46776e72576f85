use serde::{Deserialize, Serialize};

use super::ladder::{check_ladder, ConvergenceLadder};
use super::parallel::{map_indexed, worker_count};
use super::stats::{quantile, sorted};
use super::table::{cell, Table};
use super::RunOptions;
use crate::analysis::averaged_drift;
use crate::coeffs::{Regime, SmallNoiseModel};
use crate::error::{Error, Result};
use crate::extremal::averaged_ode_solve;
use crate::sim::{rng_for, Control, SmallNoiseStepper};

/// Times at which `Y^2` is recorded for the second-moment profile.
pub const MOMENT_POINTS: usize = 100;

/// `sup_t E Y^2(t)` per rung and the constant `C` fitted at the largest eps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub eps: Vec<f64>,
    pub sup_second_moment: Vec<f64>,
    pub c_fit: f64,
    /// `sup_t E Y^2 <= C eps^2` at each rung.
    pub holds: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionResult {
    /// Median of `sup_t |X_eps(t) - Xbar(t)|`.
    pub deviation: ConvergenceLadder,
    /// Median of `sup_t |Y_eps(t)|`.
    pub fast_sup: ConvergenceLadder,
    pub moments: MomentBound,
}

impl AttractionResult {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "eps",
            "n_paths",
            "median_sup_x_deviation",
            "median_sup_abs_y",
            "sup_mean_y2",
            "moment_bound_holds",
            "y_slope",
        ]);
        for i in 0..self.deviation.len() {
            t.push(vec![
                cell(self.deviation.values[i]),
                cell(self.deviation.counts[i]),
                cell(self.deviation.estimates[i]),
                cell(self.fast_sup.estimates[i]),
                cell(self.moments.sup_second_moment[i]),
                cell(self.moments.holds[i]),
                self.fast_sup.slope.map(|s| s.to_string()).unwrap_or_default(),
            ]);
        }
        t
    }
}

/// Approximate standard error of a sample median from the interquartile range.
fn median_se(sorted: &[f64]) -> f64 {
    let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    1.2533 * iqr / 1.349 / (sorted.len() as f64).sqrt()
}

/// Deviation of the small-noise system from the averaged ODE along an eps
/// ladder, with the fast-component size and second-moment profile.
pub fn run_attraction(
    model: &SmallNoiseModel,
    eps_ladder: &[f64],
    horizon: f64,
    n_paths: u64,
    seed0: u64,
    opts: &RunOptions,
) -> Result<AttractionResult> {
    model.check_shape()?;
    model.require_regime(Regime::Attractive)?;
    check_ladder("eps", eps_ladder)?;
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be positive".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon T = {horizon} must be positive")));
    }
    let xbar = averaged_ode_solve(|x| averaged_drift(x, model), &model.x0, horizon, (horizon / 1000.0).min(1e-2))?;
    let stops: Vec<f64> = (1..=MOMENT_POINTS).map(|i| horizon * i as f64 / MOMENT_POINTS as f64).collect();
    let workers = worker_count(opts.workers);
    let mut dev_med = Vec::new();
    let mut dev_err = Vec::new();
    let mut y_med = Vec::new();
    let mut y_err = Vec::new();
    let mut sup_m2 = Vec::new();
    for &eps in eps_ladder {
        let per_path = map_indexed(0..n_paths, workers, |i| {
            let mut stepper = SmallNoiseStepper::new(model, eps, &opts.policy, opts.corr)?;
            let mut rng = rng_for(seed0.wrapping_add(i));
            let mut s = stepper.start();
            let mut dev = 0.0f64;
            let mut ysup = 0.0f64;
            let mut y2 = Vec::with_capacity(MOMENT_POINTS);
            let mut next = 0;
            stepper.run(&mut s, horizon, &stops, &mut rng, |st| {
                let xb = xbar.eval(st.t);
                let d: f64 = st.x.iter().zip(&xb).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                dev = dev.max(d);
                ysup = ysup.max(st.y.abs());
                if next < stops.len() && st.t == stops[next] {
                    y2.push(st.y * st.y);
                    next += 1;
                }
                Control::Continue
            })?;
            Ok((dev, ysup, y2))
        })?;
        let devs = sorted(&per_path.iter().map(|p| p.0).collect::<Vec<_>>());
        let ys = sorted(&per_path.iter().map(|p| p.1).collect::<Vec<_>>());
        dev_med.push(quantile(&devs, 0.5));
        dev_err.push(median_se(&devs));
        y_med.push(quantile(&ys, 0.5));
        y_err.push(median_se(&ys));
        let mut profile = vec![0.0; MOMENT_POINTS];
        for p in &per_path {
            for (acc, v) in profile.iter_mut().zip(&p.2) {
                *acc += v;
            }
        }
        sup_m2.push(profile.iter().fold(0.0f64, |m, v| m.max(v / n_paths as f64)));
    }
    let counts = vec![n_paths; eps_ladder.len()];
    let largest = (0..eps_ladder.len())
        .max_by(|a, b| eps_ladder[*a].total_cmp(&eps_ladder[*b]))
        .expect("ladder is non-empty");
    let c_fit = sup_m2[largest] / eps_ladder[largest].powi(2);
    let holds = eps_ladder
        .iter()
        .zip(&sup_m2)
        .map(|(e, m)| *m <= c_fit * e * e * (1.0 + 1e-12))
        .collect();
    Ok(AttractionResult {
        deviation: ConvergenceLadder::new("eps", "median_sup_x_deviation", eps_ladder.to_vec(), dev_med, dev_err, counts.clone())?,
        fast_sup: ConvergenceLadder::new("eps", "median_sup_abs_y", eps_ladder.to_vec(), y_med, y_err, counts)?,
        moments: MomentBound {
            eps: eps_ladder.to_vec(),
            sup_second_moment: sup_m2,
            c_fit,
            holds,
        },
    })
}
