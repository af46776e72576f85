use serde::{Deserialize, Serialize};

use super::parallel::{map_indexed, worker_count};
use super::stats::{binomial_halfwidth, quantile, sorted, ExactSum};
use super::table::{cell, Table};
use super::RunOptions;
use crate::coeffs::{Regime, Side, SmallNoiseModel};
use crate::error::{Error, Result};
use crate::extremal::{extremal_solution, ExtremalSolution};
use crate::sim::{rng_for, Control, SmallNoiseStepper};

/// Multiple of the noiseless exit time after which a path counts as capped.
pub const CAP_FACTOR: f64 = 100.0;

/// Fraction of capped paths above which an estimate carries a warning.
pub const CAPPED_WARNING: f64 = 0.01;

/// Mergeable counts of an exit experiment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitTally {
    pub n_plus: u64,
    pub n_minus: u64,
    pub n_capped: u64,
    pub time_sum: ExactSum,
    pub time_sq_sum: ExactSum,
}

impl ExitTally {
    pub fn merge(&mut self, other: &ExitTally) {
        self.n_plus += other.n_plus;
        self.n_minus += other.n_minus;
        self.n_capped += other.n_capped;
        self.time_sum.merge(&other.time_sum);
        self.time_sq_sum.merge(&other.time_sq_sum);
    }

    pub fn exited(&self) -> u64 {
        self.n_plus + self.n_minus
    }

    pub fn total(&self) -> u64 {
        self.exited() + self.n_capped
    }

    pub fn mean_time(&self) -> f64 {
        self.time_sum.value() / self.exited() as f64
    }

    pub fn time_sd(&self) -> f64 {
        let n = self.exited() as f64;
        let mean = self.mean_time();
        ((self.time_sq_sum.value() / n - mean * mean).max(0.0) * n / (n - 1.0)).sqrt()
    }
}

/// Exit-side frequencies with a binomial interval and exit-time statistics.
/// Capped paths are excluded from the frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEstimate {
    pub eps: f64,
    pub delta: f64,
    pub n_paths: u64,
    pub tally: ExitTally,
    pub p_plus_hat: f64,
    pub p_minus_hat: f64,
    pub ci_halfwidth: f64,
    pub mean_exit_time: f64,
    pub exit_time_sd: f64,
    pub capped_fraction: f64,
    /// Set when more than 1% of the paths hit the time cap.
    pub warning: bool,
}

impl SelectionEstimate {
    pub fn from_tally(eps: f64, delta: f64, tally: ExitTally) -> Self {
        let exited = tally.exited();
        let p_plus_hat = tally.n_plus as f64 / exited as f64;
        let capped_fraction = tally.n_capped as f64 / tally.total() as f64;
        Self {
            eps,
            delta,
            n_paths: tally.total(),
            tally,
            p_plus_hat,
            p_minus_hat: tally.n_minus as f64 / exited as f64,
            ci_halfwidth: binomial_halfwidth(p_plus_hat, exited),
            mean_exit_time: tally.mean_time(),
            exit_time_sd: tally.time_sd(),
            capped_fraction,
            warning: capped_fraction > CAPPED_WARNING,
        }
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "eps",
            "delta",
            "n_paths",
            "n_plus",
            "n_minus",
            "n_capped",
            "p_plus_hat",
            "p_minus_hat",
            "ci_halfwidth",
            "mean_exit_time",
            "exit_time_sd",
            "warning",
        ]);
        t.push(vec![
            cell(self.eps),
            cell(self.delta),
            cell(self.n_paths),
            cell(self.tally.n_plus),
            cell(self.tally.n_minus),
            cell(self.tally.n_capped),
            cell(self.p_plus_hat),
            cell(self.p_minus_hat),
            cell(self.ci_halfwidth),
            cell(self.mean_exit_time),
            cell(self.exit_time_sd),
            cell(self.warning),
        ]);
        t
    }
}

/// `CAP_FACTOR * delta^(1-gamma) / ((1-gamma) min phi)`.
pub fn exit_time_cap(model: &SmallNoiseModel, delta: f64) -> Result<f64> {
    let g = model.gamma.complement();
    Ok(CAP_FACTOR * delta.powf(g) / (g * model.min_phi_at_start()?))
}

pub(crate) fn check_exit_setup(model: &SmallNoiseModel, eps: f64, delta: f64) -> Result<()> {
    model.check_shape()?;
    model.require_regime(Regime::Repulsive)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    // The fast drift must keep its sign across the exit interval at x0.
    let probes = [
        (Side::Plus, 0.0),
        (Side::Plus, 0.5 * delta),
        (Side::Plus, delta),
        (Side::Minus, 0.0),
        (Side::Minus, -0.5 * delta),
        (Side::Minus, -delta),
    ];
    for (side, y) in probes {
        let v = model.phi.eval_branch_scalar(side, &model.x0, y)?;
        if !(v > 0.0) {
            return Err(Error::Precondition(format!(
                "phi changes sign within |y| <= delta = {delta} at x0 (value {v} at y = {y}); reduce delta"
            )));
        }
    }
    Ok(())
}

/// Exit tallies for the paths with seeds `seed0 + i`, `i` in `range`.
pub fn exit_tally(model: &SmallNoiseModel, eps: f64, delta: f64, range: std::ops::Range<u64>, seed0: u64, opts: &RunOptions) -> Result<ExitTally> {
    check_exit_setup(model, eps, delta)?;
    let cap = exit_time_cap(model, delta)?;
    let outcomes = map_indexed(range, worker_count(opts.workers), |i| {
        let mut stepper = SmallNoiseStepper::new(model, eps, &opts.policy, opts.corr)?;
        let mut rng = rng_for(seed0.wrapping_add(i));
        let mut s = stepper.start();
        stepper.run_to_exit(&mut s, delta, cap, &mut rng)
    })?;
    let mut tally = ExitTally::default();
    for o in outcomes {
        match o.side {
            Some(side) => {
                if side == Side::Plus {
                    tally.n_plus += 1;
                } else {
                    tally.n_minus += 1;
                }
                tally.time_sum.add(o.time);
                tally.time_sq_sum.add(o.time * o.time);
            }
            None => tally.n_capped += 1,
        }
    }
    Ok(tally)
}

/// Monte Carlo estimate of the exit-side probabilities through `|y| = delta`.
pub fn run_selection(model: &SmallNoiseModel, eps: f64, delta: f64, n_paths: u64, seed0: u64, opts: &RunOptions) -> Result<SelectionEstimate> {
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be positive".into()));
    }
    let tally = exit_tally(model, eps, delta, 0..n_paths, seed0, opts)?;
    if tally.exited() == 0 {
        return Err(Error::Precondition(format!(
            "all {n_paths} paths hit the time cap; eps is too large for delta = {delta}"
        )));
    }
    Ok(SelectionEstimate::from_tally(eps, delta, tally))
}

/// Distribution of the sup-distance to the extremal solution on the exit side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideDistances {
    pub count: u64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwiseSelection {
    pub eps: f64,
    pub delta: f64,
    pub horizon: f64,
    pub n_paths: u64,
    pub n_capped: u64,
    pub plus: SideDistances,
    pub minus: SideDistances,
}

impl PathwiseSelection {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "eps", "delta", "T", "side", "count", "q10", "median", "q90", "n_capped",
        ]);
        for (name, s) in [("plus", &self.plus), ("minus", &self.minus)] {
            t.push(vec![
                cell(self.eps),
                cell(self.delta),
                cell(self.horizon),
                name.into(),
                cell(s.count),
                cell(s.q10),
                cell(s.median),
                cell(s.q90),
                cell(self.n_capped),
            ]);
        }
        t
    }
}

fn side_stats(values: &[f64]) -> SideDistances {
    let s = sorted(values);
    SideDistances {
        count: values.len() as u64,
        q10: quantile(&s, 0.1),
        median: quantile(&s, 0.5),
        q90: quantile(&s, 0.9),
    }
}

/// `sup_{t <= T} |X(t) - X^s(t)| + |Y(t) - Y^s(t)|` against the extremal
/// solution `s` on the side where `|Y|` first reached `delta`.
pub fn run_pathwise_selection(
    model: &SmallNoiseModel,
    eps: f64,
    delta: f64,
    n_paths: u64,
    horizon: f64,
    seed0: u64,
    opts: &RunOptions,
) -> Result<PathwiseSelection> {
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be positive".into()));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon T = {horizon} must be non-negative")));
    }
    check_exit_setup(model, eps, delta)?;
    let cap = exit_time_cap(model, delta)?.max(horizon);
    let h = (horizon / 2000.0).clamp(1e-5, 1e-3);
    let plus = extremal_solution(model, Side::Plus, horizon, h)?;
    let minus = extremal_solution(model, Side::Minus, horizon, h)?;
    let distance = |sol: &ExtremalSolution, t: f64, x: &[f64], y: f64| {
        let (xe, ye) = sol.eval(t);
        let dx: f64 = x.iter().zip(&xe).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        dx + (y - ye).abs()
    };
    let results = map_indexed(0..n_paths, worker_count(opts.workers), |i| {
        let mut stepper = SmallNoiseStepper::new(model, eps, &opts.policy, opts.corr)?;
        let mut rng = rng_for(seed0.wrapping_add(i));
        let mut s = stepper.start();
        let mut side = None;
        let mut sup = [0.0f64; 2];
        stepper.run(&mut s, horizon, &[], &mut rng, |st| {
            if side.is_none() && st.y.abs() >= delta {
                side = Some(Side::of(st.y));
            }
            sup[0] = sup[0].max(distance(&plus, st.t, &st.x, st.y));
            sup[1] = sup[1].max(distance(&minus, st.t, &st.x, st.y));
            Control::Continue
        })?;
        if side.is_none() && horizon < cap {
            side = stepper.run_to_exit(&mut s, delta, cap, &mut rng)?.side;
        }
        Ok(side.map(|sd| (sd, if sd == Side::Plus { sup[0] } else { sup[1] })))
    })?;
    let mut dp = Vec::new();
    let mut dm = Vec::new();
    let mut capped = 0;
    for r in results {
        match r {
            Some((Side::Plus, v)) => dp.push(v),
            Some((Side::Minus, v)) => dm.push(v),
            None => capped += 1,
        }
    }
    Ok(PathwiseSelection {
        eps,
        delta,
        horizon,
        n_paths,
        n_capped: capped,
        plus: side_stats(&dp),
        minus: side_stats(&dm),
    })
}
