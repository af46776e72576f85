use serde::{Deserialize, Serialize};

use super::stats::log_log_slope;
use super::table::{cell, opt_cell, Table};
use crate::error::{Error, Result};

/// A statistic measured along a strictly monotone parameter ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLadder {
    pub parameter: String,
    pub statistic: String,
    pub values: Vec<f64>,
    pub estimates: Vec<f64>,
    pub errors: Vec<f64>,
    pub counts: Vec<u64>,
    /// Least-squares slope of `ln estimate` against `ln value`.
    pub slope: Option<f64>,
}

/// Rejects ladders that are not strictly monotone or contain non-positive values.
pub fn check_ladder(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} ladder is empty")));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!("{name} ladder must hold positive values")));
    }
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::InvalidParameter(format!("{name} ladder {values:?} must be strictly monotone")));
    }
    Ok(())
}

impl ConvergenceLadder {
    pub fn new(parameter: &str, statistic: &str, values: Vec<f64>, estimates: Vec<f64>, errors: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        check_ladder(parameter, &values)?;
        let slope = if values.len() >= 2 {
            log_log_slope(&values, &estimates)
        } else {
            None
        };
        Ok(Self {
            parameter: parameter.into(),
            statistic: statistic.into(),
            values,
            estimates,
            errors,
            counts,
            slope,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether the estimates decrease strictly from rung to rung.
    pub fn strictly_decreasing(&self) -> bool {
        self.estimates.windows(2).all(|w| w[1] < w[0])
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["parameter", "value", "statistic", "estimate", "error", "count", "slope"]);
        for i in 0..self.len() {
            t.push(vec![
                self.parameter.clone(),
                cell(self.values[i]),
                self.statistic.clone(),
                cell(self.estimates[i]),
                cell(self.errors[i]),
                cell(self.counts[i]),
                opt_cell(self.slope),
            ]);
        }
        t
    }
}
