//! Monte Carlo harnesses confronting simulation with the closed forms.
//!
//! Every path uses the seed `seed0 + i`; results are gathered in index
//! order and reduced sequentially, so outputs do not depend on the number
//! of workers.

mod attraction;
mod ergodicity;
mod exit_scaling;
mod ladder;
pub mod parallel;
mod residual;
mod selection;
pub mod stats;
mod table;

pub use attraction::{run_attraction, AttractionResult, MomentBound, MOMENT_POINTS};
pub use ergodicity::{run_frozen_ergodicity, ErgodicityResult, ErgodicitySettings, OCCUPATION_BURN_IN};
pub use exit_scaling::{run_exit_time_scaling, ExitTimeScaling};
pub use ladder::{check_ladder, ConvergenceLadder};
pub use residual::{
    run_martingale_residual, settles_to_floor, GeneratorChoice, ResidualRow, ResidualSettings, ResidualTable,
    BOOTSTRAP_RESAMPLES, WEIGHT_LABELS,
};
pub use selection::{
    exit_tally, exit_time_cap, run_pathwise_selection, run_selection, ExitTally, PathwiseSelection, SelectionEstimate,
    SideDistances, CAPPED_WARNING, CAP_FACTOR,
};
pub use parallel::{worker_count, WORKERS_ENV};
pub use table::{cell, opt_cell, Table};

use serde::{Deserialize, Serialize};

use crate::sim::StepPolicy;

/// Settings shared by the small-noise harnesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub policy: StepPolicy,
    /// Correlation of the first slow driver with the fast one.
    pub corr: f64,
    /// Worker threads; `None` defers to the environment or the core count.
    pub workers: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            policy: StepPolicy::graded(1e-3).expect("positive step"),
            corr: 0.0,
            workers: None,
        }
    }
}
