use std::path::PathBuf;

use serde::Deserialize;

use peano_core::analysis::FrozenSampler;
use peano_core::coeffs::{GridSpec, Regime, SmallNoiseModel, TwoScaleModel};
use peano_core::sim::StepPolicy;
use peano_core::{Error, Result};

/// One experiment: a model, the harness settings, where the output goes and
/// optional tolerance overrides.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Grid for the assumption checks.
    #[serde(default)]
    pub validation: GridSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSection {
    /// Scalar model with constant coefficients on each side of `y = 0`.
    #[serde(rename = "constant_1d")]
    Constant1d(ConstantModel),
    SmallNoise(SmallNoiseModel),
    TwoScale(TwoScaleModel),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantModel {
    pub gamma: f64,
    /// `[plus, minus]` branches.
    pub psi: [f64; 2],
    pub phi: [f64; 2],
    pub beta: [f64; 2],
    pub regime: Regime,
    #[serde(default)]
    pub x0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Harness {
    Selection,
    PathwiseSelection,
    ExitTimeScaling,
    Attraction,
    FrozenErgodicity,
    MartingaleResidual,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub harness: Harness,
    /// Seed of path 0; path `i` uses `seed0 + i`. Required.
    pub seed0: Option<u64>,
    pub n_paths: u64,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub delta: Vec<f64>,
    /// Horizon `T`.
    pub horizon: Option<f64>,
    /// Horizon ladder of the ergodicity harness.
    #[serde(default)]
    pub horizons: Vec<f64>,
    /// Starting values of the two ergodicity groups.
    pub y0: Option<[f64; 2]>,
    /// Frozen slow point; defaults to `x0`.
    pub x: Option<Vec<f64>>,
    pub policy: Option<StepPolicy>,
    #[serde(default)]
    pub corr: f64,
    pub workers: Option<usize>,
    /// Step and bin count of the ergodicity harness.
    pub dt: Option<f64>,
    pub bins: Option<usize>,
    /// Bump radius and center of the residual test functions.
    pub test_radius: Option<f64>,
    pub test_center: Option<Vec<f64>>,
    pub sampler: Option<FrozenSampler>,
    /// Spacing of the cache grid for averaged characteristics.
    pub grid: Option<f64>,
    pub bootstrap: Option<usize>,
    /// Fast starting value when a small-noise model is turned into a two-scale one.
    #[serde(default)]
    pub fast_y0: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Summary CSV; rows are appended.
    pub csv: Option<PathBuf>,
    /// Number of full paths written next to the summary.
    #[serde(default)]
    pub dump_paths: u64,
    pub dump_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Residual must end within this many noise floors.
    #[serde(default = "default_settle")]
    pub residual_settle_floors: f64,
    /// Wrong-drift residual must exceed this many noise floors.
    #[serde(default = "default_control")]
    pub residual_control_floors: f64,
    /// Extremal-solution step.
    #[serde(default = "default_extremal_step")]
    pub extremal_step: f64,
}

fn default_settle() -> f64 {
    2.0
}

fn default_control() -> f64 {
    5.0
}

fn default_extremal_step() -> f64 {
    1e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual_settle_floors: default_settle(),
            residual_control_floors: default_control(),
            extremal_step: default_extremal_step(),
        }
    }
}

/// The model after defaults and conversions.
pub enum Model {
    SmallNoise(SmallNoiseModel),
    TwoScale(TwoScaleModel),
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.experiment.seed0()?;
        Ok(cfg)
    }

    pub fn model(&self) -> Result<Model> {
        Ok(match &self.model {
            ModelSection::Constant1d(c) => {
                let mut m = SmallNoiseModel::constant_1d(
                    c.gamma,
                    (c.psi[0], c.psi[1]),
                    (c.phi[0], c.phi[1]),
                    (c.beta[0], c.beta[1]),
                    c.regime,
                )?;
                m.x0 = vec![c.x0];
                Model::SmallNoise(m)
            }
            ModelSection::SmallNoise(m) => {
                m.check_shape()?;
                Model::SmallNoise(m.clone())
            }
            ModelSection::TwoScale(m) => {
                m.check_shape()?;
                Model::TwoScale(m.clone())
            }
        })
    }
}

impl ExperimentSection {
    pub fn seed0(&self) -> Result<u64> {
        self.seed0
            .ok_or_else(|| Error::Config("experiment.seed0 is required; runs are never seeded from the clock".into()))
    }

    pub fn horizon(&self) -> Result<f64> {
        self.horizon
            .ok_or_else(|| Error::Config(format!("experiment.horizon is required by {:?}", self.harness)))
    }

    /// The single `delta` of harnesses that do not take a ladder.
    pub fn single_delta(&self) -> Result<f64> {
        match self.delta.as_slice() {
            [d] => Ok(*d),
            _ => Err(Error::Config("experiment.delta must hold exactly one value for this harness".into())),
        }
    }

    pub fn single_eps(&self) -> Result<f64> {
        match self.eps.as_slice() {
            [e] => Ok(*e),
            _ => Err(Error::Config("experiment.eps must hold exactly one value for this harness".into())),
        }
    }

    pub fn eps_ladder(&self) -> Result<&[f64]> {
        if self.eps.is_empty() {
            return Err(Error::Config("experiment.eps is empty".into()));
        }
        Ok(&self.eps)
    }

    pub fn policy(&self) -> Result<StepPolicy> {
        match self.policy {
            Some(p) => {
                p.check()?;
                Ok(p)
            }
            None => StepPolicy::graded(1e-3),
        }
    }
}
