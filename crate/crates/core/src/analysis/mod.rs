//! Closed forms and deterministic functionals: selection probabilities,
//! scale function, exit-time functional, the stationary law of the frozen
//! fast equation, the limit generator, and histogram distances.

mod exit_time;
mod frozen;
mod generator;
pub mod quad;
mod scale;
mod tv;

pub use exit_time::{exit_time_bound, exit_time_functional, exit_time_limit_constant};
pub use frozen::{
    averaged_drift, invariant_density, selection_probabilities, FrozenParams, InvariantDensity, SelectionProbabilities,
};
pub use generator::{
    averaged_characteristics, closed_form_params, generator_apply, split_rhat, AveragedCharacteristics, FrozenSampler,
    KernelAtom, TestFunction,
};
pub use scale::{exit_probability_quadrature, gamma_asymptotic, scale_function, GammaAsymptotic};
pub use tv::{empirical_tv, tv_against, tv_distance, Binning};
