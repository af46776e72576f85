//! Seeded Euler-Maruyama integrators for the small-noise system, the frozen
//! fast equation and the two-scale jump-diffusion system.

mod frozen;
mod path;
mod policy;
mod small_noise;
mod two_scale;

pub use frozen::{simulate_frozen, FrozenStepper};
pub use path::PathSample;
pub use policy::{ResolvedPolicy, StepPolicy, StepRule, MIN_REFINEMENT};
pub use small_noise::{
    simulate_small_noise, simulate_small_noise_from, ExitOutcome, SmallNoiseState, SmallNoiseStepper,
};
pub use two_scale::{simulate_two_scale, TwoScaleStepper, JUMP_BUDGET};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Returned by path observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// The random stream for one path.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
