//! The frozen fast equation, ergodic estimation of the averaged coefficient
//! `f̄(x, μ) = ∫ f(x, μ, y) ν^{x,μ}(dy)`, and integration of the averaged slow
//! equation with exact or on-the-fly estimated `f̄`.

mod averaged;
mod frozen;

use thiserror::Error;

pub use averaged::{
    simulate_averaged, write_fbar_cache, AveragedOptions, AveragedRun, FbarCacheEntry, FbarMode, HmmSettings,
};
pub(crate) use frozen::least_squares;
pub use frozen::{
    default_burn_in, estimate_fbar, estimate_mixing_rate, frozen_simulate, FrozenEstimate, FrozenKey, FrozenParams,
    FrozenPath, MixingFit, COLLAPSE_RATIO, N_BATCHES,
};

use crate::integrate::SimError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AveragingError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("sample horizon covers {steps} frozen steps; at least 20 are needed for batch means")]
    HorizonTooShort { steps: usize },
    #[error("frozen dynamics do not mix: shared-noise gap does not decay (fitted rate {rate})")]
    MixingFailure { rate: f64 },
    #[error("model {0} has no closed-form averaged coefficient; use hmm mode")]
    NoExactFbar(String),
    #[error("invalid averaging parameters: {0}")]
    InvalidParams(String),
}
