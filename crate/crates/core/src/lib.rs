//! Interacting-particle simulation of slow-fast McKean-Vlasov S(P)DEs, ergodic
//! estimation of the averaged coefficient, and strong averaging-rate studies.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod averaging;
pub mod integrate;
pub mod measure;
pub mod model;
pub mod scalar;
pub mod spatial;
pub mod study;

pub use scalar::Real;

/// Double-precision aliases.
pub type Ensemble = integrate::ParticleEnsemble<f64>;
pub type Recorder = integrate::TrajectoryRecorder<f64>;
pub type FrozenSetup = averaging::FrozenParams<f64>;
pub type Estimate = averaging::FrozenEstimate<f64>;
pub type Moments = measure::MeasureMoments<f64>;
pub type Samples = measure::SampleSet<f64>;
pub type Model = Box<dyn model::SlowFastModel<f64>>;
