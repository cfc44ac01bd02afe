//! Multiscale interacting-particle time stepping of the full slow-fast system
//! and of the block-frozen auxiliary fast process.

mod ensemble;
pub mod noise;
mod recorder;
mod run;
mod step;

use thiserror::Error;

pub use ensemble::{EnsembleNoise, ParticleEnsemble};
pub use noise::{NoisePlan, NoiseStream, StreamId, StreamKind};
pub use recorder::{AuxGap, MomentDiagnostic, RunDiagnostics, TrajectoryRecorder};
pub use run::{increment_stats, simulate_full, RunOptions};
pub(crate) use step::{slow_update, SlowScratch, MIN_CHUNK};
pub use step::{step_full, step_khasminskii_aux, tame, FastKernel, FastScratch, SlowSnapshot};

/// Largest admissible `h_micro / epsilon`.
pub const H_FRACTION: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(
        "non-finite state at t = {time} in particle {particle}; reduce h_micro or use the semi-implicit/tamed scheme"
    )]
    BlowUp { time: f64, particle: usize },
    #[error("invalid integration parameters: {0}")]
    InvalidParams(String),
}

/// Time-scale parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiscaleParams {
    pub epsilon: f64,
    pub t_end: f64,
    pub h_micro: f64,
    /// Khasminskii block size; `None` means `epsilon^(2/3)` rounded to the step.
    pub delta_block: Option<f64>,
    /// Tame the slow drift of models flagged stiff.
    pub taming: bool,
}

impl MultiscaleParams {
    /// `h = epsilon / 50`, adjusted down so that it divides `t_end`.
    pub fn new(epsilon: f64, t_end: f64) -> Self {
        Self::with_divisor(epsilon, t_end, 50.0, f64::INFINITY)
    }

    /// `h = min(epsilon / divisor, h_max)`, adjusted down so that it divides `t_end`.
    pub fn with_divisor(epsilon: f64, t_end: f64, divisor: f64, h_max: f64) -> Self {
        let target = (epsilon / divisor).min(h_max);
        let n = if t_end > 0.0 {
            (t_end / target * (1.0 - 1e-12)).ceil().max(1.0)
        } else {
            1.0
        };
        let h = if t_end > 0.0 { t_end / n } else { target };
        Self {
            epsilon,
            t_end,
            h_micro: h,
            delta_block: None,
            taming: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidParams(m));
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if !(self.h_micro > 0.0) {
            return bad(format!("h_micro must be > 0, got {}", self.h_micro));
        }
        if self.h_micro > self.epsilon * H_FRACTION * (1.0 + 1e-9) {
            return bad(format!(
                "h_micro = {} does not resolve the fast scale (needs <= {} * epsilon)",
                self.h_micro, H_FRACTION
            ));
        }
        let n = self.t_end / self.h_micro;
        if (n - n.round()).abs() > 1e-6 * n.max(1.0) {
            return bad(format!(
                "h_micro = {} does not divide t_end = {}",
                self.h_micro, self.t_end
            ));
        }
        if let Some(d) = self.delta_block {
            let k = d / self.h_micro;
            if !(d > 0.0) || (k - k.round()).abs() > 1e-6 * k.max(1.0) || k.round() < 1.0 {
                return bad(format!("delta_block = {d} must be a positive multiple of h_micro"));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.h_micro).round() as usize
    }

    /// Number of micro steps per block of size `delta`, at least 1.
    pub fn steps_for(&self, delta: f64) -> usize {
        ((delta / self.h_micro).round() as usize).max(1)
    }

    /// Block size in micro steps (`epsilon^(2/3)` unless set).
    pub fn delta_steps(&self) -> usize {
        self.steps_for(self.delta_block.unwrap_or_else(|| self.epsilon.powf(2.0 / 3.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_step_rule() {
        let p = MultiscaleParams::new(0.05, 1.0);
        assert!((p.h_micro - 0.001).abs() < 1e-15);
        assert_eq!(p.n_steps(), 1000);
        p.validate().unwrap();
        let q = MultiscaleParams::new(0.03, 1.0);
        assert!(q.h_micro <= 0.03 / 50.0);
        assert!((q.n_steps() as f64 * q.h_micro - 1.0).abs() < 1e-12);
        q.validate().unwrap();
    }

    #[test]
    fn delta_rounds_to_step() {
        let p = MultiscaleParams::new(0.05, 1.0);
        let d = p.delta_steps();
        assert_eq!(d, (0.05f64.powf(2.0 / 3.0) / 0.001).round() as usize);
    }

    #[test]
    fn rejects_unresolved_fast_scale() {
        let p = MultiscaleParams {
            h_micro: 0.01,
            ..MultiscaleParams::new(0.05, 1.0)
        };
        assert!(p.validate().is_err());
        let q = MultiscaleParams {
            delta_block: Some(0.0015),
            ..MultiscaleParams::new(0.05, 1.0)
        };
        assert!(q.validate().is_err());
    }
}
