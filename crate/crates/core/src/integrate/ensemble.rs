use super::noise::{NoisePlan, NoiseStream, StreamId, StreamKind, MAX_PARTICLES};
use super::SimError;
use crate::measure::MeasureMoments;
use crate::model::SlowFastModel;
use crate::scalar::Real;
use crate::spatial::Norm;

/// `N` coupled particle states at one time, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble<T> {
    pub n: usize,
    pub slow_dim: usize,
    pub fast_dim: usize,
    pub slow: Vec<T>,
    pub fast: Vec<T>,
    pub time: f64,
    /// Number of micro steps taken; indexes the noise counters.
    pub step: u64,
    pub model_id: String,
}

impl<T: Real> ParticleEnsemble<T> {
    /// Broadcasts `(x0, y0)` to `n` particles.
    pub fn broadcast(model: &dyn SlowFastModel<T>, x0: &[T], y0: &[T], n: usize) -> Result<Self, SimError> {
        if n == 0 || n > MAX_PARTICLES {
            return Err(SimError::InvalidParams(format!(
                "particle count must lie in 1..={MAX_PARTICLES}, got {n}"
            )));
        }
        if x0.len() != model.slow_dim() || y0.len() != model.fast_dim() {
            return Err(SimError::InvalidParams(format!(
                "initial state dimensions ({}, {}) do not match model ({}, {})",
                x0.len(),
                y0.len(),
                model.slow_dim(),
                model.fast_dim()
            )));
        }
        Ok(Self {
            n,
            slow_dim: x0.len(),
            fast_dim: y0.len(),
            slow: x0.repeat(n),
            fast: y0.repeat(n),
            time: 0.0,
            step: 0,
            model_id: model.id().to_string(),
        })
    }

    /// Adds i.i.d. `N(0, spread²)` perturbations to every slow and fast entry.
    pub fn perturb(&mut self, plan: &NoisePlan, spread: f64) {
        if spread == 0.0 {
            return;
        }
        for i in 0..self.n {
            let mut s = plan.stream(StreamId::new(StreamKind::Init, i, 0, 0));
            for x in self.slow[i * self.slow_dim..(i + 1) * self.slow_dim]
                .iter_mut()
                .chain(self.fast[i * self.fast_dim..(i + 1) * self.fast_dim].iter_mut())
            {
                *x += T::lit(spread * s.next_normal());
            }
        }
    }

    pub fn slow_row(&self, i: usize) -> &[T] {
        &self.slow[i * self.slow_dim..(i + 1) * self.slow_dim]
    }

    pub fn fast_row(&self, i: usize) -> &[T] {
        &self.fast[i * self.fast_dim..(i + 1) * self.fast_dim]
    }

    /// Moments of the empirical law of the slow rows.
    pub fn moments(&self, norm: &Norm<T>) -> MeasureMoments<T> {
        MeasureMoments::from_rows(&self.slow, self.slow_dim, norm)
    }

    /// First particle with a non-finite entry.
    pub fn first_non_finite(&self) -> Option<usize> {
        let bad_slow = self.slow.iter().position(|x| !x.is_finite()).map(|k| k / self.slow_dim);
        let bad_fast = self.fast.iter().position(|x| !x.is_finite()).map(|k| k / self.fast_dim);
        match (bad_slow, bad_fast) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub(crate) fn check_finite(&self) -> Result<(), SimError> {
        match self.first_non_finite() {
            Some(particle) => Err(SimError::BlowUp {
                time: self.time,
                particle,
            }),
            None => Ok(()),
        }
    }
}

/// Positioned slow and fast noise streams of an ensemble, one per
/// `(particle, mode)`. Slow stream ids depend only on `(particle, mode)`, so
/// any two runs built from the same plan see identical `W¹` increments.
#[derive(Debug, Clone)]
pub struct EnsembleNoise {
    pub plan: NoisePlan,
    pub slow_modes: usize,
    pub fast_modes: usize,
    pub slow: Vec<NoiseStream>,
    pub fast: Vec<NoiseStream>,
}

impl EnsembleNoise {
    pub fn new(plan: NoisePlan, n: usize, slow_modes: usize, fast_modes: usize) -> Self {
        let slow = (0..n)
            .flat_map(|i| (0..slow_modes).map(move |j| StreamId::slow(i, j)))
            .map(|id| plan.stream(id))
            .collect();
        let fast = (0..n)
            .flat_map(|i| (0..fast_modes).map(move |j| StreamId::fast(i, j)))
            .map(|id| plan.stream(id))
            .collect();
        Self {
            plan,
            slow_modes,
            fast_modes,
            slow,
            fast,
        }
    }

    pub fn for_model<T: Real>(plan: NoisePlan, model: &dyn SlowFastModel<T>, n: usize) -> Self {
        Self::new(plan, n, model.slow_noise_dim(), model.fast_noise_dim())
    }
}
