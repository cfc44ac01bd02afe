use std::io::{self, Write};

use super::ensemble::ParticleEnsemble;
use crate::scalar::Real;

/// Time-integrated mean-square gap between `Y` and the auxiliary `Ŷ` for one block size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxGap {
    pub delta_steps: usize,
    pub delta: f64,
    /// `(1/T) ∫ mean_i ‖Y_i − Ŷ_i‖² dt` in the fast norm.
    pub gap: f64,
}

/// Running second-moment check of the fast component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentDiagnostic {
    /// `sup_t mean_i ‖Y_i(t)‖²`.
    pub sup_fast_m2: f64,
    /// `sup_t mean_i ‖X_i(t)‖²`.
    pub sup_slow_m2: f64,
    /// `mean_i ‖Y_i(0)‖² + c2 (1 + 2 sup_slow_m2) / λ` from the declared constants.
    pub bound: f64,
    /// Raised when `sup_fast_m2 > 10 · bound`.
    pub exceeded: bool,
}

impl MomentDiagnostic {
    pub(crate) fn observe(&mut self, fast_m2: f64, slow_m2: f64) {
        self.sup_fast_m2 = self.sup_fast_m2.max(fast_m2);
        self.sup_slow_m2 = self.sup_slow_m2.max(slow_m2);
    }

    pub(crate) fn finish(&mut self, initial_fast_m2: f64, c2: f64, lambda: f64) {
        self.bound = initial_fast_m2 + c2 * (1.0 + 2.0 * self.sup_slow_m2) / lambda;
        self.exceeded = self.sup_fast_m2 > 10.0 * self.bound;
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunDiagnostics {
    pub aux_gaps: Vec<AuxGap>,
    /// `(δ, (1/T) ∫ mean_i ‖X_i(t) − X_i(t(δ))‖² dt)`.
    pub increment: Option<(f64, f64)>,
    pub moments: MomentDiagnostic,
}

/// Slow (and optionally fast) states at every multiple of a recording stride.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecorder<T> {
    pub stride_steps: usize,
    pub record_fast: bool,
    pub n: usize,
    pub slow_dim: usize,
    pub fast_dim: usize,
    pub times: Vec<f64>,
    pub steps: Vec<u64>,
    pub slow: Vec<Vec<T>>,
    pub fast: Vec<Vec<T>>,
    pub diagnostics: RunDiagnostics,
    pub final_ensemble: Option<ParticleEnsemble<T>>,
}

impl<T: Real> TrajectoryRecorder<T> {
    pub fn new(stride_steps: usize, record_fast: bool) -> Self {
        Self {
            stride_steps: stride_steps.max(1),
            record_fast,
            n: 0,
            slow_dim: 0,
            fast_dim: 0,
            times: Vec::new(),
            steps: Vec::new(),
            slow: Vec::new(),
            fast: Vec::new(),
            diagnostics: RunDiagnostics::default(),
            final_ensemble: None,
        }
    }

    /// Records at multiples of the stride and at the final step.
    pub fn due(&self, step: u64, last_step: u64) -> bool {
        step.is_multiple_of(self.stride_steps as u64) || step == last_step
    }

    pub fn record(&mut self, ens: &ParticleEnsemble<T>) {
        self.record_states(
            ens.time,
            ens.step,
            ens.n,
            &ens.slow,
            ens.slow_dim,
            &ens.fast,
            ens.fast_dim,
        );
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn record_states(
        &mut self,
        time: f64,
        step: u64,
        n: usize,
        slow: &[T],
        ds: usize,
        fast: &[T],
        df: usize,
    ) {
        if self.steps.last() == Some(&step) {
            return;
        }
        self.n = n;
        self.slow_dim = ds;
        self.fast_dim = df;
        self.times.push(time);
        self.steps.push(step);
        self.slow.push(slow.to_vec());
        if self.record_fast {
            self.fast.push(fast.to_vec());
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Slow state of `particle` at record `k`.
    pub fn slow_state(&self, k: usize, particle: usize) -> &[T] {
        &self.slow[k][particle * self.slow_dim..(particle + 1) * self.slow_dim]
    }

    /// Writes the long-format dump `time,particle,component,index,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,particle,component,index,value")?;
        for k in 0..self.len() {
            let t = self.times[k];
            for i in 0..self.n {
                for (j, x) in self.slow_state(k, i).iter().enumerate() {
                    writeln!(w, "{t:.16e},{i},slow,{j},{:.16e}", x.as_f64())?;
                }
                if self.record_fast {
                    let row = &self.fast[k][i * self.fast_dim..(i + 1) * self.fast_dim];
                    for (j, y) in row.iter().enumerate() {
                        writeln!(w, "{t:.16e},{i},fast,{j},{:.16e}", y.as_f64())?;
                    }
                }
            }
        }
        Ok(())
    }
}
