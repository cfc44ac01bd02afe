use super::ensemble::{EnsembleNoise, ParticleEnsemble};
use super::noise::NoisePlan;
use super::recorder::{AuxGap, TrajectoryRecorder};
use super::step::{advance_aux, check_noise_dims, FastKernel, SlowSnapshot, StepContext};
use super::{MultiscaleParams, SimError};
use crate::model::SlowFastModel;
use crate::scalar::Real;
use crate::spatial::Norm;

/// Recording and diagnostic options of [`simulate_full`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub record_stride_steps: usize,
    pub record_fast: bool,
    /// Block sizes (in micro steps) of auxiliary processes tracked online.
    pub aux_delta_steps: Vec<usize>,
    /// Block size (in micro steps) of the online time-increment statistic.
    pub increment_delta_steps: Option<usize>,
    /// Standard deviation of i.i.d. initial perturbations; 0 keeps the deterministic start.
    pub initial_spread: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            record_stride_steps: 1,
            record_fast: false,
            aux_delta_steps: Vec::new(),
            increment_delta_steps: None,
            initial_spread: 0.0,
        }
    }
}

fn mean_dist_sq<T: Real>(a: &[T], b: &[T], dim: usize, norm: &Norm<T>) -> f64 {
    let n = a.len() / dim;
    let s: f64 = a
        .chunks_exact(dim)
        .zip(b.chunks_exact(dim))
        .map(|(x, y)| norm.dist_sq(x, y).as_f64())
        .sum();
    s / n as f64
}

fn mean_norm_sq<T: Real>(a: &[T], dim: usize, norm: &Norm<T>) -> f64 {
    let n = a.len() / dim;
    a.chunks_exact(dim).map(|x| norm.norm_sq(x).as_f64()).sum::<f64>() / n as f64
}

struct AuxTrack<T> {
    steps: usize,
    fast: Vec<T>,
    snap: SlowSnapshot<T>,
    acc: f64,
}

/// Integrates the `N`-particle system from `(x0, y0)` to `t_end`.
///
/// Diagnostics are accumulated online with left-point rules: auxiliary
/// processes `Ŷ` frozen on blocks of the requested sizes (sharing the fast
/// increments of `Y`), the time-increment statistic, and the fast moment check.
pub fn simulate_full<T: Real>(
    model: &dyn SlowFastModel<T>,
    x0: &[T],
    y0: &[T],
    n: usize,
    p: &MultiscaleParams,
    plan: NoisePlan,
    opts: &RunOptions,
) -> Result<TrajectoryRecorder<T>, SimError> {
    p.validate()?;
    check_noise_dims(model)?;
    let mut ens = ParticleEnsemble::broadcast(model, x0, y0, n)?;
    ens.perturb(&plan, opts.initial_spread);
    let mut noise = EnsembleNoise::for_model(plan, model, n);
    let kernel = FastKernel::for_model(model, p.h_micro / p.epsilon);
    let ctx = StepContext::new(model, &kernel, p);
    let (slow_norm, fast_norm) = (model.slow_norm(), model.fast_norm());
    let (ds, df) = (ens.slow_dim, ens.fast_dim);
    let n_steps = p.n_steps();
    let h = p.h_micro;

    let mut rec = TrajectoryRecorder::new(opts.record_stride_steps, opts.record_fast);
    rec.record(&ens);

    let mu0 = ens.moments(&slow_norm);
    let snap0 = SlowSnapshot {
        slow: ens.slow.clone(),
        moments: mu0,
        step: 0,
    };
    let mut aux: Vec<AuxTrack<T>> = opts
        .aux_delta_steps
        .iter()
        .map(|&d| AuxTrack {
            steps: d.max(1),
            fast: ens.fast.clone(),
            snap: snap0.clone(),
            acc: 0.0,
        })
        .collect();
    let mut incr = opts.increment_delta_steps.map(|d| (d.max(1), ens.slow.clone(), 0.0));

    let initial_fast_m2 = mean_norm_sq(&ens.fast, df, &fast_norm);
    let mut diag = super::MomentDiagnostic::default();
    let mut xi = vec![T::zero(); n * noise.fast_modes];

    for s in 0..n_steps {
        let mu = ens.moments(&slow_norm);
        diag.observe(mean_norm_sq(&ens.fast, df, &fast_norm), mu.second_moment.as_f64());
        for a in aux.iter_mut() {
            if s % a.steps == 0 {
                a.snap = SlowSnapshot {
                    slow: ens.slow.clone(),
                    moments: mu.clone(),
                    step: s as u64,
                };
            }
            a.acc += h * mean_dist_sq(&ens.fast, &a.fast, df, &fast_norm);
        }
        if let Some((d, base, acc)) = incr.as_mut() {
            if s % *d == 0 {
                base.copy_from_slice(&ens.slow);
            }
            *acc += h * mean_dist_sq(&ens.slow, base, ds, &slow_norm);
        }

        ctx.advance(&mut ens, &mut noise, &mu, &mut xi);
        for a in aux.iter_mut() {
            advance_aux(model, &kernel, &mut a.fast, &a.snap, &xi);
            if let Some(k) = a.fast.iter().position(|x| !x.is_finite()) {
                return Err(SimError::BlowUp {
                    time: ens.time,
                    particle: k / df,
                });
            }
        }
        ens.check_finite()?;
        if rec.due(ens.step, n_steps as u64) {
            rec.record(&ens);
        }
    }

    let mu = ens.moments(&slow_norm);
    diag.observe(mean_norm_sq(&ens.fast, df, &fast_norm), mu.second_moment.as_f64());
    let c = model.constants();
    diag.finish(initial_fast_m2, c.c2.as_f64(), c.lambda.as_f64());
    let t = if p.t_end > 0.0 { p.t_end } else { 1.0 };
    rec.diagnostics.moments = diag;
    rec.diagnostics.aux_gaps = aux
        .iter()
        .map(|a| AuxGap {
            delta_steps: a.steps,
            delta: a.steps as f64 * h,
            gap: a.acc / t,
        })
        .collect();
    rec.diagnostics.increment = incr.map(|(d, _, acc)| (d as f64 * h, acc / t));
    rec.final_ensemble = Some(ens);
    Ok(rec)
}

/// `(1/T) ∫₀ᵀ mean_i ‖X_i(t) − X_i(t(δ))‖² dt` from recorded slow states,
/// by a left-point rule on the recording grid. `δ` must be a multiple of the
/// recording stride.
pub fn increment_stats<T: Real>(rec: &TrajectoryRecorder<T>, delta: f64, norm: &Norm<T>) -> Result<f64, SimError> {
    if rec.len() < 2 {
        return Ok(0.0);
    }
    let stride = rec.times[1] - rec.times[0];
    let k = delta / stride;
    if !(delta > 0.0) || (k - k.round()).abs() > 1e-6 * k.max(1.0) || k.round() < 1.0 {
        return Err(SimError::InvalidParams(format!(
            "delta = {delta} is not a multiple of the recording stride {stride}"
        )));
    }
    let k = k.round() as usize;
    let total = rec.times[rec.len() - 1] - rec.times[0];
    let mut acc = 0.0;
    for j in 0..rec.len() - 1 {
        let base = (j / k) * k;
        let dt = rec.times[j + 1] - rec.times[j];
        acc += dt * mean_dist_sq(&rec.slow[j], &rec.slow[base], rec.slow_dim, norm);
    }
    Ok(acc / total)
}
