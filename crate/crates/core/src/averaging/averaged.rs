use std::io::{self, Write};

use rayon::prelude::*;

use super::frozen::{estimate_fbar, FrozenKey, FrozenParams};
use super::AveragingError;
use crate::integrate::noise::{NoisePlan, NoiseStream, StreamId, MAX_TAG};
use crate::integrate::{slow_update, MultiscaleParams, ParticleEnsemble, SlowScratch, TrajectoryRecorder, MIN_CHUNK};
use crate::measure::MeasureMoments;
use crate::model::SlowFastModel;
use crate::scalar::Real;

/// Heterogeneous-multiscale settings: `f̄` from short embedded frozen runs.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmSettings {
    /// Independent frozen replicas `M_f` averaged per evaluation.
    pub replicas: usize,
    /// Burn-in of each frozen run (frozen time units). Runs are warm-started
    /// from the previous run of the same particle and replica.
    pub burn_in: f64,
    pub horizon: f64,
    /// Macro steps between re-estimations of `f̄`. With `h ∝ ε` the refresh
    /// interval and the error it adds both scale with `ε`.
    pub refresh_stride: usize,
    /// Frozen step; `None` uses `h_micro / ε`, the step the full run takes in fast time.
    pub frozen_step: Option<f64>,
    /// Keep every evaluation for the `f̄` cache dump.
    pub keep_cache: bool,
    /// Count evaluations whose standard error exceeds this fraction of the drift magnitude.
    pub warn_fraction: f64,
}

impl Default for HmmSettings {
    fn default() -> Self {
        Self {
            replicas: 1,
            burn_in: 0.5,
            horizon: 2.0,
            refresh_stride: 10,
            frozen_step: None,
            keep_cache: false,
            warn_fraction: 0.5,
        }
    }
}

/// How `f̄` is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum FbarMode {
    /// Closed form, every macro step.
    Exact,
    Hmm(HmmSettings),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedOptions {
    pub mode: FbarMode,
    /// Macro step in micro steps; the slow increment sums the micro increments.
    pub macro_factor: usize,
    /// Recording stride in macro steps.
    pub record_stride: usize,
    pub initial_spread: f64,
}

impl Default for AveragedOptions {
    fn default() -> Self {
        Self {
            mode: FbarMode::Exact,
            macro_factor: 1,
            record_stride: 1,
            initial_spread: 0.0,
        }
    }
}

/// One `f̄` evaluation, kept for offline inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct FbarCacheEntry {
    pub x: Vec<f64>,
    pub mu_mean: Vec<f64>,
    pub mu_m2: f64,
    pub fbar: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Writes `x,mu_mean,mu_m2,fbar,std_error`, one row per slow component.
pub fn write_fbar_cache<W: Write>(entries: &[FbarCacheEntry], mut w: W) -> io::Result<()> {
    writeln!(w, "x,mu_mean,mu_m2,fbar,std_error")?;
    for e in entries {
        for c in 0..e.x.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                e.x[c], e.mu_mean[c], e.mu_m2, e.fbar[c], e.std_error[c]
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedRun<T> {
    pub recorder: TrajectoryRecorder<T>,
    pub cache: Vec<FbarCacheEntry>,
    /// Evaluations whose standard error exceeded `warn_fraction` of the drift.
    pub noisy_evaluations: usize,
}

struct HmmState<T> {
    settings: HmmSettings,
    step: f64,
    warm: Vec<T>,
    refresh: u64,
}

fn cache_entry<T: Real>(x: &[T], mu: &MeasureMoments<T>, fbar: &[T], se: &[T]) -> FbarCacheEntry {
    let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
    FbarCacheEntry {
        x: f(x),
        mu_mean: f(&mu.mean),
        mu_m2: mu.second_moment.as_f64(),
        fbar: f(fbar),
        std_error: f(se),
    }
}

/// Per-particle refresh output: estimate, standard error, final frozen states.
type Refresh<T> = (Vec<T>, Vec<T>, Vec<T>);

/// Integrates the averaged slow equation `dX̄ = (A1 + f̄) dt + B1 dW¹` for
/// `N` interacting particles, consuming the same slow stream ids as
/// [`crate::integrate::simulate_full`] so the two are driven by identical `W¹`.
pub fn simulate_averaged<T: Real>(
    model: &dyn SlowFastModel<T>,
    x0: &[T],
    n: usize,
    p: &MultiscaleParams,
    plan: NoisePlan,
    opts: &AveragedOptions,
) -> Result<AveragedRun<T>, AveragingError> {
    p.validate()?;
    if model.slow_noise_dim() == 0 {
        return Err(AveragingError::InvalidParams("model exposes no slow noise mode".into()));
    }
    let k = opts.macro_factor.max(1);
    let n_micro = p.n_steps();
    if !n_micro.is_multiple_of(k) {
        return Err(AveragingError::InvalidParams(format!(
            "macro factor {k} does not divide the {n_micro} micro steps"
        )));
    }
    if matches!(opts.mode, FbarMode::Exact) && !model.has_exact_fbar() {
        return Err(AveragingError::NoExactFbar(model.id().to_string()));
    }
    let (_, y0) = model.initial_state();
    let mut ens = ParticleEnsemble::broadcast(model, x0, &y0, n)?;
    ens.perturb(&plan, opts.initial_spread);

    let (ds, df, m1) = (model.slow_dim(), model.fast_dim(), model.slow_noise_dim());
    let mut streams: Vec<NoiseStream> = (0..n)
        .flat_map(|i| (0..m1).map(move |j| StreamId::slow(i, j)))
        .map(|id| plan.stream(id))
        .collect();

    let mut hmm = match &opts.mode {
        FbarMode::Hmm(s) => {
            if s.replicas == 0 || s.refresh_stride == 0 {
                return Err(AveragingError::InvalidParams(
                    "hmm replicas and refresh_stride must be >= 1".into(),
                ));
            }
            let step = s.frozen_step.unwrap_or(p.h_micro / p.epsilon);
            let refreshes = (n_micro / k).div_ceil(s.refresh_stride) as u64 + 1;
            if refreshes * s.replicas as u64 >= MAX_TAG {
                return Err(AveragingError::InvalidParams(
                    "too many frozen refreshes for the noise tag space".into(),
                ));
            }
            let warm: Vec<T> = (0..n)
                .flat_map(|i| std::iter::repeat_n(i, s.replicas))
                .flat_map(|i| ens.fast_row(i).to_vec())
                .collect();
            Some(HmmState {
                settings: s.clone(),
                step,
                warm,
                refresh: 0,
            })
        }
        FbarMode::Exact => None,
    };

    let h_macro = T::lit(p.h_micro * k as f64);
    let sqrt_h = p.h_micro.sqrt();
    let taming = p.taming && model.slow_drift_is_stiff();
    let slow_norm = model.slow_norm();
    let n_macro = n_micro / k;

    let mut rec = TrajectoryRecorder::new(opts.record_stride, false);
    rec.record_states(0.0, 0, n, &ens.slow, ds, &[], df);
    let mut fbar = vec![T::zero(); n * ds];
    let mut se = vec![T::zero(); n * ds];
    let mut cache = Vec::new();
    let mut noisy = 0usize;

    for j in 0..n_macro {
        let mu = ens.moments(&slow_norm);
        if let Some(state) = hmm.as_mut() {
            if j % state.settings.refresh_stride == 0 {
                let r = state.settings.replicas;
                let tag0 = state.refresh * r as u64;
                let results: Vec<Result<Refresh<T>, AveragingError>> = (0..n)
                    .into_par_iter()
                    .with_min_len(1)
                    .map(|i| {
                        let x = ens.slow_row(i);
                        let mut sum = vec![0.0; ds];
                        let mut var = vec![0.0; ds];
                        let mut finals = Vec::with_capacity(r * df);
                        for q in 0..r {
                            let fp = FrozenParams {
                                x_frozen: x.to_vec(),
                                mu_frozen: mu.clone(),
                                y_init: state.warm[(i * r + q) * df..(i * r + q + 1) * df].to_vec(),
                                burn_in: state.settings.burn_in,
                                sample_horizon: state.settings.horizon,
                                step: state.step,
                            };
                            let est = estimate_fbar(model, &fp, &FrozenKey::new(plan, i, tag0 + q as u64))?;
                            for c in 0..ds {
                                sum[c] += est.fbar[c].as_f64();
                                var[c] += est.std_error[c].as_f64().powi(2);
                            }
                            finals.extend_from_slice(&est.final_state);
                        }
                        let rf = r as f64;
                        Ok((
                            sum.iter().map(|s| T::lit(s / rf)).collect(),
                            var.iter().map(|v| T::lit(v.sqrt() / rf)).collect(),
                            finals,
                        ))
                    })
                    .collect();
                for (i, res) in results.into_iter().enumerate() {
                    let (fb, s, finals) = res?;
                    fbar[i * ds..(i + 1) * ds].copy_from_slice(&fb);
                    se[i * ds..(i + 1) * ds].copy_from_slice(&s);
                    state.warm[i * r * df..(i + 1) * r * df].copy_from_slice(&finals);
                    let scale = fb.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
                    let err = s.iter().fold(0.0f64, |m, v| m.max(v.as_f64()));
                    if err > state.settings.warn_fraction * scale {
                        noisy += 1;
                    }
                    if state.settings.keep_cache {
                        cache.push(cache_entry(ens.slow_row(i), &mu, &fb, &s));
                    }
                }
                state.refresh += 1;
            }
        }

        let micro0 = (j * k) as u64;
        let exact = hmm.is_none();
        ens.slow
            .par_chunks_mut(ds)
            .zip(streams.par_chunks_mut(m1))
            .zip(fbar.par_chunks_mut(ds))
            .with_min_len(MIN_CHUNK)
            .for_each_init(
                || SlowScratch::for_model(model),
                |scr, ((u, ns), fb)| {
                    for (dw, s) in scr.dw.iter_mut().zip(ns.iter_mut()) {
                        *dw = if k == 1 {
                            T::lit(sqrt_h * s.normal_at(micro0))
                        } else {
                            T::lit((0..k as u64).map(|q| sqrt_h * s.normal_at(micro0 + q)).sum::<f64>())
                        };
                    }
                    if exact {
                        model.fbar_exact(u, &mu, fb);
                    }
                    scr.coupling.copy_from_slice(fb);
                    slow_update(model, u, &mu, h_macro, taming, scr);
                },
            );
        ens.step += k as u64;
        ens.time = ens.step as f64 * p.h_micro;
        if let Some(i) = ens.slow.iter().position(|x| !x.is_finite()) {
            return Err(crate::integrate::SimError::BlowUp {
                time: ens.time,
                particle: i / ds,
            }
            .into());
        }
        if rec.due((j + 1) as u64, n_macro as u64) {
            rec.record_states(ens.time, ens.step, n, &ens.slow, ds, &[], df);
        }
    }
    rec.final_ensemble = Some(ens);
    Ok(AveragedRun {
        recorder: rec,
        cache,
        noisy_evaluations: noisy,
    })
}
