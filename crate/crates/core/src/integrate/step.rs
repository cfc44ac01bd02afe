use rayon::prelude::*;

use super::ensemble::{EnsembleNoise, ParticleEnsemble};
use super::noise::NoiseStream;
use super::{MultiscaleParams, SimError};
use crate::measure::MeasureMoments;
use crate::model::{LinearPart, SlowFastModel};
use crate::scalar::Real;
use crate::spatial::LaplacianOp;

/// Particles per rayon task.
pub(crate) const MIN_CHUNK: usize = 16;

/// One step of the fast equation in its own time `τ = t / ε`, i.e.
/// `dv = A2 dτ + B2 dW̃` with step `Δτ = h / ε`.
#[derive(Debug, Clone)]
pub enum FastKernel<T> {
    /// Exact Ornstein-Uhlenbeck step for `A2 = -γ v + g`:
    /// `v' = a v + gain g + noise B2 ξ` with `a = e^{-γΔτ}`.
    Decay { a: T, gain: T, noise: T },
    /// `(I - Δτ L) v' = v + Δτ g + √Δτ B2 ξ`.
    Laplacian { op: LaplacianOp<T>, dtau: T, sqrt_dtau: T },
    /// Euler-Maruyama.
    Explicit { dtau: T, sqrt_dtau: T },
}

impl<T: Real> FastKernel<T> {
    pub fn new(linear: Option<LinearPart<T>>, dtau: f64) -> Self {
        let sq = T::lit(dtau.sqrt());
        match linear {
            Some(LinearPart::Decay(rate)) => {
                let g = rate.as_f64();
                let a = (-g * dtau).exp();
                Self::Decay {
                    a: T::lit(a),
                    gain: T::lit(-(-g * dtau).exp_m1() / g),
                    noise: T::lit((-(-2.0 * g * dtau).exp_m1() / (2.0 * g)).sqrt()),
                }
            }
            Some(LinearPart::Laplacian(op)) => Self::Laplacian {
                op,
                dtau: T::lit(dtau),
                sqrt_dtau: sq,
            },
            None => Self::Explicit {
                dtau: T::lit(dtau),
                sqrt_dtau: sq,
            },
        }
    }

    pub fn for_model(model: &dyn SlowFastModel<T>, dtau: f64) -> Self {
        Self::new(model.linear_part(), dtau)
    }

    /// Advances `v` to `out` with frozen slow arguments `(u, mu)` and standard normals `xi`.
    #[allow(clippy::too_many_arguments)]
    pub fn advance(
        &self,
        model: &dyn SlowFastModel<T>,
        u: &[T],
        mu: &MeasureMoments<T>,
        v: &[T],
        xi: &[T],
        out: &mut [T],
        scratch: &mut FastScratch<T>,
    ) {
        let df = v.len();
        model.a2_explicit(u, mu, v, &mut scratch.g);
        model.b2(u, mu, v, &mut scratch.b);
        scratch.noise.iter_mut().for_each(|x| *x = T::zero());
        for (col, &z) in scratch.b.chunks_exact(df).zip(xi) {
            for (nz, &c) in scratch.noise.iter_mut().zip(col) {
                *nz += c * z;
            }
        }
        match self {
            Self::Decay { a, gain, noise } => {
                for i in 0..df {
                    out[i] = *a * v[i] + *gain * scratch.g[i] + *noise * scratch.noise[i];
                }
            }
            Self::Laplacian { op, dtau, sqrt_dtau } => {
                for i in 0..df {
                    scratch.rhs[i] = v[i] + *dtau * scratch.g[i] + *sqrt_dtau * scratch.noise[i];
                }
                op.solve_shifted_into(*dtau, &scratch.rhs, out);
            }
            Self::Explicit { dtau, sqrt_dtau } => {
                for i in 0..df {
                    out[i] = v[i] + *dtau * scratch.g[i] + *sqrt_dtau * scratch.noise[i];
                }
            }
        }
    }
}

/// Per-worker buffers of the fast kernel.
#[derive(Debug, Clone)]
pub struct FastScratch<T> {
    g: Vec<T>,
    b: Vec<T>,
    noise: Vec<T>,
    rhs: Vec<T>,
}

impl<T: Real> FastScratch<T> {
    pub fn new(fast_dim: usize, fast_modes: usize) -> Self {
        Self {
            g: vec![T::zero(); fast_dim],
            b: vec![T::zero(); fast_dim * fast_modes],
            noise: vec![T::zero(); fast_dim],
            rhs: vec![T::zero(); fast_dim],
        }
    }

    pub fn for_model(model: &dyn SlowFastModel<T>) -> Self {
        Self::new(model.fast_dim(), model.fast_noise_dim())
    }
}

/// Per-worker buffers of the slow update.
#[derive(Debug, Clone)]
pub(crate) struct SlowScratch<T> {
    pub a1: Vec<T>,
    pub coupling: Vec<T>,
    pub b1: Vec<T>,
    pub dw: Vec<T>,
    pub v_new: Vec<T>,
    pub fast: FastScratch<T>,
}

impl<T: Real> SlowScratch<T> {
    pub fn for_model(model: &dyn SlowFastModel<T>) -> Self {
        let (ds, df) = (model.slow_dim(), model.fast_dim());
        Self {
            a1: vec![T::zero(); ds],
            coupling: vec![T::zero(); ds],
            b1: vec![T::zero(); ds * model.slow_noise_dim()],
            dw: vec![T::zero(); model.slow_noise_dim()],
            v_new: vec![T::zero(); df],
            fast: FastScratch::for_model(model),
        }
    }
}

/// Scales `drift` by `1 / (1 + h |drift|_∞)` when `h |drift|_∞ > 1`.
pub fn tame<T: Real>(drift: &mut [T], h: T) {
    let sup = drift.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let hs = h * sup;
    if hs > T::one() {
        let k = (T::one() + hs).recip();
        drift.iter_mut().for_each(|x| *x *= k);
    }
}

/// `u ← u + h (A1(u, μ) + coupling) + Σ_j B1_j dw_j`, with `A1` tamed when asked.
/// `scratch.coupling` and `scratch.dw` must be filled by the caller.
pub(crate) fn slow_update<T: Real>(
    model: &dyn SlowFastModel<T>,
    u: &mut [T],
    mu: &MeasureMoments<T>,
    h: T,
    taming: bool,
    scratch: &mut SlowScratch<T>,
) {
    let ds = u.len();
    model.a1(u, mu, &mut scratch.a1);
    if taming {
        tame(&mut scratch.a1, h);
    }
    model.b1(u, mu, &mut scratch.b1);
    for i in 0..ds {
        let mut noise = T::zero();
        for (j, &dw) in scratch.dw.iter().enumerate() {
            noise += scratch.b1[j * ds + i] * dw;
        }
        u[i] += h * (scratch.a1[i] + scratch.coupling[i]) + noise;
    }
}

/// Slow states and their empirical moments at a block boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowSnapshot<T> {
    pub slow: Vec<T>,
    pub moments: MeasureMoments<T>,
    pub step: u64,
}

impl<T: Real> SlowSnapshot<T> {
    pub fn capture(ens: &ParticleEnsemble<T>, model: &dyn SlowFastModel<T>) -> Self {
        Self {
            slow: ens.slow.clone(),
            moments: ens.moments(&model.slow_norm()),
            step: ens.step,
        }
    }
}

pub(crate) fn check_noise_dims<T: Real>(model: &dyn SlowFastModel<T>) -> Result<(), SimError> {
    if model.slow_noise_dim() == 0 || model.fast_noise_dim() == 0 {
        return Err(SimError::InvalidParams(
            "models must expose at least one slow and one fast noise mode".into(),
        ));
    }
    Ok(())
}

/// Shared context of one micro step.
pub(crate) struct StepContext<'a, T: Real> {
    pub model: &'a dyn SlowFastModel<T>,
    pub kernel: &'a FastKernel<T>,
    pub h: T,
    pub sqrt_h: f64,
    pub taming: bool,
}

impl<'a, T: Real> StepContext<'a, T> {
    pub fn new(model: &'a dyn SlowFastModel<T>, kernel: &'a FastKernel<T>, p: &MultiscaleParams) -> Self {
        Self {
            model,
            kernel,
            h: T::lit(p.h_micro),
            sqrt_h: p.h_micro.sqrt(),
            taming: p.taming && model.slow_drift_is_stiff(),
        }
    }

    /// Full micro step of every particle. The fast normals used are written
    /// to `xi_fast` (row-major `n × fast_modes`) for reuse by auxiliary processes.
    pub fn advance(
        &self,
        ens: &mut ParticleEnsemble<T>,
        noise: &mut EnsembleNoise,
        mu: &MeasureMoments<T>,
        xi_fast: &mut [T],
    ) {
        let (ds, df) = (ens.slow_dim, ens.fast_dim);
        let (m1, m2) = (noise.slow_modes, noise.fast_modes);
        let step = ens.step;
        let model = self.model;
        ens.slow
            .par_chunks_mut(ds)
            .zip(ens.fast.par_chunks_mut(df))
            .zip(noise.slow.par_chunks_mut(m1))
            .zip(noise.fast.par_chunks_mut(m2))
            .zip(xi_fast.par_chunks_mut(m2))
            .with_min_len(MIN_CHUNK)
            .for_each_init(
                || SlowScratch::for_model(model),
                |scr, ((((u, v), ns), nf), xf)| {
                    for (x, s) in xf.iter_mut().zip(nf.iter_mut()) {
                        *x = T::lit(s.normal_at(step));
                    }
                    for (dw, s) in scr.dw.iter_mut().zip(ns.iter_mut()) {
                        *dw = T::lit(self.sqrt_h * s.normal_at(step));
                    }
                    model.f(u, mu, v, &mut scr.coupling);
                    self.kernel.advance(model, u, mu, v, xf, &mut scr.v_new, &mut scr.fast);
                    slow_update(model, u, mu, self.h, self.taming, scr);
                    v.copy_from_slice(&scr.v_new);
                },
            );
        ens.step += 1;
        ens.time = ens.step as f64 * self.h.as_f64();
    }
}

/// Fast-only step of an auxiliary ensemble with slow arguments frozen at `snap`
/// and given standard normals.
pub(crate) fn advance_aux<T: Real>(
    model: &dyn SlowFastModel<T>,
    kernel: &FastKernel<T>,
    aux_fast: &mut [T],
    snap: &SlowSnapshot<T>,
    xi_fast: &[T],
) {
    let (ds, df, m2) = (model.slow_dim(), model.fast_dim(), model.fast_noise_dim());
    aux_fast
        .par_chunks_mut(df)
        .zip(snap.slow.par_chunks(ds))
        .zip(xi_fast.par_chunks(m2))
        .with_min_len(MIN_CHUNK)
        .for_each_init(
            || (FastScratch::for_model(model), vec![T::zero(); df]),
            |(scr, out), ((v, u), xi)| {
                kernel.advance(model, u, &snap.moments, v, xi, out, scr);
                v.copy_from_slice(out);
            },
        );
}

/// One Euler-Maruyama micro step of all particles (semi-implicit or exact on
/// the fast linear part), using the noise increments at counter `ens.step`.
pub fn step_full<T: Real>(
    model: &dyn SlowFastModel<T>,
    ens: &mut ParticleEnsemble<T>,
    p: &MultiscaleParams,
    noise: &mut EnsembleNoise,
) -> Result<(), SimError> {
    check_noise_dims(model)?;
    if ens.time + p.h_micro > p.t_end + 1e-12 {
        return Err(SimError::InvalidParams(format!(
            "step from t = {} would pass t_end = {}",
            ens.time, p.t_end
        )));
    }
    let kernel = FastKernel::for_model(model, p.h_micro / p.epsilon);
    let ctx = StepContext::new(model, &kernel, p);
    let mu = ens.moments(&model.slow_norm());
    let mut xi = vec![T::zero(); ens.n * noise.fast_modes];
    ctx.advance(ens, noise, &mu, &mut xi);
    ens.check_finite()
}

/// Fast-only step of the auxiliary process `Ŷ` with coefficients frozen at
/// the block-boundary snapshot, driven by the same fast stream ids (and hence
/// the same increments) as the true fast process at counter `aux.step`.
pub fn step_khasminskii_aux<T: Real>(
    model: &dyn SlowFastModel<T>,
    aux: &mut ParticleEnsemble<T>,
    snapshot: &SlowSnapshot<T>,
    p: &MultiscaleParams,
    noise: &mut EnsembleNoise,
) -> Result<(), SimError> {
    check_noise_dims(model)?;
    let kernel = FastKernel::for_model(model, p.h_micro / p.epsilon);
    let step = aux.step;
    let xi: Vec<T> = noise
        .fast
        .iter_mut()
        .map(|s: &mut NoiseStream| T::lit(s.normal_at(step)))
        .collect();
    advance_aux(model, &kernel, &mut aux.fast, snapshot, &xi);
    aux.slow.copy_from_slice(&snapshot.slow);
    aux.step += 1;
    aux.time = aux.step as f64 * p.h_micro;
    aux.check_finite()
}
