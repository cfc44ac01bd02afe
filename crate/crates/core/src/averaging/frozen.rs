use super::AveragingError;
use crate::integrate::noise::{NoisePlan, NoiseStream, StreamId, StreamKind};
use crate::integrate::{FastKernel, FastScratch, SimError};
use crate::measure::{moments, MeasureMoments, SampleSet};
use crate::model::SlowFastModel;
use crate::scalar::Real;

/// Minimum number of batches of the batch-means error estimate.
pub const N_BATCHES: usize = 20;

/// Residual bias target of the default burn-in, `e^{-8}`.
pub const BURN_IN_RATES: f64 = 8.0;

/// Setup of one frozen-equation run `dY = A2(x, μ, Y) dt + B2(x, μ, Y) dW̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenParams<T> {
    pub x_frozen: Vec<T>,
    pub mu_frozen: MeasureMoments<T>,
    pub y_init: Vec<T>,
    pub burn_in: f64,
    pub sample_horizon: f64,
    pub step: f64,
}

impl<T: Real> FrozenParams<T> {
    /// Frozen at `x` and the empirical law of `snapshot`, burn-in `8 / λ`.
    pub fn from_snapshot(
        model: &dyn SlowFastModel<T>,
        x: Vec<T>,
        snapshot: &SampleSet<T>,
        y_init: Vec<T>,
        sample_horizon: f64,
        step: f64,
    ) -> Result<Self, AveragingError> {
        let mu = moments(snapshot, &model.slow_norm()).map_err(|e| AveragingError::InvalidParams(e.to_string()))?;
        Ok(Self {
            x_frozen: x,
            mu_frozen: mu,
            y_init,
            burn_in: default_burn_in(model, None),
            sample_horizon,
            step,
        })
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in / self.step).round() as usize
    }

    pub fn sample_steps(&self) -> usize {
        (self.sample_horizon / self.step).round() as usize
    }

    fn validate(&self, model: &dyn SlowFastModel<T>) -> Result<(), AveragingError> {
        let bad = |m: String| Err(AveragingError::InvalidParams(m));
        if self.x_frozen.len() != model.slow_dim() || self.y_init.len() != model.fast_dim() {
            return bad("frozen state dimensions do not match the model".into());
        }
        if self.mu_frozen.mean.len() != model.slow_dim() {
            return bad("frozen measure dimension does not match the model".into());
        }
        if !(self.step > 0.0) || !(self.burn_in >= 0.0) || !(self.sample_horizon > 0.0) {
            return bad(format!(
                "need step > 0, burn_in >= 0, sample_horizon > 0 (got {}, {}, {})",
                self.step, self.burn_in, self.sample_horizon
            ));
        }
        if !(model.constants().lambda > T::zero()) {
            return bad(format!(
                "model {} declares no fast dissipativity (lambda <= 0)",
                model.id()
            ));
        }
        Ok(())
    }
}

/// `8 / ρ̂` when a mixing estimate is given, else `8 / λ`.
pub fn default_burn_in<T: Real>(model: &dyn SlowFastModel<T>, mixing_rate: Option<f64>) -> f64 {
    let rate = mixing_rate.unwrap_or_else(|| model.constants().lambda.as_f64());
    BURN_IN_RATES / rate
}

/// Selects the noise streams of one frozen run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrozenKey {
    pub plan: NoisePlan,
    pub particle: usize,
    pub tag: u64,
}

impl FrozenKey {
    pub fn new(plan: NoisePlan, particle: usize, tag: u64) -> Self {
        Self { plan, particle, tag }
    }

    fn streams(&self, modes: usize) -> Vec<NoiseStream> {
        (0..modes)
            .map(|j| {
                self.plan
                    .stream(StreamId::new(StreamKind::Frozen, self.particle, j, self.tag))
            })
            .collect()
    }
}

/// Post-burn-in frozen path, row-major `samples × fast_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenPath<T> {
    pub step: f64,
    pub fast_dim: usize,
    pub samples: Vec<T>,
    pub final_state: Vec<T>,
}

impl<T: Real> FrozenPath<T> {
    pub fn len(&self) -> usize {
        self.samples.len() / self.fast_dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, k: usize) -> &[T] {
        &self.samples[k * self.fast_dim..(k + 1) * self.fast_dim]
    }
}

/// Runs the frozen equation, calling `visit` on every post-burn-in state.
pub(crate) fn frozen_run<T: Real>(
    model: &dyn SlowFastModel<T>,
    fp: &FrozenParams<T>,
    key: &FrozenKey,
    mut visit: impl FnMut(&[T]),
) -> Result<Vec<T>, AveragingError> {
    fp.validate(model)?;
    let kernel = FastKernel::for_model(model, fp.step);
    let mut streams = key.streams(model.fast_noise_dim());
    let mut scratch = FastScratch::for_model(model);
    let mut y = fp.y_init.clone();
    let mut next = y.clone();
    let mut xi = vec![T::zero(); streams.len()];
    let burn = fp.burn_in_steps();
    let total = burn + fp.sample_steps();
    for k in 0..total {
        for (z, s) in xi.iter_mut().zip(streams.iter_mut()) {
            *z = T::lit(s.next_normal());
        }
        kernel.advance(model, &fp.x_frozen, &fp.mu_frozen, &y, &xi, &mut next, &mut scratch);
        std::mem::swap(&mut y, &mut next);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SimError::BlowUp {
                time: (k + 1) as f64 * fp.step,
                particle: key.particle,
            }
            .into());
        }
        if k >= burn {
            visit(&y);
        }
    }
    Ok(y)
}

/// Simulates the frozen fast dynamics (no `ε` scaling) and returns the path after burn-in.
pub fn frozen_simulate<T: Real>(
    model: &dyn SlowFastModel<T>,
    fp: &FrozenParams<T>,
    key: &FrozenKey,
) -> Result<FrozenPath<T>, AveragingError> {
    let mut samples = Vec::with_capacity(fp.sample_steps() * model.fast_dim());
    let final_state = frozen_run(model, fp, key, |y| samples.extend_from_slice(y))?;
    Ok(FrozenPath {
        step: fp.step,
        fast_dim: model.fast_dim(),
        samples,
        final_state,
    })
}

/// Ergodic estimate of `f̄(x, μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenEstimate<T> {
    pub fbar: Vec<T>,
    /// Batch-means standard error per component.
    pub std_error: Vec<T>,
    /// Sample variance over squared standard error, averaged over components.
    pub n_effective: f64,
    pub mixing_rate_estimate: Option<f64>,
    /// Fast state at the end of the run, for warm starts.
    pub final_state: Vec<T>,
}

/// Streaming batch-means accumulator. Values are accumulated as deviations
/// from the first sample so that constant integrands are reproduced exactly.
struct BatchMeans {
    dim: usize,
    batch_len: usize,
    used: usize,
    origin: Vec<f64>,
    batches: Vec<f64>,
    sq: Vec<f64>,
    seen: usize,
}

impl BatchMeans {
    fn new(dim: usize, n_samples: usize) -> Self {
        let batch_len = n_samples / N_BATCHES;
        Self {
            dim,
            batch_len,
            used: batch_len * N_BATCHES,
            origin: Vec::new(),
            batches: vec![0.0; N_BATCHES * dim],
            sq: vec![0.0; dim],
            seen: 0,
        }
    }

    fn push(&mut self, x: &[f64]) {
        if self.seen >= self.used {
            return;
        }
        if self.origin.is_empty() {
            self.origin = x.to_vec();
        }
        let b = self.seen / self.batch_len;
        for c in 0..self.dim {
            let d = x[c] - self.origin[c];
            self.batches[b * self.dim + c] += d;
            self.sq[c] += d * d;
        }
        self.seen += 1;
    }

    /// `(mean, std_error, n_effective)`.
    fn finish(&self) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.used as f64;
        let bl = self.batch_len as f64;
        let nb = N_BATCHES as f64;
        let mut mean = vec![0.0; self.dim];
        let mut se = vec![0.0; self.dim];
        let mut n_eff = 0.0;
        for c in 0..self.dim {
            let total: f64 = (0..N_BATCHES).map(|b| self.batches[b * self.dim + c]).sum();
            let dev_mean = total / n;
            mean[c] = self.origin[c] + dev_mean;
            let var_b = (0..N_BATCHES)
                .map(|b| (self.batches[b * self.dim + c] / bl - dev_mean).powi(2))
                .sum::<f64>()
                / (nb - 1.0);
            se[c] = (var_b / nb).sqrt();
            let var_s = ((self.sq[c] - n * dev_mean * dev_mean) / (n - 1.0)).max(0.0);
            n_eff += if se[c] > 0.0 { var_s / (se[c] * se[c]) } else { n };
        }
        (mean, se, (n_eff / self.dim as f64).clamp(1.0, n))
    }
}

/// Time average of `f(x, μ, Y_s)` along the post-burn-in frozen path, with a
/// batch-means standard error over 20 batches.
pub fn estimate_fbar<T: Real>(
    model: &dyn SlowFastModel<T>,
    fp: &FrozenParams<T>,
    key: &FrozenKey,
) -> Result<FrozenEstimate<T>, AveragingError> {
    let m = fp.sample_steps();
    if m < N_BATCHES {
        return Err(AveragingError::HorizonTooShort { steps: m });
    }
    let ds = model.slow_dim();
    let mut acc = BatchMeans::new(ds, m);
    let mut f = vec![T::zero(); ds];
    let mut fx = vec![0.0; ds];
    let final_state = frozen_run(model, fp, key, |y| {
        model.f(&fp.x_frozen, &fp.mu_frozen, y, &mut f);
        for (o, v) in fx.iter_mut().zip(&f) {
            *o = v.as_f64();
        }
        acc.push(&fx);
    })?;
    let (mean, se, n_effective) = acc.finish();
    Ok(FrozenEstimate {
        fbar: mean.into_iter().map(T::lit).collect(),
        std_error: se.into_iter().map(T::lit).collect(),
        n_effective,
        mixing_rate_estimate: None,
        final_state,
    })
}

/// Mixing-rate fit of two shared-noise frozen copies.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingFit {
    /// Fitted `ρ̂` in `‖Y^y − Y^{y'}‖² ≈ C e^{−ρ̂ t}`.
    pub rate: f64,
    pub times: Vec<f64>,
    pub gap_sq: Vec<f64>,
    /// Number of leading points used by the fit.
    pub window: usize,
}

/// Gap ratio `‖ΔY_t‖² / ‖ΔY_0‖²` below which the fit window ends.
pub const COLLAPSE_RATIO: f64 = 1e-16;

/// Runs two frozen copies from `fp.y_init` and `y_alt` with the same noise
/// for `sample_horizon` and fits `log ‖ΔY‖²` against `t` by least squares over
/// the pre-collapse window. A gap that does not decay is a mixing failure.
pub fn estimate_mixing_rate<T: Real>(
    model: &dyn SlowFastModel<T>,
    fp: &FrozenParams<T>,
    y_alt: &[T],
    key: &FrozenKey,
) -> Result<MixingFit, AveragingError> {
    fp.validate(model)?;
    let norm = model.fast_norm();
    let g0 = norm.dist_sq(&fp.y_init, y_alt).as_f64();
    if !(g0 > 0.0) {
        return Err(AveragingError::InvalidParams("y_alt must differ from y_init".into()));
    }
    let kernel = FastKernel::for_model(model, fp.step);
    let mut streams = key.streams(model.fast_noise_dim());
    let mut scratch = FastScratch::for_model(model);
    let (mut a, mut b) = (fp.y_init.clone(), y_alt.to_vec());
    let mut next = a.clone();
    let mut xi = vec![T::zero(); streams.len()];
    let mut times = vec![0.0];
    let mut gap_sq = vec![g0];
    let mut window = 1;
    let mut collapsed = false;
    for k in 0..fp.sample_steps() {
        for (z, s) in xi.iter_mut().zip(streams.iter_mut()) {
            *z = T::lit(s.next_normal());
        }
        kernel.advance(model, &fp.x_frozen, &fp.mu_frozen, &a, &xi, &mut next, &mut scratch);
        std::mem::swap(&mut a, &mut next);
        kernel.advance(model, &fp.x_frozen, &fp.mu_frozen, &b, &xi, &mut next, &mut scratch);
        std::mem::swap(&mut b, &mut next);
        let g = norm.dist_sq(&a, &b).as_f64();
        times.push((k + 1) as f64 * fp.step);
        gap_sq.push(g);
        if !g.is_finite() {
            break;
        }
        if !collapsed && g > g0 * COLLAPSE_RATIO {
            window = gap_sq.len();
        } else {
            collapsed = true;
        }
    }
    let last = *gap_sq.last().unwrap_or(&g0);
    if window < 2 {
        return if last.is_finite() && last < g0 {
            Err(AveragingError::InvalidParams(
                "gap collapsed within one step; reduce the frozen step".into(),
            ))
        } else {
            Err(AveragingError::MixingFailure { rate: f64::NAN })
        };
    }
    let (t, l): (Vec<f64>, Vec<f64>) = times[..window]
        .iter()
        .zip(&gap_sq[..window])
        .map(|(&t, &g)| (t, g.ln()))
        .unzip();
    let (slope, _) = least_squares(&t, &l);
    let rate = -slope;
    if !rate.is_finite() || rate <= 0.0 || !(last < g0) {
        return Err(AveragingError::MixingFailure { rate });
    }
    Ok(MixingFit {
        rate,
        times,
        gap_sq,
        window,
    })
}

/// Ordinary least squares `y ≈ slope x + intercept`.
pub(crate) fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
