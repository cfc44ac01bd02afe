//! Randomized numerical certificates for the structural hypotheses.
//!
//! Each probe draws random tuples `(u1, u2, μ1, μ2, v1, v2)`, evaluates the
//! slack of one defining inequality (`slack >= 0` means satisfied) with the
//! model's declared constants, and reports the minimum. For multi-dimensional
//! slow states `W₂` is replaced by the index-aligned coupling bound, which is
//! never smaller than `W₂`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::SlowFastModel;
use crate::measure::{w2_1d, w2_coupling_bound_in, MeasureMoments, SampleSet};
use crate::scalar::Real;
use crate::spatial::{sine_mode, Norm};

/// Slack below `-PROBE_TOLERANCE` counts as a violation.
pub const PROBE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Property {
    MonotonicitySlow,
    StrictMonotonicityFast,
    LipschitzF,
    LipschitzB1,
    LipschitzB2,
    CoercivitySlow,
    CoercivityFast,
}

impl Property {
    pub const ALL: [Property; 7] = [
        Property::MonotonicitySlow,
        Property::StrictMonotonicityFast,
        Property::LipschitzF,
        Property::LipschitzB1,
        Property::LipschitzB2,
        Property::CoercivitySlow,
        Property::CoercivityFast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::MonotonicitySlow => "monotonicity_slow",
            Property::StrictMonotonicityFast => "strict_monotonicity_fast",
            Property::LipschitzF => "lipschitz_f",
            Property::LipschitzB1 => "lipschitz_b1",
            Property::LipschitzB2 => "lipschitz_b2",
            Property::CoercivitySlow => "coercivity_slow",
            Property::CoercivityFast => "coercivity_fast",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("unknown hypothesis property {0:?}")]
    UnknownProperty(String),
    #[error("property {property} does not apply to model {model}")]
    NotApplicable { property: Property, model: &'static str },
    #[error("probe needs at least one sample")]
    NoSamples,
}

impl FromStr for Property {
    type Err = ProbeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ProbeError::UnknownProperty(s.to_string()))
    }
}

/// How random states and measures are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Amplitude of sampled states.
    pub scale: f64,
    /// Number of atoms in each sampled empirical measure.
    pub measure_atoms: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            scale: 2.0,
            measure_atoms: 5,
        }
    }
}

/// Inputs at which an inequality failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness<T> {
    pub u1: Vec<T>,
    pub u2: Vec<T>,
    pub v1: Vec<T>,
    pub v2: Vec<T>,
    pub mu1: SampleSet<T>,
    pub mu2: SampleSet<T>,
    pub slack: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport<T> {
    pub property: Property,
    pub samples: usize,
    pub worst_margin: T,
    pub violating_witness: Option<Witness<T>>,
}

impl<T: Real> HypothesisReport<T> {
    pub fn passed(&self) -> bool {
        self.violating_witness.is_none()
    }
}

struct Sampler<'a, T: Real> {
    model: &'a dyn SlowFastModel<T>,
    cfg: &'a SamplerConfig,
    rng: ChaCha8Rng,
    slow_modes: Vec<Vec<T>>,
}

const SMOOTH_MODES: usize = 6;

impl<'a, T: Real> Sampler<'a, T> {
    fn new(model: &'a dyn SlowFastModel<T>, cfg: &'a SamplerConfig, seed: u64) -> Self {
        let slow_modes = model
            .grid()
            .map(|g| {
                (1..=SMOOTH_MODES.min(g.n_interior()))
                    .map(|k| sine_mode(&g, k))
                    .collect()
            })
            .unwrap_or_default();
        Self {
            model,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            slow_modes,
        }
    }

    /// Random state: uniform entries for SDEs; smooth sine combination plus
    /// nodal roughness on a grid.
    fn state(&mut self, dim: usize) -> Vec<T> {
        let s = self.cfg.scale;
        if self.slow_modes.is_empty() || self.slow_modes[0].len() != dim {
            return (0..dim).map(|_| T::lit(self.rng.random_range(-s..=s))).collect();
        }
        let mut out: Vec<T> = (0..dim)
            .map(|_| T::lit(0.1 * s * self.rng.random_range(-1.0..=1.0)))
            .collect();
        for (k, ek) in self.slow_modes.iter().enumerate() {
            let a = T::lit(0.5 * s * self.rng.random_range(-1.0..=1.0) / (k + 1) as f64);
            for (o, e) in out.iter_mut().zip(ek) {
                *o += a * *e;
            }
        }
        out
    }

    fn measure_pair(&mut self) -> (SampleSet<T>, SampleSet<T>) {
        let dim = self.model.slow_dim();
        let k = self.cfg.measure_atoms.max(1);
        let a: Vec<Vec<T>> = (0..k).map(|_| self.state(dim)).collect();
        let b: Vec<Vec<T>> = if self.rng.random_bool(0.5) {
            let eps = T::lit(self.rng.random_range(0.0..0.5));
            a.iter()
                .map(|p| {
                    let d = self.state(dim);
                    p.iter().zip(&d).map(|(&x, &y)| x + eps * y).collect()
                })
                .collect()
        } else {
            (0..k).map(|_| self.state(dim)).collect()
        };
        (
            SampleSet::uniform(a).expect("nonempty cloud"),
            SampleSet::uniform(b).expect("nonempty cloud"),
        )
    }
}

fn diff<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Hilbert-Schmidt norm squared of a column-major operator with columns in `norm`.
fn hs_sq<T: Real>(cols: &[T], dim: usize, norm: &Norm<T>) -> T {
    cols.chunks_exact(dim).map(|c| norm.norm_sq(c)).sum()
}

fn w2_between<T: Real>(a: &SampleSet<T>, b: &SampleSet<T>, norm: &Norm<T>) -> T {
    if a.dim() == 1 {
        w2_1d(a, b).expect("uniform 1d clouds of equal size")
    } else {
        w2_coupling_bound_in(a, b, norm).expect("aligned clouds")
    }
}

fn moments_of<T: Real>(s: &SampleSet<T>, norm: &Norm<T>) -> MeasureMoments<T> {
    crate::measure::moments(s, norm).expect("clouds sampled in the slow dimension")
}

/// Evaluates one hypothesis on `n_samples` random tuples. Deterministic in `seed`.
pub fn probe_hypothesis<T: Real>(
    m: &dyn SlowFastModel<T>,
    property: Property,
    n_samples: usize,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<HypothesisReport<T>, ProbeError> {
    if n_samples == 0 {
        return Err(ProbeError::NoSamples);
    }
    if !m.probe_suite().contains(&property) {
        return Err(ProbeError::NotApplicable {
            property,
            model: m.id(),
        });
    }
    let c = m.constants().clone();
    let (ds, df) = (m.slow_dim(), m.fast_dim());
    let (ms, mf) = (m.slow_noise_dim(), m.fast_noise_dim());
    let hn = m.slow_norm();
    let fnorm = m.fast_norm();
    let two = T::lit(2.0);
    let mut smp = Sampler::new(m, sampler, seed);

    let mut worst = T::infinity();
    let mut witness = None;
    let (mut a, mut b) = (vec![T::zero(); ds.max(df)], vec![T::zero(); ds.max(df)]);
    let (mut ba, mut bb) = (vec![T::zero(); ds * ms], vec![T::zero(); df * mf]);
    let (mut ba2, mut bb2) = (ba.clone(), bb.clone());

    for _ in 0..n_samples {
        let u1 = smp.state(ds);
        let u2 = smp.state(ds);
        let v1 = smp.state(df);
        let v2 = smp.state(df);
        let (s1, s2) = smp.measure_pair();
        let mu1 = moments_of(&s1, &hn);
        let mu2 = moments_of(&s2, &hn);
        let w = w2_between(&s1, &s2, &hn);
        let du = diff(&u1, &u2);
        let dv = diff(&v1, &v2);
        let du_sq = hn.norm_sq(&du);
        let dv_sq = fnorm.norm_sq(&dv);

        let slack = match property {
            Property::MonotonicitySlow => {
                m.a1(&u1, &mu1, &mut a[..ds]);
                m.a1(&u2, &mu2, &mut b[..ds]);
                let pairing = hn.inner(&diff(&a[..ds], &b[..ds]), &du);
                c.c1 * (du_sq + w * w) - pairing
            }
            Property::StrictMonotonicityFast => {
                m.a2(&u1, &mu1, &v1, &mut a[..df]);
                m.a2(&u2, &mu2, &v2, &mut b[..df]);
                let pairing = fnorm.inner(&diff(&a[..df], &b[..df]), &dv);
                -c.kappa * dv_sq + c.c2 * (du_sq + w * w) - pairing
            }
            Property::LipschitzF => {
                m.f(&u1, &mu1, &v1, &mut a[..ds]);
                m.f(&u2, &mu2, &v2, &mut b[..ds]);
                let df_norm = hn.norm_sq(&diff(&a[..ds], &b[..ds])).sqrt();
                c.c1 * (du_sq.sqrt() + dv_sq.sqrt() + w) - df_norm
            }
            Property::LipschitzB1 => {
                m.b1(&u1, &mu1, &mut ba);
                m.b1(&u2, &mu2, &mut ba2);
                let d = hs_sq(&diff(&ba, &ba2), ds, &hn).sqrt();
                c.c1 * (du_sq.sqrt() + w) - d
            }
            Property::LipschitzB2 => {
                m.b2(&u1, &mu1, &v1, &mut bb);
                m.b2(&u2, &mu2, &v2, &mut bb2);
                let d = hs_sq(&diff(&bb, &bb2), df, &fnorm).sqrt();
                c.l_b2 * dv_sq.sqrt() + c.c2 * (du_sq.sqrt() + w) - d
            }
            Property::CoercivitySlow => {
                m.a1(&u1, &mu1, &mut a[..ds]);
                m.b1(&u1, &mu1, &mut ba);
                let lhs = two * hn.inner(&a[..ds], &u1) + hs_sq(&ba, ds, &hn);
                let vnorm = m.slow_v_norm(&u1);
                -c.theta * vnorm.powf(c.alpha) + c.c1 * (T::one() + hn.norm_sq(&u1) + mu1.second_moment) - lhs
            }
            Property::CoercivityFast => {
                m.a2(&u1, &mu1, &v1, &mut a[..df]);
                m.b2(&u1, &mu1, &v1, &mut bb);
                let lhs = two * fnorm.inner(&a[..df], &v1) + hs_sq(&bb, df, &fnorm);
                let vnorm = m.fast_v_norm(&v1);
                c.c2 * (T::one() + fnorm.norm_sq(&v1) + hn.norm_sq(&u1) + mu1.second_moment)
                    - c.eta * vnorm.powf(c.beta)
                    - lhs
            }
        };

        if slack < worst || slack.is_nan() {
            worst = if slack.is_nan() { T::neg_infinity() } else { slack };
            if worst.as_f64() < -PROBE_TOLERANCE {
                witness = Some(Witness {
                    u1,
                    u2,
                    v1,
                    v2,
                    mu1: s1,
                    mu2: s2,
                    slack,
                });
            }
        }
    }

    Ok(HypothesisReport {
        property,
        samples: n_samples,
        worst_margin: worst,
        violating_witness: witness,
    })
}
