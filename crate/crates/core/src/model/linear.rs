use super::{LinearPart, ModelConstants, ModelError, ModelParams, ParamReader, SlowFastModel};
use crate::measure::MeasureMoments;
use crate::scalar::Real;

/// Parameters of the scalar linear mean-field benchmark
///
/// ```text
/// dX = (a11 X + a12 m(μ) + f0 Y) dt + sigma1 dW¹
/// dY = ε⁻¹ (-gamma Y + k1 X + k2 m(μ)) dt + ε^{-1/2} sigma2 dW²
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub a11: f64,
    pub a12: f64,
    pub f0: f64,
    pub sigma1: f64,
    pub gamma: f64,
    pub k1: f64,
    pub k2: f64,
    pub sigma2: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self {
            a11: -2.0,
            a12: -0.5,
            f0: 1.0,
            sigma1: 0.5,
            gamma: 1.0,
            k1: 1.0,
            k2: 0.5,
            sigma2: 1.0,
            x0: 1.0,
            y0: 0.0,
        }
    }
}

impl LinearParams {
    pub fn from_map(map: &ModelParams) -> Result<Self, ModelError> {
        let mut p = Self::default();
        let mut r = ParamReader::new("linear-benchmark", map);
        r.take("a11", &mut p.a11);
        r.take("a12", &mut p.a12);
        r.take("f0", &mut p.f0);
        r.take("sigma1", &mut p.sigma1);
        r.take("gamma", &mut p.gamma);
        r.take("k1", &mut p.k1);
        r.take("k2", &mut p.k2);
        r.take("sigma2", &mut p.sigma2);
        r.take("x0", &mut p.x0);
        r.take("y0", &mut p.y0);
        r.finish()?;
        Ok(p)
    }
}

/// Closed-form-solvable linear instance. The frozen law is Gaussian with mean
/// `(k1 x + k2 m) / gamma` and variance `sigma2² / (2 gamma)`.
#[derive(Debug, Clone)]
pub struct LinearBenchmark<T> {
    a11: T,
    a12: T,
    f0: T,
    sigma1: T,
    gamma: T,
    k1: T,
    k2: T,
    sigma2: T,
    x0: T,
    y0: T,
    constants: ModelConstants<T>,
    params: LinearParams,
}

impl<T: Real> LinearBenchmark<T> {
    pub fn new(p: LinearParams) -> Result<Self, ModelError> {
        if !(p.gamma > 0.0) {
            return Err(ModelError::InvalidParam {
                key: "gamma",
                reason: format!("must be > 0 for a dissipative fast equation, got {}", p.gamma),
            });
        }
        let g = p.gamma;
        let kk = p.k1 * p.k1 + p.k2 * p.k2;
        // Half of the fast contraction absorbs the slow cross terms by Young's inequality.
        let kappa = g / 2.0;
        let c2 = (kk / (2.0 * g))
            .max(2.0 * p.k1.powi(2).max(p.k2.powi(2)) / g)
            .max(p.sigma2 * p.sigma2)
            .max(f64::MIN_POSITIVE);
        let theta = 1.0;
        let c1 = (p.a11 + p.a12.abs() / 2.0)
            .max(p.a12.abs() / 2.0)
            .max(p.f0.abs())
            .max(2.0 * p.a11 + theta + p.a12.abs())
            .max(p.sigma1 * p.sigma1)
            .max(f64::MIN_POSITIVE);
        let constants = ModelConstants {
            kappa: T::lit(kappa),
            l_b2: T::zero(),
            l_g: T::zero(),
            lambda: T::lit(kappa),
            c1: T::lit(c1),
            c2: T::lit(c2),
            theta: T::lit(theta),
            alpha: T::lit(2.0),
            eta: T::lit(g),
            beta: T::lit(2.0),
            r: None,
            p: None,
        };
        Ok(Self {
            a11: T::lit(p.a11),
            a12: T::lit(p.a12),
            f0: T::lit(p.f0),
            sigma1: T::lit(p.sigma1),
            gamma: T::lit(p.gamma),
            k1: T::lit(p.k1),
            k2: T::lit(p.k2),
            sigma2: T::lit(p.sigma2),
            x0: T::lit(p.x0),
            y0: T::lit(p.y0),
            constants,
            params: p,
        })
    }

    pub fn params(&self) -> &LinearParams {
        &self.params
    }

    /// Mean of the frozen invariant law at `(x, m)`.
    pub fn frozen_mean(&self, x: T, m: T) -> T {
        (self.k1 * x + self.k2 * m) / self.gamma
    }

    pub fn frozen_variance(&self) -> T {
        self.sigma2 * self.sigma2 / (T::lit(2.0) * self.gamma)
    }

    /// Lipschitz constant of `f̄` in `(x, m)`: `|f0| max(|k1|, |k2|) / gamma`.
    pub fn fbar_lipschitz(&self) -> T {
        self.f0.abs() * self.k1.abs().max(self.k2.abs()) / self.gamma
    }
}

impl<T: Real> SlowFastModel<T> for LinearBenchmark<T> {
    fn id(&self) -> &'static str {
        "linear-benchmark"
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn slow_noise_dim(&self) -> usize {
        1
    }
    fn fast_noise_dim(&self) -> usize {
        1
    }
    fn constants(&self) -> &ModelConstants<T> {
        &self.constants
    }

    fn a1(&self, u: &[T], mu: &MeasureMoments<T>, out: &mut [T]) {
        out[0] = self.a11 * u[0] + self.a12 * mu.mean[0];
    }

    fn f(&self, _u: &[T], _mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        out[0] = self.f0 * v[0];
    }

    fn b1(&self, _u: &[T], _mu: &MeasureMoments<T>, out: &mut [T]) {
        out[0] = self.sigma1;
    }

    fn a2_explicit(&self, u: &[T], mu: &MeasureMoments<T>, _v: &[T], out: &mut [T]) {
        out[0] = self.k1 * u[0] + self.k2 * mu.mean[0];
    }

    fn b2(&self, _u: &[T], _mu: &MeasureMoments<T>, _v: &[T], out: &mut [T]) {
        out[0] = self.sigma2;
    }

    fn linear_part(&self) -> Option<LinearPart<T>> {
        Some(LinearPart::Decay(self.gamma))
    }

    fn fbar_exact(&self, u: &[T], mu: &MeasureMoments<T>, out: &mut [T]) -> bool {
        out[0] = self.f0 * self.frozen_mean(u[0], mu.mean[0]);
        true
    }

    fn has_exact_fbar(&self) -> bool {
        true
    }

    fn initial_state(&self) -> (Vec<T>, Vec<T>) {
        (vec![self.x0], vec![self.y0])
    }
}
