use super::{ModelConstants, ModelError, ModelParams, ParamReader, SlowFastModel};
use crate::measure::MeasureMoments;
use crate::scalar::Real;

/// Parameters of the scalar nonlinear mean-field SDE
///
/// ```text
/// dX = (sin X + c_mu m(μ) + f0 Y) dt + sigma1 dW¹
/// dY = ε⁻¹ (-kappa Y - Y³ + k1 X) dt + ε^{-1/2} (sigma_c + l_sigma2 tanh Y) dW²
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct CubicParams {
    pub kappa: f64,
    pub k1: f64,
    pub c_mu: f64,
    pub f0: f64,
    pub sigma1: f64,
    pub sigma_c: f64,
    pub l_sigma2: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Default for CubicParams {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            k1: 1.0,
            c_mu: 0.5,
            f0: 1.0,
            sigma1: 0.5,
            sigma_c: 0.8,
            l_sigma2: 0.2,
            x0: 1.0,
            y0: 0.0,
        }
    }
}

impl CubicParams {
    pub fn from_map(map: &ModelParams) -> Result<Self, ModelError> {
        let mut p = Self::default();
        let mut r = ParamReader::new("mvsde-cubic", map);
        r.take("kappa", &mut p.kappa);
        r.take("k1", &mut p.k1);
        r.take("c_mu", &mut p.c_mu);
        r.take("f0", &mut p.f0);
        r.take("sigma1", &mut p.sigma1);
        r.take("sigma_c", &mut p.sigma_c);
        r.take("l_sigma2", &mut p.l_sigma2);
        r.take("x0", &mut p.x0);
        r.take("y0", &mut p.y0);
        r.finish()?;
        Ok(p)
    }
}

/// Mean-field SDE with a strictly monotone cubic fast drift and
/// state-dependent fast noise. No closed-form `f̄`.
#[derive(Debug, Clone)]
pub struct MvSdeCubic<T> {
    kappa: T,
    k1: T,
    c_mu: T,
    f0: T,
    sigma1: T,
    sigma_c: T,
    l_sigma2: T,
    x0: T,
    y0: T,
    constants: ModelConstants<T>,
}

impl<T: Real> MvSdeCubic<T> {
    pub fn new(p: CubicParams) -> Result<Self, ModelError> {
        if !(p.kappa > 0.0) {
            return Err(ModelError::InvalidParam {
                key: "kappa",
                reason: format!("must be > 0, got {}", p.kappa),
            });
        }
        if p.l_sigma2 < 0.0 {
            return Err(ModelError::InvalidParam {
                key: "l_sigma2",
                reason: "must be >= 0".into(),
            });
        }
        let theta = 1.0;
        let c1 = (1.0 + p.c_mu.abs() / 2.0)
            .max(p.f0.abs())
            .max(2.0 + p.c_mu.abs())
            .max(1.0 + p.sigma1 * p.sigma1);
        let noise_bound = (p.sigma_c.abs() + p.l_sigma2).powi(2);
        let c2 = (p.k1 * p.k1 / (2.0 * p.kappa))
            .max(p.k1 * p.k1 / p.kappa)
            .max(noise_bound)
            .max(f64::MIN_POSITIVE);
        let kappa_decl = p.kappa / 2.0;
        let constants = ModelConstants {
            kappa: T::lit(kappa_decl),
            l_b2: T::lit(p.l_sigma2),
            l_g: T::zero(),
            lambda: T::lit((kappa_decl - p.l_sigma2 * p.l_sigma2).max(f64::MIN_POSITIVE)),
            c1: T::lit(c1),
            c2: T::lit(c2),
            theta: T::lit(theta),
            alpha: T::lit(2.0),
            eta: T::lit(p.kappa),
            beta: T::lit(2.0),
            r: None,
            p: None,
        };
        Ok(Self {
            kappa: T::lit(p.kappa),
            k1: T::lit(p.k1),
            c_mu: T::lit(p.c_mu),
            f0: T::lit(p.f0),
            sigma1: T::lit(p.sigma1),
            sigma_c: T::lit(p.sigma_c),
            l_sigma2: T::lit(p.l_sigma2),
            x0: T::lit(p.x0),
            y0: T::lit(p.y0),
            constants,
        })
    }

    /// Fast drift `-kappa y - y³ + k1 x` of the frozen equation.
    pub fn fast_drift(&self, x: T, y: T) -> T {
        -self.kappa * y - y * y * y + self.k1 * x
    }

    pub fn fast_diffusion(&self, y: T) -> T {
        self.sigma_c + self.l_sigma2 * y.tanh()
    }

    pub fn f0(&self) -> T {
        self.f0
    }
}

impl<T: Real> SlowFastModel<T> for MvSdeCubic<T> {
    fn id(&self) -> &'static str {
        "mvsde-cubic"
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
        out[0] = u[0].sin() + self.c_mu * mu.mean[0];
    }

    fn f(&self, _u: &[T], _mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        out[0] = self.f0 * v[0];
    }

    fn b1(&self, _u: &[T], _mu: &MeasureMoments<T>, out: &mut [T]) {
        out[0] = self.sigma1;
    }

    fn a2_explicit(&self, u: &[T], _mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        out[0] = self.fast_drift(u[0], v[0]);
    }

    fn b2(&self, _u: &[T], _mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        out[0] = self.fast_diffusion(v[0]);
    }

    fn initial_state(&self) -> (Vec<T>, Vec<T>) {
        (vec![self.x0], vec![self.y0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_only_strengthens_dissipativity() {
        let m = MvSdeCubic::<f64>::new(CubicParams::default()).unwrap();
        for i in 0..200 {
            let y1 = -4.0 + 0.04 * i as f64;
            let y2 = 3.0 - 0.031 * i as f64;
            let lhs = (m.fast_drift(0.7, y1) - m.fast_drift(0.7, y2)) * (y1 - y2);
            assert!(lhs <= -(y1 - y2).powi(2) + 1e-12);
        }
    }

    #[test]
    fn zero_noise_slope_satisfies_condition() {
        let m = MvSdeCubic::<f64>::new(CubicParams {
            l_sigma2: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(m.theorem_applicable());
        assert!(MvSdeCubic::<f64>::new(CubicParams {
            kappa: -1.0,
            ..Default::default()
        })
        .is_err());
    }
}
