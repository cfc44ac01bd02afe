use super::{ModelConstants, SlowFastModel};
use crate::measure::MeasureMoments;
use crate::scalar::Real;

/// A deliberately broken model whose fast drift `+y + x` is anti-dissipative
/// while its declared constants claim strict monotonicity. Used to check that
/// the hypothesis probes and the mixing estimator reject it.
#[derive(Debug, Clone)]
pub struct AntiDissipative<T> {
    constants: ModelConstants<T>,
}

impl<T: Real> Default for AntiDissipative<T> {
    fn default() -> Self {
        Self {
            constants: ModelConstants {
                kappa: T::lit(0.5),
                l_b2: T::zero(),
                l_g: T::zero(),
                lambda: T::lit(0.5),
                c1: T::lit(2.0),
                c2: T::lit(2.0),
                theta: T::one(),
                alpha: T::lit(2.0),
                eta: T::one(),
                beta: T::lit(2.0),
                r: None,
                p: None,
            },
        }
    }
}

impl<T: Real> SlowFastModel<T> for AntiDissipative<T> {
    fn id(&self) -> &'static str {
        "anti-dissipative"
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
    fn a1(&self, u: &[T], _mu: &MeasureMoments<T>, out: &mut [T]) {
        out[0] = -u[0];
    }
    fn f(&self, _u: &[T], _mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        out[0] = v[0];
    }
    fn b1(&self, _u: &[T], _mu: &MeasureMoments<T>, out: &mut [T]) {
        out[0] = T::lit(0.5);
    }
    fn a2_explicit(&self, u: &[T], _mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        out[0] = v[0] + u[0];
    }
    fn b2(&self, _u: &[T], _mu: &MeasureMoments<T>, _v: &[T], out: &mut [T]) {
        out[0] = T::lit(0.5);
    }
    fn initial_state(&self) -> (Vec<T>, Vec<T>) {
        (vec![T::one()], vec![T::lit(0.1)])
    }
}
