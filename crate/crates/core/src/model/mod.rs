//! Coefficient interface for slow-fast McKean-Vlasov systems
//!
//! ```text
//! dX = [A1(X, μ) + f(X, μ, Y)] dt + B1(X, μ) dW¹
//! dY = ε⁻¹ A2(X, μ, Y) dt + ε^{-1/2} B2(X, μ, Y) dW²
//! ```
//!
//! and the registry of concrete models. The measure argument `μ` reaches the
//! coefficients only through its [`MeasureMoments`] (mean and second moment).

mod broken;
mod cubic;
mod linear;
mod pde;
pub mod probe;

use std::collections::BTreeMap;

use thiserror::Error;

pub use broken::AntiDissipative;
pub use cubic::{CubicParams, MvSdeCubic};
pub use linear::{LinearBenchmark, LinearParams};
pub use pde::{PLaplace1d, PdeParams, PorousMedia1d};
pub use probe::{probe_hypothesis, HypothesisReport, Property, SamplerConfig, Witness};

use crate::measure::MeasureMoments;
use crate::scalar::Real;
use crate::spatial::{Grid1D, LaplacianOp, Norm, SpatialError};

/// Registry ids accepted by [`build_model`].
pub const MODEL_IDS: [&str; 4] = ["linear-benchmark", "mvsde-cubic", "porous-media-1d", "plaplace-1d"];

/// Flat `key = value` parameter overrides, as read from config files or the CLI.
pub type ModelParams = BTreeMap<String, f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown model id {0:?} (known: linear-benchmark, mvsde-cubic, porous-media-1d, plaplace-1d)")]
    UnknownModel(String),
    #[error("unknown parameter {key:?} for model {model}")]
    UnknownParam { model: &'static str, key: String },
    #[error("invalid parameter {key}: {reason}")]
    InvalidParam { key: &'static str, reason: String },
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// Structural constants a model declares about itself.
///
/// `kappa`, `c2` and `l_b2` are the constants of the strict monotonicity and
/// Lipschitz conditions on the fast drift and diffusion; `c1`, `theta` and
/// `alpha` those of the slow monotonicity/Lipschitz/coercivity conditions;
/// `eta`, `beta` the fast coercivity. `lambda` is the dissipation rate of the
/// fast second moment. All values are explicit for the registered models.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConstants<T> {
    pub kappa: T,
    pub l_b2: T,
    pub l_g: T,
    pub lambda: T,
    pub c1: T,
    pub c2: T,
    pub theta: T,
    pub alpha: T,
    pub eta: T,
    pub beta: T,
    pub r: Option<T>,
    pub p: Option<T>,
}

/// Linear part of the fast drift that the integrator treats specially.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearPart<T> {
    /// `-rate * v`, integrated exactly (exponential scheme).
    Decay(T),
    /// Dirichlet Laplacian, integrated semi-implicitly.
    Laplacian(LaplacianOp<T>),
}

impl<T: Real> LinearPart<T> {
    pub fn apply_add(&self, v: &[T], out: &mut [T]) {
        match self {
            LinearPart::Decay(rate) => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o -= *rate * *x;
                }
            }
            LinearPart::Laplacian(op) => {
                let mut lv = vec![T::zero(); v.len()];
                op.apply_into(v, &mut lv);
                for (o, x) in out.iter_mut().zip(&lv) {
                    *o += *x;
                }
            }
        }
    }
}

/// A slow-fast McKean-Vlasov system after spatial discretization.
///
/// Diffusion coefficients are written column-major: column `j` of `B1`
/// occupies `out[j * slow_dim..(j + 1) * slow_dim]` and is the response to
/// the `j`-th scalar noise mode. Implementations must be pure and re-entrant.
pub trait SlowFastModel<T: Real>: Send + Sync {
    fn id(&self) -> &'static str;
    fn slow_dim(&self) -> usize;
    fn fast_dim(&self) -> usize;
    fn slow_noise_dim(&self) -> usize;
    fn fast_noise_dim(&self) -> usize;
    fn constants(&self) -> &ModelConstants<T>;

    /// Norm of the slow state space (error norm of the rate study).
    fn slow_norm(&self) -> Norm<T> {
        Norm::Euclidean
    }

    fn fast_norm(&self) -> Norm<T> {
        Norm::Euclidean
    }

    /// Norm of the slow reflexive space entering coercivity.
    fn slow_v_norm(&self, u: &[T]) -> T {
        crate::scalar::dot(u, u).sqrt()
    }

    fn fast_v_norm(&self, v: &[T]) -> T {
        crate::scalar::dot(v, v).sqrt()
    }

    fn grid(&self) -> Option<Grid1D<T>> {
        None
    }

    fn a1(&self, u: &[T], mu: &MeasureMoments<T>, out: &mut [T]);
    fn f(&self, u: &[T], mu: &MeasureMoments<T>, v: &[T], out: &mut [T]);
    fn b1(&self, u: &[T], mu: &MeasureMoments<T>, out: &mut [T]);

    /// Part of `A2` not covered by [`Self::linear_part`].
    fn a2_explicit(&self, u: &[T], mu: &MeasureMoments<T>, v: &[T], out: &mut [T]);
    fn b2(&self, u: &[T], mu: &MeasureMoments<T>, v: &[T], out: &mut [T]);

    fn linear_part(&self) -> Option<LinearPart<T>> {
        None
    }

    /// Full fast drift `A2 = linear part + explicit part`.
    fn a2(&self, u: &[T], mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        self.a2_explicit(u, mu, v, out);
        if let Some(lin) = self.linear_part() {
            lin.apply_add(v, out);
        }
    }

    /// Closed-form averaged coefficient, when known. Returns `false` otherwise.
    fn fbar_exact(&self, _u: &[T], _mu: &MeasureMoments<T>, _out: &mut [T]) -> bool {
        false
    }

    fn has_exact_fbar(&self) -> bool {
        false
    }

    /// Whether the slow drift is monotone but not Lipschitz (taming applies).
    fn slow_drift_is_stiff(&self) -> bool {
        false
    }

    /// Default deterministic initial condition `(x0, y0)`.
    fn initial_state(&self) -> (Vec<T>, Vec<T>);

    /// Which hypothesis probes apply to this model.
    fn probe_suite(&self) -> Vec<Property> {
        Property::ALL.to_vec()
    }

    /// `kappa > 2 l_b2²`, plus the eigenvalue-gap condition for PDE models.
    fn theorem_applicable(&self) -> bool {
        let c = self.constants();
        let base = c.kappa > T::lit(2.0) * c.l_b2 * c.l_b2;
        match self.grid() {
            Some(g) => base && LaplacianOp::new(g).lambda1() - c.l_g - c.l_b2 * c.l_b2 > T::zero(),
            None => base,
        }
    }
}

/// Helpers for model parameter structs.
pub(crate) struct ParamReader<'a> {
    model: &'static str,
    map: &'a ModelParams,
    used: Vec<&'static str>,
}

impl<'a> ParamReader<'a> {
    pub(crate) fn new(model: &'static str, map: &'a ModelParams) -> Self {
        Self {
            model,
            map,
            used: Vec::new(),
        }
    }

    pub(crate) fn take(&mut self, key: &'static str, slot: &mut f64) {
        self.used.push(key);
        if let Some(v) = self.map.get(key) {
            *slot = *v;
        }
    }

    pub(crate) fn take_usize(&mut self, key: &'static str, slot: &mut usize) -> Result<(), ModelError> {
        self.used.push(key);
        if let Some(&v) = self.map.get(key) {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(ModelError::InvalidParam {
                    key,
                    reason: format!("expected a nonnegative integer, got {v}"),
                });
            }
            *slot = v as usize;
        }
        Ok(())
    }

    pub(crate) fn finish(self) -> Result<(), ModelError> {
        for k in self.map.keys() {
            if !self.used.contains(&k.as_str()) {
                return Err(ModelError::UnknownParam {
                    model: self.model,
                    key: k.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Builds a registered model from its id and parameter overrides.
pub fn build_model<T: Real>(id: &str, params: &ModelParams) -> Result<Box<dyn SlowFastModel<T>>, ModelError> {
    Ok(match id {
        "linear-benchmark" => Box::new(LinearBenchmark::new(LinearParams::from_map(params)?)?),
        "mvsde-cubic" => Box::new(MvSdeCubic::new(CubicParams::from_map(params)?)?),
        "porous-media-1d" => Box::new(PorousMedia1d::new(PdeParams::porous_from_map(params)?)?),
        "plaplace-1d" => Box::new(PLaplace1d::new(PdeParams::plaplace_from_map(params)?)?),
        other => return Err(ModelError::UnknownModel(other.to_string())),
    })
}
