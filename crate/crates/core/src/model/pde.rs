//! Porous-media and p-Laplace slow fields coupled to a fast stochastic heat
//! equation on (0, 1) with Dirichlet boundary conditions.
//!
//! Both models share the fast equation
//!
//! ```text
//! A2(u, μ, v) = Δv + g_v v + (-Δ)⁻¹(c_gu u + c_gm m(μ)) + g0 e1
//! B2(u, μ, v) dW = Σ_k (sigma2 + l_b2 tanh⟨v, e_k⟩) e_k dW_k     k = 1..modes
//! ```
//!
//! and the coupling `f(u, μ, v) = c_f v + c_m tanh(√μ(‖·‖²)) e1`. Because the
//! fast drift is affine in `v` and `f` is affine in `v`, the averaged
//! coefficient is available in closed form from the stationary mean
//! `v̄ = (-Δ - g_v)⁻¹ [(-Δ)⁻¹(c_gu u + c_gm m) + g0 e1]`.
//! Slow noise is additive on the lowest `modes` sine modes.

use super::{LinearPart, ModelConstants, ModelError, ModelParams, ParamReader, SlowFastModel};
use crate::measure::MeasureMoments;
use crate::scalar::Real;
use crate::spatial::{sine_mode, Grid1D, LaplacianOp, Norm};

#[derive(Debug, Clone, PartialEq)]
pub struct PdeParams {
    /// Porous-media exponent `r` or p-Laplace exponent `p`.
    pub exponent: f64,
    pub n_interior: usize,
    pub noise_modes: usize,
    pub sigma1: f64,
    pub c_f: f64,
    pub c_m: f64,
    pub g_v: f64,
    pub c_gu: f64,
    pub c_gm: f64,
    pub g0: f64,
    pub sigma2: f64,
    pub l_b2: f64,
    pub u0_amp: f64,
    pub v0_amp: f64,
}

impl Default for PdeParams {
    fn default() -> Self {
        Self {
            exponent: 4.0,
            n_interior: 63,
            noise_modes: 4,
            sigma1: 0.05,
            c_f: 1.0,
            c_m: 0.1,
            g_v: 1.0,
            c_gu: 1.0,
            c_gm: 0.5,
            g0: 1.0,
            sigma2: 0.5,
            l_b2: 0.2,
            u0_amp: 0.1,
            v0_amp: 0.0,
        }
    }
}

impl PdeParams {
    fn read(
        model: &'static str,
        exp_key: &'static str,
        default_exp: f64,
        map: &ModelParams,
    ) -> Result<Self, ModelError> {
        let mut p = Self {
            exponent: default_exp,
            ..Self::default()
        };
        let mut r = ParamReader::new(model, map);
        r.take(exp_key, &mut p.exponent);
        r.take_usize("n_interior", &mut p.n_interior)?;
        r.take_usize("noise_modes", &mut p.noise_modes)?;
        r.take("sigma1", &mut p.sigma1);
        r.take("c_f", &mut p.c_f);
        r.take("c_m", &mut p.c_m);
        r.take("g_v", &mut p.g_v);
        r.take("c_gu", &mut p.c_gu);
        r.take("c_gm", &mut p.c_gm);
        r.take("g0", &mut p.g0);
        r.take("sigma2", &mut p.sigma2);
        r.take("l_b2", &mut p.l_b2);
        r.take("u0_amp", &mut p.u0_amp);
        r.take("v0_amp", &mut p.v0_amp);
        r.finish()?;
        Ok(p)
    }

    pub fn porous_from_map(map: &ModelParams) -> Result<Self, ModelError> {
        Self::read("porous-media-1d", "r", 4.0, map)
    }

    pub fn plaplace_from_map(map: &ModelParams) -> Result<Self, ModelError> {
        Self::read("plaplace-1d", "p", 3.0, map)
    }
}

/// Which slow-state norm the fast coupling constants are computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlowSpace {
    Hminus1,
    L2,
}

#[derive(Debug, Clone)]
struct FastHeat<T> {
    op: LaplacianOp<T>,
    modes: Vec<Vec<T>>,
    c_f: T,
    c_m: T,
    g_v: T,
    c_gu: T,
    c_gm: T,
    g0: T,
    sigma1: T,
    sigma2: T,
    l_b2: T,
}

impl<T: Real> FastHeat<T> {
    fn new(p: &PdeParams) -> Result<Self, ModelError> {
        let grid = Grid1D::new(p.n_interior)?;
        if p.noise_modes == 0 || p.noise_modes > p.n_interior {
            return Err(ModelError::InvalidParam {
                key: "noise_modes",
                reason: format!("must lie in 1..={}, got {}", p.n_interior, p.noise_modes),
            });
        }
        if p.l_b2 < 0.0 {
            return Err(ModelError::InvalidParam {
                key: "l_b2",
                reason: "must be >= 0".into(),
            });
        }
        let op = LaplacianOp::new(grid);
        if !(T::lit(p.g_v) < op.lambda1()) {
            return Err(ModelError::InvalidParam {
                key: "g_v",
                reason: format!("must be below the smallest Laplacian eigenvalue {}", op.lambda1()),
            });
        }
        Ok(Self {
            op,
            modes: (1..=p.noise_modes).map(|k| sine_mode(&grid, k)).collect(),
            c_f: T::lit(p.c_f),
            c_m: T::lit(p.c_m),
            g_v: T::lit(p.g_v),
            c_gu: T::lit(p.c_gu),
            c_gm: T::lit(p.c_gm),
            g0: T::lit(p.g0),
            sigma1: T::lit(p.sigma1),
            sigma2: T::lit(p.sigma2),
            l_b2: T::lit(p.l_b2),
        })
    }

    fn grid(&self) -> &Grid1D<T> {
        self.op.grid()
    }

    fn n(&self) -> usize {
        self.grid().n_interior()
    }

    fn e1(&self) -> &[T] {
        &self.modes[0]
    }

    /// `(-Δ)⁻¹(c_gu u + c_gm m) + g0 e1`.
    fn forcing(&self, u: &[T], mu: &MeasureMoments<T>) -> Vec<T> {
        let rhs: Vec<T> = u
            .iter()
            .zip(&mu.mean)
            .map(|(&ui, &mi)| self.c_gu * ui + self.c_gm * mi)
            .collect();
        let mut w = vec![T::zero(); rhs.len()];
        self.op.solve_neg_into(&rhs, &mut w);
        for (wi, e) in w.iter_mut().zip(self.e1()) {
            *wi += self.g0 * *e;
        }
        w
    }

    fn a2_explicit(&self, u: &[T], mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        let w = self.forcing(u, mu);
        for ((o, &vi), &wi) in out.iter_mut().zip(v).zip(&w) {
            *o = self.g_v * vi + wi;
        }
    }

    fn b2(&self, v: &[T], out: &mut [T]) {
        let n = self.n();
        for (k, ek) in self.modes.iter().enumerate() {
            let ck = self.grid().l2_inner(v, ek);
            let s = self.sigma2 + self.l_b2 * ck.tanh();
            for (o, e) in out[k * n..(k + 1) * n].iter_mut().zip(ek) {
                *o = s * *e;
            }
        }
    }

    fn b1(&self, out: &mut [T]) {
        let n = self.n();
        for (k, ek) in self.modes.iter().enumerate() {
            for (o, e) in out[k * n..(k + 1) * n].iter_mut().zip(ek) {
                *o = self.sigma1 * *e;
            }
        }
    }

    fn f(&self, mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        let s = self.c_m * mu.second_moment.max(T::zero()).sqrt().tanh();
        for ((o, &vi), &e) in out.iter_mut().zip(v).zip(self.e1()) {
            *o = self.c_f * vi + s * e;
        }
    }

    fn fbar(&self, u: &[T], mu: &MeasureMoments<T>, out: &mut [T]) {
        let w = self.forcing(u, mu);
        let n = self.n();
        let dx = self.grid().dx();
        let inv = (dx * dx).recip();
        // (-Δ - g_v) v̄ = w as a constant-coefficient tridiagonal solve
        let mut vbar = vec![T::zero(); n];
        tridiag_solve(T::lit(2.0) * inv - self.g_v, -inv, &w, &mut vbar);
        self.f(mu, &vbar, out);
    }

    fn initial(&self, u0_amp: T, v0_amp: T) -> (Vec<T>, Vec<T>) {
        let e1 = self.e1();
        (
            e1.iter().map(|&e| u0_amp * e).collect(),
            e1.iter().map(|&e| v0_amp * e).collect(),
        )
    }

    /// Embedding constant `sup ‖(-Δ)⁻¹ w‖_{L²} / ‖w‖_{H1}`.
    fn embed(&self, space: SlowSpace) -> f64 {
        let l1 = self.op.lambda1().as_f64();
        match space {
            SlowSpace::Hminus1 => l1.powf(-0.5),
            SlowSpace::L2 => 1.0 / l1,
        }
    }

    fn constants(&self, space: SlowSpace, p: &PdeParams, slow_c1: f64, theta: f64) -> ModelConstants<T> {
        let l1 = self.op.lambda1().as_f64();
        let gap = l1 - p.g_v;
        let c = self.embed(space);
        let b = p.c_gu.abs() * c;
        let cm = p.c_gm.abs() * c;
        let modes = p.noise_modes as f64;
        let c2 = ((b * b + cm * cm) / (2.0 * gap))
            .max(2.0 * p.g_v + 2.0)
            .max(2.0 * c * c * p.c_gu * p.c_gu)
            .max(2.0 * c * c * p.c_gm * p.c_gm)
            .max(p.g0 * p.g0 + modes * (p.sigma2.abs() + p.l_b2).powi(2))
            .max(f64::MIN_POSITIVE);
        let kappa = gap / 2.0;
        // f = c_f v + c_m tanh(√m2) e1, measured in the slow norm
        let f_lip = match space {
            SlowSpace::Hminus1 => p.c_f.abs().max(p.c_m.abs()) * l1.powf(-0.5),
            SlowSpace::L2 => p.c_f.abs().max(p.c_m.abs()),
        };
        ModelConstants {
            kappa: T::lit(kappa),
            l_b2: T::lit(p.l_b2),
            l_g: T::lit(p.g_v.abs()),
            lambda: T::lit((kappa - p.l_b2 * p.l_b2).max(f64::MIN_POSITIVE)),
            c1: T::lit(slow_c1.max(f_lip).max(f64::MIN_POSITIVE)),
            c2: T::lit(c2),
            theta: T::lit(theta),
            alpha: T::lit(p.exponent),
            eta: T::lit(2.0),
            beta: T::lit(2.0),
            r: None,
            p: None,
        }
    }
}

/// Constant-coefficient symmetric tridiagonal solve (Thomas algorithm).
fn tridiag_solve<T: Real>(diag: T, off: T, rhs: &[T], out: &mut [T]) {
    let n = rhs.len();
    let mut c = vec![T::zero(); n];
    let mut denom = diag;
    c[0] = off / denom;
    out[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag - off * c[i - 1];
        c[i] = off / denom;
        out[i] = (rhs[i] - off * out[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let next = out[i + 1];
        out[i] -= c[i] * next;
    }
}

/// `dX = [Δ(|X|^{r-2} X) + f] dt + B1 dW¹` with the slow state measured in
/// the discrete `H⁻¹` norm.
#[derive(Debug, Clone)]
pub struct PorousMedia1d<T> {
    fast: FastHeat<T>,
    r: T,
    u0: Vec<T>,
    v0: Vec<T>,
    constants: ModelConstants<T>,
}

impl<T: Real> PorousMedia1d<T> {
    pub fn new(p: PdeParams) -> Result<Self, ModelError> {
        if !(p.exponent >= 2.0) {
            return Err(ModelError::InvalidParam {
                key: "r",
                reason: format!("porous-media exponent must be >= 2, got {}", p.exponent),
            });
        }
        let fast = FastHeat::<T>::new(&p)?;
        // coercivity: 2<ΔΨ(u), u>_{H⁻¹} = -2‖u‖_{Lʳ}ʳ, ‖B1‖²_{HS} = σ1² Σ 1/λ_k
        let hs: f64 = (1..=p.noise_modes)
            .map(|k| p.sigma1 * p.sigma1 / fast.op.eigenvalue(k).as_f64())
            .sum();
        let mut constants = fast.constants(SlowSpace::Hminus1, &p, hs, 2.0);
        constants.r = Some(T::lit(p.exponent));
        let (u0, v0) = fast.initial(T::lit(p.u0_amp), T::lit(p.v0_amp));
        Ok(Self {
            fast,
            r: T::lit(p.exponent),
            u0,
            v0,
            constants,
        })
    }

    /// Pointwise `Ψ(u) = |u|^{r-2} u`.
    pub fn psi(&self, x: T) -> T {
        x.abs().powf(self.r - T::lit(2.0)) * x
    }

    pub fn laplacian(&self) -> &LaplacianOp<T> {
        &self.fast.op
    }
}

impl<T: Real> SlowFastModel<T> for PorousMedia1d<T> {
    fn id(&self) -> &'static str {
        "porous-media-1d"
    }
    fn slow_dim(&self) -> usize {
        self.fast.n()
    }
    fn fast_dim(&self) -> usize {
        self.fast.n()
    }
    fn slow_noise_dim(&self) -> usize {
        self.fast.modes.len()
    }
    fn fast_noise_dim(&self) -> usize {
        self.fast.modes.len()
    }
    fn constants(&self) -> &ModelConstants<T> {
        &self.constants
    }
    fn slow_norm(&self) -> Norm<T> {
        Norm::Hminus1(self.fast.op)
    }
    fn fast_norm(&self) -> Norm<T> {
        Norm::L2(*self.fast.grid())
    }
    fn slow_v_norm(&self, u: &[T]) -> T {
        self.fast.grid().lr_norm(u, self.r).expect("r >= 2")
    }
    fn fast_v_norm(&self, v: &[T]) -> T {
        self.fast.grid().h01_norm_sq(v).sqrt()
    }
    fn grid(&self) -> Option<Grid1D<T>> {
        Some(*self.fast.grid())
    }

    fn a1(&self, u: &[T], _mu: &MeasureMoments<T>, out: &mut [T]) {
        let psi: Vec<T> = u.iter().map(|&x| self.psi(x)).collect();
        self.fast.op.apply_into(&psi, out);
    }

    fn f(&self, _u: &[T], mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        self.fast.f(mu, v, out);
    }

    fn b1(&self, _u: &[T], _mu: &MeasureMoments<T>, out: &mut [T]) {
        self.fast.b1(out);
    }

    fn a2_explicit(&self, u: &[T], mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        self.fast.a2_explicit(u, mu, v, out);
    }

    fn b2(&self, _u: &[T], _mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        self.fast.b2(v, out);
    }

    fn linear_part(&self) -> Option<LinearPart<T>> {
        Some(LinearPart::Laplacian(self.fast.op))
    }

    fn fbar_exact(&self, u: &[T], mu: &MeasureMoments<T>, out: &mut [T]) -> bool {
        self.fast.fbar(u, mu, out);
        true
    }

    fn has_exact_fbar(&self) -> bool {
        true
    }

    fn slow_drift_is_stiff(&self) -> bool {
        true
    }

    fn initial_state(&self) -> (Vec<T>, Vec<T>) {
        (self.u0.clone(), self.v0.clone())
    }
}

/// `dX = [div(|∇X|^{p-2} ∇X) + f] dt + B1 dW¹` with the slow state in `L²`.
#[derive(Debug, Clone)]
pub struct PLaplace1d<T> {
    fast: FastHeat<T>,
    p: T,
    u0: Vec<T>,
    v0: Vec<T>,
    constants: ModelConstants<T>,
}

impl<T: Real> PLaplace1d<T> {
    pub fn new(p: PdeParams) -> Result<Self, ModelError> {
        if !(p.exponent >= 2.0) {
            return Err(ModelError::InvalidParam {
                key: "p",
                reason: format!("p-Laplace exponent must be >= 2, got {}", p.exponent),
            });
        }
        let fast = FastHeat::<T>::new(&p)?;
        let hs = p.sigma1 * p.sigma1 * p.noise_modes as f64;
        let mut constants = fast.constants(SlowSpace::L2, &p, hs, 2.0);
        constants.p = Some(T::lit(p.exponent));
        let (u0, v0) = fast.initial(T::lit(p.u0_amp), T::lit(p.v0_amp));
        Ok(Self {
            fast,
            p: T::lit(p.exponent),
            u0,
            v0,
            constants,
        })
    }

    fn phi(&self, q: T) -> T {
        q.abs().powf(self.p - T::lit(2.0)) * q
    }

    /// Forward differences `(u_{i+1} - u_i) / dx`, i = 0..=n, with zero ghosts.
    fn forward_diff(&self, u: &[T]) -> Vec<T> {
        let inv = self.fast.grid().dx().recip();
        let n = u.len();
        (0..=n)
            .map(|i| {
                let left = if i > 0 { u[i - 1] } else { T::zero() };
                let right = if i < n { u[i] } else { T::zero() };
                (right - left) * inv
            })
            .collect()
    }
}

impl<T: Real> SlowFastModel<T> for PLaplace1d<T> {
    fn id(&self) -> &'static str {
        "plaplace-1d"
    }
    fn slow_dim(&self) -> usize {
        self.fast.n()
    }
    fn fast_dim(&self) -> usize {
        self.fast.n()
    }
    fn slow_noise_dim(&self) -> usize {
        self.fast.modes.len()
    }
    fn fast_noise_dim(&self) -> usize {
        self.fast.modes.len()
    }
    fn constants(&self) -> &ModelConstants<T> {
        &self.constants
    }
    fn slow_norm(&self) -> Norm<T> {
        Norm::L2(*self.fast.grid())
    }
    fn fast_norm(&self) -> Norm<T> {
        Norm::L2(*self.fast.grid())
    }
    fn slow_v_norm(&self, u: &[T]) -> T {
        let d = self.forward_diff(u);
        let s: T = d.iter().map(|q| q.abs().powf(self.p)).sum();
        (self.fast.grid().dx() * s).powf(self.p.recip())
    }
    fn fast_v_norm(&self, v: &[T]) -> T {
        self.fast.grid().h01_norm_sq(v).sqrt()
    }
    fn grid(&self) -> Option<Grid1D<T>> {
        Some(*self.fast.grid())
    }

    fn a1(&self, u: &[T], _mu: &MeasureMoments<T>, out: &mut [T]) {
        let inv = self.fast.grid().dx().recip();
        let flux: Vec<T> = self.forward_diff(u).into_iter().map(|q| self.phi(q)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (flux[i + 1] - flux[i]) * inv;
        }
    }

    fn f(&self, _u: &[T], mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        self.fast.f(mu, v, out);
    }

    fn b1(&self, _u: &[T], _mu: &MeasureMoments<T>, out: &mut [T]) {
        self.fast.b1(out);
    }

    fn a2_explicit(&self, u: &[T], mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        self.fast.a2_explicit(u, mu, v, out);
    }

    fn b2(&self, _u: &[T], _mu: &MeasureMoments<T>, v: &[T], out: &mut [T]) {
        self.fast.b2(v, out);
    }

    fn linear_part(&self) -> Option<LinearPart<T>> {
        Some(LinearPart::Laplacian(self.fast.op))
    }

    fn fbar_exact(&self, u: &[T], mu: &MeasureMoments<T>, out: &mut [T]) -> bool {
        self.fast.fbar(u, mu, out);
        true
    }

    fn has_exact_fbar(&self) -> bool {
        true
    }

    fn slow_drift_is_stiff(&self) -> bool {
        true
    }

    fn initial_state(&self) -> (Vec<T>, Vec<T>) {
        (self.u0.clone(), self.v0.clone())
    }
}

/// `dx ⟨a, b⟩` helper used by the monotonicity tests.
#[cfg(test)]
fn l2<T: Real>(g: &Grid1D<T>, a: &[T], b: &[T]) -> T {
    g.dx() * crate::scalar::dot(a, b)
}
