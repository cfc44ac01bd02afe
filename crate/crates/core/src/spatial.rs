//! Finite-difference discretization of the unit interval with homogeneous
//! Dirichlet boundary conditions.
//!
//! States of the PDE models are nodal values at the `n` interior points
//! `x_i = (i + 1) * dx`, `dx = 1 / (n + 1)`. The discrete norms here stand in
//! for the continuum Gelfand-triple norms:
//!
//! | norm       | formula                                  |
//! |------------|------------------------------------------|
//! | `L²`       | `dx * Σ u_i²`                            |
//! | `H¹₀`      | `dx * Σ ((u_{i+1} - u_i) / dx)²` (ghosts) |
//! | `H⁻¹`      | `dx * uᵀ (-L)⁻¹ u`                       |
//! | `Lʳ`       | `(dx * Σ |u_i|ʳ)^{1/r}`                   |
//!
//! The discrete sine vectors `e_k(x_i) = √2 sin(kπx_i)` are orthonormal in
//! the `L²` inner product and diagonalize the Laplacian; [`mode_project`] is
//! the Galerkin truncation onto their span.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{dot, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpatialError {
    #[error("grid needs at least one interior point")]
    EmptyGrid,
    #[error("field has {got} values but the grid has {expected} interior points")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Lr norm requires r >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("mode count {modes} outside 1..={n}")]
    ModeOutOfRange { modes: usize, n: usize },
}

/// Uniform grid on (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    n_interior: usize,
    dx: T,
}

impl<T: Real> Grid1D<T> {
    pub fn new(n_interior: usize) -> Result<Self, SpatialError> {
        if n_interior == 0 {
            return Err(SpatialError::EmptyGrid);
        }
        let dx = T::one() / T::from_usize_lossy(n_interior + 1);
        Ok(Self { n_interior, dx })
    }

    #[inline]
    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    #[inline]
    pub fn dx(&self) -> T {
        self.dx
    }

    /// Coordinate of interior node `i` (zero-based).
    #[inline]
    pub fn node(&self, i: usize) -> T {
        T::from_usize_lossy(i + 1) * self.dx
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n_interior).map(|i| self.node(i)).collect()
    }

    fn check(&self, len: usize) -> Result<(), SpatialError> {
        if len == self.n_interior {
            Ok(())
        } else {
            Err(SpatialError::DimensionMismatch {
                expected: self.n_interior,
                got: len,
            })
        }
    }

    pub fn l2_norm_sq(&self, u: &[T]) -> T {
        self.dx * dot(u, u)
    }

    pub fn l2_inner(&self, u: &[T], v: &[T]) -> T {
        self.dx * dot(u, v)
    }

    /// Discrete H¹₀ seminorm squared, including the two boundary gaps.
    pub fn h01_norm_sq(&self, u: &[T]) -> T {
        let n = u.len();
        let mut acc = T::zero();
        let mut prev = T::zero();
        for &ui in u {
            let d = ui - prev;
            acc += d * d;
            prev = ui;
        }
        if n > 0 {
            acc += prev * prev;
        }
        acc / self.dx
    }

    pub fn lr_norm(&self, u: &[T], r: T) -> Result<T, SpatialError> {
        if !(r >= T::one()) {
            return Err(SpatialError::InvalidExponent(r.as_f64()));
        }
        let s: T = u.iter().map(|x| x.abs().powf(r)).sum();
        Ok((self.dx * s).powf(r.recip()))
    }
}

/// Nodal values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    values: Vec<T>,
    grid: Grid1D<T>,
}

impl<T: Real> Field<T> {
    pub fn new(grid: Grid1D<T>, values: Vec<T>) -> Result<Self, SpatialError> {
        grid.check(values.len())?;
        Ok(Self { values, grid })
    }

    pub fn zeros(grid: Grid1D<T>) -> Self {
        Self {
            values: vec![T::zero(); grid.n_interior()],
            grid,
        }
    }

    pub fn from_fn(grid: Grid1D<T>, f: impl Fn(T) -> T) -> Self {
        let values = (0..grid.n_interior()).map(|i| f(grid.node(i))).collect();
        Self { values, grid }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }
}

/// Dirichlet Laplacian `(u_{i-1} - 2u_i + u_{i+1}) / dx²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacianOp<T> {
    grid: Grid1D<T>,
}

impl<T: Real> LaplacianOp<T> {
    pub fn new(grid: Grid1D<T>) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    /// Writes `L u` into `out`. Slices must have the grid length.
    pub fn apply_into(&self, u: &[T], out: &mut [T]) {
        let n = u.len();
        debug_assert_eq!(n, self.grid.n_interior);
        let inv = (self.grid.dx * self.grid.dx).recip();
        let two = T::lit(2.0);
        for i in 0..n {
            let left = if i > 0 { u[i - 1] } else { T::zero() };
            let right = if i + 1 < n { u[i + 1] } else { T::zero() };
            out[i] = (left - two * u[i] + right) * inv;
        }
    }

    pub fn apply(&self, u: &Field<T>) -> Result<Field<T>, SpatialError> {
        self.grid.check(u.values.len())?;
        let mut out = Field::zeros(self.grid);
        self.apply_into(&u.values, &mut out.values);
        Ok(out)
    }

    /// Eigenvalue magnitude of `-L` for the k-th sine mode (k >= 1).
    pub fn eigenvalue(&self, k: usize) -> T {
        let dx = self.grid.dx;
        let two = T::lit(2.0);
        two / (dx * dx) * (T::one() - (T::from_usize_lossy(k) * T::pi() * dx).cos())
    }

    /// Smallest eigenvalue of `-L`; tends to π² as the grid is refined.
    pub fn lambda1(&self) -> T {
        self.eigenvalue(1)
    }

    /// Largest eigenvalue of `-L`.
    pub fn lambda_max(&self) -> T {
        self.eigenvalue(self.grid.n_interior)
    }

    /// Solves `(I + c(-L)) x = rhs` for `c >= 0` (c = 0 copies).
    pub fn solve_shifted_into(&self, c: T, rhs: &[T], out: &mut [T]) {
        let inv = (self.grid.dx * self.grid.dx).recip();
        let off = -c * inv;
        let diag = T::one() + T::lit(2.0) * c * inv;
        thomas_const(diag, off, rhs, out);
    }

    /// Solves `(-L) x = rhs`.
    pub fn solve_neg_into(&self, rhs: &[T], out: &mut [T]) {
        let inv = (self.grid.dx * self.grid.dx).recip();
        thomas_const(T::lit(2.0) * inv, -inv, rhs, out);
    }

    /// `dx * uᵀ (-L)⁻¹ v`, the discrete H⁻¹ inner product.
    pub fn hminus1_inner(&self, u: &[T], v: &[T]) -> T {
        let mut w = vec![T::zero(); v.len()];
        self.solve_neg_into(v, &mut w);
        self.grid.dx * dot(u, &w)
    }

    pub fn hminus1_norm_sq_slice(&self, u: &[T]) -> T {
        self.hminus1_inner(u, u)
    }

    pub fn hminus1_norm_sq(&self, u: &Field<T>) -> Result<T, SpatialError> {
        self.grid.check(u.values.len())?;
        Ok(self.hminus1_norm_sq_slice(&u.values))
    }

    pub fn h01_norm_sq(&self, u: &Field<T>) -> Result<T, SpatialError> {
        self.grid.check(u.values.len())?;
        Ok(self.grid.h01_norm_sq(&u.values))
    }
}

/// Thomas algorithm for a symmetric tridiagonal Toeplitz system with
/// diagonal `diag` and off-diagonal `off`. Diagonal dominance is assumed.
fn thomas_const<T: Real>(diag: T, off: T, rhs: &[T], out: &mut [T]) {
    let n = rhs.len();
    if n == 0 {
        return;
    }
    let mut c_prime = vec![T::zero(); n];
    let mut denom = diag;
    c_prime[0] = off / denom;
    out[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag - off * c_prime[i - 1];
        c_prime[i] = off / denom;
        out[i] = (rhs[i] - off * out[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let next = out[i + 1];
        out[i] -= c_prime[i] * next;
    }
}

/// `e_k(x_i) = √2 sin(kπ x_i)` on the grid, k >= 1.
pub fn sine_mode<T: Real>(grid: &Grid1D<T>, k: usize) -> Vec<T> {
    let s2 = T::lit(2.0).sqrt();
    let kpi = T::from_usize_lossy(k) * T::pi();
    (0..grid.n_interior())
        .map(|i| s2 * (kpi * grid.node(i)).sin())
        .collect()
}

/// Sine-mode coefficients `c_k = dx Σ_i u_i e_k(x_i)` for k = 1..=modes.
pub fn mode_coefficients<T: Real>(grid: &Grid1D<T>, u: &[T], modes: usize) -> Vec<T> {
    (1..=modes).map(|k| grid.l2_inner(u, &sine_mode(grid, k))).collect()
}

/// Galerkin projection onto the span of the first `n_modes` sine modes.
pub fn mode_project<T: Real>(u: &Field<T>, n_modes: usize) -> Result<Field<T>, SpatialError> {
    let grid = *u.grid();
    let n = grid.n_interior();
    if n_modes == 0 || n_modes > n {
        return Err(SpatialError::ModeOutOfRange { modes: n_modes, n });
    }
    let mut out = Field::zeros(grid);
    for k in 1..=n_modes {
        let ek = sine_mode(&grid, k);
        let c = grid.l2_inner(u.values(), &ek);
        for (o, e) in out.values.iter_mut().zip(&ek) {
            *o += c * *e;
        }
    }
    Ok(out)
}

/// Which discrete norm measures a state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormTag {
    Euclidean,
    L2,
    Hminus1,
}

impl std::str::FromStr for NormTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "l2" => Ok(Self::L2),
            "hminus1" => Ok(Self::Hminus1),
            other => Err(format!("unknown norm tag {other:?}")),
        }
    }
}

/// A concrete inner-product norm on a state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm<T> {
    Euclidean,
    L2(Grid1D<T>),
    Hminus1(LaplacianOp<T>),
}

impl<T: Real> Norm<T> {
    pub fn tag(&self) -> NormTag {
        match self {
            Norm::Euclidean => NormTag::Euclidean,
            Norm::L2(_) => NormTag::L2,
            Norm::Hminus1(_) => NormTag::Hminus1,
        }
    }

    /// Builds the norm named by `tag`; grid-based norms need a grid.
    pub fn from_tag(tag: NormTag, grid: Option<Grid1D<T>>) -> Option<Self> {
        match (tag, grid) {
            (NormTag::Euclidean, _) => Some(Norm::Euclidean),
            (NormTag::L2, Some(g)) => Some(Norm::L2(g)),
            (NormTag::Hminus1, Some(g)) => Some(Norm::Hminus1(LaplacianOp::new(g))),
            _ => None,
        }
    }

    pub fn inner(&self, u: &[T], v: &[T]) -> T {
        match self {
            Norm::Euclidean => dot(u, v),
            Norm::L2(g) => g.l2_inner(u, v),
            Norm::Hminus1(op) => op.hminus1_inner(u, v),
        }
    }

    pub fn norm_sq(&self, u: &[T]) -> T {
        self.inner(u, u)
    }

    pub fn dist_sq(&self, u: &[T], v: &[T]) -> T {
        let d: Vec<T> = u.iter().zip(v).map(|(&a, &b)| a - b).collect();
        self.norm_sq(&d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_point_stencil() {
        let g = Grid1D::<f64>::new(1).unwrap();
        let op = LaplacianOp::new(g);
        let u = Field::new(g, vec![1.0]).unwrap();
        assert_eq!(op.apply(&u).unwrap().values(), &[-8.0]);
        assert_relative_eq!(op.lambda1(), 8.0, epsilon = 1e-12);
        assert_relative_eq!(op.hminus1_norm_sq(&u).unwrap(), 0.0625, epsilon = 1e-15);
    }

    #[test]
    fn zero_field_is_fixed() {
        let g = Grid1D::<f64>::new(17).unwrap();
        let op = LaplacianOp::new(g);
        let z = Field::zeros(g);
        assert!(op.apply(&z).unwrap().values().iter().all(|&x| x == 0.0));
        assert_eq!(op.hminus1_norm_sq(&z).unwrap(), 0.0);
        assert_eq!(op.h01_norm_sq(&z).unwrap(), 0.0);
    }

    #[test]
    fn sine_is_discrete_eigenvector() {
        let g = Grid1D::<f64>::new(99).unwrap();
        let op = LaplacianOp::new(g);
        let u = Field::from_fn(g, |x| (std::f64::consts::PI * x).sin());
        let lu = op.apply(&u).unwrap();
        let lam = op.lambda1();
        for (a, b) in lu.values().iter().zip(u.values()) {
            assert_relative_eq!(*a, -lam * b, epsilon = 1e-9);
        }
        let pi2 = std::f64::consts::PI.powi(2);
        // O(dx²) gap to the continuum eigenvalue
        assert!((lam - pi2).abs() < pi2 * g.dx() * g.dx());
    }

    #[test]
    fn lambda1_limits() {
        let op = LaplacianOp::new(Grid1D::<f64>::new(999).unwrap());
        assert!((op.lambda1() - std::f64::consts::PI.powi(2)).abs() < 1e-3);
        let mut last = 0.0;
        for n in 1..200 {
            let l = LaplacianOp::new(Grid1D::<f64>::new(n).unwrap()).lambda1();
            assert!(l > last);
            last = l;
        }
    }

    #[test]
    fn hminus1_is_quadratic() {
        let g = Grid1D::<f64>::new(9).unwrap();
        let op = LaplacianOp::new(g);
        let u = Field::from_fn(g, |x| x * (1.0 - x) + 0.3 * x.sin());
        let cu = Field::new(g, u.values().iter().map(|v| 3.0 * v).collect()).unwrap();
        assert_relative_eq!(
            op.hminus1_norm_sq(&cu).unwrap(),
            9.0 * op.hminus1_norm_sq(&u).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn norms_on_constant_field() {
        let g = Grid1D::<f64>::new(999).unwrap();
        let one = vec![1.0; 999];
        assert!((g.l2_norm_sq(&one) - 1.0).abs() < 2.0 * g.dx());
        assert_relative_eq!(
            g.lr_norm(&one, 2.0).unwrap(),
            g.l2_norm_sq(&one).sqrt(),
            epsilon = 1e-14
        );
        assert!(matches!(g.lr_norm(&one, 0.5), Err(SpatialError::InvalidExponent(_))));
    }

    #[test]
    fn dimension_mismatch_reported() {
        let g = Grid1D::<f64>::new(4).unwrap();
        let op = LaplacianOp::new(Grid1D::new(5).unwrap());
        let u = Field::zeros(g);
        assert_eq!(
            op.apply(&u),
            Err(SpatialError::DimensionMismatch { expected: 5, got: 4 })
        );
        assert!(Grid1D::<f64>::new(0).is_err());
    }

    #[test]
    fn projection_drops_high_modes() {
        let g = Grid1D::<f64>::new(31).unwrap();
        let e1 = sine_mode(&g, 1);
        let e3 = sine_mode(&g, 3);
        // orthonormality by direct inner products
        assert_relative_eq!(g.l2_inner(&e1, &e1), 1.0, epsilon = 1e-12);
        assert!(g.l2_inner(&e1, &e3).abs() < 1e-12);
        let sum: Vec<f64> = e1.iter().zip(&e3).map(|(a, b)| a + b).collect();
        let p = mode_project(&Field::new(g, sum).unwrap(), 2).unwrap();
        for (a, b) in p.values().iter().zip(&e1) {
            assert_relative_eq!(*a, *b, epsilon = 1e-10);
        }
        let e1f = Field::new(g, e1.clone()).unwrap();
        let p1 = mode_project(&e1f, 1).unwrap();
        for (a, b) in p1.values().iter().zip(&e1) {
            assert_relative_eq!(*a, *b, epsilon = 1e-10);
        }
        assert!(mode_project(&e1f, 0).is_err());
        assert!(mode_project(&e1f, 32).is_err());
    }

    #[test]
    fn full_projection_is_identity() {
        let g = Grid1D::<f64>::new(12).unwrap();
        let u = Field::from_fn(g, |x| (5.0 * x).exp() - x);
        let p = mode_project(&u, 12).unwrap();
        for (a, b) in p.values().iter().zip(u.values()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-10, max_relative = 1e-12);
        }
    }

    #[test]
    fn shifted_solve_inverts() {
        let g = Grid1D::<f64>::new(20).unwrap();
        let op = LaplacianOp::new(g);
        let b: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut x = vec![0.0; 20];
        op.solve_shifted_into(0.01, &b, &mut x);
        let mut lx = vec![0.0; 20];
        op.apply_into(&x, &mut lx);
        for i in 0..20 {
            assert_relative_eq!(x[i] - 0.01 * lx[i], b[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = Grid1D::<f32>::new(1).unwrap();
        let op = LaplacianOp::new(g);
        assert!((op.lambda1() - 8.0).abs() < 1e-5);
        assert!((op.hminus1_norm_sq_slice(&[1.0]) - 0.0625).abs() < 1e-7);
    }
}
