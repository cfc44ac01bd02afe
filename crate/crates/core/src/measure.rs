//! Empirical probability measures, their moments, and the 2-Wasserstein
//! distance between them.
//!
//! The law of the slow component is represented by the uniform empirical
//! measure of the particle cloud. Exact `W₂` is available for
//! one-dimensional clouds of equal size (monotone coupling) and, as a test
//! oracle, by exhaustive search over permutations for very small clouds.
//! Multi-dimensional diagnostics use the index-aligned coupling, which only
//! bounds `W₂` from above.

use thiserror::Error;

use crate::scalar::{sq_dist, Real};
use crate::spatial::Norm;

const WEIGHT_TOL: f64 = 1e-12;
const BRUTEFORCE_MAX: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("sample set is empty")]
    Empty,
    #[error("point dimension must be at least 1")]
    ZeroDimension,
    #[error("point {index} has dimension {got}, expected {expected}")]
    RaggedPoints { index: usize, expected: usize, got: usize },
    #[error("weights must be nonnegative and sum to 1: {0}")]
    InvalidWeights(String),
    #[error("sample sets have {left} and {right} points")]
    CardinalityMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unsupported case: {0}")]
    Unsupported(&'static str),
    #[error("exhaustive search refused for n = {0} (limit {BRUTEFORCE_MAX})")]
    TooLarge(usize),
}

/// A finite, optionally weighted cloud of points in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    dim: usize,
    data: Vec<T>,
    weights: Option<Vec<T>>,
}

impl<T: Real> SampleSet<T> {
    /// Uniformly weighted set from a list of points.
    pub fn uniform(points: Vec<Vec<T>>) -> Result<Self, MeasureError> {
        let first = points.first().ok_or(MeasureError::Empty)?;
        let dim = first.len();
        if dim == 0 {
            return Err(MeasureError::ZeroDimension);
        }
        let mut data = Vec::with_capacity(dim * points.len());
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(MeasureError::RaggedPoints {
                    index,
                    expected: dim,
                    got: p.len(),
                });
            }
            data.extend_from_slice(p);
        }
        Ok(Self {
            dim,
            data,
            weights: None,
        })
    }

    pub fn weighted(points: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self, MeasureError> {
        let mut s = Self::uniform(points)?;
        if weights.len() != s.len() {
            return Err(MeasureError::InvalidWeights(format!(
                "{} weights for {} points",
                weights.len(),
                s.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= T::zero())) {
            return Err(MeasureError::InvalidWeights("negative weight".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs().as_f64() > WEIGHT_TOL {
            return Err(MeasureError::InvalidWeights(format!("sum is {total}")));
        }
        s.weights = Some(weights);
        Ok(s)
    }

    /// One-dimensional uniform set.
    pub fn scalars(values: &[T]) -> Result<Self, MeasureError> {
        Self::from_rows(1, values.to_vec())
    }

    /// Uniform set from row-major storage, `dim` values per point.
    pub fn from_rows(dim: usize, data: Vec<T>) -> Result<Self, MeasureError> {
        if dim == 0 {
            return Err(MeasureError::ZeroDimension);
        }
        if data.is_empty() {
            return Err(MeasureError::Empty);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(MeasureError::RaggedPoints {
                index: data.len() / dim,
                expected: dim,
                got: data.len() % dim,
            });
        }
        Ok(Self {
            dim,
            data,
            weights: None,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.is_none()
    }

    pub fn weight(&self, i: usize) -> T {
        match &self.weights {
            Some(w) => w[i],
            None => T::one() / T::from_usize_lossy(self.len()),
        }
    }
}

/// Mean and second moment `μ(‖·‖²)` of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureMoments<T> {
    pub mean: Vec<T>,
    pub second_moment: T,
}

impl<T: Real> MeasureMoments<T> {
    /// Point mass at the origin of `R^dim`.
    pub fn dirac_zero(dim: usize) -> Self {
        Self {
            mean: vec![T::zero(); dim],
            second_moment: T::zero(),
        }
    }

    /// Moments of the uniform empirical measure over row-major particle states.
    pub fn from_rows(rows: &[T], dim: usize, norm: &Norm<T>) -> Self {
        let n = rows.len() / dim;
        let inv = T::one() / T::from_usize_lossy(n.max(1));
        let mut mean = vec![T::zero(); dim];
        let mut m2 = T::zero();
        for row in rows.chunks_exact(dim) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += *x;
            }
            m2 += norm.norm_sq(row);
        }
        for m in &mut mean {
            *m *= inv;
        }
        Self {
            mean,
            second_moment: m2 * inv,
        }
    }
}

fn norm_dim<T: Real>(norm: &Norm<T>) -> Option<usize> {
    match norm {
        Norm::Euclidean => None,
        Norm::L2(g) => Some(g.n_interior()),
        Norm::Hminus1(op) => Some(op.grid().n_interior()),
    }
}

/// Weighted mean and second moment under `norm`.
pub fn moments<T: Real>(m: &SampleSet<T>, norm: &Norm<T>) -> Result<MeasureMoments<T>, MeasureError> {
    if let Some(d) = norm_dim(norm) {
        if d != m.dim() {
            return Err(MeasureError::DimensionMismatch {
                left: m.dim(),
                right: d,
            });
        }
    }
    let mut mean = vec![T::zero(); m.dim()];
    let mut m2 = T::zero();
    for (i, p) in m.points().enumerate() {
        let w = m.weight(i);
        for (acc, x) in mean.iter_mut().zip(p) {
            *acc += w * *x;
        }
        m2 += w * norm.norm_sq(p);
    }
    Ok(MeasureMoments {
        mean,
        second_moment: m2,
    })
}

fn check_pair<T: Real>(a: &SampleSet<T>, b: &SampleSet<T>) -> Result<(), MeasureError> {
    if a.dim() != b.dim() {
        return Err(MeasureError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    if a.len() != b.len() {
        return Err(MeasureError::CardinalityMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Exact `W₂` between two uniform one-dimensional clouds of equal size,
/// via the sorted coupling.
pub fn w2_1d<T: Real>(a: &SampleSet<T>, b: &SampleSet<T>) -> Result<T, MeasureError> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(MeasureError::Unsupported(
            "w2_1d needs one-dimensional points; use w2_coupling_bound",
        ));
    }
    if !a.is_uniform() || !b.is_uniform() {
        return Err(MeasureError::Unsupported(
            "w2_1d needs uniform weights; use w2_coupling_bound",
        ));
    }
    if a.len() != b.len() {
        return Err(MeasureError::Unsupported(
            "w2_1d needs equal cardinality; use w2_coupling_bound",
        ));
    }
    let mut xs = a.data.clone();
    let mut ys = b.data.clone();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    let n = T::from_usize_lossy(xs.len());
    Ok((sq_dist(&xs, &ys) / n).sqrt())
}

/// `sqrt(mean_i ‖a_i - b_i‖²)` under the identity coupling; an upper bound
/// on `W₂` for uniformly weighted, index-aligned clouds.
pub fn w2_coupling_bound<T: Real>(a: &SampleSet<T>, b: &SampleSet<T>) -> Result<T, MeasureError> {
    w2_coupling_bound_in(a, b, &Norm::Euclidean)
}

/// As [`w2_coupling_bound`], with distances measured in `norm`.
pub fn w2_coupling_bound_in<T: Real>(a: &SampleSet<T>, b: &SampleSet<T>, norm: &Norm<T>) -> Result<T, MeasureError> {
    check_pair(a, b)?;
    let n = a.len();
    let total: T = (0..n).map(|i| norm.dist_sq(a.point(i), b.point(i))).sum();
    Ok((total / T::from_usize_lossy(n)).sqrt())
}

/// Exact `W₂` by minimizing over all `n!` permutation couplings (n <= 8).
pub fn w2_bruteforce<T: Real>(a: &SampleSet<T>, b: &SampleSet<T>) -> Result<T, MeasureError> {
    check_pair(a, b)?;
    if !a.is_uniform() || !b.is_uniform() {
        return Err(MeasureError::Unsupported("w2_bruteforce needs uniform weights"));
    }
    let n = a.len();
    if n > BRUTEFORCE_MAX {
        return Err(MeasureError::TooLarge(n));
    }
    let cost: Vec<T> = (0..n * n).map(|k| sq_dist(a.point(k / n), b.point(k % n))).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let eval = |p: &[usize]| -> T { p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum() };
    let mut best = eval(&perm);
    // Heap's algorithm, iterative form
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok((best / T::from_usize_lossy(n)).sqrt())
}
