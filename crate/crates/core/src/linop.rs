//! The linear-operator contract and generic numerical utilities built on it:
//! adjoint validation (dot test), spectral-norm estimation by power
//! iteration, and operator normalization.
//!
//! Every forward model and transform in this crate is matrix-free and
//! implements [`LinearMap`]. Random draws are taken from a seeded ChaCha8
//! generator so all checks are reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

use crate::error::{Error, Result};

/// A matrix-free linear operator together with its adjoint.
///
/// Implementations must be reentrant: concurrent `apply` calls on the same
/// operator with distinct inputs are legal.
pub trait LinearMap: Send + Sync {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64>;
}

macro_rules! forward_linear_map {
    ($ty:ty) => {
        impl<M: LinearMap + ?Sized> LinearMap for $ty {
            fn input_len(&self) -> usize {
                (**self).input_len()
            }
            fn output_len(&self) -> usize {
                (**self).output_len()
            }
            fn apply(&self, x: &[f64]) -> Vec<f64> {
                (**self).apply(x)
            }
            fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
                (**self).apply_adjoint(y)
            }
        }
    };
}

forward_linear_map!(&M);
forward_linear_map!(Box<M>);
forward_linear_map!(Arc<M>);

/// The identity on `R^n`.
#[derive(Debug, Clone)]
pub struct IdentityMap {
    pub len: usize,
}

impl LinearMap for IdentityMap {
    fn input_len(&self) -> usize {
        self.len
    }
    fn output_len(&self) -> usize {
        self.len
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
}

/// Diagonal scaling by a fixed vector.
#[derive(Debug, Clone)]
pub struct DiagonalMap {
    pub diag: Vec<f64>,
}

impl LinearMap for DiagonalMap {
    fn input_len(&self) -> usize {
        self.diag.len()
    }
    fn output_len(&self) -> usize {
        self.diag.len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.diag).map(|(v, d)| v * d).collect()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        self.apply(y)
    }
}

/// A dense matrix with its literal transpose as adjoint. Used by tests and
/// tiny-grid oracles; operators at production sizes stay matrix-free.
#[derive(Debug, Clone)]
pub struct DenseMap {
    rows: usize,
    cols: usize,
    /// Row-major entries, length rows*cols.
    entries: Vec<f64>,
}

impl DenseMap {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "dense map entries {} != {}x{}",
                entries.len(),
                rows,
                cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    /// Materialize any operator by applying it to the standard basis.
    pub fn from_operator(op: &dyn LinearMap) -> Self {
        let (rows, cols) = (op.output_len(), op.input_len());
        let mut entries = vec![0.0; rows * cols];
        let mut e = vec![0.0; cols];
        for j in 0..cols {
            e[j] = 1.0;
            let col = op.apply(&e);
            for i in 0..rows {
                entries[i * cols + j] = col[i];
            }
            e[j] = 0.0;
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

impl LinearMap for DenseMap {
    fn input_len(&self) -> usize {
        self.cols
    }
    fn output_len(&self) -> usize {
        self.rows
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dense map input length");
        (0..self.rows)
            .map(|i| {
                let row = &self.entries[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "dense map adjoint input length");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            let yi = y[i];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        out
    }
}

/// Block-diagonal repetition of one operator over `blocks` independent
/// copies (e.g. one transform applied to every frame of a stack).
#[derive(Debug, Clone)]
pub struct BlockDiagMap<M> {
    inner: M,
    blocks: usize,
}

impl<M: LinearMap> BlockDiagMap<M> {
    pub fn new(inner: M, blocks: usize) -> Self {
        assert!(blocks > 0, "block-diagonal map needs at least one block");
        Self { inner, blocks }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }
}

impl<M: LinearMap> LinearMap for BlockDiagMap<M> {
    fn input_len(&self) -> usize {
        self.inner.input_len() * self.blocks
    }
    fn output_len(&self) -> usize {
        self.inner.output_len() * self.blocks
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        use rayon::prelude::*;
        assert_eq!(x.len(), self.input_len(), "block map input length");
        let (ni, no) = (self.inner.input_len(), self.inner.output_len());
        let mut out = vec![0.0; self.output_len()];
        out.par_chunks_mut(no)
            .zip(x.par_chunks(ni))
            .for_each(|(dst, src)| dst.copy_from_slice(&self.inner.apply(src)));
        out
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        use rayon::prelude::*;
        assert_eq!(y.len(), self.output_len(), "block map adjoint input length");
        let (ni, no) = (self.inner.input_len(), self.inner.output_len());
        let mut out = vec![0.0; self.input_len()];
        out.par_chunks_mut(ni)
            .zip(y.par_chunks(no))
            .for_each(|(dst, src)| dst.copy_from_slice(&self.inner.apply_adjoint(src)));
        out
    }
}

/// Block-diagonal stack of distinct operators of equal shapes (e.g. one
/// per time frame).
#[derive(Debug, Clone)]
pub struct BlockDiagList<M> {
    blocks: Vec<M>,
}

impl<M: LinearMap> BlockDiagList<M> {
    pub fn new(blocks: Vec<M>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidArgument("block list needs at least one block".into()))?;
        let (ni, no) = (first.input_len(), first.output_len());
        if blocks
            .iter()
            .any(|b| b.input_len() != ni || b.output_len() != no)
        {
            return Err(Error::ShapeMismatch(
                "block list operators must share input/output lengths".into(),
            ));
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> usize {
        self.blocks.len()
    }
}

impl<M: LinearMap> LinearMap for BlockDiagList<M> {
    fn input_len(&self) -> usize {
        self.blocks[0].input_len() * self.blocks.len()
    }
    fn output_len(&self) -> usize {
        self.blocks[0].output_len() * self.blocks.len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        use rayon::prelude::*;
        assert_eq!(x.len(), self.input_len(), "block list input length");
        let (ni, no) = (self.blocks[0].input_len(), self.blocks[0].output_len());
        let mut out = vec![0.0; self.output_len()];
        out.par_chunks_mut(no)
            .zip(x.par_chunks(ni))
            .zip(self.blocks.par_iter())
            .for_each(|((dst, src), b)| dst.copy_from_slice(&b.apply(src)));
        out
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        use rayon::prelude::*;
        assert_eq!(y.len(), self.output_len(), "block list adjoint length");
        let (ni, no) = (self.blocks[0].input_len(), self.blocks[0].output_len());
        let mut out = vec![0.0; self.input_len()];
        out.par_chunks_mut(ni)
            .zip(y.par_chunks(no))
            .zip(self.blocks.par_iter())
            .for_each(|((dst, src), b)| dst.copy_from_slice(&b.apply_adjoint(src)));
        out
    }
}

/// An operator rescaled so its estimated spectral norm is at most one.
#[derive(Debug, Clone)]
pub struct NormalizedMap<M> {
    inner: M,
    scale: f64,
}

impl<M: LinearMap> NormalizedMap<M> {
    pub fn inner(&self) -> &M {
        &self.inner
    }

    /// The factor applied to the operator; the data vector of a least-squares
    /// problem must be scaled by the same factor to keep the minimizer.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl<M: LinearMap> LinearMap for NormalizedMap<M> {
    fn input_len(&self) -> usize {
        self.inner.input_len()
    }
    fn output_len(&self) -> usize {
        self.inner.output_len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.inner.apply(x);
        for v in &mut y {
            *v *= self.scale;
        }
        y
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.inner.apply_adjoint(y);
        for v in &mut x {
            *v *= self.scale;
        }
        x
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Result of [`dot_test`].
#[derive(Debug, Clone, Copy)]
pub struct DotTestReport {
    pub max_relative_discrepancy: f64,
    pub trials: usize,
}

/// Validate the adjoint pair of an operator: draws random `x`, `z` and
/// compares `<Ax, z>` against `<x, A'z>`, normalized by `|Ax| |z|`.
pub fn dot_test(op: &dyn LinearMap, trials: usize, seed: u64) -> Result<DotTestReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("dot_test needs trials >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel = 0.0f64;
    for _ in 0..trials {
        let x = random_vector(&mut rng, op.input_len());
        let z = random_vector(&mut rng, op.output_len());
        let ax = op.apply(&x);
        if ax.len() != op.output_len() {
            return Err(Error::ShapeMismatch(format!(
                "apply returned {} values, operator declares {}",
                ax.len(),
                op.output_len()
            )));
        }
        let atz = op.apply_adjoint(&z);
        if atz.len() != op.input_len() {
            return Err(Error::ShapeMismatch(format!(
                "apply_adjoint returned {} values, operator declares {}",
                atz.len(),
                op.input_len()
            )));
        }
        let lhs = dot(&ax, &z);
        let rhs = dot(&x, &atz);
        let rel = (lhs - rhs).abs() / (norm2(&ax) * norm2(&z) + f64::EPSILON);
        max_rel = max_rel.max(rel);
    }
    Ok(DotTestReport {
        max_relative_discrepancy: max_rel,
        trials,
    })
}

/// Result of [`power_iteration_lambda_max`].
#[derive(Debug, Clone, Copy)]
pub struct SpectralEstimate {
    /// Estimated largest eigenvalue of `A'A` (the squared spectral norm).
    pub lambda_max: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the operator annihilated the start vector; the estimate is 0.
    pub zero_map: bool,
}

/// Estimate the largest eigenvalue of `A'A` by power iteration on
/// `x <- A'(A x)`, stopping when the Rayleigh quotient changes by less than
/// `tol` relative to its magnitude.
pub fn power_iteration_lambda_max(
    op: &dyn LinearMap,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<SpectralEstimate> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("power iteration tol must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_vector(&mut rng, op.input_len());
    let nx = norm2(&x);
    if nx == 0.0 {
        return Err(Error::Numeric("power iteration start vector is zero".into()));
    }
    for v in &mut x {
        *v /= nx;
    }
    let mut lambda = 0.0f64;
    for k in 0..max_iters {
        let y = op.apply_adjoint(&op.apply(&x));
        let ny = norm2(&y);
        if ny == 0.0 {
            return Ok(SpectralEstimate {
                lambda_max: 0.0,
                iterations: k + 1,
                converged: true,
                zero_map: true,
            });
        }
        // Rayleigh quotient of A'A at the unit vector x; clamp tiny negative
        // round-off.
        let next = dot(&x, &y).max(0.0);
        x = y;
        for v in &mut x {
            *v /= ny;
        }
        let delta = (next - lambda).abs();
        lambda = next;
        if k > 0 && delta <= tol * lambda.max(f64::MIN_POSITIVE) {
            return Ok(SpectralEstimate {
                lambda_max: lambda,
                iterations: k + 1,
                converged: true,
                zero_map: false,
            });
        }
    }
    Ok(SpectralEstimate {
        lambda_max: lambda,
        iterations: max_iters,
        converged: false,
        zero_map: false,
    })
}

/// Safety margin applied on top of the spectral-norm estimate. Power
/// iteration approaches the true norm from below, and the solver's step
/// bound must not be violated by estimation error.
pub const NORMALIZATION_MARGIN: f64 = 0.01;

/// Wrap an operator so its spectral norm is (estimated) at most one:
/// `scale = 1 / sqrt(lambda_max * (1 + margin))`.
pub fn normalize_map<M: LinearMap>(op: M, seed: u64) -> Result<NormalizedMap<M>> {
    let est = power_iteration_lambda_max(&op, 1000, 1e-10, seed)?;
    if est.zero_map || est.lambda_max <= 0.0 {
        return Err(Error::Numeric("cannot normalize zero map".into()));
    }
    let scale = 1.0 / (est.lambda_max * (1.0 + NORMALIZATION_MARGIN)).sqrt();
    Ok(NormalizedMap { inner: op, scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_test_identity_is_exact() {
        let op = IdentityMap { len: 4 };
        let r = dot_test(&op, 10, 1).unwrap();
        assert_eq!(r.max_relative_discrepancy, 0.0);
    }

    #[test]
    fn dot_test_dense_transpose() {
        let m = DenseMap::new(3, 2, vec![1.0, -2.0, 0.5, 4.0, -1.0, 3.0]).unwrap();
        let r = dot_test(&m, 20, 7).unwrap();
        assert!(r.max_relative_discrepancy <= 1e-14);
    }

    #[test]
    fn dot_test_catches_wrong_adjoint() {
        struct Bad;
        impl LinearMap for Bad {
            fn input_len(&self) -> usize {
                2
            }
            fn output_len(&self) -> usize {
                2
            }
            fn apply(&self, x: &[f64]) -> Vec<f64> {
                vec![x[0] + x[1], x[1]]
            }
            fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
                y.to_vec() // not the transpose
            }
        }
        let r = dot_test(&Bad, 10, 3).unwrap();
        assert!(r.max_relative_discrepancy > 1e-3);
    }

    #[test]
    fn power_iteration_scaled_identity() {
        let op = DiagonalMap {
            diag: vec![2.0; 8],
        };
        let est = power_iteration_lambda_max(&op, 100, 1e-12, 5).unwrap();
        assert!((est.lambda_max - 4.0).abs() < 1e-10);
        assert!(est.converged);
    }

    #[test]
    fn power_iteration_diagonal_dominant_entry() {
        let op = DiagonalMap {
            diag: vec![1.0, 3.0],
        };
        let est = power_iteration_lambda_max(&op, 500, 1e-12, 11).unwrap();
        assert!((est.lambda_max - 9.0).abs() < 1e-6);
    }

    #[test]
    fn power_iteration_zero_map_flagged() {
        let op = DiagonalMap {
            diag: vec![0.0; 4],
        };
        let est = power_iteration_lambda_max(&op, 50, 1e-10, 2).unwrap();
        assert!(est.zero_map);
        assert_eq!(est.lambda_max, 0.0);
    }

    #[test]
    fn normalize_scaled_identity() {
        let op = DiagonalMap {
            diag: vec![5.0; 6],
        };
        let n = normalize_map(op, 3).unwrap();
        assert!((n.scale() - 0.2 / (1.0_f64 + NORMALIZATION_MARGIN).sqrt()).abs() < 1e-12);
        let est = power_iteration_lambda_max(&n, 200, 1e-12, 4).unwrap();
        assert!(est.lambda_max <= 1.0 + 1e-6);
        assert!(est.lambda_max > 0.9);
    }

    #[test]
    fn normalize_rejects_zero_map() {
        let op = DiagonalMap {
            diag: vec![0.0; 4],
        };
        assert!(normalize_map(op, 1).is_err());
    }

    #[test]
    fn block_diag_applies_per_block() {
        let block = DenseMap::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let op = BlockDiagMap::new(block.clone(), 2);
        let x = vec![1.0, 0.0, 0.0, 1.0];
        let y = op.apply(&x);
        assert_eq!(y, vec![1.0, 3.0, 2.0, 4.0]);
        let r = dot_test(&op, 10, 9).unwrap();
        assert!(r.max_relative_discrepancy <= 1e-14);
    }

    #[test]
    fn linearity_of_dense_map() {
        let m = DenseMap::new(4, 3, (0..12).map(|i| (i as f64).sin()).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = random_vector(&mut rng, 3);
        let two_x: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let ax = m.apply(&x);
        let a2x = m.apply(&two_x);
        for (a, b) in ax.iter().zip(&a2x) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
