//! Finite-range jump laws and their static moments.
//!
//! The symmetric and antisymmetric parts are `s(y) = (p(y) + p(-y))/2` and
//! `a(y) = (p(y) - p(-y))/2`. The dual operators in [`crate::dual`] are
//! written in terms of these two functions; with this convention the dual
//! current is `-2 z_i a(z)` and every asymmetric operator vanishes when `p`
//! is symmetric.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Point, MAX_DIM};

/// Tolerance on `Σ p(z) = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel has no entries")]
    Empty,
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    Dimension(usize),
    #[error("offset {0:?} has {1} coordinates, kernel dimension is {2}")]
    OffsetArity(Vec<i32>, usize, usize),
    #[error("zero offset is not a jump")]
    ZeroOffset,
    #[error("offset {0} listed twice")]
    Duplicate(Point),
    #[error("weight {1} at offset {0} is outside (0, 1]")]
    Weight(Point, f64),
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
}

/// One `{offset, prob}` record as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub offset: Vec<i32>,
    pub prob: f64,
}

/// A validated finite-range jump law on `Z^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    dim: usize,
    entries: Vec<(Point, f64)>,
}

impl TransitionKernel {
    pub fn new(dim: usize, entries: Vec<(Point, f64)>) -> Result<Self, KernelError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(KernelError::Dimension(dim));
        }
        if entries.is_empty() {
            return Err(KernelError::Empty);
        }
        let mut sorted = entries;
        sorted.sort_by_key(|e| e.0);
        let mut total = 0.0;
        for (i, &(z, w)) in sorted.iter().enumerate() {
            if z.is_zero() {
                return Err(KernelError::ZeroOffset);
            }
            if z.0[dim..].iter().any(|&c| c != 0) {
                return Err(KernelError::OffsetArity(z.0.to_vec(), MAX_DIM, dim));
            }
            if i > 0 && sorted[i - 1].0 == z {
                return Err(KernelError::Duplicate(z));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(KernelError::Weight(z, w));
            }
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(KernelError::WeightSum(total));
        }
        Ok(TransitionKernel { dim, entries: sorted })
    }

    pub fn from_records(dim: usize, records: &[KernelEntry]) -> Result<Self, KernelError> {
        let mut entries = Vec::with_capacity(records.len());
        for r in records {
            if r.offset.len() != dim {
                return Err(KernelError::OffsetArity(r.offset.clone(), r.offset.len(), dim));
            }
            entries.push((Point::new(&r.offset), r.prob));
        }
        TransitionKernel::new(dim, entries)
    }

    pub fn to_records(&self) -> Vec<KernelEntry> {
        self.entries.iter().map(|(z, w)| KernelEntry { offset: z.coords(self.dim).to_vec(), prob: *w }).collect()
    }

    /// Totally asymmetric nearest-neighbour kernel `p(e_1) = 1`.
    pub fn tasep(dim: usize) -> Self {
        TransitionKernel::new(dim, vec![(Point::unit(0), 1.0)]).expect("valid kernel")
    }

    /// Symmetric nearest-neighbour kernel `p(±e_i) = 1/(2d)`.
    pub fn ssep(dim: usize) -> Self {
        let w = 1.0 / (2 * dim) as f64;
        let mut e = Vec::new();
        for i in 0..dim {
            e.push((Point::unit(i), w));
            e.push((-Point::unit(i), w));
        }
        TransitionKernel::new(dim, e).expect("valid kernel")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(Point, f64)] {
        &self.entries
    }

    pub fn prob(&self, z: Point) -> f64 {
        self.entries.iter().find(|(y, _)| *y == z).map_or(0.0, |e| e.1)
    }

    /// `R_p = max ‖z‖_∞` over the support.
    pub fn range(&self) -> i32 {
        self.entries.iter().map(|(z, _)| z.linf()).max().unwrap_or(0)
    }

    /// `p*(y) = p(-y)`.
    pub fn adjoint(&self) -> TransitionKernel {
        let entries = self.entries.iter().map(|&(z, w)| (-z, w)).collect();
        TransitionKernel::new(self.dim, entries).expect("reflection of a valid kernel")
    }

    pub fn analyze(&self) -> KernelAnalysis {
        KernelAnalysis::new(self)
    }
}

/// Validates `k` and returns its static moments.
pub fn validate_kernel(dim: usize, entries: Vec<(Point, f64)>) -> Result<KernelAnalysis, KernelError> {
    Ok(TransitionKernel::new(dim, entries)?.analyze())
}

/// Derived quantities of a kernel: drift, covariance, symmetric and
/// antisymmetric parts, adjoint.
#[derive(Debug, Clone)]
pub struct KernelAnalysis {
    pub kernel: TransitionKernel,
    pub drift: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Nonzero values of `s` on the symmetrised support, sorted by offset.
    pub symmetric: Vec<(Point, f64)>,
    /// Nonzero values of `a` on the symmetrised support, sorted by offset.
    pub antisymmetric: Vec<(Point, f64)>,
    pub adjoint: TransitionKernel,
}

impl KernelAnalysis {
    fn new(k: &TransitionKernel) -> Self {
        let d = k.dim;
        let mut drift = DVector::zeros(d);
        let mut cov = DMatrix::zeros(d, d);
        for &(z, w) in &k.entries {
            for i in 0..d {
                drift[i] += w * z.0[i] as f64;
                for j in 0..d {
                    cov[(i, j)] += w * (z.0[i] * z.0[j]) as f64;
                }
            }
        }
        let mut support: Vec<Point> = k.entries.iter().flat_map(|&(z, _)| [z, -z]).collect();
        support.sort();
        support.dedup();
        let mut symmetric = Vec::new();
        let mut antisymmetric = Vec::new();
        for &y in &support {
            let (p, pm) = (k.prob(y), k.prob(-y));
            let s = 0.5 * (p + pm);
            let a = 0.5 * (p - pm);
            if s != 0.0 {
                symmetric.push((y, s));
            }
            if a != 0.0 {
                antisymmetric.push((y, a));
            }
        }
        KernelAnalysis { kernel: k.clone(), drift, covariance: cov, symmetric, antisymmetric, adjoint: k.adjoint() }
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim
    }

    /// `s(y)`.
    pub fn sym(&self, y: Point) -> f64 {
        self.symmetric.iter().find(|(z, _)| *z == y).map_or(0.0, |e| e.1)
    }

    /// `a(y)`.
    pub fn antisym(&self, y: Point) -> f64 {
        self.antisymmetric.iter().find(|(z, _)| *z == y).map_or(0.0, |e| e.1)
    }

    pub fn is_symmetric(&self) -> bool {
        self.antisymmetric.is_empty()
    }

    /// Smallest eigenvalue of `σ`.
    pub fn covariance_min_eigenvalue(&self) -> f64 {
        self.covariance.clone().symmetric_eigen().eigenvalues.min()
    }

    /// Dimension for which the diffusive limit is proved (`d >= 3`).
    pub fn in_proved_regime(&self) -> bool {
        self.kernel.dim >= 3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize) -> Point {
        Point::unit(i)
    }

    fn example_2d() -> TransitionKernel {
        TransitionKernel::new(2, vec![(e(0), 0.5), (-e(0), 0.25), (e(1), 0.25)]).unwrap()
    }

    #[test]
    fn tasep_moments() {
        let an = TransitionKernel::tasep(3).analyze();
        assert_eq!(an.drift.as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(an.covariance, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0])));
        assert_eq!(an.antisym(e(0)), 0.5);
        assert_eq!(an.antisym(-e(0)), -0.5);
    }

    #[test]
    fn ssep_moments() {
        let an = TransitionKernel::ssep(3).analyze();
        assert!(an.drift.iter().all(|&q| q.abs() < 1e-15));
        let third = DMatrix::<f64>::identity(3, 3) / 3.0;
        assert!((an.covariance.clone() - third).abs().max() < 1e-15);
        assert!(an.is_symmetric());
    }

    #[test]
    fn two_dimensional_example() {
        let an = example_2d().analyze();
        assert!((an.drift[0] - 0.25).abs() < 1e-15);
        assert!((an.drift[1] - 0.25).abs() < 1e-15);
        assert!((an.covariance[(0, 0)] - 0.75).abs() < 1e-15);
        assert!((an.covariance[(1, 1)] - 0.25).abs() < 1e-15);
        assert_eq!(an.covariance[(0, 1)], 0.0);
        assert!((an.antisym(e(0)) - 0.125).abs() < 1e-15);
        assert!((an.antisym(e(1)) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn decomposition_is_exact_on_support() {
        let k = example_2d();
        let an = k.analyze();
        for &(y, p) in k.entries() {
            assert_eq!(an.sym(y) + an.antisym(y), p);
            assert_eq!(an.sym(y), an.sym(-y));
            assert_eq!(an.antisym(y), -an.antisym(-y));
        }
    }

    #[test]
    fn adjoint_reflects() {
        assert_eq!(TransitionKernel::ssep(3).adjoint(), TransitionKernel::ssep(3));
        let t = TransitionKernel::tasep(3).adjoint();
        assert_eq!(t.prob(-e(0)), 1.0);
        let k = example_2d();
        assert_eq!(k.adjoint().adjoint(), k);

        let an = k.analyze();
        let ad = k.adjoint().analyze();
        assert!((an.drift.clone() + ad.drift.clone()).abs().max() < 1e-15);
        assert_eq!(an.covariance, ad.covariance);
        for &(y, a) in &an.antisymmetric {
            assert_eq!(ad.antisym(y), -a);
            assert_eq!(ad.sym(y), an.sym(y));
        }
    }

    #[test]
    fn rejects_bad_kernels() {
        assert_eq!(TransitionKernel::new(3, vec![]), Err(KernelError::Empty));
        assert_eq!(TransitionKernel::new(1, vec![(Point::ZERO, 1.0)]), Err(KernelError::ZeroOffset));
        assert!(matches!(TransitionKernel::new(1, vec![(e(0), 0.5), (-e(0), 0.4)]), Err(KernelError::WeightSum(_))));
        assert!(matches!(TransitionKernel::new(1, vec![(e(0), 1.2), (-e(0), -0.2)]), Err(KernelError::Weight(..))));
        assert!(matches!(TransitionKernel::new(4, vec![(e(0), 1.0)]), Err(KernelError::Dimension(4))));
        assert!(matches!(TransitionKernel::new(1, vec![(e(1), 1.0)]), Err(KernelError::OffsetArity(..))));
        assert!(matches!(TransitionKernel::new(1, vec![(e(0), 0.5), (e(0), 0.5)]), Err(KernelError::Duplicate(_))));
    }

    #[test]
    fn covariance_is_psd() {
        for k in [TransitionKernel::tasep(2), TransitionKernel::ssep(3), example_2d()] {
            assert!(k.analyze().covariance_min_eigenvalue() >= -1e-12);
        }
    }

    #[test]
    fn records_round_trip() {
        let k = example_2d();
        let back = TransitionKernel::from_records(2, &k.to_records()).unwrap();
        assert_eq!(back, k);
    }
}
