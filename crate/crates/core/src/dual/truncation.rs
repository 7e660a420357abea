use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::{DualError, DualFunction, FiniteSubset};
use crate::kernel::KernelAnalysis;
use crate::lattice::{Point, MAX_DIM};

/// Finite window of the dual space plus solver settings.
///
/// A set `A` is kept when `1 ≤ |A| ≤ max_degree` and `A ∪ {0}` fits in a
/// cube of side `radius` (every coordinate spans at most `radius`). That
/// window is a union of translation classes `{A ∪ {0} - c}`, so `S_z` maps
/// it to itself and the translation identity survives truncation. Every
/// kept point lies in `Λ_radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationParams {
    pub radius: i32,
    pub max_degree: usize,
    /// Resolvent parameters, largest first; the two smallest feed the
    /// linear extrapolation to `λ = 0`.
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_restart")]
    pub restart: usize,
    /// Bases up to this size are solved by dense LU.
    #[serde(default = "default_dense_threshold")]
    pub dense_threshold: usize,
    /// Regularisation of `-𝔏_s` in H₋₁ norms.
    #[serde(default = "default_regularization")]
    pub h_minus_one_regularization: f64,
    #[serde(default = "default_max_basis")]
    pub max_basis: usize,
}

fn default_lambdas() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_max_iterations() -> usize {
    5000
}
fn default_restart() -> usize {
    40
}
fn default_dense_threshold() -> usize {
    0
}
fn default_regularization() -> f64 {
    1e-10
}
fn default_max_basis() -> usize {
    4_000_000
}

impl TruncationParams {
    pub fn new(radius: i32, max_degree: usize) -> Self {
        TruncationParams {
            radius,
            max_degree,
            lambdas: default_lambdas(),
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            restart: default_restart(),
            dense_threshold: default_dense_threshold(),
            h_minus_one_regularization: default_regularization(),
            max_basis: default_max_basis(),
        }
    }

    pub fn validate(&self, analysis: &KernelAnalysis) -> Result<(), DualError> {
        let bad = |m: String| Err(DualError::Truncation(m));
        if self.radius < analysis.kernel.range() {
            return bad(format!("radius {} below kernel range {}", self.radius, analysis.kernel.range()));
        }
        if self.radius > 64 {
            return bad(format!("radius {} too large", self.radius));
        }
        if self.max_degree < 2 {
            return bad(format!("max_degree {} < 2", self.max_degree));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad(format!("lambdas must be positive, got {:?}", self.lambdas));
        }
        if !(self.tolerance > 0.0) || self.restart == 0 || self.max_iterations == 0 {
            return bad("solver settings must be positive".into());
        }
        if !(self.h_minus_one_regularization > 0.0) {
            return bad("regularisation must be positive".into());
        }
        Ok(())
    }

    /// Lambdas sorted from largest to smallest.
    pub fn lambda_sequence(&self) -> Vec<f64> {
        let mut l = self.lambdas.clone();
        l.sort_by(|a, b| b.total_cmp(a));
        l.dedup();
        l
    }
}

/// Enumerated truncation window, ordered by degree and then by set.
#[derive(Debug, Clone)]
pub struct Basis {
    dim: usize,
    radius: i32,
    max_degree: usize,
    sets: Vec<FiniteSubset>,
    index: FxHashMap<FiniteSubset, u32>,
    by_degree: Vec<usize>,
}

impl Basis {
    pub fn new(dim: usize, radius: i32, max_degree: usize, max_sets: usize) -> Result<Self, DualError> {
        if !(1..=MAX_DIM).contains(&dim) || radius < 1 || max_degree < 1 {
            return Err(DualError::Truncation(format!("dim {dim}, radius {radius}, degree {max_degree}")));
        }
        let mut points = Vec::new();
        let side = 2 * radius + 1;
        for k in 0..side.pow(dim as u32) {
            let mut c = [0i32; MAX_DIM];
            let mut r = k;
            for x in c.iter_mut().take(dim) {
                *x = r % side - radius;
                r /= side;
            }
            let p = Point(c);
            if !p.is_zero() {
                points.push(p);
            }
        }
        points.sort();

        // (set as point indices, per-axis lo, hi) for the current degree
        type Partial = (Vec<u32>, [i32; MAX_DIM], [i32; MAX_DIM]);
        let mut layer: Vec<Partial> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (vec![i as u32], p.0.map(|c| c.min(0)), p.0.map(|c| c.max(0))))
            .collect();
        let mut sets = Vec::new();
        let mut by_degree = vec![0];
        for degree in 1..=max_degree {
            if sets.len() + layer.len() > max_sets {
                return Err(DualError::BasisTooLarge { max: max_sets, got: sets.len() + layer.len() });
            }
            for (idx, _, _) in &layer {
                let pts: Vec<Point> = idx.iter().map(|&i| points[i as usize]).collect();
                sets.push(FiniteSubset::new(&pts)?);
            }
            by_degree.push(sets.len());
            if degree == max_degree {
                break;
            }
            let mut next = Vec::new();
            for (idx, lo, hi) in &layer {
                let last = *idx.last().expect("nonempty") as usize;
                for (j, p) in points.iter().enumerate().skip(last + 1) {
                    let mut l = *lo;
                    let mut h = *hi;
                    let mut ok = true;
                    for a in 0..MAX_DIM {
                        l[a] = l[a].min(p.0[a]);
                        h[a] = h[a].max(p.0[a]);
                        ok &= h[a] - l[a] <= radius;
                    }
                    if ok {
                        let mut n = idx.clone();
                        n.push(j as u32);
                        next.push((n, l, h));
                    }
                }
                if sets.len() + next.len() > max_sets {
                    return Err(DualError::BasisTooLarge { max: max_sets, got: sets.len() + next.len() });
                }
            }
            layer = next;
        }
        // points are sorted, so each layer comes out in set order
        let index = sets.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        Ok(Basis { dim, radius, max_degree, sets, index, by_degree })
    }

    pub fn from_params(dim: usize, params: &TruncationParams) -> Result<Self, DualError> {
        Basis::new(dim, params.radius, params.max_degree, params.max_basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[FiniteSubset] {
        &self.sets
    }

    pub fn set(&self, i: usize) -> &FiniteSubset {
        &self.sets[i]
    }

    /// Index range of the sets of degree `n`.
    pub fn degree_range(&self, n: usize) -> std::ops::Range<usize> {
        if n == 0 || n > self.max_degree {
            return 0..0;
        }
        self.by_degree[n - 1]..self.by_degree[n]
    }

    /// Number of sets of each degree `1..=max_degree`.
    pub fn degree_counts(&self) -> Vec<usize> {
        (1..=self.max_degree).map(|n| self.degree_range(n).len()).collect()
    }

    /// Membership by the window rule, without a table lookup.
    pub fn admits(&self, a: &FiniteSubset) -> bool {
        !a.is_empty()
            && a.len() <= self.max_degree
            && a.span_with_origin() <= self.radius
            && a.points().all(|p| p.0[self.dim..].iter().all(|&c| c == 0))
    }

    #[inline]
    pub fn index_of(&self, a: &FiniteSubset) -> Option<usize> {
        self.index.get(a).map(|&i| i as usize)
    }

    /// `(n+1)^{-1}` for each set.
    pub fn weights(&self) -> Vec<f64> {
        self.sets.iter().map(|s| 1.0 / (s.len() + 1) as f64).collect()
    }

    /// Coefficient vector of `f`; fails if `f` is supported outside the window.
    pub fn to_vector(&self, f: &DualFunction) -> Result<Vec<f64>, DualError> {
        let mut x = vec![0.0; self.len()];
        let mut outside: Vec<FiniteSubset> = Vec::new();
        for (a, v) in f.iter() {
            match self.index_of(a) {
                Some(i) => x[i] = v,
                None => outside.push(a.clone()),
            }
        }
        if !outside.is_empty() {
            outside.sort();
            return Err(DualError::OutsideTruncation { count: outside.len(), first: outside.swap_remove(0) });
        }
        Ok(x)
    }

    pub fn to_function(&self, alpha: f64, x: &[f64]) -> DualFunction {
        assert_eq!(x.len(), self.len());
        DualFunction::from_entries(
            alpha,
            x.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(i, &v)| (self.sets[i].clone(), v)),
        )
    }
}
