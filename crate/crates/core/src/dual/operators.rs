use nalgebra::DMatrix;
use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use super::{Basis, DualError, DualFunction, FiniteSubset};
use crate::chi;
use crate::kernel::KernelAnalysis;
use crate::lattice::Point;

/// The pieces of `𝔏_α = 𝔏_s + (1-2α)𝔏_d + √χ(α)(𝔏_+ + 𝔏_-)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DualOperator {
    Ls,
    Ld,
    Lplus,
    Lminus,
    Lalpha,
}

impl DualOperator {
    /// Weights of `(𝔏_s, 𝔏_d, 𝔏_+, 𝔏_-)` in this operator at density `alpha`.
    pub fn coefficients(self, alpha: f64) -> [f64; 4] {
        match self {
            DualOperator::Ls => [1.0, 0.0, 0.0, 0.0],
            DualOperator::Ld => [0.0, 1.0, 0.0, 0.0],
            DualOperator::Lplus => [0.0, 0.0, 1.0, 0.0],
            DualOperator::Lminus => [0.0, 0.0, 0.0, 1.0],
            DualOperator::Lalpha => {
                let r = chi(alpha).sqrt();
                [1.0, 1.0 - 2.0 * alpha, r, r]
            }
        }
    }
}

/// `s` and `a` on their supports, for the row formulas.
#[derive(Debug, Clone)]
pub struct KernelParts {
    pub sym: Vec<(Point, f64)>,
    pub anti: Vec<(Point, f64)>,
}

impl KernelParts {
    pub fn new(analysis: &KernelAnalysis) -> Self {
        KernelParts { sym: analysis.symmetric.clone(), anti: analysis.antisymmetric.clone() }
    }

    #[inline]
    pub fn a(&self, z: Point) -> f64 {
        self.anti.iter().find(|e| e.0 == z).map_or(0.0, |e| e.1)
    }

    /// Row `A` of the exchange-plus-shift operator built on `rates`
    /// (`s` for `𝔏_s`, `a` for `𝔏_d`): emits `(B, c)` meaning the output at
    /// `A` gains `c 𝔳(B)`. The diagonal is emitted last.
    fn emit_exchange_shift(rates: &[(Point, f64)], a: &FiniteSubset, emit: &mut impl FnMut(&FiniteSubset, f64)) {
        let mut diag = 0.0;
        for x in a.points() {
            for &(z, r) in rates {
                let y = x + z;
                if y.is_zero() || a.contains(y) {
                    continue;
                }
                emit(&a.moved(x, y), r);
                diag -= r;
            }
        }
        for &(y, r) in rates {
            if a.contains(y) {
                continue;
            }
            emit(&a.translated(y), r);
            diag -= r;
        }
        if diag != 0.0 {
            emit(a, diag);
        }
    }

    pub fn emit_ls(&self, a: &FiniteSubset, emit: &mut impl FnMut(&FiniteSubset, f64)) {
        Self::emit_exchange_shift(&self.sym, a, emit)
    }

    pub fn emit_ld(&self, a: &FiniteSubset, emit: &mut impl FnMut(&FiniteSubset, f64)) {
        Self::emit_exchange_shift(&self.anti, a, emit)
    }

    /// `2 Σ_{x,y∈A} a(y-x) 𝔳(A∖{y}) + 2 Σ_{x∈A} a(x) [𝔳(A∖{x}) - 𝔳(S_x(A∖{x}))]`.
    /// Terms landing on `∅` are dropped (`𝔳(∅) = 0` throughout).
    pub fn emit_lplus(&self, a: &FiniteSubset, emit: &mut impl FnMut(&FiniteSubset, f64)) {
        if a.len() < 2 {
            return;
        }
        for y in a.points() {
            let c: f64 = a.points().map(|x| self.a(y - x)).sum();
            if c != 0.0 {
                emit(&a.without(y), 2.0 * c);
            }
        }
        for x in a.points() {
            let r = self.a(x);
            if r != 0.0 {
                let b = a.without(x);
                emit(&b, 2.0 * r);
                emit(&b.translated(x), -2.0 * r);
            }
        }
    }

    /// `2 Σ_{y∉A∪{0}} c(y) 𝔳(A ∪ {y})` with `c(y) = Σ_{x∉A∪{0}} a(y-x)
    /// = -Σ_{x∈A∪{0}} a(y-x)` (the full sum of `a` vanishes).
    pub fn emit_lminus(&self, a: &FiniteSubset, emit: &mut impl FnMut(&FiniteSubset, f64)) {
        let mut ys: Vec<Point> = Vec::new();
        for x in a.points().chain(std::iter::once(Point::ZERO)) {
            for &(z, _) in &self.anti {
                let y = x + z;
                if !y.is_zero() && !a.contains(y) {
                    ys.push(y);
                }
            }
        }
        ys.sort();
        ys.dedup();
        for y in ys {
            let c = -self.a(y) - a.points().map(|x| self.a(y - x)).sum::<f64>();
            if c != 0.0 {
                emit(&a.with(y), 2.0 * c);
            }
        }
    }

    /// Row `A` of `Σ_k w_k 𝔏_k` for weights `(s, d, +, -)`.
    pub fn emit(&self, w: [f64; 4], a: &FiniteSubset, emit: &mut impl FnMut(&FiniteSubset, f64)) {
        if w[0] != 0.0 {
            self.emit_ls(a, &mut |b, c| emit(b, w[0] * c));
        }
        if w[1] != 0.0 {
            self.emit_ld(a, &mut |b, c| emit(b, w[1] * c));
        }
        if w[2] != 0.0 {
            self.emit_lplus(a, &mut |b, c| emit(b, w[2] * c));
        }
        if w[3] != 0.0 {
            self.emit_lminus(a, &mut |b, c| emit(b, w[3] * c));
        }
    }

    /// Rows whose formula can read `𝔳(B)`: a superset, evaluated and
    /// filtered by the caller.
    fn candidate_rows(&self, b: &FiniteSubset, out: &mut FxHashSet<FiniteSubset>) {
        out.insert(b.clone());
        for x in b.points() {
            for &(z, _) in &self.sym {
                let y = x + z;
                if !y.is_zero() && !b.contains(y) {
                    out.insert(b.moved(x, y));
                }
            }
            out.insert(b.without(x));
        }
        for &(y, _) in &self.sym {
            if !b.contains(y) {
                out.insert(b.translated(y));
            }
        }
        for x in b.points().chain(std::iter::once(Point::ZERO)) {
            for &(z, _) in &self.anti {
                let y = x + z;
                if !y.is_zero() && !b.contains(y) {
                    out.insert(b.with(y));
                }
            }
        }
        for &(x, _) in &self.anti {
            if !b.contains(-x) {
                out.insert(b.translated(-x).with(x));
            }
        }
    }
}

/// Output of a sparse operator application.
#[derive(Debug, Clone)]
pub struct DualApplication {
    /// Values on sets inside the truncation window.
    pub output: DualFunction,
    /// `Σ (n+1)^{-1} v(A)^2` over the sets outside the window (including `∅`).
    pub clipped_mass: f64,
    pub clipped_sets: usize,
}

/// Literal evaluation of one of the displayed operators on a finitely
/// supported function, row by row, with results outside `basis` clipped.
pub fn apply_dual_operator(
    which: DualOperator,
    v: &DualFunction,
    analysis: &KernelAnalysis,
    basis: &Basis,
) -> Result<DualApplication, DualError> {
    let parts = KernelParts::new(analysis);
    let outside: Vec<&FiniteSubset> = v.iter().map(|e| e.0).filter(|a| !basis.admits(a)).collect();
    if let Some(first) = outside.iter().min() {
        return Err(DualError::OutsideTruncation { count: outside.len(), first: (*first).clone() });
    }
    let mut rows = FxHashSet::default();
    for (b, _) in v.iter() {
        parts.candidate_rows(b, &mut rows);
    }
    let mut rows: Vec<FiniteSubset> = rows.into_iter().collect();
    rows.sort();
    let w = which.coefficients(v.alpha);
    let mut output = DualFunction::zero(v.alpha);
    let mut clipped_mass = 0.0;
    let mut clipped_sets = 0;
    for a in rows {
        let mut r = 0.0;
        parts.emit(w, &a, &mut |b, c| r += c * v.get(b));
        if r == 0.0 {
            continue;
        }
        if basis.admits(&a) {
            output.set(a, r);
        } else {
            clipped_mass += r * r / (a.len() + 1) as f64;
            clipped_sets += 1;
        }
    }
    Ok(DualApplication { output, clipped_mass, clipped_sets })
}

#[derive(Debug, Clone, Default)]
struct Csr {
    ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<f64>,
}

impl Csr {
    #[inline]
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (s, e) = (self.ptr[i], self.ptr[i + 1]);
        self.col[s..e].iter().zip(&self.val[s..e]).map(|(&j, &v)| v * x[j as usize]).sum()
    }

    fn nnz(&self) -> usize {
        self.col.len()
    }
}

/// `𝔏_s`, `𝔏_d`, `𝔏_+`, `𝔏_-` restricted to a basis (Galerkin truncation:
/// entries pointing outside the window are dropped, diagonals keep every
/// term). `𝔏_s` and `𝔏_d` share one sparsity pattern since `supp a ⊂ supp s`.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    basis: Basis,
    same: Csr,
    same_d: Vec<f64>,
    plus: Csr,
    minus: Csr,
    diag_s: Vec<f64>,
    diag_d: Vec<f64>,
}

const CHUNK: usize = 4096;

impl AssembledOperator {
    pub fn assemble(analysis: &KernelAnalysis, basis: Basis) -> Self {
        let parts = KernelParts::new(analysis);
        let n = basis.len();
        let chunks: Vec<_> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let rows = c * CHUNK..((c + 1) * CHUNK).min(n);
                let mut same = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
                let mut plus = (Vec::new(), Vec::new(), Vec::new());
                let mut minus = (Vec::new(), Vec::new(), Vec::new());
                let mut buf: Vec<(u32, f64, f64)> = Vec::new();
                let mut ob: Vec<(u32, f64)> = Vec::new();
                for i in rows {
                    let a = basis.set(i);
                    buf.clear();
                    parts.emit_ls(a, &mut |b, c| {
                        if let Some(j) = basis.index_of(b) {
                            buf.push((j as u32, c, 0.0));
                        }
                    });
                    parts.emit_ld(a, &mut |b, c| {
                        if let Some(j) = basis.index_of(b) {
                            buf.push((j as u32, 0.0, c));
                        }
                    });
                    buf.sort_by_key(|e| e.0);
                    let start = same.0.len();
                    for &(j, s, d) in &buf {
                        if same.0.len() > start && *same.0.last().unwrap() == j {
                            *same.1.last_mut().unwrap() += s;
                            *same.2.last_mut().unwrap() += d;
                        } else {
                            same.0.push(j);
                            same.1.push(s);
                            same.2.push(d);
                        }
                    }
                    same.3.push(same.0.len() - start);
                    for (emit, dst) in [(0, &mut plus), (1, &mut minus)] {
                        ob.clear();
                        let mut push = |b: &FiniteSubset, c: f64| {
                            if let Some(j) = basis.index_of(b) {
                                ob.push((j as u32, c));
                            }
                        };
                        if emit == 0 {
                            parts.emit_lplus(a, &mut push);
                        } else {
                            parts.emit_lminus(a, &mut push);
                        }
                        ob.sort_by_key(|e| e.0);
                        let start = dst.0.len();
                        for &(j, c) in &ob {
                            if dst.0.len() > start && *dst.0.last().unwrap() == j {
                                *dst.1.last_mut().unwrap() += c;
                            } else {
                                dst.0.push(j);
                                dst.1.push(c);
                            }
                        }
                        dst.2.push(dst.0.len() - start);
                    }
                }
                (same, plus, minus)
            })
            .collect();

        fn cat(parts: impl Iterator<Item = (Vec<u32>, Vec<f64>, Vec<usize>)>, n: usize) -> Csr {
            let mut m = Csr { ptr: Vec::with_capacity(n + 1), col: Vec::new(), val: Vec::new() };
            m.ptr.push(0);
            for (c, v, lens) in parts {
                for l in lens {
                    m.ptr.push(m.ptr.last().unwrap() + l);
                }
                m.col.extend(c);
                m.val.extend(v);
            }
            m
        }
        let mut same = Csr { ptr: vec![0], ..Csr::default() };
        let mut same_d = Vec::new();
        let mut plus_parts = Vec::new();
        let mut minus_parts = Vec::new();
        for ((c, s, d, lens), p, m) in chunks {
            for l in lens {
                same.ptr.push(same.ptr.last().unwrap() + l);
            }
            same.col.extend(c);
            same.val.extend(s);
            same_d.extend(d);
            plus_parts.push(p);
            minus_parts.push(m);
        }
        let plus = cat(plus_parts.into_iter(), n);
        let minus = cat(minus_parts.into_iter(), n);
        let mut diag_s = vec![0.0; n];
        let mut diag_d = vec![0.0; n];
        for i in 0..n {
            for k in same.ptr[i]..same.ptr[i + 1] {
                if same.col[k] as usize == i {
                    diag_s[i] = same.val[k];
                    diag_d[i] = same_d[k];
                }
            }
        }
        AssembledOperator { basis, same, same_d, plus, minus, diag_s, diag_d }
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Stored entries of the `(𝔏_s, 𝔏_d)` pattern, `𝔏_+` and `𝔏_-`.
    pub fn nnz(&self) -> [usize; 3] {
        [self.same.nnz(), self.plus.nnz(), self.minus.nnz()]
    }

    /// `y = Σ_k w_k 𝔏_k x` with weights `(s, d, +, -)`.
    pub fn apply(&self, w: [f64; 4], x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.len());
        assert_eq!(y.len(), self.len());
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            for (k, yi) in out.iter_mut().enumerate() {
                let i = c * CHUNK + k;
                let mut acc = 0.0;
                if w[0] != 0.0 || w[1] != 0.0 {
                    let (s, e) = (self.same.ptr[i], self.same.ptr[i + 1]);
                    for t in s..e {
                        acc += (w[0] * self.same.val[t] + w[1] * self.same_d[t]) * x[self.same.col[t] as usize];
                    }
                }
                if w[2] != 0.0 {
                    acc += w[2] * self.plus.row_dot(i, x);
                }
                if w[3] != 0.0 {
                    acc += w[3] * self.minus.row_dot(i, x);
                }
                *yi = acc;
            }
        });
    }

    pub fn apply_op(&self, which: DualOperator, alpha: f64, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.len()];
        self.apply(which.coefficients(alpha), x, &mut y);
        y
    }

    /// Diagonal of `Σ_k w_k 𝔏_k` (`𝔏_±` have none).
    pub fn diagonal(&self, w: [f64; 4]) -> Vec<f64> {
        self.diag_s.iter().zip(&self.diag_d).map(|(s, d)| w[0] * s + w[1] * d).collect()
    }

    /// Dense copy of `which` on the basis.
    pub fn to_dense(&self, which: DualOperator, alpha: f64) -> DMatrix<f64> {
        let w = which.coefficients(alpha);
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for t in self.same.ptr[i]..self.same.ptr[i + 1] {
                m[(i, self.same.col[t] as usize)] += w[0] * self.same.val[t] + w[1] * self.same_d[t];
            }
            for t in self.plus.ptr[i]..self.plus.ptr[i + 1] {
                m[(i, self.plus.col[t] as usize)] += w[2] * self.plus.val[t];
            }
            for t in self.minus.ptr[i]..self.minus.ptr[i + 1] {
                m[(i, self.minus.col[t] as usize)] += w[3] * self.minus.val[t];
            }
        }
        m
    }
}

/// Dense matrix of `which` on `basis`, column `j` being
/// [`apply_dual_operator`] on the indicator of set `j` (clipped part
/// discarded).
pub fn dense_operator_matrix(
    which: DualOperator,
    alpha: f64,
    analysis: &KernelAnalysis,
    basis: &Basis,
) -> Result<DMatrix<f64>, DualError> {
    let n = basis.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let e = DualFunction::indicator(alpha, basis.set(j).clone());
        let out = apply_dual_operator(which, &e, analysis, basis)?.output;
        for (a, v) in out.iter() {
            let i = basis.index_of(a).expect("output clipped to the basis");
            m[(i, j)] = v;
        }
    }
    Ok(m)
}
