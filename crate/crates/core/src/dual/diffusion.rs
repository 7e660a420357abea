use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    apply_dual_operator, conjugate_gradient, current_dual, dense_solve, dual_inner_product, gmres, AssembledOperator,
    Basis, DualError, DualFunction, DualOperator, FiniteSubset, IterativeSettings, KernelParts, SolveReport,
    TruncationParams,
};
use crate::chi;
use crate::kernel::{KernelAnalysis, KernelEntry};
use crate::lattice::Point;

fn check_alpha(alpha: f64) -> Result<(), DualError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(DualError::Density(alpha))
    }
}

/// A truncation window with its assembled operators, reused across
/// densities, directions and resolvent parameters.
#[derive(Debug, Clone)]
pub struct ResolventSystem {
    analysis: KernelAnalysis,
    params: TruncationParams,
    op: AssembledOperator,
    weights: Vec<f64>,
    /// Basis index and point of every degree-one set.
    singles: Vec<(usize, Point)>,
}

/// One resolvent solution `𝔣_{i,λ}` as a basis vector.
#[derive(Debug, Clone)]
pub struct Solved {
    pub alpha: f64,
    pub lambda: f64,
    pub direction: usize,
    pub values: Vec<f64>,
    /// `None` when the right-hand side vanishes and no solve was needed.
    pub report: Option<SolveReport>,
}

impl ResolventSystem {
    pub fn new(analysis: &KernelAnalysis, params: &TruncationParams) -> Result<Self, DualError> {
        params.validate(analysis)?;
        let basis = Basis::from_params(analysis.dim(), params)?;
        let weights = basis.weights();
        let singles = basis.degree_range(1).map(|i| (i, basis.set(i).points().next().unwrap())).collect();
        let op = AssembledOperator::assemble(analysis, basis);
        Ok(ResolventSystem { analysis: analysis.clone(), params: params.clone(), op, weights, singles })
    }

    pub fn analysis(&self) -> &KernelAnalysis {
        &self.analysis
    }

    pub fn params(&self) -> &TruncationParams {
        &self.params
    }

    pub fn basis(&self) -> &Basis {
        self.op.basis()
    }

    pub fn operator(&self) -> &AssembledOperator {
        &self.op
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn settings(&self) -> IterativeSettings {
        IterativeSettings {
            tolerance: self.params.tolerance,
            max_iterations: self.params.max_iterations,
            restart: self.params.restart,
        }
    }

    /// `<x, y>` with weights `(n+1)^{-1}`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.weights.iter().zip(x).zip(y).map(|((w, a), b)| w * a * b).sum()
    }

    /// `<x, (-𝔏_s) y>`.
    pub fn h1(&self, x: &[f64], y: &[f64]) -> f64 {
        let ly = self.op.apply_op(DualOperator::Ls, 0.0, y);
        -self.inner(x, &ly)
    }

    /// `λ<x, x> + <x, (-𝔏_s) x>`.
    pub fn energy(&self, lambda: f64, x: &[f64]) -> f64 {
        lambda * self.inner(x, x) + self.h1(x, x)
    }

    /// `𝔴_i` as a basis vector.
    pub fn current_vector(&self, i: usize) -> Result<Vec<f64>, DualError> {
        let d = self.analysis.dim();
        if i >= d {
            return Err(DualError::Direction { dir: i, dim: d });
        }
        let w = current_dual(&self.analysis, i, 0.0);
        self.basis().to_vector(&w)
    }

    /// Solves `(λ - 𝔏_α) x = b` in the window.
    pub fn solve(
        &self,
        alpha: f64,
        lambda: f64,
        b: &[f64],
        warm: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveReport), DualError> {
        check_alpha(alpha)?;
        if !(lambda > 0.0) {
            return Err(DualError::Lambda(lambda));
        }
        let w = DualOperator::Lalpha.coefficients(alpha);
        let apply = |x: &[f64], y: &mut [f64]| {
            self.op.apply(w, x, y);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = lambda * xi - *yi;
            }
        };
        if self.len() <= self.params.dense_threshold {
            let n = self.len();
            let m = DMatrix::<f64>::identity(n, n) * lambda - self.op.to_dense(DualOperator::Lalpha, alpha);
            let x = dense_solve(m, b)?;
            let mut r = vec![0.0; n];
            apply(&x, &mut r);
            let res: f64 = r.iter().zip(b).zip(&self.weights).map(|((p, q), w)| w * (p - q) * (p - q)).sum();
            let res = res.sqrt();
            return Ok((x, SolveReport { iterations: 0, residual: res, history: vec![res] }));
        }
        let diag: Vec<f64> = self.op.diagonal(w).iter().map(|d| lambda - d).collect();
        let mut x = warm.map_or_else(|| vec![0.0; self.len()], |v| v.to_vec());
        let report = gmres(apply, &diag, &self.weights, b, &mut x, &self.settings())?;
        Ok((x, report))
    }

    /// `𝔣_{i,λ}`: solution of `λ𝔣 - 𝔏_α 𝔣 = 𝔴_i`.
    pub fn solve_current(&self, alpha: f64, lambda: f64, i: usize, warm: Option<&[f64]>) -> Result<Solved, DualError> {
        let b = self.current_vector(i)?;
        if b.iter().all(|&v| v == 0.0) {
            check_alpha(alpha)?;
            return Ok(Solved { alpha, lambda, direction: i, values: b, report: None });
        }
        let (values, report) = self.solve(alpha, lambda, &b, warm)?;
        Ok(Solved { alpha, lambda, direction: i, values, report: Some(report) })
    }

    /// `‖x‖²_{-1}` through `<x, u>`, `(reg - 𝔏_s) u = x`.
    pub fn h_minus_one(&self, x: &[f64], reg: f64) -> Result<f64, DualError> {
        if !(reg > 0.0) {
            return Err(DualError::Lambda(reg));
        }
        if x.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let w = DualOperator::Ls.coefficients(0.0);
        let apply = |u: &[f64], y: &mut [f64]| {
            self.op.apply(w, u, y);
            for (yi, ui) in y.iter_mut().zip(u) {
                *yi = reg * ui - *yi;
            }
        };
        let n = self.len();
        let u = if n <= self.params.dense_threshold {
            let m = DMatrix::<f64>::identity(n, n) * reg - self.op.to_dense(DualOperator::Ls, 0.0);
            dense_solve(m, x)?
        } else {
            let diag: Vec<f64> = self.op.diagonal(w).iter().map(|d| reg - d).collect();
            let mut u = vec![0.0; n];
            // relative target: the norm is read off <x, u>
            let scale = self.inner(x, x).sqrt();
            let s = IterativeSettings { tolerance: self.params.tolerance * scale.max(1e-300), ..self.settings() };
            conjugate_gradient(apply, &diag, &self.weights, x, &mut u, &s)?;
            u
        };
        Ok(self.inner(x, &u).max(0.0))
    }

    /// `m_j = Σ_z a(z) z_j x({z})`.
    pub fn first_moments(&self, x: &[f64]) -> DVector<f64> {
        let d = self.analysis.dim();
        let mut m = DVector::zeros(d);
        for &(i, z) in &self.singles {
            let a = self.analysis.antisym(z);
            if a != 0.0 && x[i] != 0.0 {
                for j in 0..d {
                    m[j] += a * z.0[j] as f64 * x[i];
                }
            }
        }
        m
    }

    /// `D_{ij} = ασ_{ij} - χ(α) Σ_z a(z) z_j 𝔣_i({z})` from one solution per direction.
    pub fn diffusion_from(&self, alpha: f64, f: &[Vec<f64>]) -> DMatrix<f64> {
        let d = self.analysis.dim();
        let mut out = &self.analysis.covariance * alpha;
        for (i, fi) in f.iter().enumerate().take(d) {
            let m = self.first_moments(fi);
            for j in 0..d {
                out[(i, j)] -= chi(alpha) * m[j];
            }
        }
        out
    }

    /// Both parts of the residual of a candidate `h` for direction `i`.
    pub fn residual(&self, alpha: f64, d: &DMatrix<f64>, i: usize, h: &[f64]) -> Result<ResidualNorm, DualError> {
        let c = chi(alpha);
        let mut g = self.current_vector(i)?;
        let lh = self.op.apply_op(DualOperator::Lalpha, alpha, h);
        for (gi, li) in g.iter_mut().zip(&lh) {
            *gi += li;
        }
        let higher = c * c * self.h_minus_one(&g, self.params.h_minus_one_regularization)?;
        let m = self.first_moments(h);
        let sigma = &self.analysis.covariance;
        let dim = self.analysis.dim();
        let moments = DVector::from_fn(dim, |j, _| c * (d[(i, j)] - alpha * sigma[(i, j)] + c * m[j]));
        let one = degree_one_seminorm(moments.as_slice(), alpha, sigma);
        let degree_one = one.is_finite().then_some(one);
        Ok(ResidualNorm { direction: i, higher, degree_one, total: degree_one.map(|v| v + higher) })
    }
}

/// `𝔣_{i,λ}` as a dual function.
pub fn resolvent_solve(
    analysis: &KernelAnalysis,
    alpha: f64,
    lambda: f64,
    params: &TruncationParams,
    i: usize,
) -> Result<DualFunction, DualError> {
    let sys = ResolventSystem::new(analysis, params)?;
    let s = sys.solve_current(alpha, lambda, i, None)?;
    Ok(sys.basis().to_function(alpha, &s.values))
}

/// `<𝔣, (-𝔏_s) 𝔤>` by direct evaluation of `𝔏_s`.
pub fn h1_form(f: &DualFunction, g: &DualFunction, analysis: &KernelAnalysis, basis: &Basis) -> Result<f64, DualError> {
    let lg = apply_dual_operator(DualOperator::Ls, g, analysis, basis)?.output;
    Ok(-dual_inner_product(f, &lg))
}

/// `‖𝔣‖²_{-1}` regularised by `reg`, in the truncation of `params`.
pub fn h_minus_one_norm(
    f: &DualFunction,
    analysis: &KernelAnalysis,
    params: &TruncationParams,
    reg: f64,
) -> Result<f64, DualError> {
    let sys = ResolventSystem::new(analysis, params)?;
    sys.h_minus_one(&sys.basis().to_vector(f)?, reg)
}

/// `λ<𝔣,𝔣> + <𝔣,(-𝔏_s)𝔣>`.
pub fn resolvent_energy(
    f: &DualFunction,
    lambda: f64,
    analysis: &KernelAnalysis,
    basis: &Basis,
) -> Result<f64, DualError> {
    Ok(lambda * dual_inner_product(f, f) + h1_form(f, f, analysis, basis)?)
}

/// Linear extrapolation to `λ = 0` through the two smallest `λ`; the
/// second value is `|v(0) - v(λ_min)|`.
pub fn extrapolate_linear(lambdas: &[f64], values: &[f64]) -> (f64, f64) {
    assert_eq!(lambdas.len(), values.len());
    assert!(!lambdas.is_empty());
    let mut idx: Vec<usize> = (0..lambdas.len()).collect();
    idx.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]));
    if idx.len() == 1 {
        return (values[idx[0]], 0.0);
    }
    let (l1, v1) = (lambdas[idx[0]], values[idx[0]]);
    let (l2, v2) = (lambdas[idx[1]], values[idx[1]]);
    let v0 = v1 - l1 * (v2 - v1) / (l2 - l1);
    (v0, (v0 - v1).abs())
}

/// `D(α)` extrapolated entrywise from solutions at several `λ`.
/// `per_lambda[k][i]` is `𝔣_{i,λ_k}`; missing directions count as zero.
pub fn diffusion_matrix(
    analysis: &KernelAnalysis,
    alpha: f64,
    lambdas: &[f64],
    per_lambda: &[Vec<DualFunction>],
) -> Result<(DMatrix<f64>, DMatrix<f64>), DualError> {
    check_alpha(alpha)?;
    if lambdas.len() != per_lambda.len() || lambdas.is_empty() {
        return Err(DualError::Input(format!("{} lambdas, {} solution sets", lambdas.len(), per_lambda.len())));
    }
    let d = analysis.dim();
    let mats: Vec<DMatrix<f64>> = per_lambda
        .iter()
        .map(|fs| {
            let mut m = &analysis.covariance * alpha;
            for (i, f) in fs.iter().enumerate().take(d) {
                if f.alpha != alpha {
                    return Err(DualError::AlphaMismatch(f.alpha, alpha));
                }
                for (a, v) in f.iter().filter(|e| e.0.len() == 1) {
                    let z = a.points().next().unwrap();
                    for j in 0..d {
                        m[(i, j)] -= chi(alpha) * analysis.antisym(z) * z.0[j] as f64 * v;
                    }
                }
            }
            Ok(m)
        })
        .collect::<Result<_, _>>()?;
    let mut value = DMatrix::zeros(d, d);
    let mut spread = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let v: Vec<f64> = mats.iter().map(|m| m[(i, j)]).collect();
            let (x, s) = extrapolate_linear(lambdas, &v);
            value[(i, j)] = x;
            spread[(i, j)] = s;
        }
    }
    Ok((value, spread))
}

/// `a(α) = D(α) + (1 - 2α) σ / 2`.
pub fn hydrodynamic_matrix(alpha: f64, d: &DMatrix<f64>, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    d + sigma * (0.5 * (1.0 - 2.0 * alpha))
}

/// `J(β) = 2β(1-β) (D(β) - βσ)`.
pub fn j_matrix(beta: f64, d: &DMatrix<f64>, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    (d - sigma * beta) * (2.0 * chi(beta))
}

/// `sup_a {2 a·c - (χ/2) a·σa} = (2/χ) c·σ⁺c`, or `+∞` when `c` leaves the
/// range of `σ` (or `χ = 0` with `c ≠ 0`).
pub fn degree_one_seminorm(c: &[f64], alpha: f64, sigma: &DMatrix<f64>) -> f64 {
    let cv = DVector::from_column_slice(c);
    let cn = cv.norm();
    if cn == 0.0 {
        return 0.0;
    }
    let x = chi(alpha);
    if x == 0.0 {
        return f64::INFINITY;
    }
    let eig = sigma.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut q = 0.0;
    for k in 0..eig.eigenvalues.len() {
        let proj = eig.eigenvectors.column(k).dot(&cv);
        let lam = eig.eigenvalues[k];
        if lam.abs() <= 1e-12 * top.max(1e-300) {
            if proj.abs() > 1e-12 * cn.max(1.0) {
                return f64::INFINITY;
            }
        } else {
            q += proj * proj / lam;
        }
    }
    2.0 / x * q
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorm {
    pub direction: usize,
    /// `χ² ‖𝔴_i + 𝔏_α 𝔥‖²_{-1}`.
    pub higher: f64,
    /// Degree-one seminorm; `None` when unbounded.
    pub degree_one: Option<f64>,
    pub total: Option<f64>,
}

/// Residual of a candidate `𝔥` against `D` for direction `i`.
pub fn residual_triple_norm(
    system: &ResolventSystem,
    alpha: f64,
    d: &DMatrix<f64>,
    i: usize,
    h: &DualFunction,
) -> Result<ResidualNorm, DualError> {
    system.residual(alpha, d, i, &system.basis().to_vector(h)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityCheck {
    pub v: Vec<f64>,
    /// `χ v·(D - ασ) v` with the extrapolated `D`.
    pub lhs: f64,
    /// Symmetric Dirichlet form of the approximant `χ Σ v_j 𝔣_j`, extrapolated.
    pub rhs: f64,
    pub gap: f64,
}

/// Compares both sides of the mobility identity. `per_lambda[k][i]` holds
/// `𝔣_{i,λ_k}` as basis vectors.
pub fn mobility_check(
    system: &ResolventSystem,
    alpha: f64,
    v: &[f64],
    lambdas: &[f64],
    per_lambda: &[Vec<Vec<f64>>],
    d: &DMatrix<f64>,
) -> Result<MobilityCheck, DualError> {
    let dim = system.analysis().dim();
    if v.len() != dim {
        return Err(DualError::Input(format!("vector of length {} in dimension {dim}", v.len())));
    }
    let c = chi(alpha);
    let vv = DVector::from_column_slice(v);
    let lhs = c * (vv.transpose() * (d - &system.analysis().covariance * alpha) * &vv)[(0, 0)];
    let forms: Vec<f64> = per_lambda
        .iter()
        .map(|fs| {
            let mut fv = vec![0.0; system.len()];
            for (vi, f) in v.iter().zip(fs) {
                for (a, b) in fv.iter_mut().zip(f) {
                    *a += c * vi * b;
                }
            }
            system.h1(&fv, &fv)
        })
        .collect();
    let (rhs, _) = extrapolate_linear(lambdas, &forms);
    let gap = (lhs - rhs).abs() / lhs.abs().max(1e-12);
    Ok(MobilityCheck { v: v.to_vec(), lhs, rhs, gap })
}

/// Per-`λ` diagnostics at one density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub d: Vec<Vec<f64>>,
    /// `λ<𝔣_i,𝔣_i> + <𝔣_i,(-𝔏_s)𝔣_i>` per direction.
    pub energy: Vec<f64>,
    pub iterations: Vec<usize>,
    pub solver_residual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEntry {
    pub alpha: f64,
    pub d: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub j: Vec<Vec<f64>>,
    /// Entrywise `|D(0) - D(λ_min)|` of the extrapolation.
    pub d_spread: Vec<Vec<f64>>,
    pub min_eig_d_minus_alpha_sigma: f64,
    /// `max |D_ij - D_ji|`.
    pub asymmetry: f64,
    pub lambdas: Vec<LambdaRow>,
    pub residuals: Vec<ResidualNorm>,
    pub mobility: Vec<MobilityCheck>,
    /// Weighted mass of `𝔏_α 𝔣_{i,λ_min}` on sets outside the window, per direction.
    pub clipped_mass: Vec<f64>,
    /// Largest translation-identity violation among the solutions.
    pub translation_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationMeta {
    pub radius: i32,
    pub max_degree: usize,
    pub basis_size: usize,
    pub degree_counts: Vec<usize>,
    pub nonzeros: usize,
    pub lambdas: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionResult {
    pub dim: usize,
    pub kernel: Vec<KernelEntry>,
    pub sigma: Vec<Vec<f64>>,
    pub truncation: TruncationMeta,
    pub alphas: Vec<f64>,
    pub entries: Vec<AlphaEntry>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl DiffusionResult {
    pub fn matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
        let n = rows.len();
        DMatrix::from_fn(n, n, |i, j| rows[i][j])
    }

    /// `(α, a(α))` pairs.
    pub fn a_table(&self) -> Vec<(f64, DMatrix<f64>)> {
        self.entries.iter().map(|e| (e.alpha, DiffusionResult::matrix(&e.a))).collect()
    }
}

fn min_sym_eig(m: &DMatrix<f64>) -> f64 {
    ((m + m.transpose()) * 0.5).symmetric_eigen().eigenvalues.min()
}

impl ResolventSystem {
    /// Clipped weighted mass of `𝔏_α x` outside the window.
    fn clipped_mass(&self, alpha: f64, x: &[f64]) -> f64 {
        let parts = KernelParts::new(&self.analysis);
        let basis = self.basis();
        let f = basis.to_function(alpha, x);
        let w = DualOperator::Lalpha.coefficients(alpha);
        let mut rows: rustc_hash::FxHashSet<FiniteSubset> = Default::default();
        let mut push = |b: &FiniteSubset, _: f64| {
            if !basis.admits(b) {
                rows.insert(b.clone());
            }
        };
        // rows that can read an in-window set; 𝔏_- rows only shrink sets
        for (b, _) in f.iter() {
            parts.emit([1.0, 0.0, 0.0, 0.0], b, &mut push);
            // 𝔏_+ rows one degree up that read b
            for x in b.points().chain(std::iter::once(Point::ZERO)) {
                for &(z, _) in &parts.anti {
                    let y = x + z;
                    if !y.is_zero() && !b.contains(y) {
                        push(&b.with(y), 0.0);
                    }
                }
            }
            for &(z, _) in &parts.anti {
                if !b.contains(-z) {
                    push(&b.translated(-z).with(z), 0.0);
                }
            }
        }
        let mut rows: Vec<FiniteSubset> = rows.into_iter().collect();
        rows.sort();
        rows.iter()
            .map(|a| {
                let mut r = 0.0;
                parts.emit(w, a, &mut |b, c| r += c * f.get(b));
                r * r / (a.len() + 1) as f64
            })
            .sum()
    }
}

/// Solves every `(α, i, λ)` and assembles `D`, `a`, `J` with diagnostics.
pub fn compute_diffusion(
    analysis: &KernelAnalysis,
    alphas: &[f64],
    params: &TruncationParams,
) -> Result<DiffusionResult, DualError> {
    let sys = ResolventSystem::new(analysis, params)?;
    compute_diffusion_with(&sys, alphas)
}

pub fn compute_diffusion_with(sys: &ResolventSystem, alphas: &[f64]) -> Result<DiffusionResult, DualError> {
    let analysis = sys.analysis();
    let params = sys.params();
    let dim = analysis.dim();
    let sigma = analysis.covariance.clone();
    let lambdas = params.lambda_sequence();
    let mut entries = Vec::with_capacity(alphas.len());
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; dim];
    for &alpha in alphas {
        check_alpha(alpha)?;
        let mut per_lambda: Vec<Vec<Vec<f64>>> = Vec::with_capacity(lambdas.len());
        let mut table = Vec::with_capacity(lambdas.len());
        for &lambda in &lambdas {
            let mut fs = Vec::with_capacity(dim);
            let mut energy = Vec::with_capacity(dim);
            let mut iterations = Vec::with_capacity(dim);
            let mut solver_residual = Vec::with_capacity(dim);
            for i in 0..dim {
                let s = if chi(alpha) == 0.0 {
                    Solved { alpha, lambda, direction: i, values: vec![0.0; sys.len()], report: None }
                } else {
                    sys.solve_current(alpha, lambda, i, warm[i].as_deref())?
                };
                if s.report.is_some() {
                    warm[i] = Some(s.values.clone());
                }
                energy.push(sys.energy(lambda, &s.values));
                iterations.push(s.report.as_ref().map_or(0, |r| r.iterations));
                solver_residual.push(s.report.as_ref().map_or(0.0, |r| r.residual));
                fs.push(s.values);
            }
            table.push(LambdaRow {
                lambda,
                d: rows(&sys.diffusion_from(alpha, &fs)),
                energy,
                iterations,
                solver_residual,
            });
            per_lambda.push(fs);
        }
        let mut d = DMatrix::zeros(dim, dim);
        let mut spread = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let v: Vec<f64> = table.iter().map(|r| r.d[i][j]).collect();
                let (x, s) = extrapolate_linear(&lambdas, &v);
                d[(i, j)] = x;
                spread[(i, j)] = s;
            }
        }
        let last = per_lambda.last().expect("nonempty lambda sequence");
        let mut residuals = Vec::new();
        let mut clipped = Vec::new();
        let mut violation: f64 = 0.0;
        for i in 0..dim {
            if chi(alpha) == 0.0 || last[i].iter().all(|&v| v == 0.0) {
                residuals.push(sys.residual(alpha, &d, i, &last[i])?);
                clipped.push(0.0);
                continue;
            }
            residuals.push(sys.residual(alpha, &d, i, &last[i])?);
            clipped.push(sys.clipped_mass(alpha, &last[i]));
            let f = sys.basis().to_function(alpha, &last[i]);
            violation = violation.max(super::check_translation_identity(&f));
        }
        let mut probes = vec![unit(dim, 0)];
        if dim >= 2 {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let mut v = vec![0.0; dim];
            v[0] = r;
            v[1] = r;
            probes.push(v);
        }
        let mobility = probes
            .iter()
            .map(|v| mobility_check(sys, alpha, v, &lambdas, &per_lambda, &d))
            .collect::<Result<_, _>>()?;
        let a = hydrodynamic_matrix(alpha, &d, &sigma);
        let j = j_matrix(alpha, &d, &sigma);
        entries.push(AlphaEntry {
            alpha,
            d: rows(&d),
            a: rows(&a),
            j: rows(&j),
            d_spread: rows(&spread),
            min_eig_d_minus_alpha_sigma: min_sym_eig(&(&d - &sigma * alpha)),
            asymmetry: (&d - d.transpose()).abs().max(),
            lambdas: table,
            residuals,
            mobility,
            clipped_mass: clipped,
            translation_violation: violation,
        });
    }
    let basis = sys.basis();
    Ok(DiffusionResult {
        dim,
        kernel: analysis.kernel.to_records(),
        sigma: rows(&sigma),
        truncation: TruncationMeta {
            radius: params.radius,
            max_degree: params.max_degree,
            basis_size: basis.len(),
            degree_counts: basis.degree_counts(),
            nonzeros: sys.operator().nnz().iter().sum(),
            lambdas,
            tolerance: params.tolerance,
        },
        alphas: alphas.to_vec(),
        entries,
    })
}

fn unit(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}
