//! Explicit conservative solver for `∂_t ρ = Σ_{i,j} ∂_i (a_ij(ρ) ∂_j ρ)` on
//! the periodic unit torus.
//!
//! Fluxes live on cell faces. On the face between `x` and `x + e_i` the
//! density is the arithmetic mean of the two cells, `∂_i ρ` is the plain
//! difference and each transverse `∂_j ρ` is the mean of the centred
//! differences in the two cells. The update telescopes, so mass is
//! conserved to rounding, and a constant field is a fixed point.

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::DiffusionResult;
use crate::field::{unravel, DensityField};
use crate::lattice::MAX_DIM;

pub type Mat3 = [[f64; MAX_DIM]; MAX_DIM];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    Stability { dt: f64, bound: f64 },
    #[error("density {value} left [0, 1] at cell {cell}")]
    Range { value: f64, cell: usize },
    #[error("density {rho} outside the table range [{lo}, {hi}]")]
    TableRange { rho: f64, lo: f64, hi: f64 },
    #[error("invalid table: {0}")]
    Table(String),
    #[error("field dimension {field} does not match mobility dimension {mobility}")]
    Dimension { field: usize, mobility: usize },
    #[error("time must be finite and nonnegative, got {0}")]
    Time(f64),
}

/// A density-dependent diffusion matrix `a(ρ)`.
pub trait Mobility: Sync {
    fn dim(&self) -> usize;

    /// `a(ρ)`, zero-padded to 3×3.
    fn matrix(&self, rho: f64) -> Result<Mat3, PdeError>;

    /// Largest eigenvalue of the symmetric part of `a` over `[lo, hi]`,
    /// sampled on a fine grid.
    fn max_eigenvalue(&self, lo: f64, hi: f64) -> Result<f64, PdeError> {
        let mut top: f64 = 0.0;
        for k in 0..=64 {
            let rho = lo + (hi - lo) * k as f64 / 64.0;
            top = top.max(max_sym_eigenvalue(&self.matrix(rho)?, self.dim()));
        }
        Ok(top)
    }
}

fn max_sym_eigenvalue(m: &Mat3, dim: usize) -> f64 {
    let a = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (m[i][j] + m[j][i]));
    a.symmetric_eigen().eigenvalues.max()
}

/// `a` independent of the density.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantMobility {
    dim: usize,
    a: Mat3,
}

impl ConstantMobility {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let dim = a.nrows();
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in m.iter_mut().enumerate().take(dim) {
            for (j, v) in row.iter_mut().enumerate().take(dim) {
                *v = a[(i, j)];
            }
        }
        ConstantMobility { dim, a: m }
    }
}

impl Mobility for ConstantMobility {
    fn dim(&self) -> usize {
        self.dim
    }

    fn matrix(&self, _rho: f64) -> Result<Mat3, PdeError> {
        Ok(self.a)
    }
}

/// `a(·)` tabulated on a density grid, interpolated entrywise by monotone
/// piecewise-cubic Hermite splines. Tables are symmetrised on
/// construction; [`DiffusionTable::asymmetry`] keeps the discarded part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawTable", into = "RawTable")]
pub struct DiffusionTable {
    dim: usize,
    alphas: Vec<f64>,
    values: Vec<Mat3>,
    slopes: Vec<Mat3>,
    asymmetry: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    dim: usize,
    alphas: Vec<f64>,
    /// Row-major `d×d` matrices, one per density.
    matrices: Vec<Vec<Vec<f64>>>,
}

impl From<RawTable> for DiffusionTable {
    fn from(r: RawTable) -> Self {
        DiffusionTable::from_rows(r.dim, r.alphas, &r.matrices).unwrap_or_else(|_| DiffusionTable::empty(r.dim))
    }
}

impl From<DiffusionTable> for RawTable {
    fn from(t: DiffusionTable) -> Self {
        let matrices = t.values.iter().map(|m| (0..t.dim).map(|i| m[i][..t.dim].to_vec()).collect()).collect();
        RawTable { dim: t.dim, alphas: t.alphas, matrices }
    }
}

/// Fritsch-Butland slopes for monotone cubic Hermite interpolation.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![del[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if del[k - 1] * del[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], del[0], del[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

impl DiffusionTable {
    fn empty(dim: usize) -> Self {
        DiffusionTable { dim, alphas: Vec::new(), values: Vec::new(), slopes: Vec::new(), asymmetry: 0.0 }
    }

    pub fn new(dim: usize, alphas: Vec<f64>, matrices: &[DMatrix<f64>]) -> Result<Self, PdeError> {
        let rows: Vec<Vec<Vec<f64>>> =
            matrices.iter().map(|m| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()).collect();
        DiffusionTable::from_rows(dim, alphas, &rows)
    }

    pub fn from_rows(dim: usize, alphas: Vec<f64>, matrices: &[Vec<Vec<f64>>]) -> Result<Self, PdeError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(PdeError::Table(format!("dimension {dim}")));
        }
        if alphas.is_empty() || alphas.len() != matrices.len() {
            return Err(PdeError::Table(format!("{} densities, {} matrices", alphas.len(), matrices.len())));
        }
        if alphas.windows(2).any(|w| !(w[1] > w[0])) || alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(PdeError::Table("densities must increase within [0, 1]".into()));
        }
        let mut values = Vec::with_capacity(alphas.len());
        let mut asymmetry: f64 = 0.0;
        for m in matrices {
            if m.len() != dim || m.iter().any(|r| r.len() != dim) {
                return Err(PdeError::Table(format!("matrix is not {dim}×{dim}")));
            }
            let mut v = [[0.0; MAX_DIM]; MAX_DIM];
            for i in 0..dim {
                for j in 0..dim {
                    if !m[i][j].is_finite() {
                        return Err(PdeError::Table("non-finite entry".into()));
                    }
                    v[i][j] = 0.5 * (m[i][j] + m[j][i]);
                    asymmetry = asymmetry.max((m[i][j] - m[j][i]).abs());
                }
            }
            values.push(v);
        }
        let mut slopes = vec![[[0.0; MAX_DIM]; MAX_DIM]; alphas.len()];
        for i in 0..dim {
            for j in 0..dim {
                let y: Vec<f64> = values.iter().map(|v| v[i][j]).collect();
                for (k, s) in pchip_slopes(&alphas, &y).into_iter().enumerate() {
                    slopes[k][i][j] = s;
                }
            }
        }
        Ok(DiffusionTable { dim, alphas, values, slopes, asymmetry })
    }

    /// The `a(α)` column of a diffusion run.
    pub fn from_diffusion(result: &DiffusionResult) -> Result<Self, PdeError> {
        let rows: Vec<Vec<Vec<f64>>> = result.entries.iter().map(|e| e.a.clone()).collect();
        DiffusionTable::from_rows(result.dim, result.alphas.clone(), &rows)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn range(&self) -> (f64, f64) {
        (self.alphas[0], *self.alphas.last().unwrap())
    }

    /// `max |a_ij - a_ji|` of the input matrices.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry <= tol
    }

    /// `min_k λ_min(a(α_k) - σ/2)` over the nodes.
    pub fn psd_margin(&self, sigma: &DMatrix<f64>) -> f64 {
        self.values
            .iter()
            .map(|v| {
                let m = DMatrix::from_fn(self.dim, self.dim, |i, j| v[i][j] - 0.5 * sigma[(i, j)]);
                m.symmetric_eigen().eigenvalues.min()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn node(&self, k: usize) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.values[k][i][j])
    }
}

impl Mobility for DiffusionTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn matrix(&self, rho: f64) -> Result<Mat3, PdeError> {
        let n = self.alphas.len();
        if n == 0 {
            return Err(PdeError::Table("empty table".into()));
        }
        if n == 1 {
            return Ok(self.values[0]);
        }
        let (lo, hi) = self.range();
        let tol = 1e-12;
        if !(rho >= lo - tol && rho <= hi + tol) {
            return Err(PdeError::TableRange { rho, lo, hi });
        }
        let r = rho.clamp(lo, hi);
        let k = match self.alphas.partition_point(|&a| a <= r) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.alphas[k + 1] - self.alphas[k];
        let t = (r - self.alphas[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i][j] = h00 * self.values[k][i][j]
                    + h * h10 * self.slopes[k][i][j]
                    + h01 * self.values[k + 1][i][j]
                    + h * h11 * self.slopes[k + 1][i][j];
            }
        }
        Ok(out)
    }

    fn max_eigenvalue(&self, lo: f64, hi: f64) -> Result<f64, PdeError> {
        let mut top: f64 = 0.0;
        let (a, b) = self.range();
        let (lo, hi) = (lo.max(a), hi.min(b).max(lo.max(a)));
        for k in 0..=64 {
            let rho = lo + (hi - lo) * k as f64 / 64.0;
            top = top.max(max_sym_eigenvalue(&self.matrix(rho)?, self.dim));
        }
        for (k, &x) in self.alphas.iter().enumerate() {
            if x >= lo && x <= hi {
                top = top.max(max_sym_eigenvalue(&self.values[k], self.dim));
            }
        }
        Ok(top)
    }
}

/// `h² / (2d λ_max)` over the current range of `rho`.
pub fn stable_time_step(rho: &DensityField, mobility: &dyn Mobility) -> Result<f64, PdeError> {
    let lmax = mobility.max_eigenvalue(rho.min(), rho.max())?;
    let h = rho.spacing();
    Ok(if lmax > 0.0 { h * h / (2.0 * rho.dim() as f64 * lmax) } else { f64::INFINITY })
}

/// Face fluxes: `flux[i][x]` is the flux through the face between `x` and `x + e_i`.
fn face_fluxes(rho: &DensityField, mobility: &dyn Mobility) -> Result<Vec<Vec<f64>>, PdeError> {
    let d = rho.dim();
    let inv_h = 1.0 / rho.spacing();
    let v = rho.values();
    (0..d)
        .map(|i| {
            (0..rho.len())
                .into_par_iter()
                .map(|x| {
                    let xi = rho.shifted(x, i, 1);
                    let a = mobility.matrix(0.5 * (v[x] + v[xi]))?;
                    let mut f = a[i][i] * (v[xi] - v[x]) * inv_h;
                    for j in (0..d).filter(|&j| j != i) {
                        if a[i][j] == 0.0 {
                            continue;
                        }
                        let here = v[rho.shifted(x, j, 1)] - v[rho.shifted(x, j, -1)];
                        let there = v[rho.shifted(xi, j, 1)] - v[rho.shifted(xi, j, -1)];
                        f += a[i][j] * (here + there) * 0.25 * inv_h;
                    }
                    Ok(f)
                })
                .collect()
        })
        .collect()
}

fn check_dims(rho: &DensityField, mobility: &dyn Mobility) -> Result<(), PdeError> {
    if rho.dim() != mobility.dim() {
        return Err(PdeError::Dimension { field: rho.dim(), mobility: mobility.dim() });
    }
    Ok(())
}

fn check_range(rho: &DensityField) -> Result<(), PdeError> {
    match rho.values().iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(cell) => Err(PdeError::Range { value: rho.values()[cell], cell }),
        None => Ok(()),
    }
}

/// One forward-Euler step of size `dt`, plus `dt·source` when given.
pub fn pde_step(
    rho: &DensityField,
    mobility: &dyn Mobility,
    dt: f64,
    source: Option<&[f64]>,
) -> Result<DensityField, PdeError> {
    check_dims(rho, mobility)?;
    let bound = stable_time_step(rho, mobility)?;
    if !(dt >= 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(PdeError::Stability { dt, bound });
    }
    step_unchecked(rho, mobility, dt, source)
}

fn step_unchecked(
    rho: &DensityField,
    mobility: &dyn Mobility,
    dt: f64,
    source: Option<&[f64]>,
) -> Result<DensityField, PdeError> {
    let flux = face_fluxes(rho, mobility)?;
    let c = dt / rho.spacing();
    let v = rho.values();
    let next: Vec<f64> = (0..rho.len())
        .into_par_iter()
        .map(|x| {
            let mut div = 0.0;
            for (i, f) in flux.iter().enumerate() {
                div += f[x] - f[rho.shifted(x, i, -1)];
            }
            v[x] + c * div + source.map_or(0.0, |s| dt * s[x])
        })
        .collect();
    let out = DensityField::new(rho.dim(), rho.side(), next).expect("same grid");
    if source.is_none() {
        check_range(&out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeRun {
    pub field: DensityField,
    pub steps: usize,
    pub dt: f64,
    /// `|mass(t) - mass(0)| / mass(0)`.
    pub mass_drift: f64,
    /// Extremes over the whole run.
    pub min: f64,
    pub max: f64,
}

/// Fraction of the stability bound used by [`solve_to_time`].
pub const CFL_SAFETY: f64 = 0.9;

/// Steps to time `t` with a uniform step no larger than the bound of
/// the initial range (the maximum principle keeps later ranges inside it).
pub fn solve_to_time(rho0: &DensityField, mobility: &dyn Mobility, t: f64) -> Result<PdeRun, PdeError> {
    solve_inner(rho0, mobility, t, None::<&(dyn Fn(f64, &[f64]) -> f64 + Sync)>)
}

/// Like [`solve_to_time`] with a source `S(t, u)` added to the right side.
pub fn solve_with_source(
    rho0: &DensityField,
    mobility: &dyn Mobility,
    t: f64,
    source: &(dyn Fn(f64, &[f64]) -> f64 + Sync),
) -> Result<PdeRun, PdeError> {
    solve_inner(rho0, mobility, t, Some(source))
}

fn solve_inner(
    rho0: &DensityField,
    mobility: &dyn Mobility,
    t: f64,
    source: Option<&(dyn Fn(f64, &[f64]) -> f64 + Sync)>,
) -> Result<PdeRun, PdeError> {
    check_dims(rho0, mobility)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(PdeError::Time(t));
    }
    check_range(rho0)?;
    let mass0 = rho0.mass();
    let (mut lo, mut hi) = (rho0.min(), rho0.max());
    if t == 0.0 {
        return Ok(PdeRun { field: rho0.clone(), steps: 0, dt: 0.0, mass_drift: 0.0, min: lo, max: hi });
    }
    let bound = stable_time_step(rho0, mobility)?;
    let steps = if bound.is_finite() { (t / (CFL_SAFETY * bound)).ceil().max(1.0) as usize } else { 1 };
    let dt = t / steps as f64;
    let (d, m) = (rho0.dim(), rho0.side());
    let mut rho = rho0.clone();
    let mut s = vec![0.0; rho0.len()];
    for n in 0..steps {
        if let Some(src) = source {
            let time = n as f64 * dt;
            s.par_iter_mut().enumerate().for_each(|(x, v)| {
                let c = unravel(x, d, m);
                let mut u = [0.0; MAX_DIM];
                for i in 0..d {
                    u[i] = c[i] as f64 / m as f64;
                }
                *v = src(time, &u[..d]);
            });
        }
        rho = step_unchecked(&rho, mobility, dt, source.map(|_| s.as_slice()))?;
        lo = lo.min(rho.min());
        hi = hi.max(rho.max());
    }
    check_range(&rho)?;
    let mass_drift = if mass0 != 0.0 { (rho.mass() - mass0).abs() / mass0.abs() } else { rho.mass().abs() };
    Ok(PdeRun { field: rho, steps, dt, mass_drift, min: lo, max: hi })
}

/// Quadratic mobility `a(ρ) = a0 + ρ(1-ρ) a1` with the exact solution
/// `ρ*(t,u) = c + ε e^{-t} Π_i trig_i(2π u_i)` (sine on axis 0, cosine
/// elsewhere) and the source that makes `ρ*` solve the forced equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Manufactured {
    pub dim: usize,
    pub a0: Mat3,
    pub a1: Mat3,
    pub center: f64,
    pub amplitude: f64,
}

impl Manufactured {
    /// A full, anisotropic, density-dependent case.
    pub fn standard(dim: usize) -> Self {
        let a0 = [[0.30, 0.06, 0.04], [0.06, 0.22, 0.05], [0.04, 0.05, 0.26]];
        let a1 = [[0.40, -0.10, 0.08], [-0.10, 0.30, 0.06], [0.08, 0.06, 0.20]];
        Manufactured { dim, a0, a1, center: 0.5, amplitude: 0.25 }
    }

    fn mode(&self, u: &[f64]) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        // value and derivative of each factor
        let w = std::f64::consts::TAU;
        let mut f = [1.0; MAX_DIM];
        let mut g = [0.0; MAX_DIM];
        for i in 0..self.dim {
            let x = w * u[i];
            if i == 0 {
                f[i] = x.sin();
                g[i] = w * x.cos();
            } else {
                f[i] = x.cos();
                g[i] = -w * x.sin();
            }
        }
        (f, g)
    }

    pub fn exact(&self, t: f64, u: &[f64]) -> f64 {
        let (f, _) = self.mode(u);
        self.center + self.amplitude * (-t).exp() * f[..self.dim].iter().product::<f64>()
    }

    pub fn source(&self, t: f64, u: &[f64]) -> f64 {
        let d = self.dim;
        let w2 = std::f64::consts::TAU.powi(2);
        let (f, g) = self.mode(u);
        let e = self.amplitude * (-t).exp();
        let prod = |skip: &[usize]| -> f64 { (0..d).filter(|k| !skip.contains(k)).map(|k| f[k]).product() };
        let rho = self.center + e * prod(&[]);
        let mut grad = [0.0; MAX_DIM];
        for i in 0..d {
            grad[i] = e * g[i] * prod(&[i]);
        }
        let hess = |i: usize, j: usize| -> f64 {
            if i == j {
                -w2 * e * prod(&[])
            } else {
                e * g[i] * g[j] * prod(&[i, j])
            }
        };
        let q = rho * (1.0 - rho);
        let dq = 1.0 - 2.0 * rho;
        let mut div = 0.0;
        for i in 0..d {
            for j in 0..d {
                let a = self.a0[i][j] + q * self.a1[i][j];
                div += dq * self.a1[i][j] * grad[i] * grad[j] + a * hess(i, j);
            }
        }
        -(rho - self.center) - div
    }

    /// `max |ρ_h(t) - ρ*(t)|` on an `m`-grid.
    pub fn error(&self, m: usize, t: f64) -> Result<f64, PdeError> {
        let rho0 = DensityField::from_fn(self.dim, m, |u| self.exact(0.0, u)).expect("grid");
        let run = solve_with_source(&rho0, self, t, &|s, u| self.source(s, u))?;
        let truth = DensityField::from_fn(self.dim, m, |u| self.exact(t, u)).expect("grid");
        Ok(run.field.values().iter().zip(truth.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

impl Mobility for Manufactured {
    fn dim(&self) -> usize {
        self.dim
    }

    fn matrix(&self, rho: f64) -> Result<Mat3, PdeError> {
        let q = rho * (1.0 - rho);
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i][j] = self.a0[i][j] + q * self.a1[i][j];
            }
        }
        Ok(out)
    }
}
