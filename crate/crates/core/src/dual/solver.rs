use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DualError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterativeSettings {
    /// Target for `‖b - Ax‖` in the weighted norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final true residual in the weighted norm.
    pub residual: f64,
    /// Residual estimate after every iteration.
    pub history: Vec<f64>,
}

#[inline]
fn wdot(w: &[f64], u: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(u).zip(v).map(|((a, b), c)| a * b * c).sum()
}

fn residual(apply: &impl Fn(&[f64], &mut [f64]), b: &[f64], x: &[f64], r: &mut [f64]) {
    apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Restarted GMRES for `A x = b` with Jacobi right preconditioning,
/// orthogonalising in the inner product `Σ w_i u_i v_i`. `x` holds the
/// initial guess on entry.
pub fn gmres(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    weights: &[f64],
    b: &[f64],
    x: &mut [f64],
    settings: &IterativeSettings,
) -> Result<SolveReport, DualError> {
    let n = b.len();
    let m = settings.restart.max(1);
    let inv: Vec<f64> = diag.iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    loop {
        residual(&apply, b, x, &mut r);
        let beta = wdot(weights, &r, &r).sqrt();
        if beta <= settings.tolerance {
            return Ok(SolveReport { iterations, residual: beta, history });
        }
        if iterations >= settings.max_iterations {
            return Err(DualError::NoConvergence { iterations, residual: beta, target: settings.tolerance, history });
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < settings.max_iterations {
            for ((zi, vi), di) in z.iter_mut().zip(&basis[k]).zip(&inv) {
                *zi = vi * di;
            }
            let mut w = vec![0.0; n];
            apply(&z, &mut w);
            // modified Gram-Schmidt, applied twice for stability
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = wdot(weights, &w, v);
                    h[i][k] += c;
                    for (wj, vj) in w.iter_mut().zip(v) {
                        *wj -= c * vj;
                    }
                }
            }
            let hn = wdot(weights, &w, &w).sqrt();
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = h[k][k].hypot(h[k + 1][k]);
            if den == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / den;
                sn[k] = h[k + 1][k] / den;
            }
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            history.push(g[k].abs());
            if g[k].abs() <= 0.5 * settings.tolerance || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = if h[i][i] != 0.0 { (g[i] - s) / h[i][i] } else { 0.0 };
        }
        z.iter_mut().for_each(|v| *v = 0.0);
        for (yi, v) in y.iter().zip(&basis) {
            for (zj, vj) in z.iter_mut().zip(v) {
                *zj += yi * vj;
            }
        }
        for ((xi, zi), di) in x.iter_mut().zip(&z).zip(&inv) {
            *xi += zi * di;
        }
    }
}

/// Jacobi-preconditioned conjugate gradients for an operator that is
/// self-adjoint and positive in the weighted inner product.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    weights: &[f64],
    b: &[f64],
    x: &mut [f64],
    settings: &IterativeSettings,
) -> Result<SolveReport, DualError> {
    let n = b.len();
    let mut r = vec![0.0; n];
    residual(&apply, b, x, &mut r);
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = wdot(weights, &r, &z);
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let rn = wdot(weights, &r, &r).sqrt();
        history.push(rn);
        if rn <= settings.tolerance {
            // report the true residual
            residual(&apply, b, x, &mut r);
            let res = wdot(weights, &r, &r).sqrt();
            return Ok(SolveReport { iterations, residual: res, history });
        }
        if iterations >= settings.max_iterations {
            return Err(DualError::NoConvergence { iterations, residual: rn, target: settings.tolerance, history });
        }
        apply(&p, &mut q);
        let a = rz / wdot(weights, &p, &q);
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * q[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = wdot(weights, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
}

/// `x = A^{-1} b` by LU with partial pivoting.
pub fn dense_solve(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>, DualError> {
    let lu = a.lu();
    lu.solve(&DVector::from_column_slice(b)).map(|v| v.as_slice().to_vec()).ok_or(DualError::Singular)
}
