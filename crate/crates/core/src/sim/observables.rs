use super::{Configuration, SimError};
use crate::field::DensityField;
use crate::kernel::KernelAnalysis;
use crate::lattice::MAX_DIM;

/// Block averages `η^K(x) = |Λ_K|^{-1} Σ_{y ∈ x+Λ_K} η(y)` at every site.
pub fn block_density(config: &Configuration, radius: usize) -> Result<DensityField, SimError> {
    let g = config.geometry();
    let (d, n) = (g.dim(), g.side());
    if 2 * radius + 1 > n {
        return Err(SimError::BlockRadius { radius, side: n });
    }
    let mut cur: Vec<f64> = (0..g.sites()).map(|x| config.value(x)).collect();
    let mut next = vec![0.0; cur.len()];
    let k = radius as isize;
    // the cube is a product of intervals, so sum one axis at a time
    for axis in 0..d {
        let stride = n.pow(axis as u32);
        for (x, out) in next.iter_mut().enumerate() {
            let c = (x / stride) % n;
            let base = x - c * stride;
            let mut s = 0.0;
            for off in -k..=k {
                let cc = (c as isize + off).rem_euclid(n as isize) as usize;
                s += cur[base + cc * stride];
            }
            *out = s;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let vol = ((2 * radius + 1) as f64).powi(d as i32);
    for v in &mut cur {
        *v /= vol;
    }
    Ok(DensityField::new(d, n, cur).expect("grid matches torus"))
}

/// `<π^N, H> = N^{-d} Σ_x H(x/N) η(x)`.
pub fn empirical_pairing(config: &Configuration, h: impl Fn(&[f64]) -> f64) -> f64 {
    let g = config.geometry();
    let mut s = 0.0;
    for x in config.occupied() {
        let u = g.position(x);
        s += h(&u[..g.dim()]);
    }
    s / g.sites() as f64
}

/// Per-site values of the adjoint currents.
///
/// For every site `x` and direction `i`:
/// * `w_star[i][x] = τ_x W_i*`, with `W_i* = Σ_y p*(y) y_i η(0)(1-η(y))`;
/// * `w_fluct[i][x] = w_i*(α, τ_x η)`, the current centred at density `α`;
/// * `g[i*d + j][x] = τ_x G_{ij}`, with `G_{ij} = Σ_y p*(y) y_i y_j η(0)(1-η(y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentObservables {
    pub dim: usize,
    pub w_star: Vec<Vec<f64>>,
    pub w_fluct: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
}

pub fn current_observables(
    config: &Configuration,
    analysis: &KernelAnalysis,
    alpha: f64,
) -> Result<CurrentObservables, SimError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SimError::Marginal(alpha));
    }
    let geom = config.geometry();
    let d = geom.dim();
    if analysis.dim() != d {
        return Err(SimError::DimensionMismatch { kernel: analysis.dim(), torus: d });
    }
    let sites = geom.sites();
    let mut w_star = vec![vec![0.0; sites]; d];
    let mut w_fluct = vec![vec![0.0; sites]; d];
    let mut g = vec![vec![0.0; sites]; d * d];
    let adj = analysis.adjoint.entries();
    for x in 0..sites {
        let e0 = config.value(x);
        for &(y, p) in adj {
            let ey = config.value(geom.translate(x, y));
            let jump = p * e0 * (1.0 - ey);
            let mut yc = [0.0; MAX_DIM];
            for i in 0..d {
                yc[i] = y.0[i] as f64;
            }
            for i in 0..d {
                w_star[i][x] += yc[i] * jump;
                w_fluct[i][x] -= p * yc[i] * ((e0 - alpha) * (ey - alpha) + alpha * (ey - e0));
                for j in 0..d {
                    g[i * d + j][x] += yc[i] * yc[j] * jump;
                }
            }
        }
    }
    Ok(CurrentObservables { dim: d, w_star, w_fluct, g })
}
