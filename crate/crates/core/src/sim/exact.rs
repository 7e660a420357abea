//! Generator-matrix oracle for tori with at most [`MAX_EXACT_SITES`] sites.
//!
//! States are indexed by their occupancy bits: bit `x` of the state index is
//! `η(x)`. Distributions are row vectors evolved by the forward equation
//! `dμ/dt = μ Q`, integrated by uniformization.

use super::{Configuration, Marginals, SimError, TorusGeometry};
use crate::kernel::TransitionKernel;

pub const MAX_EXACT_SITES: usize = 13;

/// Poisson weights below this (past the mode) end the series.
const POISSON_CUTOFF: f64 = 1e-18;
/// Largest `Λ dt` per substep; keeps `e^{-Λ dt}` far from underflow.
const MAX_RATE_TIME: f64 = 8.0;

/// Sparse generator `Q` of the exclusion process on a tiny torus.
#[derive(Debug, Clone)]
pub struct Generator {
    geom: TorusGeometry,
    row_start: Vec<usize>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    /// `-Q(η, η)`.
    exit: Vec<f64>,
}

impl Generator {
    pub fn new(geom: TorusGeometry, kernel: &TransitionKernel) -> Result<Self, SimError> {
        if geom.sites() > MAX_EXACT_SITES {
            return Err(SimError::StateSpace { max: MAX_EXACT_SITES, got: geom.sites() });
        }
        if kernel.dim() != geom.dim() {
            return Err(SimError::DimensionMismatch { kernel: kernel.dim(), torus: geom.dim() });
        }
        let states = 1usize << geom.sites();
        let mut row_start = Vec::with_capacity(states + 1);
        let mut cols = Vec::new();
        let mut rates = Vec::new();
        let mut exit = Vec::with_capacity(states);
        let mut row: Vec<(u32, f64)> = Vec::new();
        for s in 0..states {
            row_start.push(cols.len());
            row.clear();
            for x in 0..geom.sites() {
                if (s >> x) & 1 == 0 {
                    continue;
                }
                for &(z, p) in kernel.entries() {
                    let y = geom.translate(x, z);
                    if (s >> y) & 1 == 1 {
                        continue;
                    }
                    row.push(((s ^ (1 << x) ^ (1 << y)) as u32, p));
                }
            }
            // offsets that wrap onto the same target merge into one entry
            row.sort_by_key(|e| e.0);
            let mut out = 0.0;
            let mut i = 0;
            while i < row.len() {
                let mut r = row[i].1;
                let mut j = i + 1;
                while j < row.len() && row[j].0 == row[i].0 {
                    r += row[j].1;
                    j += 1;
                }
                cols.push(row[i].0);
                rates.push(r);
                out += r;
                i = j;
            }
            exit.push(out);
        }
        row_start.push(cols.len());
        Ok(Generator { geom, row_start, cols, rates, exit })
    }

    pub fn geometry(&self) -> TorusGeometry {
        self.geom
    }

    pub fn states(&self) -> usize {
        self.exit.len()
    }

    /// Off-diagonal entries `(ζ, Q(η, ζ))` of row `η`.
    pub fn row(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[s]..self.row_start[s + 1];
        self.cols[r.clone()].iter().zip(&self.rates[r]).map(|(&c, &q)| (c as usize, q))
    }

    /// `Q(η, η)`.
    pub fn diagonal(&self, s: usize) -> f64 {
        -self.exit[s]
    }

    /// `max_η |Σ_ζ Q(η, ζ)|`, zero up to rounding for a conservative generator.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.states()).map(|s| (self.row(s).map(|e| e.1).sum::<f64>() + self.diagonal(s)).abs()).fold(0.0, f64::max)
    }

    /// `out = μ Q`.
    pub fn apply_forward(&self, mu: &[f64], out: &mut [f64]) {
        for (s, o) in out.iter_mut().enumerate() {
            *o = -self.exit[s] * mu[s];
        }
        for (s, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (c, q) in self.row(s) {
                out[c] += m * q;
            }
        }
    }

    /// `μ e^{tQ}` by uniformization: with `Λ ≥ max exit rate` and
    /// `P = I + Q/Λ`, `e^{tQ} = Σ_k Poisson(Λt; k) P^k`. Every term is
    /// nonnegative, so the result stays a probability vector.
    pub fn evolve(&self, mu: &[f64], duration: f64) -> Result<Vec<f64>, SimError> {
        if mu.len() != self.states() {
            return Err(SimError::DistributionLength { expected: self.states(), got: mu.len() });
        }
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(SimError::Duration(duration));
        }
        let lambda = self.exit.iter().copied().fold(0.0, f64::max);
        let mut cur = mu.to_vec();
        if duration == 0.0 || lambda == 0.0 {
            return Ok(cur);
        }
        let substeps = (lambda * duration / MAX_RATE_TIME).ceil().max(1.0) as usize;
        let lt = lambda * duration / substeps as f64;
        let mut term = vec![0.0; cur.len()];
        let mut next = vec![0.0; cur.len()];
        let mut acc = vec![0.0; cur.len()];
        for _ in 0..substeps {
            term.copy_from_slice(&cur);
            let mut weight = (-lt).exp();
            for (a, &t) in acc.iter_mut().zip(&term) {
                *a = weight * t;
            }
            let mut k = 0usize;
            while (k as f64) < lt || weight > POISSON_CUTOFF {
                k += 1;
                // term ← term P = term + term Q / Λ
                self.apply_forward(&term, &mut next);
                for (t, &n) in term.iter_mut().zip(&next) {
                    *t += n / lambda;
                }
                weight *= lt / k as f64;
                for (a, &t) in acc.iter_mut().zip(&term) {
                    *a += weight * t;
                }
            }
            // the truncated tail carries ~1e-18 of mass; renormalise it away
            let total: f64 = acc.iter().sum();
            let scale = mu.iter().sum::<f64>() / total;
            for (c, &a) in cur.iter_mut().zip(&acc) {
                *c = (a * scale).max(0.0);
            }
        }
        Ok(cur)
    }
}

/// Exact law at microscopic time `duration` from the initial law `mu`.
pub fn exact_evolution_small(
    geom: TorusGeometry,
    kernel: &TransitionKernel,
    initial: &[f64],
    duration: f64,
) -> Result<Vec<f64>, SimError> {
    Generator::new(geom, kernel)?.evolve(initial, duration)
}

/// Product Bernoulli law on all `2^{N^d}` configurations.
pub fn product_distribution(geom: TorusGeometry, marginals: Marginals<'_>) -> Result<Vec<f64>, SimError> {
    if geom.sites() > MAX_EXACT_SITES {
        return Err(SimError::StateSpace { max: MAX_EXACT_SITES, got: geom.sites() });
    }
    let rho: Vec<f64> = match marginals {
        Marginals::Constant(a) => vec![a; geom.sites()],
        Marginals::Field(f) => {
            if f.dim() != geom.dim() || f.side() != geom.side() {
                return Err(SimError::ProfileGrid {
                    grid_dim: f.dim(),
                    grid_side: f.side(),
                    dim: geom.dim(),
                    side: geom.side(),
                });
            }
            f.values().to_vec()
        }
    };
    if let Some(&bad) = rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(SimError::Marginal(bad));
    }
    let states = 1usize << geom.sites();
    Ok((0..states)
        .map(|s| rho.iter().enumerate().map(|(x, &r)| if (s >> x) & 1 == 1 { r } else { 1.0 - r }).product())
        .collect())
}

/// Point mass at one configuration.
pub fn point_distribution(config: &Configuration) -> Result<Vec<f64>, SimError> {
    let g = config.geometry();
    if g.sites() > MAX_EXACT_SITES {
        return Err(SimError::StateSpace { max: MAX_EXACT_SITES, got: g.sites() });
    }
    let mut mu = vec![0.0; 1 << g.sites()];
    mu[config.state_index()] = 1.0;
    Ok(mu)
}

/// `½ Σ |μ - ν|`.
pub fn total_variation(mu: &[f64], nu: &[f64]) -> Result<f64, SimError> {
    if mu.len() != nu.len() {
        return Err(SimError::DistributionLength { expected: mu.len(), got: nu.len() });
    }
    Ok(0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
}
