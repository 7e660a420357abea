use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::MAX_DIM;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("dimension {0} not in 1..=3")]
    Dimension(usize),
    #[error("grid side must be at least 2, got {0}")]
    Side(usize),
    #[error("expected {expected} values for a {dim}-d grid of side {side}, got {got}")]
    Length { dim: usize, side: usize, expected: usize, got: usize },
}

/// Real-valued periodic grid on the unit torus `T^d`.
///
/// Cell `x ∈ {0..m-1}^d` sits at `u = x/m`; linear index `Σ x_i m^i`
/// (first axis fastest), the same convention as the discrete torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    dim: usize,
    side: usize,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(dim: usize, side: usize, values: Vec<f64>) -> Result<Self, FieldError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(FieldError::Dimension(dim));
        }
        if side < 2 {
            return Err(FieldError::Side(side));
        }
        let expected = side.pow(dim as u32);
        if values.len() != expected {
            return Err(FieldError::Length { dim, side, expected, got: values.len() });
        }
        Ok(DensityField { dim, side, values })
    }

    pub fn constant(dim: usize, side: usize, value: f64) -> Result<Self, FieldError> {
        DensityField::new(dim, side, vec![value; side.pow(dim as u32)])
    }

    /// Samples `f(u)` at every grid point `u = x/m`.
    pub fn from_fn(dim: usize, side: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self, FieldError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(FieldError::Dimension(dim));
        }
        let n = side.pow(dim as u32);
        let mut values = Vec::with_capacity(n);
        let mut u = [0.0; MAX_DIM];
        for idx in 0..n {
            let c = unravel(idx, dim, side);
            for i in 0..dim {
                u[i] = c[i] as f64 / side as f64;
            }
            values.push(f(&u[..dim]));
        }
        DensityField::new(dim, side, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.side as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn coords(&self, idx: usize) -> [usize; MAX_DIM] {
        unravel(idx, self.dim, self.side)
    }

    pub fn index(&self, c: &[usize]) -> usize {
        ravel(c, self.dim, self.side)
    }

    /// Index of the neighbour `idx + shift·e_axis` with periodic wrap.
    #[inline]
    pub fn shifted(&self, idx: usize, axis: usize, shift: isize) -> usize {
        let stride = self.side.pow(axis as u32);
        let c = (idx / stride) % self.side;
        let m = self.side as isize;
        let nc = ((c as isize + shift).rem_euclid(m)) as usize;
        idx - c * stride + nc * stride
    }

    /// `Σ ρ h^d`, with compensated summation.
    pub fn mass(&self) -> f64 {
        let cell = self.spacing().powi(self.dim as i32);
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &v in &self.values {
            let t = sum + v;
            comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
            sum = t;
        }
        (sum + comp) * cell
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Periodic multilinear interpolation at `u ∈ T^d`; exact on grid points.
    pub fn sample(&self, u: &[f64]) -> f64 {
        let m = self.side as f64;
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for i in 0..self.dim {
            let s = (u[i] * m).rem_euclid(m);
            let f = s.floor();
            base[i] = (f as usize) % self.side;
            frac[i] = s - f;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut c = [0usize; MAX_DIM];
            for i in 0..self.dim {
                let bit = (corner >> i) & 1;
                if bit == 1 {
                    w *= frac[i];
                    c[i] = (base[i] + 1) % self.side;
                } else {
                    w *= 1.0 - frac[i];
                    c[i] = base[i];
                }
            }
            if w != 0.0 {
                acc += w * self.values[ravel(&c[..self.dim], self.dim, self.side)];
            }
        }
        acc
    }

    /// Values at the points `x/n` of a torus of side `n`.
    pub fn resample(&self, n: usize) -> DensityField {
        DensityField::from_fn(self.dim, n, |u| self.sample(u)).expect("valid grid")
    }
}

#[inline]
pub(crate) fn unravel(mut idx: usize, dim: usize, side: usize) -> [usize; MAX_DIM] {
    let mut c = [0; MAX_DIM];
    for ci in c.iter_mut().take(dim) {
        *ci = idx % side;
        idx /= side;
    }
    c
}

#[inline]
pub(crate) fn ravel(c: &[usize], dim: usize, side: usize) -> usize {
    let mut idx = 0;
    for i in (0..dim).rev() {
        idx = idx * side + c[i];
    }
    idx
}
