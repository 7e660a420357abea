use rand::Rng;

use super::SimError;
use crate::field::{ravel, unravel, DensityField};
use crate::lattice::{Point, MAX_DIM};

/// `T_N^d = {0..N-1}^d` with site index `Σ x_i N^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGeometry {
    dim: usize,
    side: usize,
    sites: usize,
}

impl TorusGeometry {
    pub fn new(dim: usize, side: usize) -> Result<Self, SimError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(SimError::Dimension(dim));
        }
        if side < 2 {
            return Err(SimError::Side(side));
        }
        let sites = side.checked_pow(dim as u32).filter(|&s| s <= u32::MAX as usize).ok_or(SimError::TooLarge(side))?;
        Ok(TorusGeometry { dim, side, sites })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn coords(&self, idx: usize) -> [usize; MAX_DIM] {
        unravel(idx, self.dim, self.side)
    }

    /// Index of the lattice point `p` reduced mod `N`.
    pub fn index_of(&self, p: Point) -> usize {
        let n = self.side as i64;
        let mut c = [0usize; MAX_DIM];
        for i in 0..self.dim {
            c[i] = (p.0[i] as i64).rem_euclid(n) as usize;
        }
        ravel(&c[..self.dim], self.dim, self.side)
    }

    pub fn point(&self, idx: usize) -> Point {
        let c = self.coords(idx);
        let mut p = [0i32; MAX_DIM];
        for i in 0..self.dim {
            p[i] = c[i] as i32;
        }
        Point(p)
    }

    /// `idx + z` on the torus.
    pub fn translate(&self, idx: usize, z: Point) -> usize {
        self.index_of(self.point(idx) + z)
    }

    /// Continuum position `x/N` of a site.
    pub fn position(&self, idx: usize) -> [f64; MAX_DIM] {
        let c = self.coords(idx);
        let mut u = [0.0; MAX_DIM];
        for i in 0..self.dim {
            u[i] = c[i] as f64 / self.side as f64;
        }
        u
    }
}

/// Occupancy of every site, one bit each.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    geom: TorusGeometry,
    bits: Vec<u64>,
    count: usize,
}

impl Configuration {
    pub fn empty(geom: TorusGeometry) -> Self {
        Configuration { geom, bits: vec![0; geom.sites.div_ceil(64)], count: 0 }
    }

    pub fn full(geom: TorusGeometry) -> Self {
        let mut c = Configuration::empty(geom);
        for i in 0..geom.sites {
            c.set(i, true);
        }
        c
    }

    pub fn from_occupancy(geom: TorusGeometry, occ: &[bool]) -> Self {
        assert_eq!(occ.len(), geom.sites, "occupancy length");
        let mut c = Configuration::empty(geom);
        for (i, &o) in occ.iter().enumerate() {
            c.set(i, o);
        }
        c
    }

    /// Configuration whose bit `i` is bit `i` of `state` (tiny tori only).
    pub fn from_state_index(geom: TorusGeometry, state: usize) -> Self {
        assert!(geom.sites < usize::BITS as usize);
        let mut c = Configuration::empty(geom);
        for i in 0..geom.sites {
            c.set(i, (state >> i) & 1 == 1);
        }
        c
    }

    pub fn state_index(&self) -> usize {
        assert!(self.geom.sites < usize::BITS as usize);
        self.bits[0] as usize
    }

    pub fn geometry(&self) -> TorusGeometry {
        self.geom
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        (self.bits[idx >> 6] >> (idx & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, idx: usize, occupied: bool) {
        let was = self.get(idx);
        if was != occupied {
            self.bits[idx >> 6] ^= 1 << (idx & 63);
            if occupied {
                self.count += 1;
            } else {
                self.count -= 1;
            }
        }
    }

    #[inline]
    pub fn value(&self, idx: usize) -> f64 {
        if self.get(idx) {
            1.0
        } else {
            0.0
        }
    }

    pub fn particle_count(&self) -> usize {
        self.count
    }

    pub fn density(&self) -> f64 {
        self.count as f64 / self.geom.sites as f64
    }

    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    None
                } else {
                    let b = word.trailing_zeros() as usize;
                    word &= word - 1;
                    Some(w * 64 + b)
                }
            })
        })
    }

    /// Exchanges the occupations of `x` and `y` in place.
    pub fn swap_sites(&mut self, x: usize, y: usize) {
        let (a, b) = (self.get(x), self.get(y));
        self.set(x, b);
        self.set(y, a);
    }

    /// The configuration translated so that site `z` becomes the origin:
    /// `(τ_z η)(x) = η(x + z)`.
    pub fn shift(&self, z: Point) -> Configuration {
        let mut out = Configuration::empty(self.geom);
        for x in self.occupied() {
            out.set(self.geom.translate(x, -z), true);
        }
        out
    }
}

/// `σ^{x,y} η`.
pub fn swap(config: &Configuration, x: usize, y: usize) -> Configuration {
    let mut c = config.clone();
    c.swap_sites(x, y);
    c
}

/// Site marginals of a Bernoulli product measure.
#[derive(Debug, Clone, Copy)]
pub enum Marginals<'a> {
    Constant(f64),
    /// Grid of `ρ_0(x/N)` with the torus' own side.
    Field(&'a DensityField),
}

/// Draws from `ν_{ρ0(·)}`: independent sites, `P(η(x)=1) = ρ0(x/N)`.
pub fn sample_product_measure<R: Rng + ?Sized>(
    geom: TorusGeometry,
    marginals: Marginals<'_>,
    rng: &mut R,
) -> Result<Configuration, SimError> {
    let mut c = Configuration::empty(geom);
    match marginals {
        Marginals::Constant(a) => {
            if !(0.0..=1.0).contains(&a) {
                return Err(SimError::Marginal(a));
            }
            for i in 0..geom.sites {
                if rng.gen::<f64>() < a {
                    c.set(i, true);
                }
            }
        }
        Marginals::Field(f) => {
            if f.dim() != geom.dim || f.side() != geom.side {
                return Err(SimError::ProfileGrid {
                    grid_dim: f.dim(),
                    grid_side: f.side(),
                    dim: geom.dim,
                    side: geom.side,
                });
            }
            if let Some(&bad) = f.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(SimError::Marginal(bad));
            }
            for (i, &rho) in f.values().iter().enumerate() {
                if rng.gen::<f64>() < rho {
                    c.set(i, true);
                }
            }
        }
    }
    Ok(c)
}
