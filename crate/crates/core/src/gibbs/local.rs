use super::{CylinderFunction, GibbsError};
use crate::field::DensityField;
use crate::lattice::{Point, MAX_DIM};
use crate::sim::{block_density, Configuration, TorusGeometry};

fn open_unit(x: f64) -> Result<f64, GibbsError> {
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(GibbsError::Density(x))
    }
}

/// `λ = log[ρ(1-α) / (α(1-ρ))]`.
pub fn lambda_transform(rho: f64, alpha: f64) -> Result<f64, GibbsError> {
    let (r, a) = (open_unit(rho)?, open_unit(alpha)?);
    Ok((r / (1.0 - r)).ln() - (a / (1.0 - a)).ln())
}

/// Inverse of [`lambda_transform`]: `ρ = α e^λ / (1 - α + α e^λ)`.
pub fn lambda_inverse(lambda: f64, alpha: f64) -> Result<f64, GibbsError> {
    let a = open_unit(alpha)?;
    // logistic form, stable for large |λ|
    let z = lambda + (a / (1.0 - a)).ln();
    Ok(if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) })
}

pub fn lambda_field(rho: &DensityField, alpha: f64) -> Result<DensityField, GibbsError> {
    let v = rho.values().iter().map(|&r| lambda_transform(r, alpha)).collect::<Result<Vec<_>, _>>()?;
    Ok(DensityField::new(rho.dim(), rho.side(), v)?)
}

/// `∂_{u_i} λ` on the grid by centred differences.
pub fn lambda_gradient(lambda: &DensityField, axis: usize) -> Vec<f64> {
    let inv2h = 0.5 * lambda.side() as f64;
    let v = lambda.values();
    (0..v.len()).map(|x| (v[lambda.shifted(x, axis, 1)] - v[lambda.shifted(x, axis, -1)]) * inv2h).collect()
}

fn check_grid(geom: TorusGeometry, f: &DensityField) -> Result<(), GibbsError> {
    if f.dim() != geom.dim() || f.side() != geom.side() {
        return Err(GibbsError::Grid { grid: f.side(), side: geom.side() });
    }
    Ok(())
}

/// Unnormalised log-density `Σ_x λ(x/N) η(x)` of the local Gibbs state.
pub fn log_local_gibbs(config: &Configuration, lambda: &DensityField) -> Result<f64, GibbsError> {
    check_grid(config.geometry(), lambda)?;
    let v = lambda.values();
    Ok(config.occupied().map(|x| v[x]).sum())
}

/// First-order correction: one centred cylinder function per direction,
/// averaged over `Λ_{ℓ'}` and evaluated at the density of `x + Λ_M`.
///
/// The padding `A` equals `s_𝔣` (the smallest value keeping every
/// `𝔣_i(β, τ_y η)` with `|y| ≤ ℓ - A` supported in `Λ_ℓ`), and `ℓ' = ℓ - A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    functions: Vec<CylinderFunction>,
    block: usize,
    ell: usize,
    padding: usize,
}

impl Correction {
    pub fn new(functions: Vec<CylinderFunction>, block: usize, ell: usize) -> Result<Self, GibbsError> {
        let support = functions.iter().map(|f| f.support_radius()).max().unwrap_or(0);
        let padding = support;
        if ell < padding || ell + support + padding > block {
            return Err(GibbsError::Scales { ell, support, padding, block });
        }
        Ok(Correction { functions, block, ell, padding })
    }

    pub fn functions(&self) -> &[CylinderFunction] {
        &self.functions
    }

    /// `M`.
    pub fn block(&self) -> usize {
        self.block
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    /// `A`.
    pub fn padding(&self) -> usize {
        self.padding
    }

    /// `ℓ' = ℓ - A`.
    pub fn inner(&self) -> usize {
        self.ell - self.padding
    }

    /// Finite-`N` reading of `|Λ_M|/N → 0` and `N/(M|Λ_M|) → 0`: warns when
    /// either ratio is not below one.
    pub fn scale_warnings(&self, side: usize, dim: usize) -> Vec<String> {
        let vol = ((2 * self.block + 1) as f64).powi(dim as i32);
        let n = side as f64;
        let mut w = Vec::new();
        if vol / n >= 1.0 {
            w.push(format!("|Λ_M|/N = {:.3} is not small", vol / n));
        }
        if n / (self.block as f64 * vol) >= 1.0 {
            w.push(format!("N/(M|Λ_M|) = {:.3} is not small", n / (self.block as f64 * vol)));
        }
        w
    }
}

/// `λ` on the torus grid plus an optional correction.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSpec {
    pub lambda: DensityField,
    pub correction: Option<Correction>,
}

/// Unnormalised log-density of the corrected local Gibbs state:
/// `Σ_x λ(x/N)η(x) - N^{-1} Σ_i Σ_x ∂_iλ(x/N) |Λ_{ℓ'}|^{-1} Σ_{y∈Λ_{ℓ'}} 𝔣_i(η^M(x), τ_{x+y}η)`.
pub fn log_corrected_gibbs(config: &Configuration, spec: &GibbsSpec) -> Result<f64, GibbsError> {
    let base = log_local_gibbs(config, &spec.lambda)?;
    let Some(corr) = &spec.correction else {
        return Ok(base);
    };
    let geom = config.geometry();
    let d = geom.dim();
    if corr.functions.len() != d {
        return Err(GibbsError::Directions { got: corr.functions.len(), dim: d });
    }
    if 2 * corr.block + 1 > geom.side() {
        return Err(GibbsError::BlockRadius { radius: corr.block, side: geom.side() });
    }
    let eta_m = block_density(config, corr.block).expect("radius checked");
    let inner = corr.inner() as i32;
    let cube = cube_points(d, inner);
    let mut total = 0.0;
    for (i, f) in corr.functions.iter().enumerate() {
        if f.is_zero() {
            continue;
        }
        let grad = lambda_gradient(&spec.lambda, i);
        for x in 0..geom.sites() {
            if grad[x] == 0.0 {
                continue;
            }
            let beta = eta_m.values()[x];
            let px = geom.point(x);
            let mut avg = 0.0;
            for &y in &cube {
                let origin = px + y;
                avg += f.value(beta, |z| config.get(geom.index_of(origin + z)));
            }
            total += grad[x] * avg / cube.len() as f64;
        }
    }
    Ok(base - total / geom.side() as f64)
}

/// All points of `Λ_k = {-k..k}^d`.
pub(crate) fn cube_points(dim: usize, k: i32) -> Vec<Point> {
    let side = (2 * k + 1) as usize;
    (0..side.pow(dim as u32))
        .map(|mut idx| {
            let mut p = [0i32; MAX_DIM];
            for c in p.iter_mut().take(dim) {
                *c = (idx % side) as i32 - k;
                idx /= side;
            }
            Point(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_transform(0.3, 0.3).unwrap(), 0.0);
        assert!((lambda_transform(0.75, 0.5).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!(lambda_transform(1.0, 0.5).is_err());
        assert!(lambda_transform(0.5, 0.0).is_err());
        for &(r, a) in &[(0.01, 0.5), (0.3, 0.9), (0.99, 0.02), (0.5, 0.5)] {
            let l = lambda_transform(r, a).unwrap();
            assert!((lambda_inverse(l, a).unwrap() - r).abs() < 1e-12);
        }
        // strictly increasing
        let mut prev = f64::NEG_INFINITY;
        for k in 1..100 {
            let l = lambda_transform(k as f64 / 100.0, 0.4).unwrap();
            assert!(l > prev);
            prev = l;
        }
    }

    #[test]
    fn local_gibbs_is_additive() {
        let g = TorusGeometry::new(2, 3).unwrap();
        let lam = DensityField::from_fn(2, 3, |u| u[0] - 2.0 * u[1]).unwrap();
        let mut c = Configuration::empty(g);
        assert_eq!(log_local_gibbs(&c, &lam).unwrap(), 0.0);
        c.set(4, true);
        assert_eq!(log_local_gibbs(&c, &lam).unwrap(), lam.values()[4]);
        c.set(7, true);
        assert_eq!(log_local_gibbs(&c, &lam).unwrap(), lam.values()[4] + lam.values()[7]);
        let zero = DensityField::constant(2, 3, 0.0).unwrap();
        assert_eq!(log_local_gibbs(&c, &zero).unwrap(), 0.0);
    }

    #[test]
    fn scales() {
        let f = CylinderFunction::pair(1, 0);
        assert!(Correction::new(vec![f.clone()], 3, 1).is_ok());
        assert!(matches!(Correction::new(vec![f.clone()], 2, 1), Err(GibbsError::Scales { .. })));
        assert!(matches!(Correction::new(vec![f], 5, 0), Err(GibbsError::Scales { .. })));
    }

    #[test]
    fn cube() {
        let c = cube_points(3, 1);
        assert_eq!(c.len(), 27);
        assert!(c.contains(&Point::new(&[-1, 1, 0])));
        assert_eq!(cube_points(2, 0), vec![Point::ZERO]);
    }
}
