use serde::{Deserialize, Serialize};

use super::GibbsError;
use crate::lattice::Point;

/// A local function `𝔣(β, η) = Σ_B c_B Π_{x∈B} (η(x) - β)`.
///
/// Writing it in centred monomials makes the `ν_β` mean equal to `c_∅` and
/// the mean of `∂_β 𝔣` equal to `-Σ_{|B|=1} c_B`, so membership in the
/// centred class is a condition on a handful of coefficients. It is still
/// verified by brute-force enumeration in [`check_membership`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawCylinder", into = "RawCylinder")]
pub struct CylinderFunction {
    dim: usize,
    terms: Vec<(Vec<Point>, f64)>,
    support: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCylinder {
    dim: usize,
    terms: Vec<(Vec<Point>, f64)>,
}

impl From<RawCylinder> for CylinderFunction {
    fn from(r: RawCylinder) -> Self {
        CylinderFunction::new(r.dim, r.terms)
    }
}

impl From<CylinderFunction> for RawCylinder {
    fn from(c: CylinderFunction) -> Self {
        RawCylinder { dim: c.dim, terms: c.terms }
    }
}

impl CylinderFunction {
    pub fn new(dim: usize, terms: Vec<(Vec<Point>, f64)>) -> Self {
        let mut support: Vec<Point> = terms.iter().flat_map(|t| t.0.iter().copied()).collect();
        support.sort();
        support.dedup();
        CylinderFunction { dim, terms, support }
    }

    /// `(η(0) - β)(η(e_axis) - β)`.
    pub fn pair(dim: usize, axis: usize) -> Self {
        CylinderFunction::new(dim, vec![(vec![Point::ZERO, Point::unit(axis)], 1.0)])
    }

    pub fn zero(dim: usize) -> Self {
        CylinderFunction::new(dim, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(Vec<Point>, f64)] {
        &self.terms
    }

    /// Sorted base set `Λ`.
    pub fn support(&self) -> &[Point] {
        &self.support
    }

    /// `s_𝔣`: smallest `m` with `Λ ⊂ Λ_m`.
    pub fn support_radius(&self) -> usize {
        self.support.iter().map(|p| p.linf()).max().unwrap_or(0) as usize
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.1 == 0.0)
    }

    /// `𝔣(β, η)` with `η(x)` read through `occ`.
    pub fn value(&self, beta: f64, occ: impl Fn(Point) -> bool) -> f64 {
        self.terms.iter().map(|(b, c)| c * b.iter().map(|&x| occ(x) as u8 as f64 - beta).product::<f64>()).sum()
    }

    /// `∂_β 𝔣(β, η)`.
    pub fn beta_derivative(&self, beta: f64, occ: impl Fn(Point) -> bool) -> f64 {
        let mut s = 0.0;
        for (b, c) in &self.terms {
            let vals: Vec<f64> = b.iter().map(|&x| occ(x) as u8 as f64 - beta).collect();
            for skip in 0..vals.len() {
                let p: f64 = vals.iter().enumerate().filter(|e| e.0 != skip).map(|e| e.1).product();
                s -= c * p;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub betas: Vec<f64>,
    /// `max_β |E_{ν_β} 𝔣(β, ·)|`.
    pub max_mean: f64,
    /// `max_β |E_{ν_β} ∂_β 𝔣(β, ·)|`.
    pub max_derivative_mean: f64,
}

impl MembershipReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_mean <= tol && self.max_derivative_mean <= tol
    }
}

/// Largest base set enumerated exhaustively.
const MAX_SUPPORT: usize = 20;

/// Exact `ν_β` means of `𝔣` and `∂_β 𝔣` over all `2^{|Λ|}` local states,
/// on `points` equally spaced densities in `[0, 1]`.
pub fn check_membership(f: &CylinderFunction, points: usize) -> Result<MembershipReport, GibbsError> {
    let lam = f.support();
    if lam.len() > MAX_SUPPORT {
        return Err(GibbsError::StateSpace { max: MAX_SUPPORT, got: lam.len() });
    }
    let betas: Vec<f64> = (0..points).map(|k| k as f64 / (points.max(2) - 1) as f64).collect();
    let mut max_mean: f64 = 0.0;
    let mut max_der: f64 = 0.0;
    for &beta in &betas {
        let (mut m, mut md) = (0.0, 0.0);
        for s in 0usize..(1 << lam.len()) {
            let occ = |x: Point| {
                let i = lam.binary_search(&x).expect("point in support");
                (s >> i) & 1 == 1
            };
            let k = s.count_ones() as i32;
            let w = beta.powi(k) * (1.0 - beta).powi(lam.len() as i32 - k);
            if w == 0.0 {
                continue;
            }
            m += w * f.value(beta, occ);
            md += w * f.beta_derivative(beta, occ);
        }
        max_mean = max_mean.max(m.abs());
        max_der = max_der.max(md.abs());
    }
    Ok(MembershipReport { betas, max_mean, max_derivative_mean: max_der })
}
