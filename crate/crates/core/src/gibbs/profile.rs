use serde::{Deserialize, Serialize};

use super::GibbsError;
use crate::field::DensityField;
use crate::lattice::MAX_DIM;

/// Closed-form or tabulated initial density `ρ_0` on `T^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant {
        value: f64,
    },
    /// `base + amplitude·cos(2π·mode·u_axis)`; `axis` is 0-based.
    Cosine {
        base: f64,
        amplitude: f64,
        axis: usize,
        #[serde(default = "one")]
        mode: u32,
    },
    /// Values on a periodic grid, interpolated multilinearly elsewhere.
    Grid {
        dim: usize,
        side: usize,
        values: Vec<f64>,
    },
}

fn one() -> u32 {
    1
}

impl ProfileSpec {
    /// `ρ_0` sampled at the points `x/side` of a `dim`-dimensional grid.
    pub fn sample(&self, dim: usize, side: usize) -> Result<DensityField, GibbsError> {
        match self {
            ProfileSpec::Constant { value } => Ok(DensityField::constant(dim, side, *value)?),
            &ProfileSpec::Cosine { base, amplitude, axis, mode } => {
                if axis >= dim {
                    return Err(GibbsError::Axis { axis, dim });
                }
                let k = std::f64::consts::TAU * mode as f64;
                Ok(DensityField::from_fn(dim, side, |u| base + amplitude * (k * u[axis]).cos())?)
            }
            ProfileSpec::Grid { dim: gd, side: gs, values } => {
                if *gd != dim {
                    return Err(GibbsError::Grid { grid: *gs, side });
                }
                let g = DensityField::new(*gd, *gs, values.clone())?;
                if *gs == side {
                    Ok(g)
                } else {
                    Ok(g.resample(side))
                }
            }
        }
    }

    /// Exact bounds where available, grid bounds otherwise.
    pub fn range(&self) -> (f64, f64) {
        match self {
            ProfileSpec::Constant { value } => (*value, *value),
            ProfileSpec::Cosine { base, amplitude, .. } => (base - amplitude.abs(), base + amplitude.abs()),
            ProfileSpec::Grid { values, .. } => (
                values.iter().copied().fold(f64::INFINITY, f64::min),
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDiagnostics {
    /// `max_x |q·∇ρ_0(x)|` with centred differences.
    pub max_drift_derivative: f64,
    /// `min_x min(ρ_0, 1-ρ_0)`.
    pub min_margin: f64,
    pub bounded: bool,
    pub drift_constant: bool,
}

impl ProfileDiagnostics {
    pub fn passed(&self) -> bool {
        self.bounded && self.drift_constant
    }
}

pub fn validate_profile(
    field: &DensityField,
    drift: &[f64],
    delta0: f64,
    tol: f64,
) -> Result<ProfileDiagnostics, GibbsError> {
    let d = field.dim();
    if drift.len() != d {
        return Err(GibbsError::DriftArity { got: drift.len(), dim: d });
    }
    let inv2h = 0.5 * field.side() as f64;
    let v = field.values();
    let mut max_dd: f64 = 0.0;
    let mut margin = f64::INFINITY;
    for x in 0..field.len() {
        let mut dd = 0.0;
        for (i, &qi) in drift.iter().enumerate() {
            if qi != 0.0 {
                dd += qi * (v[field.shifted(x, i, 1)] - v[field.shifted(x, i, -1)]) * inv2h;
            }
        }
        max_dd = max_dd.max(dd.abs());
        margin = margin.min(v[x].min(1.0 - v[x]));
    }
    Ok(ProfileDiagnostics {
        max_drift_derivative: max_dd,
        min_margin: margin,
        bounded: margin >= delta0,
        drift_constant: max_dd <= tol,
    })
}

/// Shortest integer vector parallel to `q`, if one with entries ≤ 64 exists.
fn primitive_direction(q: &[f64]) -> Option<[i64; MAX_DIM]> {
    let qmax = q.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for k in 1..=64i64 {
        let mut v = [0i64; MAX_DIM];
        let mut ok = true;
        for (i, &qi) in q.iter().enumerate() {
            let c = qi / qmax * k as f64;
            let r = c.round();
            if (c - r).abs() > 1e-9 * k as f64 {
                ok = false;
                break;
            }
            v[i] = r as i64;
        }
        if ok {
            let g = v.iter().fold(0i64, |g, &x| gcd(g, x.abs()));
            for x in &mut v {
                *x /= g;
            }
            return Some(v);
        }
    }
    None
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Long-time Euler profile: the average of `ρ_0` along the drift lines.
///
/// For a rational drift direction `v` (primitive integer vector) the line
/// `u + r v` closes after `r = 1`, and on a grid of side `m` it visits the
/// points `x + k v`, `k = 0..m-1`; the projection is their mean. For
/// `q = e_1` this is exactly `∫_0^1 ρ_0(u + r e_1) dr` evaluated by the
/// trapezoid rule on the grid. Zero drift returns the input.
pub fn project_along_drift(field: &DensityField, drift: &[f64]) -> Result<DensityField, GibbsError> {
    let d = field.dim();
    if drift.len() != d {
        return Err(GibbsError::DriftArity { got: drift.len(), dim: d });
    }
    if drift.iter().all(|&x| x.abs() < 1e-14) {
        return Ok(field.clone());
    }
    let v = primitive_direction(drift).ok_or_else(|| GibbsError::Irrational(drift.to_vec()))?;
    let m = field.side();
    let src = field.values();
    let mut out = vec![0.0; src.len()];
    for (x, o) in out.iter_mut().enumerate() {
        let mut y = x;
        let mut s = 0.0;
        for _ in 0..m {
            s += src[y];
            for i in 0..d {
                if v[i] != 0 {
                    y = field.shifted(y, i, v[i] as isize);
                }
            }
        }
        *o = s / m as f64;
    }
    Ok(DensityField::new(d, m, out)?)
}
