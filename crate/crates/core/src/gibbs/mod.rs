//! Density profiles, local Gibbs states and relative entropies.
//!
//! A local Gibbs state is written through its density with respect to a
//! reference Bernoulli measure `ν_α`:
//! `ψ(η) ∝ exp{Σ_x λ(x/N) η(x)}` with `λ = log[ρ(1-α) / (α(1-ρ))]`.

mod cylinder;
mod entropy;
mod local;
mod profile;

pub use cylinder::{check_membership, CylinderFunction, MembershipReport};
pub use entropy::{
    bernoulli_divergence, gibbs_distribution, log_partition_exhaustive, log_partition_local, relative_entropy,
    relative_entropy_product, variational_entropy_value,
};
pub use local::{
    lambda_field, lambda_gradient, lambda_inverse, lambda_transform, log_corrected_gibbs, log_local_gibbs, Correction,
    GibbsSpec,
};
pub use profile::{project_along_drift, validate_profile, ProfileDiagnostics, ProfileSpec};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GibbsError {
    #[error("density {0} must lie strictly inside (0, 1)")]
    Density(f64),
    #[error("grid of side {grid} does not match torus side {side} (or dimensions differ)")]
    Grid { grid: usize, side: usize },
    #[error("drift {0:?} is not parallel to a short integer vector")]
    Irrational(Vec<f64>),
    #[error("drift has {got} components, field is {dim}-dimensional")]
    DriftArity { got: usize, dim: usize },
    #[error("profile axis {axis} outside dimension {dim}")]
    Axis { axis: usize, dim: usize },
    #[error("cylinder function not in the centred class: {0}")]
    Membership(String),
    #[error("correction scales violate ℓ + s_f + A <= M: ℓ={ell}, s_f={support}, A={padding}, M={block}")]
    Scales { ell: usize, support: usize, padding: usize, block: usize },
    #[error("need one correction function per direction: {got} for dimension {dim}")]
    Directions { got: usize, dim: usize },
    #[error("block radius {radius} needs 2M+1 <= N = {side}")]
    BlockRadius { radius: usize, side: usize },
    #[error("exhaustive sums limited to {max} sites, got {got}")]
    StateSpace { max: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
}
