//! Finite-subset representation of the generator.
//!
//! A zero-mean local function is described by its Fourier coefficients in
//! the basis `Ψ_A = Π_{x∈A} (η(x) - α)/√χ(α)`; summing over translations
//! turns these into a function `𝔣` on finite subsets of `Z^d ∖ {0}` and
//! the generator into the operator `𝔏_α` of [`DualOperator::Lalpha`].
//! Everything here works on a truncation of that space (see
//! [`TruncationParams`]).

mod diffusion;
mod function;
mod operators;
mod set;
mod solver;
mod truncation;

use thiserror::Error;

use crate::lattice::Point;

pub use diffusion::{
    compute_diffusion, compute_diffusion_with, degree_one_seminorm, diffusion_matrix, extrapolate_linear, h1_form,
    h_minus_one_norm, hydrodynamic_matrix, j_matrix, mobility_check, residual_triple_norm, resolvent_energy,
    resolvent_solve, AlphaEntry, DiffusionResult, LambdaRow, MobilityCheck, ResidualNorm, ResolventSystem, Solved,
    TruncationMeta,
};
pub use function::{
    check_translation_identity, current_dual, dual_inner_product, lift_dual_to_local, transform_local, DualFunction,
    LocalCoefficients,
};
pub use operators::{
    apply_dual_operator, dense_operator_matrix, AssembledOperator, DualApplication, DualOperator, KernelParts,
};
pub use set::{exchange_set, shift_set, FiniteSubset, MAX_COORD};
pub use solver::{conjugate_gradient, dense_solve, gmres, IterativeSettings, SolveReport};
pub use truncation::{Basis, TruncationParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error("finite subsets of Z^d∖{{0}} cannot contain the origin")]
    ZeroInSet,
    #[error("duplicate point in finite subset")]
    DuplicatePoint,
    #[error("point {0} is outside the representable coordinate range")]
    CoordinateRange(Point),
    #[error("invalid truncation: {0}")]
    Truncation(String),
    #[error("basis of {got} sets exceeds the limit {max}")]
    BasisTooLarge { max: usize, got: usize },
    #[error("input has {count} sets outside the truncation (first: {first:?})")]
    OutsideTruncation { count: usize, first: FiniteSubset },
    #[error("density {0} outside [0, 1]")]
    Density(f64),
    #[error("regularisation must be positive, got {0}")]
    Lambda(f64),
    #[error("direction {dir} out of range for dimension {dim}")]
    Direction { dir: usize, dim: usize },
    #[error("solver stalled after {iterations} iterations at residual {residual:e} (target {target:e})")]
    NoConvergence { iterations: usize, residual: f64, target: f64, history: Vec<f64> },
    #[error("dense system is singular")]
    Singular,
    #[error("mixed densities {0} and {1}")]
    AlphaMismatch(f64, f64),
    #[error("{0}")]
    Input(String),
}
