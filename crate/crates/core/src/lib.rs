//! Workbench for the asymmetric exclusion process under diffusive scaling.
//!
//! The crate is split along the physical pipeline:
//!
//! * [`kernel`]: the jump law `p(·)` and its static moments.
//! * [`sim`]: exact event-driven simulation on the discrete torus, local
//!   observables and a generator-matrix oracle for tiny tori.
//! * [`gibbs`]: density profiles, the chemical-potential transform, local
//!   Gibbs log-densities and product-measure relative entropies.
//! * [`dual`]: the finite-subset representation of the generator, resolvent
//!   solves and the diffusion matrix `D(α)`.
//! * [`pde`]: a conservative explicit solver for
//!   `∂_t ρ = Σ ∂_i (a_ij(ρ) ∂_j ρ)` on the continuum torus.

pub mod dual;
pub mod field;
pub mod gibbs;
pub mod kernel;
pub mod lattice;
pub mod pde;
pub mod sim;

pub use field::DensityField;
pub use kernel::{KernelAnalysis, KernelError, TransitionKernel};
pub use lattice::{Point, MAX_DIM};

/// `χ(α) = α(1-α)`, the variance of a Bernoulli(α) occupation variable.
#[inline]
pub fn chi(alpha: f64) -> f64 {
    alpha * (1.0 - alpha)
}
