//! Exclusion process on the discrete torus `T_N^d`.
//!
//! Particles jump at rate one: a uniformly chosen particle at `x` draws
//! `y ~ p` and moves to `x + y` if that site is empty. Blocked attempts are
//! kept as self-loops so the clock always runs at the particle count.

mod dynamics;
mod exact;
mod observables;
mod rng;
mod torus;

pub use dynamics::{evolve, evolve_diffusive, CurrentLedger, Evolver, MAX_EXPECTED_EVENTS};
pub use exact::{
    exact_evolution_small, point_distribution, product_distribution, total_variation, Generator, MAX_EXACT_SITES,
};
pub use observables::{block_density, current_observables, empirical_pairing, CurrentObservables};
pub use rng::RngStream;
pub use torus::{sample_product_measure, swap, Configuration, Marginals, TorusGeometry};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("torus side must be at least 2, got {0}")]
    Side(usize),
    #[error("dimension {0} not in 1..=3")]
    Dimension(usize),
    #[error("torus with {0} sites is too large to index")]
    TooLarge(usize),
    #[error("kernel dimension {kernel} does not match torus dimension {torus}")]
    DimensionMismatch { kernel: usize, torus: usize },
    #[error("marginal {0} outside [0, 1]")]
    Marginal(f64),
    #[error("profile grid ({grid_dim}-d, side {grid_side}) incompatible with torus ({dim}-d, side {side})")]
    ProfileGrid { grid_dim: usize, grid_side: usize, dim: usize, side: usize },
    #[error("negative or non-finite duration {0}")]
    Duration(f64),
    #[error("expected event count {0:.3e} exceeds the budget")]
    EventBudget(f64),
    #[error("block radius {radius} needs 2K+1 <= N = {side}")]
    BlockRadius { radius: usize, side: usize },
    #[error("exact oracle limited to {max} sites, got {got}")]
    StateSpace { max: usize, got: usize },
    #[error("distribution has {got} entries, expected {expected}")]
    DistributionLength { expected: usize, got: usize },
}
