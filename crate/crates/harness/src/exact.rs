//! Diagnostics on tori small enough to hold the whole law in memory.

use hydrolim_core::dual::DiffusionResult;
use hydrolim_core::gibbs::{relative_entropy, relative_entropy_product};
use hydrolim_core::kernel::KernelAnalysis;
use hydrolim_core::pde::DiffusionTable;
use hydrolim_core::sim::{
    evolve, exact_evolution_small, point_distribution, product_distribution, total_variation, Configuration, Marginals,
    RngStream, TorusGeometry,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::experiment::pde_reference;
use crate::{ExperimentConfig, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    /// Macroscopic time.
    pub time: f64,
    /// `H(μ_t | ν_{ρ(t,·)})` summed over every configuration.
    pub exact: f64,
    /// Closed-form product entropy; present at `t = 0` only, where both
    /// measures are products.
    pub product: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDiagnostics {
    pub dim: usize,
    pub side: usize,
    pub states: usize,
    pub stationary_alpha: f64,
    /// Microscopic time of the stationarity check.
    pub stationary_duration: f64,
    /// `‖ν_α e^{tL} - ν_α‖_TV`.
    pub stationary_tv: f64,
    pub mc_start: Vec<usize>,
    pub mc_duration: f64,
    pub mc_replicas: usize,
    /// TV between the Monte Carlo histogram and the exact law.
    pub mc_tv: f64,
    pub entropy: Vec<EntropyPoint>,
}

pub fn exact_small_experiment(
    cfg: &ExperimentConfig,
    analysis: &KernelAnalysis,
    result: &DiffusionResult,
) -> Result<ExactDiagnostics, HarnessError> {
    let ex = cfg
        .exact
        .as_ref()
        .ok_or_else(|| HarnessError::Config("the exact command needs an \"exact\" section".into()))?;
    let d = analysis.dim();
    let n = ex.side;
    let geom = TorusGeometry::new(d, n)?;
    let kernel = &analysis.kernel;
    let scale = (n * n) as f64;

    let horizon = ex.times.last().copied().unwrap_or(0.0).max(ex.mc_duration / scale).max(1.0 / scale);
    let nu = product_distribution(geom, Marginals::Constant(ex.stationary_alpha))?;
    let nu_t = exact_evolution_small(geom, kernel, &nu, horizon * scale)?;
    let stationary_tv = total_variation(&nu, &nu_t)?;

    let mut start = Configuration::empty(geom);
    for &x in &ex.mc_start {
        start.set(x, true);
    }
    let exact_law = exact_evolution_small(geom, kernel, &point_distribution(&start)?, ex.mc_duration)?;
    let finals: Vec<Result<usize, HarnessError>> = (0..ex.mc_replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(cfg.seed, r as u64).child(u64::MAX).rng();
            let (c, ledger) = evolve(&start, kernel, ex.mc_duration, &mut rng)?;
            if !ledger.continuity_violations(&start, &c).is_empty() {
                return Err(HarnessError::Invariant(format!("continuity violated in replica {r}")));
            }
            Ok(c.state_index())
        })
        .collect();
    let mut hist = vec![0.0; exact_law.len()];
    for f in finals {
        hist[f?] += 1.0;
    }
    for h in &mut hist {
        *h /= ex.mc_replicas as f64;
    }
    let mc_tv = total_variation(&hist, &exact_law)?;

    let table = DiffusionTable::from_diffusion(result)?;
    let reference = ex.reference_profile.as_ref().unwrap_or(&cfg.profile);
    let ref_grid = reference.sample(d, cfg.pde_grid)?;
    let ref_fields = pde_reference(&ref_grid, &table, &ex.times)?;
    let rho0 = cfg.profile.sample(d, n)?;
    let mu0 = product_distribution(geom, Marginals::Field(&rho0))?;
    let mut entropy = Vec::with_capacity(ex.times.len());
    for (k, &t) in ex.times.iter().enumerate() {
        let rho_t = ref_fields[k].resample(n);
        let nu_ref = product_distribution(geom, Marginals::Field(&rho_t))?;
        let mu_t = exact_evolution_small(geom, kernel, &mu0, t * scale)?;
        let exact = relative_entropy(&mu_t, &nu_ref)?;
        let product = (t == 0.0).then(|| relative_entropy_product(rho0.values(), rho_t.values())).transpose()?;
        entropy.push(EntropyPoint { time: t, exact, product });
    }

    Ok(ExactDiagnostics {
        dim: d,
        side: n,
        states: exact_law.len(),
        stationary_alpha: ex.stationary_alpha,
        stationary_duration: horizon * scale,
        stationary_tv,
        mc_start: ex.mc_start.clone(),
        mc_duration: ex.mc_duration,
        mc_replicas: ex.mc_replicas,
        mc_tv,
        entropy,
    })
}
