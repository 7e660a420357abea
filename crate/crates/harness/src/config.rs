//! Experiment configuration: JSON with a schema version, unknown keys rejected.

use std::path::{Path, PathBuf};

use hydrolim_core::dual::TruncationParams;
use hydrolim_core::gibbs::{validate_profile, ProfileSpec};
use hydrolim_core::kernel::{KernelAnalysis, KernelEntry, TransitionKernel};
use hydrolim_core::sim::MAX_EXACT_SITES;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Ssep { dim: usize },
    Tasep { dim: usize },
    Entries { dim: usize, entries: Vec<KernelEntry> },
}

impl KernelSpec {
    pub fn build(&self) -> Result<TransitionKernel, HarnessError> {
        Ok(match self {
            KernelSpec::Ssep { dim } => {
                check_dim(*dim)?;
                TransitionKernel::ssep(*dim)
            }
            KernelSpec::Tasep { dim } => {
                check_dim(*dim)?;
                TransitionKernel::tasep(*dim)
            }
            KernelSpec::Entries { dim, entries } => TransitionKernel::from_records(*dim, entries)?,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            KernelSpec::Ssep { dim } | KernelSpec::Tasep { dim } | KernelSpec::Entries { dim, .. } => *dim,
        }
    }
}

fn check_dim(d: usize) -> Result<(), HarnessError> {
    if !(1..=3).contains(&d) {
        return Err(HarnessError::Config(format!("dimension {d} not in 1..=3")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldFormat {
    #[default]
    Csv,
    Binary,
    None,
}

/// Settings of the tiny-torus exact diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    pub side: usize,
    /// Macroscopic times at which the exact entropy is recorded.
    pub times: Vec<f64>,
    /// Initial profile of the PDE reference; the process starts from
    /// `profile`. Defaults to `profile`.
    #[serde(default)]
    pub reference_profile: Option<ProfileSpec>,
    /// Density of the stationarity check.
    #[serde(default = "default_stationary_alpha")]
    pub stationary_alpha: f64,
    /// Occupied sites (linear indices) of the Monte Carlo start.
    pub mc_start: Vec<usize>,
    /// Microscopic duration of the Monte Carlo comparison.
    pub mc_duration: f64,
    pub mc_replicas: usize,
}

fn default_stationary_alpha() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kernel: KernelSpec,
    /// Torus sides `N`.
    pub sides: Vec<usize>,
    pub profile: ProfileSpec,
    /// Macroscopic observation times, increasing.
    pub times: Vec<f64>,
    /// Block radius `K`.
    pub block_radius: usize,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default = "default_truncation")]
    pub truncation: TruncationParams,
    /// Density grid of the `a(α)` table.
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    /// Precomputed diffusion result to use instead of solving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default = "default_grid")]
    pub pde_grid: usize,
    /// Required distance of `ρ_0` from 0 and 1.
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    /// Tolerance on `max |q·∇ρ_0|`.
    #[serde(default = "default_drift_tolerance")]
    pub drift_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub field_format: FieldFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactConfig>,
}

fn default_truncation() -> TruncationParams {
    TruncationParams::new(3, 3)
}

fn default_alphas() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

fn default_grid() -> usize {
    32
}

fn default_delta0() -> f64 {
    0.05
}

fn default_drift_tolerance() -> f64 {
    1e-10
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// Checks everything that does not need a run. Returns the kernel analysis.
    pub fn validate(&self) -> Result<KernelAnalysis, HarnessError> {
        fn bad<T>(m: String) -> Result<T, HarnessError> {
            Err(HarnessError::Config(m))
        }
        let analysis = self.kernel.build()?.analyze();
        let d = analysis.dim();
        if self.sides.is_empty() {
            return bad("sides is empty".into());
        }
        for &n in &self.sides {
            if n < 2 || 2 * self.block_radius + 1 > n {
                return bad(format!("side {n} cannot hold blocks of radius {}", self.block_radius));
            }
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad(format!("times must be finite and nonnegative: {:?}", self.times));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("times must increase".into());
        }
        if self.replicas == 0 {
            return bad("replicas must be positive".into());
        }
        if self.pde_grid < 4 {
            return bad(format!("pde_grid {} too small", self.pde_grid));
        }
        if self.alphas.len() < 2 || self.alphas.windows(2).any(|w| w[1] <= w[0]) {
            return bad("alphas must have at least two increasing entries".into());
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return bad("alphas must lie in (0, 1)".into());
        }
        if !(self.delta0 > 0.0 && self.delta0 < 0.5) {
            return bad(format!("delta0 {} not in (0, 1/2)", self.delta0));
        }
        self.truncation.validate(&analysis).map_err(|e| HarnessError::Config(e.to_string()))?;
        let drift: Vec<f64> = analysis.drift.iter().copied().collect();
        let (alo, ahi) = (self.alphas[0], *self.alphas.last().unwrap());
        let check = |profile: &ProfileSpec, what: &str| -> Result<(), HarnessError> {
            let (lo, hi) = profile.range();
            if lo < alo || hi > ahi {
                return bad(format!("{what} range [{lo}, {hi}] leaves the table range [{alo}, {ahi}]"));
            }
            let mut grids = self.sides.clone();
            grids.push(self.pde_grid);
            for m in grids {
                let field = profile.sample(d, m).map_err(|e| HarnessError::Config(e.to_string()))?;
                let diag = validate_profile(&field, &drift, self.delta0, self.drift_tolerance)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                if !diag.bounded {
                    return bad(format!("{what} comes within {} of 0 or 1 (delta0 {})", diag.min_margin, self.delta0));
                }
                if !diag.drift_constant {
                    return bad(format!(
                        "{what} is not constant along the drift: max |q·∇ρ0| = {:e} on the {m}-grid",
                        diag.max_drift_derivative
                    ));
                }
            }
            Ok(())
        };
        check(&self.profile, "profile")?;
        if let Some(ex) = &self.exact {
            let sites = ex.side.pow(d as u32);
            if ex.side < 2 || sites > MAX_EXACT_SITES {
                return bad(format!("exact torus of {sites} sites (limit {MAX_EXACT_SITES})"));
            }
            if ex.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || ex.times.windows(2).any(|w| w[1] <= w[0]) {
                return bad("exact.times must be increasing and nonnegative".into());
            }
            if let Some(r) = &ex.reference_profile {
                check(r, "reference_profile")?;
            }
            if !(ex.stationary_alpha > 0.0 && ex.stationary_alpha < 1.0) {
                return bad("exact.stationary_alpha must lie in (0, 1)".into());
            }
            if ex.mc_start.iter().any(|&x| x >= sites) {
                return bad("exact.mc_start site out of range".into());
            }
            if !(ex.mc_duration >= 0.0 && ex.mc_duration.is_finite()) || ex.mc_replicas == 0 {
                return bad("exact Monte Carlo needs a finite duration and replicas".into());
            }
        }
        Ok(analysis)
    }
}
