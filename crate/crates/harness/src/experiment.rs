//! Ensembles, PDE reference solutions and their comparison.

use hydrolim_core::chi;
use hydrolim_core::dual::{compute_diffusion, DiffusionResult};
use hydrolim_core::field::DensityField;
use hydrolim_core::kernel::KernelAnalysis;
use hydrolim_core::kernel::KernelEntry;
use hydrolim_core::pde::{solve_to_time, DiffusionTable};
use hydrolim_core::sim::{
    block_density, sample_product_measure, Configuration, Evolver, Marginals, RngStream, TorusGeometry,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{ExperimentConfig, HarnessError};

/// `(L¹, L², L∞)` between an empirical block field and a PDE field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldDistances {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Distances with the PDE field evaluated at the block centres `x/N`
/// (multilinear interpolation off its grid).
pub fn compare_fields(empirical: &DensityField, pde: &DensityField) -> Result<FieldDistances, HarnessError> {
    if empirical.dim() != pde.dim() {
        return Err(HarnessError::Invariant(format!("field dimensions {} and {}", empirical.dim(), pde.dim())));
    }
    let n = empirical.side() as f64;
    let d = empirical.dim();
    let (mut l1, mut l2, mut linf) = (0.0f64, 0.0f64, 0.0f64);
    for (x, v) in empirical.values().iter().enumerate() {
        let c = empirical.coords(x);
        let u: Vec<f64> = (0..d).map(|i| c[i] as f64 / n).collect();
        let e = (v - pde.sample(&u)).abs();
        l1 += e;
        l2 += e * e;
        linf = linf.max(e);
    }
    let len = empirical.len() as f64;
    Ok(FieldDistances { l1: l1 / len, l2: (l2 / len).sqrt(), linf })
}

/// The diffusion result named in the config, or a fresh computation.
pub fn diffusion_for(cfg: &ExperimentConfig, analysis: &KernelAnalysis) -> Result<DiffusionResult, HarnessError> {
    match &cfg.table {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            let res: DiffusionResult = serde_json::from_str(&text)?;
            if res.dim != analysis.dim() || res.kernel != analysis.kernel.to_records() {
                return Err(HarnessError::Config(format!("{} was computed for another kernel", path.display())));
            }
            Ok(res)
        }
        None => Ok(compute_diffusion(analysis, &cfg.alphas, &cfg.truncation)?),
    }
}

/// Block fields of one ensemble, averaged over replicas, at every time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub side: usize,
    pub times: Vec<f64>,
    /// `mean[k]` is the average block field at `times[k]`.
    pub mean: Vec<DensityField>,
    /// `per_replica[r][k]`.
    #[serde(skip)]
    pub per_replica: Vec<Vec<DensityField>>,
    pub trajectories: usize,
    /// Sites where a ledger disagreed with the occupation change.
    pub continuity_violations: usize,
}

/// Stream of replica `r` on torus side `n`.
pub fn replica_stream(seed: u64, n: usize, r: usize) -> RngStream {
    RngStream::new(seed, r as u64).child(n as u64)
}

/// Runs `cfg.replicas` trajectories from `ν_{ρ0(·)}` on the side-`n` torus,
/// recording block densities at `cfg.times` (macroscopic).
pub fn run_ensemble(cfg: &ExperimentConfig, analysis: &KernelAnalysis, n: usize) -> Result<Ensemble, HarnessError> {
    let d = analysis.dim();
    let geom = TorusGeometry::new(d, n)?;
    let rho0 = cfg.profile.sample(d, n)?;
    let scale = (n * n) as f64;
    let runs: Vec<Result<(Vec<DensityField>, usize), HarnessError>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let stream = replica_stream(cfg.seed, n, r);
            let mut config = sample_product_measure(geom, Marginals::Field(&rho0), &mut stream.child(0).rng())?;
            let mut rng = stream.child(1).rng();
            let mut ev = Evolver::new(geom, &analysis.kernel)?;
            let mut fields = Vec::with_capacity(cfg.times.len());
            let mut violations = 0;
            let mut now = 0.0;
            for &t in &cfg.times {
                let start: Configuration = config.clone();
                let mut ledger = ev.new_ledger();
                ev.run(&mut config, (t - now) * scale, &mut rng, &mut ledger)?;
                violations += ledger.continuity_violations(&start, &config).len();
                now = t;
                fields.push(block_density(&config, cfg.block_radius)?);
            }
            Ok((fields, violations))
        })
        .collect();
    let mut per_replica = Vec::with_capacity(runs.len());
    let mut violations = 0;
    for run in runs {
        let (f, v) = run?;
        per_replica.push(f);
        violations += v;
    }
    let mut mean = Vec::with_capacity(cfg.times.len());
    for k in 0..cfg.times.len() {
        let mut acc = vec![0.0; geom.sites()];
        for rep in &per_replica {
            for (a, v) in acc.iter_mut().zip(rep[k].values()) {
                *a += v;
            }
        }
        for a in &mut acc {
            *a /= cfg.replicas as f64;
        }
        mean.push(DensityField::new(d, n, acc).expect("torus grid"));
    }
    Ok(Ensemble {
        side: n,
        times: cfg.times.clone(),
        mean,
        per_replica,
        trajectories: cfg.replicas,
        continuity_violations: violations,
    })
}

/// PDE solution from the sampled profile at each of `times`.
pub fn pde_reference(
    profile: &DensityField,
    table: &DiffusionTable,
    times: &[f64],
) -> Result<Vec<DensityField>, HarnessError> {
    let mut out = Vec::with_capacity(times.len());
    let mut cur = profile.clone();
    let mut now = 0.0;
    for &t in times {
        let run = solve_to_time(&cur, table, t - now)?;
        if run.mass_drift > 1e-10 {
            return Err(HarnessError::Invariant(format!("PDE mass drift {:e}", run.mass_drift)));
        }
        cur = run.field;
        now = t;
        out.push(cur.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub side: usize,
    pub time: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    /// `L¹` of each replica's own block field.
    pub replica_l1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub alpha: f64,
    pub a: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub dim: usize,
    pub kernel: Vec<KernelEntry>,
    pub seed: u64,
    pub block_radius: usize,
    pub replicas: usize,
    pub pde_grid: usize,
    pub sides: Vec<usize>,
    pub times: Vec<f64>,
    /// The `a(α)` nodes the PDE used.
    pub diffusion: Vec<TableRow>,
    pub rows: Vec<ComparisonRow>,
    /// Per time: is `L¹` strictly decreasing along `sides`?
    pub decreasing: Vec<bool>,
    pub trajectories: usize,
    pub continuity_violations: usize,
    /// Set when a module error cut the run short; rows hold what finished.
    pub failure: Option<String>,
}

impl ComparisonReport {
    pub fn empty(cfg: &ExperimentConfig, analysis: &KernelAnalysis, result: Option<&DiffusionResult>) -> Self {
        ComparisonReport {
            schema_version: crate::config::SCHEMA_VERSION,
            dim: analysis.dim(),
            kernel: analysis.kernel.to_records(),
            seed: cfg.seed,
            block_radius: cfg.block_radius,
            replicas: cfg.replicas,
            pde_grid: cfg.pde_grid,
            sides: cfg.sides.clone(),
            times: cfg.times.clone(),
            diffusion: result
                .map(|r| r.entries.iter().map(|e| TableRow { alpha: e.alpha, a: e.a.clone() }).collect())
                .unwrap_or_default(),
            rows: Vec::new(),
            decreasing: Vec::new(),
            trajectories: 0,
            continuity_violations: 0,
            failure: None,
        }
    }

    pub fn row(&self, side: usize, time: f64) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.side == side && r.time == time)
    }

    fn finish(&mut self) {
        let mut sides = self.sides.clone();
        sides.sort_unstable();
        self.decreasing = self
            .times
            .iter()
            .map(|&t| {
                let l1: Vec<Option<f64>> = sides.iter().map(|&n| self.row(n, t).map(|r| r.l1)).collect();
                l1.iter().all(Option::is_some) && l1.windows(2).all(|w| w[1].unwrap() < w[0].unwrap())
            })
            .collect();
    }
}

/// Ensembles for every side in `cfg.sides` against the PDE with `a(·)`
/// from `result`. Module errors after setup end the run with
/// [`ComparisonReport::failure`] set instead of discarding finished rows.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    analysis: &KernelAnalysis,
    result: &DiffusionResult,
) -> Result<ComparisonReport, HarnessError> {
    let table = DiffusionTable::from_diffusion(result)?;
    let mut report = ComparisonReport::empty(cfg, analysis, Some(result));
    let d = analysis.dim();
    let pde = match cfg
        .profile
        .sample(d, cfg.pde_grid)
        .map_err(HarnessError::from)
        .and_then(|p| pde_reference(&p, &table, &cfg.times))
    {
        Ok(p) => p,
        Err(e) => {
            report.failure = Some(e.to_string());
            return Ok(report);
        }
    };
    for &n in &cfg.sides {
        let ens = match run_ensemble(cfg, analysis, n) {
            Ok(e) => e,
            Err(e) => {
                report.failure = Some(format!("side {n}: {e}"));
                break;
            }
        };
        report.trajectories += ens.trajectories;
        report.continuity_violations += ens.continuity_violations;
        for (k, &t) in cfg.times.iter().enumerate() {
            let dist = compare_fields(&ens.mean[k], &pde[k])?;
            let replica_l1 = ens
                .per_replica
                .iter()
                .map(|rep| compare_fields(&rep[k], &pde[k]).map(|x| x.l1))
                .collect::<Result<_, _>>()?;
            report.rows.push(ComparisonRow { side: n, time: t, l1: dist.l1, l2: dist.l2, linf: dist.linf, replica_l1 });
        }
    }
    report.finish();
    if report.failure.is_none() && report.continuity_violations > 0 {
        report.failure = Some(format!("{} continuity violations", report.continuity_violations));
    }
    Ok(report)
}

/// Validates `cfg`, obtains `a(·)` and runs every side.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(ComparisonReport, DiffusionResult), HarnessError> {
    let analysis = cfg.validate()?;
    let result = diffusion_for(cfg, &analysis)?;
    Ok((run_experiment_with(cfg, &analysis, &result)?, result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub side: usize,
    pub time: f64,
    pub l1: f64,
    pub l2: f64,
    /// `sqrt(χ(ρ̄) / (|Λ_K| · replicas))`, the typical block fluctuation
    /// of independent sites at the mean density.
    pub noise_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    pub decreasing: Vec<bool>,
    pub failure: Option<String>,
}

/// Distance-versus-`N` table of a comparison report.
pub fn study_table(cfg: &ExperimentConfig, report: &ComparisonReport) -> Result<StudyTable, HarnessError> {
    let d = report.dim;
    let mean = cfg.profile.sample(d, cfg.pde_grid)?.mass();
    let block = ((2 * cfg.block_radius + 1) as f64).powi(d as i32);
    let floor = (chi(mean) / (block * cfg.replicas as f64)).sqrt();
    let mut rows: Vec<StudyRow> = report
        .rows
        .iter()
        .map(|r| StudyRow { side: r.side, time: r.time, l1: r.l1, l2: r.l2, noise_floor: floor })
        .collect();
    rows.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.side.cmp(&b.side)));
    Ok(StudyTable { rows, decreasing: report.decreasing.clone(), failure: report.failure.clone() })
}

pub fn convergence_study(cfg: &ExperimentConfig) -> Result<(StudyTable, ComparisonReport), HarnessError> {
    let (report, _) = run_experiment(cfg)?;
    Ok((study_table(cfg, &report)?, report))
}
