use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use hydrolim::experiment::{pde_reference, run_ensemble, study_table};
use hydrolim::output::{
    emit_diffusion, emit_exact, emit_report, emit_study, write_field, write_json, write_timing, FieldHeader,
};
use hydrolim::{diffusion_for, exact_small_experiment, run_experiment_with, ExperimentConfig, HarnessError};
use hydrolim_core::pde::DiffusionTable;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "hydrolim", version, about = "Exclusion-process hydrodynamics workbench")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config's).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drift, covariance and symmetric/antisymmetric parts of the kernel.
    Kernel,
    /// Ensemble block densities for every side and time.
    Simulate,
    /// Diffusion matrices D(α), a(α), J(α) on the config's density grid.
    Diffusion,
    /// PDE solution at the observation times.
    Pde,
    /// Ensembles against the PDE for every side.
    Compare,
    /// Distance-versus-N table with monotonicity verdicts.
    Study,
    /// Exact diagnostics on a tiny torus.
    Exact,
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
    timing: Vec<(String, f64)>,
}

impl Ctx {
    fn timed<T>(&mut self, phase: &str, f: impl FnOnce(&Self) -> Result<T, HarnessError>) -> Result<T, HarnessError> {
        let t0 = Instant::now();
        let r = f(self);
        self.timing.push((phase.to_string(), t0.elapsed().as_secs_f64()));
        r
    }
}

#[derive(Serialize)]
struct KernelSummary {
    dim: usize,
    drift: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    symmetric: Vec<(Vec<i32>, f64)>,
    antisymmetric: Vec<(Vec<i32>, f64)>,
    in_proved_regime: bool,
}

#[derive(Serialize)]
struct FieldSummary {
    side: usize,
    time: f64,
    mass: f64,
    min: f64,
    max: f64,
    file: Option<String>,
}

fn file_name(p: Option<PathBuf>) -> Option<String> {
    p.and_then(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let path = cli.config.ok_or_else(|| HarnessError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let mut ctx = Ctx { cfg, out, timing: Vec::new() };
    let analysis = ctx.cfg.validate()?;
    let d = analysis.dim();
    let result = match cli.command {
        Command::Kernel => {
            let pts = |v: &[(hydrolim_core::Point, f64)]| v.iter().map(|(z, w)| (z.coords(d).to_vec(), *w)).collect();
            let summary = KernelSummary {
                dim: d,
                drift: analysis.drift.iter().copied().collect(),
                covariance: (0..d).map(|i| (0..d).map(|j| analysis.covariance[(i, j)]).collect()).collect(),
                symmetric: pts(&analysis.symmetric),
                antisymmetric: pts(&analysis.antisymmetric),
                in_proved_regime: analysis.in_proved_regime(),
            };
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            write_json(&ctx.out.join("kernel.json"), &summary)
        }
        Command::Simulate => {
            let mut summary = Vec::new();
            let mut violations = 0;
            for n in ctx.cfg.sides.clone() {
                let ens = ctx.timed(&format!("ensemble_{n}"), |c| run_ensemble(&c.cfg, &analysis, n))?;
                violations += ens.continuity_violations;
                for (k, f) in ens.mean.iter().enumerate() {
                    let header = FieldHeader {
                        dim: d,
                        side: n,
                        block_radius: ctx.cfg.block_radius,
                        time: ens.times[k],
                        replica: None,
                        seed: ctx.cfg.seed,
                    };
                    let file = write_field(&ctx.out.join(format!("block_n{n}_t{k}")), f, header, ctx.cfg.field_format)?;
                    summary.push(FieldSummary {
                        side: n,
                        time: ens.times[k],
                        mass: f.mass(),
                        min: f.min(),
                        max: f.max(),
                        file: file_name(file),
                    });
                }
            }
            write_json(&ctx.out.join("simulate.json"), &summary)?;
            if violations > 0 {
                return Err(HarnessError::Invariant(format!("{violations} continuity violations")));
            }
            Ok(())
        }
        Command::Diffusion => {
            let res = ctx.timed("diffusion", |c| diffusion_for(&c.cfg, &analysis))?;
            emit_diffusion(&res, &ctx.out)?;
            check_diffusion(&res)
        }
        Command::Pde => {
            let res = ctx.timed("diffusion", |c| diffusion_for(&c.cfg, &analysis))?;
            let table = DiffusionTable::from_diffusion(&res)?;
            let m = ctx.cfg.pde_grid;
            let rho0 = ctx.cfg.profile.sample(d, m)?;
            let fields = ctx.timed("pde", |c| pde_reference(&rho0, &table, &c.cfg.times))?;
            let mut summary = Vec::new();
            for (k, f) in fields.iter().enumerate() {
                let header = FieldHeader {
                    dim: d,
                    side: m,
                    block_radius: 0,
                    time: ctx.cfg.times[k],
                    replica: None,
                    seed: ctx.cfg.seed,
                };
                let file = write_field(&ctx.out.join(format!("pde_t{k}")), f, header, ctx.cfg.field_format)?;
                summary.push(FieldSummary {
                    side: m,
                    time: ctx.cfg.times[k],
                    mass: f.mass(),
                    min: f.min(),
                    max: f.max(),
                    file: file_name(file),
                });
            }
            write_json(&ctx.out.join("pde.json"), &summary)
        }
        Command::Compare | Command::Study => {
            let res = ctx.timed("diffusion", |c| diffusion_for(&c.cfg, &analysis))?;
            let report = ctx.timed("experiment", |c| run_experiment_with(&c.cfg, &analysis, &res))?;
            emit_report(&report, &ctx.out)?;
            if matches!(cli.command, Command::Study) {
                let table = study_table(&ctx.cfg, &report)?;
                emit_study(&table, &ctx.out)?;
                for (t, ok) in ctx.cfg.times.iter().zip(&table.decreasing) {
                    println!("t={t}: L1 strictly decreasing in N: {ok}");
                }
            }
            for r in &report.rows {
                println!("N={} t={} L1={:.5} L2={:.5} Linf={:.5}", r.side, r.time, r.l1, r.l2, r.linf);
            }
            match &report.failure {
                Some(f) => Err(HarnessError::Invariant(f.clone())),
                None => Ok(()),
            }
        }
        Command::Exact => {
            let res = ctx.timed("diffusion", |c| diffusion_for(&c.cfg, &analysis))?;
            let diag = ctx.timed("exact", |c| exact_small_experiment(&c.cfg, &analysis, &res))?;
            emit_exact(&diag, &ctx.out)?;
            println!("stationarity TV {:e}, Monte Carlo TV {:.4}", diag.stationary_tv, diag.mc_tv);
            for p in &diag.entropy {
                println!("t={} H={:e}", p.time, p.exact);
            }
            if diag.stationary_tv > 1e-10 {
                return Err(HarnessError::Invariant(format!("Bernoulli measure drifted by {:e}", diag.stationary_tv)));
            }
            Ok(())
        }
    };
    write_timing(&ctx.out, &ctx.timing)?;
    result
}

fn check_diffusion(res: &hydrolim_core::dual::DiffusionResult) -> Result<(), HarnessError> {
    for e in &res.entries {
        if e.min_eig_d_minus_alpha_sigma < -1e-6 {
            return Err(HarnessError::Invariant(format!(
                "D - ασ has eigenvalue {:e} at α = {}",
                e.min_eig_d_minus_alpha_sigma, e.alpha
            )));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
