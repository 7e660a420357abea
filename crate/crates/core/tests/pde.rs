use std::f64::consts::TAU;

use hydrolim_core::field::DensityField;
use hydrolim_core::kernel::TransitionKernel;
use hydrolim_core::pde::{
    pde_step, solve_to_time, stable_time_step, ConstantMobility, DiffusionTable, Manufactured, Mobility, PdeError,
};
use nalgebra::DMatrix;

fn mode_amplitude(rho: &DensityField, k: &[f64], mean: f64) -> f64 {
    let n = rho.len() as f64;
    let m = rho.side() as f64;
    let mut acc = 0.0;
    for (x, v) in rho.values().iter().enumerate() {
        let c = rho.coords(x);
        let phase: f64 = (0..rho.dim()).map(|i| k[i] * c[i] as f64 / m).sum();
        acc += (v - mean) * (TAU * phase).cos();
    }
    2.0 * acc / n
}

#[test]
fn fourier_mode_decays_at_heat_rate() {
    let analysis = TransitionKernel::ssep(3).analyze();
    let a = &analysis.covariance * 0.5;
    let mob = ConstantMobility::new(&a);
    let k = [1.0, 2.0, 0.0];
    let eps = 0.1;
    let rho0 = DensityField::from_fn(3, 64, |u| 0.5 + eps * (TAU * (k[0] * u[0] + k[1] * u[1])).cos()).unwrap();
    let t = 0.015;
    let run = solve_to_time(&rho0, &mob, t).unwrap();
    let kak: f64 = (0..3).map(|i| (0..3).map(|j| k[i] * a[(i, j)] * k[j]).sum::<f64>()).sum();
    let expected = eps * (-(TAU * TAU) * kak * t).exp();
    let got = mode_amplitude(&run.field, &k, 0.5);
    let rel = (got - expected).abs() / expected;
    assert!(rel < 5e-3, "amplitude {got} vs {expected} ({rel})");
    assert!(run.mass_drift <= 1e-10);
}

#[test]
fn manufactured_solution_is_second_order() {
    for dim in [2, 3] {
        let case = Manufactured::standard(dim);
        let t = 0.05;
        let coarse = case.error(16, t).unwrap();
        let fine = case.error(32, t).unwrap();
        let ratio = coarse / fine;
        eprintln!("d={dim} ratio {ratio}");
        assert!((3.4..=4.6).contains(&ratio), "d={dim}: {coarse:e} / {fine:e} = {ratio}");
    }
}

fn cosine_profile(dim: usize, m: usize, axis: usize) -> DensityField {
    DensityField::from_fn(dim, m, |u| 0.5 + 0.2 * (TAU * u[axis]).cos() + 0.05 * (2.0 * TAU * u[axis]).sin()).unwrap()
}

fn nonlinear_diagonal() -> DiffusionTable {
    let alphas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let rows: Vec<Vec<Vec<f64>>> = alphas
        .iter()
        .map(|&r| {
            vec![vec![0.33 + 0.2 * r * (1.0 - r), 0.0, 0.0], vec![0.0, 0.083, 0.0], vec![0.0, 0.0, 0.083 + 0.05 * r]]
        })
        .collect();
    DiffusionTable::from_rows(3, alphas, &rows).unwrap()
}

#[test]
fn invariants_over_a_run() {
    let table = nonlinear_diagonal();
    let rho0 = cosine_profile(3, 24, 1);
    let run = solve_to_time(&rho0, &table, 0.02).unwrap();
    assert!(run.mass_drift <= 1e-10, "mass drift {}", run.mass_drift);
    assert!(run.min >= rho0.min() - 1e-12 && run.max <= rho0.max() + 1e-12);
    // drift along e1: profile depends on u_2 only, so every e1-line stays constant
    let f = &run.field;
    let mut var: f64 = 0.0;
    for x in 0..f.len() {
        var = var.max((f.values()[x] - f.values()[f.shifted(x, 0, 1)]).abs());
        var = var.max((f.values()[x] - f.values()[f.shifted(x, 2, 1)]).abs());
    }
    assert!(var <= 1e-12, "variation along constant axes {var}");
    // something did happen along u_2
    assert!((f.max() - f.min()) < (rho0.max() - rho0.min()) - 1e-3);
}

#[test]
fn maximum_principle_stepwise() {
    let table = nonlinear_diagonal();
    let mut rho = DensityField::from_fn(3, 12, |u| {
        0.5 + 0.3 * (TAU * u[0]).sin() * (TAU * u[1]).cos() + 0.1 * (TAU * 2.0 * u[2]).cos()
    })
    .unwrap();
    let (lo, hi) = (rho.min(), rho.max());
    for _ in 0..50 {
        let dt = stable_time_step(&rho, &table).unwrap();
        let next = pde_step(&rho, &table, dt, None).unwrap();
        assert!(next.min() >= rho.min() - 1e-12);
        assert!(next.max() <= rho.max() + 1e-12);
        assert!((next.mass() - rho.mass()).abs() <= 1e-14 * rho.mass());
        rho = next;
    }
    assert!(rho.min() > lo && rho.max() < hi);
}

#[test]
fn out_of_table_density_is_an_error() {
    let alphas = vec![0.3, 0.5, 0.7];
    let rows = vec![vec![vec![0.2]]; 3];
    let table = DiffusionTable::from_rows(1, alphas, &rows).unwrap();
    let rho0 = DensityField::from_fn(1, 32, |u| 0.5 + 0.3 * (TAU * u[0]).cos()).unwrap();
    assert!(matches!(solve_to_time(&rho0, &table, 0.01), Err(PdeError::TableRange { .. })));
    let bad = DensityField::from_fn(1, 8, |u| if u[0] < 0.5 { 1.2 } else { 0.5 }).unwrap();
    let mob = ConstantMobility::new(&DMatrix::from_element(1, 1, 0.2));
    assert!(matches!(solve_to_time(&bad, &mob, 0.01), Err(PdeError::Range { .. })));
    assert_eq!(mob.dim(), 1);
}

#[test]
fn table_psd_margin() {
    let analysis = TransitionKernel::ssep(2).analyze();
    let half = &analysis.covariance * 0.5;
    let table = DiffusionTable::new(2, vec![0.2, 0.8], &[half.clone(), half.clone() * 1.5]).unwrap();
    assert!(table.psd_margin(&analysis.covariance).abs() < 1e-15);
    assert!(table.is_symmetric(0.0));
}
