use std::sync::OnceLock;

use hydrolim_core::dual::{
    apply_dual_operator, check_translation_identity, compute_diffusion, current_dual, degree_one_seminorm,
    dense_operator_matrix, dense_solve, dual_inner_product, h1_form, hydrodynamic_matrix, j_matrix, Basis,
    DualFunction, DualOperator, FiniteSubset, ResolventSystem, TruncationParams,
};
use hydrolim_core::kernel::{KernelAnalysis, TransitionKernel};
use hydrolim_core::lattice::Point;
use nalgebra::DMatrix;
use proptest::prelude::*;

const ALL_OPS: [DualOperator; 5] =
    [DualOperator::Ls, DualOperator::Ld, DualOperator::Lplus, DualOperator::Lminus, DualOperator::Lalpha];

fn p(c: &[i32]) -> Point {
    Point::new(c)
}

fn set(points: &[&[i32]]) -> FiniteSubset {
    FiniteSubset::new(&points.iter().map(|c| p(c)).collect::<Vec<_>>()).unwrap()
}

fn test_kernel() -> KernelAnalysis {
    TransitionKernel::new(
        3,
        vec![
            (p(&[1, 0, 0]), 0.5),
            (p(&[-1, 0, 0]), 1.0 / 6.0),
            (p(&[0, 1, 0]), 1.0 / 12.0),
            (p(&[0, -1, 0]), 1.0 / 12.0),
            (p(&[0, 0, 1]), 1.0 / 12.0),
            (p(&[0, 0, -1]), 1.0 / 12.0),
        ],
    )
    .unwrap()
    .analyze()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[test]
fn ls_on_a_singleton_by_hand() {
    let analysis = TransitionKernel::ssep(1).analyze();
    let basis = Basis::new(1, 6, 3, 1 << 20).unwrap();
    let e1 = DualFunction::indicator(0.3, set(&[&[1]]));
    let out = apply_dual_operator(DualOperator::Ls, &e1, &analysis, &basis).unwrap();
    assert_eq!(out.clipped_sets, 0);
    let nonzero: Vec<_> = out.output.sorted_entries().into_iter().filter(|e| e.1 != 0.0).collect();
    assert_eq!(nonzero.len(), 2, "{nonzero:?}");
    assert_eq!(out.output.get(&set(&[&[1]])), -1.0);
    assert_eq!(out.output.get(&set(&[&[2]])), 1.0);
    assert_eq!(h1_form(&e1, &e1, &analysis, &basis).unwrap(), 0.5);
    for which in [DualOperator::Ld, DualOperator::Lplus, DualOperator::Lminus] {
        let o = apply_dual_operator(which, &e1, &analysis, &basis).unwrap();
        assert!(o.output.iter().all(|e| e.1 == 0.0));
    }
}

#[test]
fn half_density_drops_the_antisymmetric_transport() {
    let analysis = test_kernel();
    let basis = Basis::new(3, 2, 2, 1 << 20).unwrap();
    let v = DualFunction::from_entries(0.5, [(set(&[&[1, 0, 0]]), 1.0), (set(&[&[0, 1, 0], &[1, 0, 0]]), -0.5)]);
    let full = apply_dual_operator(DualOperator::Lalpha, &v, &analysis, &basis).unwrap().output;
    let mut parts = DualFunction::zero(0.5);
    let s = apply_dual_operator(DualOperator::Ls, &v, &analysis, &basis).unwrap().output;
    let pl = apply_dual_operator(DualOperator::Lplus, &v, &analysis, &basis).unwrap().output;
    let mi = apply_dual_operator(DualOperator::Lminus, &v, &analysis, &basis).unwrap().output;
    parts = parts.plus(&s, 1.0).plus(&pl, 0.5).plus(&mi, 0.5);
    let diff = full.plus(&parts, -1.0);
    assert!(diff.iter().all(|e| e.1.abs() < 1e-15));
}

#[test]
fn dense_oracle_at_radius_two() {
    let analysis = test_kernel();
    let params = TruncationParams::new(2, 2);
    let sys = ResolventSystem::new(&analysis, &params).unwrap();
    let n = sys.len();
    assert_eq!(n, 3367);
    let alpha = 0.3;
    for which in ALL_OPS {
        let dense = dense_operator_matrix(which, alpha, &analysis, sys.basis()).unwrap();
        let assembled = sys.operator().to_dense(which, alpha);
        assert!(max_abs(&(&dense - &assembled)) <= 1e-12, "{which:?}");
        let x: Vec<f64> = (0..n).map(|k| ((k * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let y = sys.operator().apply_op(which, alpha, &x);
        let z = &dense * nalgebra::DVector::from_column_slice(&x);
        let err = y.iter().zip(z.iter()).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        assert!(err <= 1e-12, "{which:?}: {err}");
    }
    let dense = dense_operator_matrix(DualOperator::Lalpha, alpha, &analysis, sys.basis()).unwrap();
    for lambda in [1e-1, 1e-3] {
        let b = sys.current_vector(0).unwrap();
        let m = DMatrix::<f64>::identity(n, n) * lambda - &dense;
        let exact = dense_solve(m, &b).unwrap();
        let solved = sys.solve_current(alpha, lambda, 0, None).unwrap();
        let err = solved.values.iter().zip(&exact).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        assert!(err <= 1e-8, "lambda {lambda}: {err}");
    }
    // h_{-1} of the current against a dense symmetric solve
    let reg = 1e-6;
    let ls = dense_operator_matrix(DualOperator::Ls, 0.0, &analysis, sys.basis()).unwrap();
    let b = sys.current_vector(0).unwrap();
    let u = dense_solve(DMatrix::<f64>::identity(n, n) * reg - ls, &b).unwrap();
    let exact = sys.inner(&b, &u);
    let got = sys.h_minus_one(&b, reg).unwrap();
    assert!((got - exact).abs() <= 1e-8 * exact.max(1.0), "{got} vs {exact}");
}

#[test]
fn ssep_gives_alpha_sigma() {
    let analysis = TransitionKernel::ssep(3).analyze();
    let alphas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let res = compute_diffusion(&analysis, &alphas, &TruncationParams::new(2, 2)).unwrap();
    for e in &res.entries {
        for i in 0..3 {
            for j in 0..3 {
                assert!((e.d[i][j] - e.alpha * analysis.covariance[(i, j)]).abs() <= 1e-10);
                assert!((e.a[i][j] - 0.5 * analysis.covariance[(i, j)]).abs() <= 1e-10);
                assert!(e.j[i][j].abs() <= 1e-10);
            }
        }
        assert!(e.mobility.iter().all(|m| m.gap == 0.0));
    }
}

#[test]
fn large_lambda_is_dominated_by_the_right_side() {
    let analysis = test_kernel();
    let sys = ResolventSystem::new(&analysis, &TruncationParams::new(2, 2)).unwrap();
    let w = sys.current_vector(0).unwrap();
    let lambda = 1e6;
    let f = sys.solve_current(0.4, lambda, 0, None).unwrap().values;
    let top = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let err = f.iter().zip(&w).fold(0.0f64, |a, (x, y)| a.max((lambda * x - y).abs()));
    assert!(err <= 1e-3 * top);
    assert!(check_translation_identity(&sys.basis().to_function(0.4, &f)) <= 1e-8);
}

#[test]
fn energy_and_residual_along_lambda() {
    let analysis = test_kernel();
    let sys = ResolventSystem::new(&analysis, &TruncationParams::new(2, 2)).unwrap();
    let alpha = 0.5;
    let mut energies = Vec::new();
    let mut highers = Vec::new();
    let mut last = Vec::new();
    for lambda in [1e-1, 1e-2, 1e-3, 1e-4] {
        let f = sys.solve_current(alpha, lambda, 0, None).unwrap().values;
        energies.push(sys.energy(lambda, &f));
        let d = sys.diffusion_from(alpha, &[f.clone(), vec![0.0; sys.len()], vec![0.0; sys.len()]]);
        highers.push(sys.residual(alpha, &d, 0, &f).unwrap().higher);
        last = f;
    }
    assert!(energies.iter().all(|e| *e <= 2.0 * energies[0] && *e >= 0.5 * energies[0]), "{energies:?}");
    assert!(highers.windows(2).all(|w| w[1] < w[0]), "{highers:?}");

    let d = sys.diffusion_from(alpha, &[last.clone(), vec![0.0; sys.len()], vec![0.0; sys.len()]]);
    let base = sys.residual(alpha, &d, 0, &last).unwrap().total.unwrap();
    let mut noisy = last.clone();
    for (k, v) in noisy.iter_mut().enumerate() {
        *v += 1e-3 * (((k * 2654435761) % 1000) as f64 / 1000.0 - 0.5);
    }
    let worse = sys.residual(alpha, &d, 0, &noisy).unwrap().total.unwrap();
    assert!(worse > base, "{worse} <= {base}");
}

#[test]
fn small_closed_forms() {
    let s1 = DMatrix::from_element(1, 1, 2.0);
    assert!((degree_one_seminorm(&[0.3], 0.5, &s1) - 2.0 * 0.09 / (0.25 * 2.0)).abs() < 1e-15);
    assert_eq!(degree_one_seminorm(&[0.0], 0.5, &s1), 0.0);
    let s2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    assert!(degree_one_seminorm(&[0.0, 1.0], 0.5, &s2).is_infinite());
    let d = DMatrix::from_row_slice(2, 2, &[0.4, 0.05, 0.05, 0.3]);
    assert_eq!(hydrodynamic_matrix(0.5, &d, &s2), d);
    assert_eq!(max_abs(&j_matrix(0.0, &d, &s2)), 0.0);
    assert_eq!(max_abs(&j_matrix(1.0, &(&s2 * 1.0), &s2)), 0.0);
    let e = DualFunction::indicator(0.2, set(&[&[1, 0]]));
    assert_eq!(dual_inner_product(&e, &e), 0.5);
}

// property checks on a 2d window

fn window() -> &'static Basis {
    static B: OnceLock<Basis> = OnceLock::new();
    B.get_or_init(|| Basis::new(2, 4, 3, 1 << 22).unwrap())
}

fn wide_window() -> &'static Basis {
    static B: OnceLock<Basis> = OnceLock::new();
    B.get_or_init(|| Basis::new(2, 6, 3, 1 << 22).unwrap())
}

/// Sets whose images under one jump stay inside the window.
fn interior() -> &'static Vec<FiniteSubset> {
    static S: OnceLock<Vec<FiniteSubset>> = OnceLock::new();
    S.get_or_init(|| window().sets().iter().filter(|a| a.span_with_origin() <= 3 && a.len() < 3).cloned().collect())
}

fn kernel_strategy() -> impl Strategy<Value = KernelAnalysis> {
    let offsets = [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, 1]];
    prop::collection::vec(0.05f64..1.0, offsets.len()).prop_map(move |w| {
        let total: f64 = w.iter().sum();
        let entries = offsets.iter().zip(&w).map(|(o, x)| (p(o), x / total)).collect();
        TransitionKernel::new(2, entries).unwrap().analyze()
    })
}

fn function_strategy(alpha: f64) -> impl Strategy<Value = DualFunction> {
    let n = interior().len();
    prop::collection::vec((0..n, -1.0f64..1.0), 1..12).prop_map(move |entries| {
        DualFunction::from_entries(alpha, entries.into_iter().map(|(k, v)| (interior()[k].clone(), v)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ls_is_self_adjoint_and_nonpositive(
        analysis in kernel_strategy(),
        f in function_strategy(0.4),
        g in function_strategy(0.4),
    ) {
        let b = window();
        let lf = apply_dual_operator(DualOperator::Ls, &f, &analysis, b).unwrap();
        let lg = apply_dual_operator(DualOperator::Ls, &g, &analysis, b).unwrap();
        prop_assert_eq!(lf.clipped_sets, 0);
        let lhs = dual_inner_product(&f, &lg.output);
        let rhs = dual_inner_product(&lf.output, &g);
        prop_assert!((lhs - rhs).abs() <= 1e-10);
        prop_assert!(h1_form(&f, &f, &analysis, b).unwrap() >= -1e-10);
        let fg = h1_form(&f, &g, &analysis, b).unwrap();
        let gf = h1_form(&g, &f, &analysis, b).unwrap();
        prop_assert!((fg - gf).abs() <= 1e-10);
    }

    #[test]
    fn degrees_move_as_the_formulas_say(analysis in kernel_strategy(), k in 0usize..400) {
        let b = window();
        let a = &interior()[k % interior().len()];
        let e = DualFunction::indicator(0.3, a.clone());
        let n = a.len();
        for (which, expect) in [
            (DualOperator::Ls, vec![n]),
            (DualOperator::Ld, vec![n]),
            (DualOperator::Lplus, vec![n + 1]),
            (DualOperator::Lminus, vec![n - 1]),
        ] {
            let out = apply_dual_operator(which, &e, &analysis, b).unwrap();
            for (s, v) in out.output.iter() {
                if v != 0.0 {
                    prop_assert!(expect.contains(&s.len()), "{:?}: degree {} from {}", which, s.len(), n);
                    prop_assert!(!s.is_empty());
                }
            }
        }
    }

    #[test]
    fn operators_keep_translation_consistency(analysis in kernel_strategy(), i in 0usize..2, alpha in 0.05f64..0.95) {
        let b = window();
        let w = current_dual(&analysis, i, alpha);
        prop_assert_eq!(check_translation_identity(&w), 0.0);
        for which in ALL_OPS {
            let out = apply_dual_operator(which, &w, &analysis, b).unwrap();
            prop_assert!(out.clipped_mass <= 1e-24);
            prop_assert!(check_translation_identity(&out.output) <= 1e-10, "{:?}", which);
        }
        let wide = wide_window();
        let once = apply_dual_operator(DualOperator::Lalpha, &w, &analysis, wide).unwrap().output;
        let twice = apply_dual_operator(DualOperator::Lalpha, &once, &analysis, wide).unwrap();
        // only the empty set can be hit, by rounding residue
        prop_assert!(twice.clipped_mass <= 1e-24);
        prop_assert!(check_translation_identity(&twice.output) <= 1e-10);
    }
}
