//! The dual operator against the generator itself: a random local function
//! is expanded in the `Ψ_C` basis, `L f` is computed by summing over every
//! configuration of a window, and its coefficients are folded over
//! translations. The fold of `L f` must equal `𝔏_α` applied to the fold
//! of `f`.

use std::collections::{BTreeMap, BTreeSet};

use hydrolim_core::dual::{apply_dual_operator, Basis, DualFunction, DualOperator, FiniteSubset};
use hydrolim_core::{Point, TransitionKernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Local = BTreeMap<Vec<Point>, f64>;

fn fold(alpha: f64, coef: &Local) -> DualFunction {
    let mut acc: BTreeMap<Vec<Point>, f64> = BTreeMap::new();
    for (c, &v) in coef {
        for &x in c {
            let mut a: Vec<Point> = c.iter().filter(|&&y| y != x).map(|&y| y - x).collect();
            a.sort();
            *acc.entry(a).or_insert(0.0) += v;
        }
    }
    let empty = acc.remove(&Vec::new()).unwrap_or(0.0);
    assert!(empty.abs() < 1e-12, "fold at the empty set is {empty}");
    DualFunction::from_entries(alpha, acc.into_iter().map(|(a, v)| (FiniteSubset::new(&a).unwrap(), v)))
}

fn generator_coefficients(kernel: &TransitionKernel, alpha: f64, coef: &Local) -> Local {
    let mut sites: BTreeSet<Point> = BTreeSet::new();
    for c in coef.keys() {
        sites.extend(c.iter().copied());
    }
    let mut window = sites.clone();
    for &x in &sites {
        for &(z, _) in kernel.entries() {
            window.insert(x + z);
            window.insert(x - z);
        }
    }
    let window: Vec<Point> = window.into_iter().collect();
    let n = window.len();
    let pos = |p: Point| window.iter().position(|&q| q == p);
    let chi = alpha * (1.0 - alpha);
    let omega = |s: usize, i: usize| (((s >> i) & 1) as f64 - alpha) / chi.sqrt();
    let f = |s: usize| -> f64 {
        coef.iter().map(|(c, v)| v * c.iter().map(|&x| omega(s, pos(x).unwrap())).product::<f64>()).sum()
    };
    let states = 1usize << n;
    let fv: Vec<f64> = (0..states).map(f).collect();
    let mut lf = vec![0.0; states];
    for (s, out) in lf.iter_mut().enumerate() {
        for (i, &x) in window.iter().enumerate() {
            if (s >> i) & 1 == 0 {
                continue;
            }
            for &(y, p) in kernel.entries() {
                let Some(j) = pos(x + y) else { continue };
                if (s >> j) & 1 == 1 {
                    continue;
                }
                let t = s ^ (1 << i) ^ (1 << j);
                *out += p * (fv[t] - fv[s]);
            }
        }
    }
    // c_C = E[L f · Ψ_C], one site at a time: bit i of the index switches
    // from the state η(x_i) to membership x_i ∈ C
    let (w0, w1) = (1.0 - alpha, alpha);
    let (o0, o1) = (-alpha / chi.sqrt(), (1.0 - alpha) / chi.sqrt());
    let mut g = lf;
    for i in 0..n {
        for s in 0..states {
            if (s >> i) & 1 == 0 {
                let (a, b) = (g[s], g[s | 1 << i]);
                g[s] = w0 * a + w1 * b;
                g[s | 1 << i] = w0 * o0 * a + w1 * o1 * b;
            }
        }
    }
    let mut out = Local::new();
    for (mask, &c) in g.iter().enumerate().skip(1) {
        if c.abs() > 1e-14 {
            let set: Vec<Point> = (0..n).filter(|i| (mask >> i) & 1 == 1).map(|i| window[i]).collect();
            out.insert(set, c);
        }
    }
    out
}

fn random_local(sites: &[Point], rng: &mut ChaCha8Rng) -> Local {
    let mut coef = Local::new();
    for mask in 1..(1usize << sites.len()) {
        let mut c: Vec<Point> = (0..sites.len()).filter(|i| (mask >> i) & 1 == 1).map(|i| sites[i]).collect();
        c.sort();
        coef.insert(c, rng.gen_range(-1.0..1.0));
    }
    // zero fold at the empty set: degree-one coefficients sum to zero
    let total: f64 = sites.iter().map(|&x| coef[&vec![x]]).sum();
    *coef.get_mut(&vec![sites[0]]).unwrap() -= total;
    coef
}

fn compare(kernel: TransitionKernel, alpha: f64, sites: &[Point], radius: i32, degree: usize, seed: u64) {
    let an = kernel.analyze();
    let basis = Basis::new(kernel.dim(), radius, degree, 2_000_000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef = random_local(sites, &mut rng);
    let lhs = fold(alpha, &generator_coefficients(&kernel, alpha, &coef));
    let app = apply_dual_operator(DualOperator::Lalpha, &fold(alpha, &coef), &an, &basis).unwrap();
    assert!(app.clipped_mass < 1e-24, "window too small for the test");
    let mut keys: BTreeSet<FiniteSubset> = lhs.iter().map(|e| e.0.clone()).collect();
    keys.extend(app.output.iter().map(|e| e.0.clone()));
    assert!(keys.len() > 10);
    let mut worst: f64 = 0.0;
    for a in &keys {
        worst = worst.max((lhs.get(a) - app.output.get(a)).abs());
    }
    assert!(worst < 1e-10, "max deviation {worst}");
}

#[test]
fn one_dimensional_long_range() {
    let k =
        TransitionKernel::new(1, vec![(Point::new(&[1]), 0.6), (Point::new(&[-1]), 0.25), (Point::new(&[2]), 0.15)])
            .unwrap();
    let sites = [Point::new(&[0]), Point::new(&[1]), Point::new(&[2]), Point::new(&[-1])];
    compare(k, 0.3, &sites, 8, 6, 1);
}

#[test]
fn two_dimensional_with_diagonal_jump() {
    let k = TransitionKernel::new(
        2,
        vec![
            (Point::new(&[1, 0]), 0.5),
            (Point::new(&[-1, 0]), 0.2),
            (Point::new(&[0, 1]), 0.2),
            (Point::new(&[1, 1]), 0.1),
        ],
    )
    .unwrap();
    let sites = [Point::new(&[0, 0]), Point::new(&[1, 0]), Point::new(&[0, 1])];
    compare(k, 0.65, &sites, 4, 4, 2);
}

#[test]
fn three_dimensional_test_kernel() {
    let e = Point::unit;
    let k = TransitionKernel::new(
        3,
        vec![
            (e(0), 0.5),
            (-e(0), 1.0 / 6.0),
            (e(1), 1.0 / 12.0),
            (-e(1), 1.0 / 12.0),
            (e(2), 1.0 / 12.0),
            (-e(2), 1.0 / 12.0),
        ],
    )
    .unwrap();
    let sites = [Point::ZERO, e(0), e(1)];
    compare(k, 0.2, &sites, 3, 3, 3);
}
