use hydrolim_core::kernel::TransitionKernel;
use hydrolim_core::lattice::Point;
use hydrolim_core::sim::{
    evolve, evolve_diffusive, exact_evolution_small, point_distribution, product_distribution, sample_product_measure,
    total_variation, Configuration, Evolver, Marginals, RngStream, TorusGeometry,
};

fn kernel2() -> TransitionKernel {
    TransitionKernel::new(
        2,
        vec![
            (Point::new(&[1, 0]), 0.45),
            (Point::new(&[-1, 0]), 0.15),
            (Point::new(&[0, 1]), 0.2),
            (Point::new(&[0, -1]), 0.1),
            (Point::new(&[1, 1]), 0.1),
        ],
    )
    .unwrap()
}

#[test]
fn single_tasep_particle_drifts_at_unit_speed() {
    let g = TorusGeometry::new(3, 8).unwrap();
    let kernel = TransitionKernel::tasep(3);
    let mut start = Configuration::empty(g);
    start.set(0, true);
    let mut ev = Evolver::new(g, &kernel).unwrap();
    let duration = 5.0;
    let reps = 10_000;
    let mut sum = 0.0;
    let mut sq = 0.0;
    for r in 0..reps {
        let mut c = start.clone();
        let mut ledger = ev.new_ledger();
        ev.run(&mut c, duration, &mut RngStream::new(11, r).rng(), &mut ledger).unwrap();
        let x = ledger.displacement()[0] as f64;
        assert_eq!(ledger.displacement()[1], 0);
        sum += x;
        sq += x * x;
    }
    let mean = sum / reps as f64;
    let var = sq / reps as f64 - mean * mean;
    let se = (var / reps as f64).sqrt();
    assert!((mean - duration).abs() < 4.0 * se, "mean {mean}, se {se}");
}

#[test]
fn continuity_holds_on_every_trajectory() {
    let g = TorusGeometry::new(2, 10).unwrap();
    let kernel = kernel2();
    for r in 0..40 {
        let stream = RngStream::new(5, r);
        let c0 =
            sample_product_measure(g, Marginals::Constant(0.1 + 0.02 * r as f64), &mut stream.child(0).rng()).unwrap();
        let (c1, ledger) = evolve(&c0, &kernel, 3.0, &mut stream.child(1).rng()).unwrap();
        assert!(ledger.continuity_violations(&c0, &c1).is_empty());
        assert_eq!(c0.particle_count(), c1.particle_count());
        assert!(ledger.accepted <= ledger.attempts);
    }
}

#[test]
fn bernoulli_density_is_stationary_in_the_mean() {
    let g = TorusGeometry::new(2, 16).unwrap();
    let kernel = kernel2();
    let alpha = 0.3;
    let reps = 200;
    let mut densities = Vec::new();
    for r in 0..reps {
        let stream = RngStream::new(21, r);
        let c0 = sample_product_measure(g, Marginals::Constant(alpha), &mut stream.child(0).rng()).unwrap();
        let (c1, _) = evolve(&c0, &kernel, 4.0, &mut stream.child(1).rng()).unwrap();
        // a local observable, not just the conserved total
        let mut half = 0.0;
        for x in 0..g.sites() {
            if g.coords(x)[0] < 8 {
                half += c1.value(x);
            }
        }
        densities.push(half / (g.sites() / 2) as f64);
    }
    let mean = densities.iter().sum::<f64>() / reps as f64;
    let se = (alpha * (1.0 - alpha) / (reps as f64 * 128.0)).sqrt();
    assert!((mean - alpha).abs() < 4.0 * se, "{mean}");
}

fn reflect(g: TorusGeometry, mu: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mu.len()];
    for (s, &p) in mu.iter().enumerate() {
        let c = Configuration::from_state_index(g, s);
        let mut r = Configuration::empty(g);
        for x in c.occupied() {
            r.set(g.index_of(-g.point(x)), true);
        }
        out[r.state_index()] = p;
    }
    out
}

#[test]
fn reversed_kernel_is_the_mirror_image() {
    let g = TorusGeometry::new(2, 3).unwrap();
    let kernel = kernel2();
    let negated = TransitionKernel::new(2, kernel.entries().iter().map(|&(z, w)| (-z, w)).collect()).unwrap();
    let mut c = Configuration::empty(g);
    for x in [0, 1, 4, 8] {
        c.set(x, true);
    }
    let mu = point_distribution(&c).unwrap();
    let t = 0.8;
    let under_adjoint = exact_evolution_small(g, &kernel.adjoint(), &mu, t).unwrap();
    let under_negated = exact_evolution_small(g, &negated, &mu, t).unwrap();
    assert!(total_variation(&under_adjoint, &under_negated).unwrap() <= 1e-10);
    let mirrored = reflect(g, &exact_evolution_small(g, &kernel, &reflect(g, &mu), t).unwrap());
    assert!(total_variation(&under_adjoint, &mirrored).unwrap() <= 1e-10);
    // and the forward law really is different
    let forward = exact_evolution_small(g, &kernel, &mu, t).unwrap();
    assert!(total_variation(&forward, &under_adjoint).unwrap() > 1e-3);
}

#[test]
fn exact_law_keeps_bernoulli_and_mass() {
    let g = TorusGeometry::new(2, 3).unwrap();
    let nu = product_distribution(g, Marginals::Constant(0.35)).unwrap();
    let out = exact_evolution_small(g, &kernel2(), &nu, 1.5).unwrap();
    assert!(total_variation(&out, &nu).unwrap() <= 1e-10);
    assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    assert!(out.iter().all(|&p| p >= -1e-15));
}

#[test]
fn fixed_seed_reproduces_trajectories() {
    let g = TorusGeometry::new(3, 6).unwrap();
    let kernel = TransitionKernel::tasep(3);
    let stream = RngStream::new(99, 7);
    let c0 = sample_product_measure(g, Marginals::Constant(0.4), &mut stream.child(0).rng()).unwrap();
    let a = evolve(&c0, &kernel, 2.0, &mut stream.child(1).rng()).unwrap();
    let b = evolve(&c0, &kernel, 2.0, &mut stream.child(1).rng()).unwrap();
    assert_eq!(a, b);
    let d = evolve_diffusive(&c0, &kernel, 2.0 / 36.0, &mut stream.child(1).rng()).unwrap();
    let e = evolve(&c0, &kernel, 2.0 / 36.0 * 36.0, &mut stream.child(1).rng()).unwrap();
    assert_eq!(d, e);
    let other = evolve(&c0, &kernel, 2.0, &mut RngStream::new(99, 8).child(1).rng()).unwrap();
    assert_ne!(a.0, other.0);
}
