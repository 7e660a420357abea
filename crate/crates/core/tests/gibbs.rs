use hydrolim_core::gibbs::{log_corrected_gibbs, log_local_gibbs, Correction, CylinderFunction, GibbsSpec};
use hydrolim_core::sim::{sample_product_measure, Configuration, Marginals, RngStream, TorusGeometry};
use hydrolim_core::{DensityField, Point};
use proptest::prelude::*;

fn ring_lambda() -> DensityField {
    DensityField::from_fn(1, 8, |u| {
        0.3 * (std::f64::consts::TAU * u[0]).cos() + 0.1 * (2.0 * std::f64::consts::TAU * u[0]).sin()
    })
    .unwrap()
}

#[test]
fn corrected_gibbs_hand_value() {
    // N=8, M=3, ℓ=1, s_f=1 so A=1 and ℓ'=0: the average over Λ_0 is a
    // single term. Value worked out separately: base 0.3, correction 3/35.
    let g = TorusGeometry::new(1, 8).unwrap();
    let eta = Configuration::from_occupancy(g, &[true, true, false, true, false, false, true, false]);
    let corr = Correction::new(vec![CylinderFunction::pair(1, 0)], 3, 1).unwrap();
    assert_eq!(corr.inner(), 0);
    let spec = GibbsSpec { lambda: ring_lambda(), correction: Some(corr) };
    let v = log_corrected_gibbs(&eta, &spec).unwrap();
    assert!((log_local_gibbs(&eta, &spec.lambda).unwrap() - 0.3).abs() < 1e-14);
    assert!((v - 0.214_285_714_285_714_2).abs() < 1e-14, "{v}");
}

#[test]
fn corrected_reduces_to_local() {
    let g = TorusGeometry::new(2, 7).unwrap();
    let eta = sample_product_measure(g, Marginals::Constant(0.5), &mut RngStream::new(1, 0).rng()).unwrap();
    let lam = DensityField::from_fn(2, 7, |u| (6.0 * u[0]).sin() + u[1]).unwrap();
    let base = log_local_gibbs(&eta, &lam).unwrap();
    let zero = Correction::new(vec![CylinderFunction::zero(2), CylinderFunction::zero(2)], 3, 1).unwrap();
    let spec = GibbsSpec { lambda: lam.clone(), correction: Some(zero) };
    assert_eq!(log_corrected_gibbs(&eta, &spec).unwrap(), base);

    let flat = DensityField::constant(2, 7, 0.4).unwrap();
    let c = Correction::new(vec![CylinderFunction::pair(2, 0), CylinderFunction::pair(2, 1)], 3, 1).unwrap();
    let spec = GibbsSpec { lambda: flat.clone(), correction: Some(c) };
    assert_eq!(log_corrected_gibbs(&eta, &spec).unwrap(), log_local_gibbs(&eta, &flat).unwrap());
}

fn shift_field(f: &DensityField, z: [usize; 2]) -> DensityField {
    // (τ_z λ)(x) = λ(x + z)
    let m = f.side();
    let mut out = f.clone();
    for x in 0..f.len() {
        let c = f.coords(x);
        out.values_mut()[x] = f.values()[f.index(&[(c[0] + z[0]) % m, (c[1] + z[1]) % m])];
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn translation_covariance(seed in 0u64..1000, zx in 0usize..9, zy in 0usize..9) {
        let g = TorusGeometry::new(2, 9).unwrap();
        let eta = sample_product_measure(g, Marginals::Constant(0.4), &mut RngStream::new(seed, 0).rng()).unwrap();
        let lam = DensityField::from_fn(2, 9, |u| (6.0 * u[0]).sin() * (1.0 + u[1]) + u[0] * u[0]).unwrap();
        let f = CylinderFunction::new(2, vec![
            (vec![Point::ZERO, Point::unit(1)], 0.8),
            (vec![Point::unit(0), Point::new(&[1, 1]), Point::ZERO], -0.5),
        ]);
        let corr = Correction::new(vec![f.clone(), CylinderFunction::pair(2, 0)], 4, 2).unwrap();
        let spec = GibbsSpec { lambda: lam.clone(), correction: Some(corr.clone()) };
        let v = log_corrected_gibbs(&eta, &spec).unwrap();
        let z = Point::new(&[zx as i32, zy as i32]);
        let shifted = GibbsSpec { lambda: shift_field(&lam, [zx, zy]), correction: Some(corr) };
        let w = log_corrected_gibbs(&eta.shift(z), &shifted).unwrap();
        prop_assert!((v - w).abs() < 1e-12, "{} vs {}", v, w);
    }
}
