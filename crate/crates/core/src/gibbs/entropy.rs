use super::GibbsError;
use crate::field::DensityField;
use crate::sim::{Configuration, TorusGeometry, MAX_EXACT_SITES};

/// `ρ log(ρ/α) + (1-ρ) log((1-ρ)/(1-α))`, with `0 log 0 = 0`; infinite when
/// `Bernoulli(ρ)` is not absolutely continuous w.r.t. `Bernoulli(α)`.
pub fn bernoulli_divergence(rho: f64, alpha: f64) -> f64 {
    fn term(p: f64, q: f64) -> f64 {
        if p == 0.0 {
            0.0
        } else if q == 0.0 {
            f64::INFINITY
        } else {
            p * (p / q).ln()
        }
    }
    term(rho, alpha) + term(1.0 - rho, 1.0 - alpha)
}

/// Relative entropy of two product Bernoulli measures given their marginals.
pub fn relative_entropy_product(mu: &[f64], nu: &[f64]) -> Result<f64, GibbsError> {
    if mu.len() != nu.len() {
        return Err(GibbsError::Length(mu.len(), nu.len()));
    }
    if let Some(&bad) = mu.iter().chain(nu).find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(GibbsError::Density(bad));
    }
    Ok(mu.iter().zip(nu).map(|(&r, &a)| bernoulli_divergence(r, a)).sum())
}

/// `H(μ|ν) = Σ μ log(μ/ν)` for distributions on a common finite set.
pub fn relative_entropy(mu: &[f64], nu: &[f64]) -> Result<f64, GibbsError> {
    if mu.len() != nu.len() {
        return Err(GibbsError::Length(mu.len(), nu.len()));
    }
    let mut h = 0.0;
    for (&m, &n) in mu.iter().zip(nu) {
        if m > 0.0 {
            if n <= 0.0 {
                return Ok(f64::INFINITY);
            }
            h += m * (m / n).ln();
        }
    }
    Ok(h)
}

/// `∫ f dμ - log ∫ e^f dν`; its supremum over `f` is `H(μ|ν)`, attained at
/// `f = log(dμ/dν)`.
pub fn variational_entropy_value(mu: &[f64], nu: &[f64], f: &[f64]) -> Result<f64, GibbsError> {
    if mu.len() != nu.len() || f.len() != mu.len() {
        return Err(GibbsError::Length(mu.len(), f.len()));
    }
    let lin: f64 = mu.iter().zip(f).filter(|e| *e.0 > 0.0).map(|(m, g)| m * g).sum();
    Ok(lin - log_sum_exp(nu.iter().zip(f).filter(|e| *e.0 > 0.0).map(|(n, g)| n.ln() + g)))
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log E_{ν_α} exp{Σ_x λ_x η(x)} = Σ_x log(1 - α + α e^{λ_x})`.
pub fn log_partition_local(lambda: &DensityField, alpha: f64) -> f64 {
    lambda.values().iter().map(|&l| (1.0 - alpha + alpha * l.exp()).ln()).sum()
}

fn check_small(geom: TorusGeometry) -> Result<(), GibbsError> {
    if geom.sites() > MAX_EXACT_SITES {
        return Err(GibbsError::StateSpace { max: MAX_EXACT_SITES, got: geom.sites() });
    }
    Ok(())
}

fn log_bernoulli(config: &Configuration, alpha: f64) -> f64 {
    let k = config.particle_count() as f64;
    let n = config.geometry().sites() as f64;
    let la = if k > 0.0 { k * alpha.ln() } else { 0.0 };
    let lb = if n - k > 0.0 { (n - k) * (1.0 - alpha).ln() } else { 0.0 };
    la + lb
}

fn log_weights(
    geom: TorusGeometry,
    alpha: f64,
    log_density: impl Fn(&Configuration) -> Result<f64, GibbsError>,
) -> Result<Vec<f64>, GibbsError> {
    check_small(geom)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GibbsError::Density(alpha));
    }
    (0..1usize << geom.sites())
        .map(|s| {
            let c = Configuration::from_state_index(geom, s);
            Ok(log_bernoulli(&c, alpha) + log_density(&c)?)
        })
        .collect()
}

/// `log Z = log E_{ν_α} e^{g}` by summing over every configuration.
pub fn log_partition_exhaustive(
    geom: TorusGeometry,
    alpha: f64,
    log_density: impl Fn(&Configuration) -> Result<f64, GibbsError>,
) -> Result<f64, GibbsError> {
    let w = log_weights(geom, alpha, log_density)?;
    Ok(log_sum_exp(w.iter().copied()))
}

/// The normalised law `ν_α(η) e^{g(η)} / Z`, indexed by configuration bits.
pub fn gibbs_distribution(
    geom: TorusGeometry,
    alpha: f64,
    log_density: impl Fn(&Configuration) -> Result<f64, GibbsError>,
) -> Result<Vec<f64>, GibbsError> {
    let w = log_weights(geom, alpha, log_density)?;
    let lz = log_sum_exp(w.iter().copied());
    Ok(w.into_iter().map(|x| (x - lz).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{lambda_field, log_local_gibbs};
    use crate::sim::{product_distribution, Marginals};

    #[test]
    fn divergence_values() {
        assert_eq!(bernoulli_divergence(0.3, 0.3), 0.0);
        assert!((bernoulli_divergence(0.9, 0.5) - 0.368_064_2).abs() < 1e-7);
        assert_eq!(bernoulli_divergence(1.0, 1.0), 0.0);
        assert_eq!(bernoulli_divergence(0.5, 1.0), f64::INFINITY);
    }

    #[test]
    fn product_entropy_against_enumeration() {
        let g = TorusGeometry::new(2, 3).unwrap();
        let rho = DensityField::from_fn(2, 3, |u| 0.5 + 0.3 * (std::f64::consts::TAU * u[1]).cos()).unwrap();
        let alpha = 0.45;
        let closed = relative_entropy_product(rho.values(), &vec![alpha; 9]).unwrap();
        let mu = product_distribution(g, Marginals::Field(&rho)).unwrap();
        let nu = product_distribution(g, Marginals::Constant(alpha)).unwrap();
        let exact = relative_entropy(&mu, &nu).unwrap();
        assert!((closed - exact).abs() < 1e-12);
        // the variational functional peaks at log(dμ/dν)
        let opt: Vec<f64> = mu.iter().zip(&nu).map(|(m, n)| (m / n).ln()).collect();
        let v = variational_entropy_value(&mu, &nu, &opt).unwrap();
        assert!((v - exact).abs() < 1e-9);
        let off: Vec<f64> = opt.iter().enumerate().map(|(i, x)| x + 0.05 * ((i * 7 % 5) as f64 - 2.0)).collect();
        assert!(variational_entropy_value(&mu, &nu, &off).unwrap() < v);
        assert!(closed <= 9.0 * rho.values().iter().map(|&r| bernoulli_divergence(r, alpha)).fold(0.0, f64::max));
    }

    #[test]
    fn local_gibbs_is_the_product_measure() {
        let g = TorusGeometry::new(1, 7).unwrap();
        let rho = DensityField::from_fn(1, 7, |u| 0.3 + 0.4 * u[0]).unwrap();
        let alpha = 0.6;
        let lam = lambda_field(&rho, alpha).unwrap();
        let lz = log_partition_exhaustive(g, alpha, |c| log_local_gibbs(c, &lam)).unwrap();
        assert!((lz - log_partition_local(&lam, alpha)).abs() < 1e-12);
        let psi = gibbs_distribution(g, alpha, |c| log_local_gibbs(c, &lam)).unwrap();
        let prod = product_distribution(g, Marginals::Field(&rho)).unwrap();
        let tv: f64 = psi.iter().zip(&prod).map(|(a, b)| (a - b).abs()).sum();
        assert!(tv < 1e-13);
    }
}
