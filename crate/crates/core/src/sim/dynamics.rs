use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::{Configuration, SimError, TorusGeometry};
use crate::kernel::TransitionKernel;
use crate::lattice::Point;

/// Refuse runs whose expected number of clock rings exceeds this.
pub const MAX_EXPECTED_EVENTS: f64 = 1e12;

/// Jump counts per (site, kernel offset) accumulated over a run.
///
/// `counts[x * k + j]` is the number of accepted jumps from `x` to
/// `x + z_j`, where `z_j` is the `j`-th kernel offset.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentLedger {
    geom: TorusGeometry,
    offsets: Vec<Point>,
    counts: Vec<i64>,
    /// Microscopic time covered by the ledger.
    pub elapsed: f64,
    pub attempts: u64,
    pub accepted: u64,
}

impl CurrentLedger {
    pub fn new(geom: TorusGeometry, kernel: &TransitionKernel) -> Self {
        let offsets: Vec<Point> = kernel.entries().iter().map(|e| e.0).collect();
        CurrentLedger {
            geom,
            counts: vec![0; geom.sites() * offsets.len()],
            offsets,
            elapsed: 0.0,
            attempts: 0,
            accepted: 0,
        }
    }

    pub fn offsets(&self) -> &[Point] {
        &self.offsets
    }

    /// Accepted jumps from `x` along offset number `j`.
    pub fn jumps(&self, x: usize, j: usize) -> i64 {
        self.counts[x * self.offsets.len() + j]
    }

    pub fn is_empty(&self) -> bool {
        self.accepted == 0
    }

    /// Net number of particles that entered `x`.
    pub fn net_inflow(&self, x: usize) -> i64 {
        let k = self.offsets.len();
        let mut net = 0;
        for (j, &z) in self.offsets.iter().enumerate() {
            let from = self.geom.translate(x, -z);
            net += self.counts[from * k + j];
            net -= self.counts[x * k + j];
        }
        net
    }

    /// Signed particle flux across the directed bond `x → x + z_j`
    /// (forward jumps minus jumps of the reversed offset, if present).
    pub fn bond_current(&self, x: usize, j: usize) -> i64 {
        let z = self.offsets[j];
        let k = self.offsets.len();
        let mut c = self.counts[x * k + j];
        if let Some(r) = self.offsets.iter().position(|&w| w == -z) {
            let y = self.geom.translate(x, z);
            c -= self.counts[y * k + r];
        }
        c
    }

    /// Sites where `η_T(x) - η_0(x)` differs from the ledger's net inflow.
    /// Empty means the discrete continuity equation holds exactly.
    pub fn continuity_violations(&self, initial: &Configuration, fin: &Configuration) -> Vec<usize> {
        (0..self.geom.sites()).filter(|&x| fin.get(x) as i64 - initial.get(x) as i64 != self.net_inflow(x)).collect()
    }

    /// Total displacement `Σ_x Σ_j N_{x,j} z_j` of all particles, unwrapped.
    pub fn displacement(&self) -> [i64; crate::lattice::MAX_DIM] {
        let k = self.offsets.len();
        let mut out = [0i64; crate::lattice::MAX_DIM];
        for (idx, &c) in self.counts.iter().enumerate() {
            let z = self.offsets[idx % k];
            for (o, &zi) in out.iter_mut().zip(z.0.iter()) {
                *o += c * zi as i64;
            }
        }
        out
    }

    pub fn merge(&mut self, other: &CurrentLedger) {
        assert_eq!(self.offsets, other.offsets);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.elapsed += other.elapsed;
        self.attempts += other.attempts;
        self.accepted += other.accepted;
    }
}

/// Rejection kinetic Monte Carlo for a fixed torus and kernel.
///
/// Reusable across replicas: it owns the neighbour table and a scratch
/// particle list but no configuration. Particle number is conserved, so a
/// jump just overwrites the mover's entry in the list.
#[derive(Debug, Clone)]
pub struct Evolver {
    geom: TorusGeometry,
    kernel: TransitionKernel,
    jump: WeightedIndex<f64>,
    /// `target[x * k + j] = x + z_j`.
    target: Vec<u32>,
    particles: Vec<u32>,
}

impl Evolver {
    pub fn new(geom: TorusGeometry, kernel: &TransitionKernel) -> Result<Self, SimError> {
        if kernel.dim() != geom.dim() {
            return Err(SimError::DimensionMismatch { kernel: kernel.dim(), torus: geom.dim() });
        }
        let offsets: Vec<Point> = kernel.entries().iter().map(|e| e.0).collect();
        let jump = WeightedIndex::new(kernel.entries().iter().map(|e| e.1)).expect("valid weights");
        let mut target = Vec::with_capacity(geom.sites() * offsets.len());
        for x in 0..geom.sites() {
            let px = geom.point(x);
            for &z in &offsets {
                target.push(geom.index_of(px + z) as u32);
            }
        }
        Ok(Evolver { geom, kernel: kernel.clone(), jump, target, particles: Vec::new() })
    }

    pub fn geometry(&self) -> TorusGeometry {
        self.geom
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn new_ledger(&self) -> CurrentLedger {
        CurrentLedger::new(self.geom, &self.kernel)
    }

    /// Runs the dynamics for microscopic time `duration`, updating `config`
    /// in place and adding accepted jumps to `ledger`.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        config: &mut Configuration,
        duration: f64,
        rng: &mut R,
        ledger: &mut CurrentLedger,
    ) -> Result<(), SimError> {
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(SimError::Duration(duration));
        }
        if config.geometry() != self.geom {
            return Err(SimError::DimensionMismatch { kernel: self.geom.dim(), torus: config.geometry().dim() });
        }
        let n = config.particle_count();
        let expected = n as f64 * duration;
        if expected > MAX_EXPECTED_EVENTS {
            return Err(SimError::EventBudget(expected));
        }
        ledger.elapsed += duration;
        if n == 0 || n == self.geom.sites() || duration == 0.0 {
            return Ok(());
        }

        self.particles.clear();
        for x in config.occupied() {
            self.particles.push(x as u32);
        }
        let k = self.kernel.entries().len();
        let rate = n as f64;
        let mut t = 0.0;
        loop {
            // 1 - u lies in (0, 1], so the logarithm is finite
            t -= (1.0 - rng.gen::<f64>()).ln() / rate;
            if t > duration {
                break;
            }
            let i = rng.gen_range(0..n);
            let j = self.jump.sample(rng);
            ledger.attempts += 1;
            let x = self.particles[i] as usize;
            let y = self.target[x * k + j] as usize;
            if config.get(y) {
                continue;
            }
            config.set(x, false);
            config.set(y, true);
            self.particles[i] = y as u32;
            ledger.counts[x * k + j] += 1;
            ledger.accepted += 1;
        }
        Ok(())
    }
}

/// Evolves `config` for microscopic time `duration`.
pub fn evolve<R: Rng + ?Sized>(
    config: &Configuration,
    kernel: &TransitionKernel,
    duration: f64,
    rng: &mut R,
) -> Result<(Configuration, CurrentLedger), SimError> {
    let mut ev = Evolver::new(config.geometry(), kernel)?;
    let mut ledger = ev.new_ledger();
    let mut out = config.clone();
    ev.run(&mut out, duration, rng, &mut ledger)?;
    Ok((out, ledger))
}

/// Evolves on the diffusive clock: microscopic time `t N²`.
pub fn evolve_diffusive<R: Rng + ?Sized>(
    config: &Configuration,
    kernel: &TransitionKernel,
    t: f64,
    rng: &mut R,
) -> Result<(Configuration, CurrentLedger), SimError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(SimError::Duration(t));
    }
    let n = config.geometry().side() as f64;
    evolve(config, kernel, t * n * n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{sample_product_measure, Marginals, RngStream};

    #[test]
    fn full_lattice_is_frozen() {
        let g = TorusGeometry::new(3, 4).unwrap();
        let c = Configuration::full(g);
        let mut r = RngStream::new(3, 0).rng();
        let (out, ledger) = evolve(&c, &TransitionKernel::tasep(3), 50.0, &mut r).unwrap();
        assert_eq!(out, c);
        assert!(ledger.is_empty());
    }

    #[test]
    fn zero_duration_is_identity() {
        let g = TorusGeometry::new(2, 6).unwrap();
        let mut r = RngStream::new(4, 0).rng();
        let c = sample_product_measure(g, Marginals::Constant(0.4), &mut r).unwrap();
        let (out, ledger) = evolve(&c, &TransitionKernel::ssep(2), 0.0, &mut r).unwrap();
        assert_eq!(out, c);
        assert!(ledger.is_empty() && ledger.attempts == 0);
    }

    #[test]
    fn negative_duration_rejected() {
        let g = TorusGeometry::new(1, 4).unwrap();
        let c = Configuration::empty(g);
        let mut r = RngStream::new(4, 0).rng();
        assert!(matches!(evolve(&c, &TransitionKernel::tasep(1), -1.0, &mut r), Err(SimError::Duration(_))));
    }

    #[test]
    fn continuity_and_conservation() {
        let k = TransitionKernel::new(
            2,
            vec![(Point::new(&[1, 0]), 0.5), (Point::new(&[-1, 0]), 0.2), (Point::new(&[1, 2]), 0.3)],
        )
        .unwrap();
        let g = TorusGeometry::new(2, 5).unwrap();
        for rep in 0..20 {
            let mut r = RngStream::new(11, rep).rng();
            let c = sample_product_measure(g, Marginals::Constant(0.5), &mut r).unwrap();
            let (out, ledger) = evolve(&c, &k, 7.0, &mut r).unwrap();
            assert_eq!(out.particle_count(), c.particle_count());
            assert!(ledger.continuity_violations(&c, &out).is_empty());
        }
    }

    #[test]
    fn diffusive_clock_matches_microscopic_time() {
        let g = TorusGeometry::new(1, 2).unwrap();
        let c = Configuration::from_occupancy(g, &[true, false]);
        let k = TransitionKernel::ssep(1);
        let (a, la) = evolve_diffusive(&c, &k, 0.3, &mut RngStream::new(5, 2).rng()).unwrap();
        let (b, lb) = evolve(&c, &k, 1.2, &mut RngStream::new(5, 2).rng()).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn event_budget_guard() {
        let g = TorusGeometry::new(1, 4).unwrap();
        let c = Configuration::from_occupancy(g, &[true, false, false, false]);
        let mut r = RngStream::new(1, 0).rng();
        assert!(matches!(
            evolve_diffusive(&c, &TransitionKernel::tasep(1), 1e12, &mut r),
            Err(SimError::EventBudget(_))
        ));
    }
}
