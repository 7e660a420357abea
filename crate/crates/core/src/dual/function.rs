use rustc_hash::FxHashMap;

use super::set::{shift_set, FiniteSubset};
use crate::kernel::KernelAnalysis;
use crate::lattice::Point;

/// Finitely supported map `𝔣(α, ·)` on finite subsets of `Z^d ∖ {0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFunction {
    pub alpha: f64,
    values: FxHashMap<FiniteSubset, f64>,
}

impl DualFunction {
    pub fn zero(alpha: f64) -> Self {
        DualFunction { alpha, values: FxHashMap::default() }
    }

    pub fn indicator(alpha: f64, set: FiniteSubset) -> Self {
        let mut f = DualFunction::zero(alpha);
        f.set(set, 1.0);
        f
    }

    pub fn from_entries(alpha: f64, entries: impl IntoIterator<Item = (FiniteSubset, f64)>) -> Self {
        let mut f = DualFunction::zero(alpha);
        for (a, v) in entries {
            f.add(a, v);
        }
        f
    }

    #[inline]
    pub fn get(&self, a: &FiniteSubset) -> f64 {
        self.values.get(a).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, a: FiniteSubset, v: f64) {
        if v == 0.0 {
            self.values.remove(&a);
        } else {
            self.values.insert(a, v);
        }
    }

    pub fn add(&mut self, a: FiniteSubset, v: f64) {
        if v != 0.0 {
            *self.values.entry(a).or_insert(0.0) += v;
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FiniteSubset, f64)> {
        self.values.iter().map(|(a, &v)| (a, v))
    }

    /// Entries ordered by degree, then by set.
    pub fn sorted_entries(&self) -> Vec<(FiniteSubset, f64)> {
        let mut e: Vec<_> = self.values.iter().map(|(a, &v)| (a.clone(), v)).collect();
        e.sort_by(|x, y| (x.0.len(), &x.0).cmp(&(y.0.len(), &y.0)));
        e
    }

    pub fn scaled(&self, c: f64) -> DualFunction {
        DualFunction::from_entries(self.alpha, self.iter().map(|(a, v)| (a.clone(), c * v)))
    }

    pub fn plus(&self, other: &DualFunction, c: f64) -> DualFunction {
        let mut out = self.clone();
        for (a, v) in other.iter() {
            out.add(a.clone(), c * v);
        }
        out
    }

    /// Largest degree in the support.
    pub fn max_degree(&self) -> usize {
        self.values.keys().map(|a| a.len()).max().unwrap_or(0)
    }
}

/// `<𝔣, 𝔤> = Σ_n (n+1)^{-1} Σ_{|A|=n} 𝔣(A) 𝔤(A)`.
pub fn dual_inner_product(f: &DualFunction, g: &DualFunction) -> f64 {
    let (small, large) = if f.len() <= g.len() { (f, g) } else { (g, f) };
    let mut terms: Vec<(&FiniteSubset, f64)> = small
        .iter()
        .filter_map(|(a, v)| {
            let w = large.get(a);
            (w != 0.0).then(|| (a, v * w / (a.len() + 1) as f64))
        })
        .collect();
    // fixed summation order regardless of hash layout
    terms.sort_by(|x, y| x.0.cmp(y.0));
    terms.iter().map(|t| t.1).sum()
}

/// `max_{A ∈ supp, z ∈ A} |𝔳(A) - 𝔳(S_z A)|`, taken over the union of the
/// support and its images so that a value missing at `S_z A` counts.
pub fn check_translation_identity(v: &DualFunction) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, x) in v.iter() {
        for z in a.points() {
            worst = worst.max((x - v.get(&shift_set(a, z))).abs());
        }
    }
    worst
}

/// `𝔴_i({z}) = -2 z_i a(z)`, zero off singletons.
pub fn current_dual(analysis: &KernelAnalysis, i: usize, alpha: f64) -> DualFunction {
    DualFunction::from_entries(
        alpha,
        analysis.antisymmetric.iter().map(|&(z, a)| (FiniteSubset::singleton(z), -2.0 * z.0[i] as f64 * a)),
    )
}

/// Coefficients `𝔣(α, B)` of a local function in the normalised basis
/// `Ψ_B = Π_{x∈B} (η(x) - α)/√χ`, keyed by the sorted point list of `B`
/// (which may contain the origin).
pub type LocalCoefficients = FxHashMap<Vec<Point>, f64>;

/// `𝔣(B) = |B|^{-1} 𝔣_*(B ∖ {0})` for `B ∋ 0`, zero otherwise.
pub fn lift_dual_to_local(f: &DualFunction) -> LocalCoefficients {
    let mut out = LocalCoefficients::default();
    for (a, v) in f.iter() {
        if a.is_empty() {
            continue;
        }
        let mut b: Vec<Point> = a.points().collect();
        b.push(Point::ZERO);
        b.sort();
        let n = b.len() as f64;
        out.insert(b, v / n);
    }
    out
}

/// `(𝔗 f)(A) = Σ_{x} f(x + (A ∪ {0}))`: each local coefficient on `C`
/// contributes to the sets `(C - c) ∖ {0}`, `c ∈ C`.
pub fn transform_local(alpha: f64, coeffs: &LocalCoefficients) -> DualFunction {
    let mut out = DualFunction::zero(alpha);
    for (c, &v) in coeffs {
        for &x in c {
            let pts: Vec<Point> = c.iter().filter(|&&y| y != x).map(|&y| y - x).collect();
            out.add(FiniteSubset::new(&pts).expect("distinct nonzero points"), v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::TransitionKernel;

    fn s(pts: &[&[i32]]) -> FiniteSubset {
        FiniteSubset::new(&pts.iter().map(|c| Point::new(c)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn inner_products() {
        let a = DualFunction::indicator(0.5, s(&[&[1]]));
        let b = DualFunction::indicator(0.5, s(&[&[1], &[2]]));
        assert_eq!(dual_inner_product(&a, &b), 0.0);
        assert_eq!(dual_inner_product(&a, &a), 0.5);
        assert!((dual_inner_product(&b, &b) - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn current_examples() {
        let t = TransitionKernel::tasep(3).analyze();
        let w = current_dual(&t, 0, 0.3);
        assert_eq!(w.get(&s(&[&[1, 0, 0]])), -1.0);
        assert_eq!(w.get(&s(&[&[-1, 0, 0]])), -1.0);
        assert_eq!(w.len(), 2);
        assert_eq!(check_translation_identity(&w), 0.0);
        assert!(current_dual(&TransitionKernel::ssep(3).analyze(), 0, 0.3).is_empty());
        let k = TransitionKernel::new(
            2,
            vec![(Point::new(&[1, 0]), 0.5), (Point::new(&[-1, 0]), 0.25), (Point::new(&[0, 1]), 0.25)],
        )
        .unwrap()
        .analyze();
        assert!((current_dual(&k, 0, 0.5).get(&s(&[&[1, 0]])) + 0.25).abs() < 1e-16);
    }

    #[test]
    fn translation_violation() {
        assert_eq!(check_translation_identity(&DualFunction::zero(0.5)), 0.0);
        let one = DualFunction::indicator(0.5, s(&[&[1, 0]]));
        assert_eq!(check_translation_identity(&one), 1.0);
    }

    #[test]
    fn lift_singleton_and_round_trip() {
        let f = DualFunction::indicator(0.4, s(&[&[2, 1]])).scaled(3.0);
        let l = lift_dual_to_local(&f);
        assert_eq!(l.len(), 1);
        assert_eq!(l[&vec![Point::ZERO, Point::new(&[2, 1])]], 1.5);
        assert!(lift_dual_to_local(&DualFunction::zero(0.4)).is_empty());

        // a translation-consistent function on the 3-point class of {e1, 2e1}
        let a = s(&[&[1], &[2]]);
        let mut g = DualFunction::zero(0.4);
        g.set(a.clone(), 0.7);
        for z in a.points() {
            g.set(shift_set(&a, z), 0.7);
        }
        assert_eq!(g.len(), 3);
        assert_eq!(check_translation_identity(&g), 0.0);
        let back = transform_local(0.4, &lift_dual_to_local(&g));
        for (b, v) in back.iter() {
            assert!((v - g.get(b)).abs() < 1e-15);
        }
        assert_eq!(back.len(), g.len());
    }
}
