use std::fmt;

use smallvec::SmallVec;

use super::DualError;
use crate::lattice::{Point, MAX_DIM};

const BIAS: i32 = 512;
const BITS: u32 = 10;
const MASK: u32 = (1 << BITS) - 1;
/// Largest coordinate magnitude representable in a packed point.
pub const MAX_COORD: i32 = BIAS - 1;

#[inline]
fn pack(p: Point) -> u32 {
    let mut v = 0u32;
    for i in 0..MAX_DIM {
        v = (v << BITS) | (p.0[i] + BIAS) as u32;
    }
    v
}

#[inline]
fn unpack(v: u32) -> Point {
    let mut p = [0i32; MAX_DIM];
    for i in 0..MAX_DIM {
        p[i] = ((v >> (BITS * (MAX_DIM - 1 - i) as u32)) & MASK) as i32 - BIAS;
    }
    Point(p)
}

const PACKED_ZERO: u32 = (BIAS as u32) << 20 | (BIAS as u32) << 10 | BIAS as u32;

/// A finite subset of `Z^d ∖ {0}`, stored as a sorted list of packed points.
///
/// Packing keeps lexicographic coordinate order, so the derived ordering on
/// sets is deterministic and translation commutes with the sort.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FiniteSubset(SmallVec<[u32; 4]>);

impl FiniteSubset {
    pub fn empty() -> Self {
        FiniteSubset(SmallVec::new())
    }

    pub fn new(points: &[Point]) -> Result<Self, DualError> {
        let mut v: SmallVec<[u32; 4]> = SmallVec::with_capacity(points.len());
        for &p in points {
            if p.is_zero() {
                return Err(DualError::ZeroInSet);
            }
            if p.linf() > MAX_COORD - 64 {
                return Err(DualError::CoordinateRange(p));
            }
            v.push(pack(p));
        }
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(DualError::DuplicatePoint);
        }
        Ok(FiniteSubset(v))
    }

    pub fn singleton(p: Point) -> Self {
        FiniteSubset::new(&[p]).expect("nonzero point")
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.0.iter().map(|&v| unpack(v))
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        self.0.binary_search(&pack(p)).is_ok()
    }

    /// `A ∪ {p}` for `p ∉ A`, `p ≠ 0`.
    pub fn with(&self, p: Point) -> Self {
        let k = pack(p);
        debug_assert!(k != PACKED_ZERO);
        let mut v = self.0.clone();
        match v.binary_search(&k) {
            Ok(_) => {}
            Err(pos) => v.insert(pos, k),
        }
        FiniteSubset(v)
    }

    /// `A ∖ {p}`.
    pub fn without(&self, p: Point) -> Self {
        let k = pack(p);
        let mut v = self.0.clone();
        if let Ok(pos) = v.binary_search(&k) {
            v.remove(pos);
        }
        FiniteSubset(v)
    }

    /// `A - z` for `z ∉ A` (so that the result avoids the origin).
    pub fn translated(&self, z: Point) -> Self {
        debug_assert!(!self.contains(z));
        FiniteSubset(self.0.iter().map(|&v| pack(unpack(v) - z)).collect())
    }

    /// `(A ∖ {x}) ∪ {y}` for `x ∈ A`, `y ∉ A ∪ {0}`.
    pub fn moved(&self, x: Point, y: Point) -> Self {
        let (kx, ky) = (pack(x), pack(y));
        let mut v: SmallVec<[u32; 4]> = self.0.iter().copied().filter(|&k| k != kx).collect();
        match v.binary_search(&ky) {
            Ok(_) => {}
            Err(pos) => v.insert(pos, ky),
        }
        FiniteSubset(v)
    }

    /// Per-axis extent of `A ∪ {0}`: `max_i (max x_i - min x_i)`.
    pub fn span_with_origin(&self) -> i32 {
        let mut lo = [0i32; MAX_DIM];
        let mut hi = [0i32; MAX_DIM];
        for p in self.points() {
            for i in 0..MAX_DIM {
                lo[i] = lo[i].min(p.0[i]);
                hi[i] = hi[i].max(p.0[i]);
            }
        }
        (0..MAX_DIM).map(|i| hi[i] - lo[i]).max().unwrap_or(0)
    }

    /// `max ‖x‖_∞` over the set (0 for `∅`).
    pub fn radius(&self) -> i32 {
        self.points().map(|p| p.linf()).max().unwrap_or(0)
    }
}

impl fmt::Debug for FiniteSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.points()).finish()
    }
}

/// `S_z A`: `A - z` if `z ∉ A`; otherwise `A - z` with the origin (the image
/// of `z`) replaced by `-z`.
pub fn shift_set(a: &FiniteSubset, z: Point) -> FiniteSubset {
    if z.is_zero() {
        return a.clone();
    }
    if a.contains(z) {
        a.without(z).translated(z).with(-z)
    } else {
        a.translated(z)
    }
}

/// `A_{x,y}`: moves the point of `A` among `{x, y}` to the other one when
/// exactly one of them belongs to `A`; identity otherwise.
pub fn exchange_set(a: &FiniteSubset, x: Point, y: Point) -> FiniteSubset {
    match (a.contains(x), a.contains(y)) {
        (true, false) if !y.is_zero() => a.moved(x, y),
        (false, true) if !x.is_zero() => a.moved(y, x),
        _ => a.clone(),
    }
}
