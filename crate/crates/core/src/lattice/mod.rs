//! Integer-lattice primitives: points, windows, gcd labels, primes, zeta,
//! region enumeration and coprime-free boxes.

mod freebox;
mod primes;
mod region;

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub use freebox::{coprime_free_box, verify_free_box, FreeBox, FreeBoxCheck};
pub use primes::{
    prime_count, prime_table, prime_tail_bound, primes_up_to, truncation_prime, zeta, PRIME_CAP,
};
pub use region::{enumerate_region, Region, ScaledRegion};

/// A point of `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticePoint(coords)
    }

    pub fn zero(d: usize) -> Self {
        LatticePoint(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn checked_add(&self, other: &[i64]) -> Result<LatticePoint> {
        add_coords(&self.0, other).map(LatticePoint)
    }

    pub fn checked_sub(&self, other: &[i64]) -> Result<LatticePoint> {
        if self.dim() != other.len() {
            return Err(Error::param("dimension mismatch"));
        }
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| a.checked_sub(*b).ok_or_else(|| Error::overflow("point difference")))
            .collect::<Result<Vec<_>>>()
            .map(LatticePoint)
    }

    pub fn gcd(&self) -> GcdLabel {
        gcd_vec(self)
    }
}

pub(crate) fn add_coords(a: &[i64], b: &[i64]) -> Result<Vec<i64>> {
    if a.len() != b.len() {
        return Err(Error::param("dimension mismatch"));
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| x.checked_add(*y).ok_or_else(|| Error::overflow("point sum")))
        .collect()
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for LatticePoint {
    type Err = Error;

    /// Parses `"3,-1,4"` (parentheses optional).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        let coords = t
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::param(format!("bad coordinate {c:?} in point {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if coords.is_empty() {
            return Err(Error::param("empty point"));
        }
        Ok(LatticePoint(coords))
    }
}

impl Serialize for LatticePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

/// A gcd label: a natural number, or `∞` for the almost-surely infinite
/// labels of the rank-one affine limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GcdLabel {
    Finite(u64),
    Infinite,
}

impl GcdLabel {
    pub fn finite(self) -> Option<u64> {
        match self {
            GcdLabel::Finite(g) => Some(g),
            GcdLabel::Infinite => None,
        }
    }
}

impl fmt::Display for GcdLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GcdLabel::Finite(g) => write!(f, "{g}"),
            GcdLabel::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for GcdLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GcdLabel::Finite(g) => s.serialize_u64(*g),
            GcdLabel::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Binary gcd.
#[inline]
pub fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    if a == 0 {
        return b;
    }
    if b == 0 {
        return a;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return a << shift;
        }
    }
}

/// gcd of the absolute values of the coordinates; `0` for the zero vector.
#[inline]
pub fn gcd_coords(x: &[i64]) -> u64 {
    let mut g = 0u64;
    for &c in x {
        g = gcd_u64(g, c.unsigned_abs());
        if g == 1 {
            break;
        }
    }
    g
}

pub fn gcd_vec(x: &LatticePoint) -> GcdLabel {
    GcdLabel::Finite(gcd_coords(&x.0))
}

pub fn is_coprime(x: &LatticePoint) -> bool {
    gcd_coords(&x.0) == 1
}

/// A finite nonempty set of distinct offsets, kept in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Window {
    offsets: Vec<LatticePoint>,
}

impl Window {
    pub fn new(mut offsets: Vec<LatticePoint>) -> Result<Self> {
        let d = offsets.first().ok_or_else(|| Error::param("window must be nonempty"))?.dim();
        if d == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        if offsets.iter().any(|o| o.dim() != d) {
            return Err(Error::param("window offsets have mixed dimensions"));
        }
        offsets.sort();
        if offsets.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("window offsets must be distinct"));
        }
        Ok(Window { offsets })
    }

    /// All points of the box `lo..=hi`.
    pub fn box_window(lo: &[i64], hi: &[i64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::param("box corners must share a positive dimension"));
        }
        if lo.iter().zip(hi).any(|(a, b)| a > b) {
            return Err(Error::param("box requires lo <= hi componentwise"));
        }
        let mut offsets = Vec::new();
        let mut cur = lo.to_vec();
        loop {
            offsets.push(LatticePoint(cur.clone()));
            let mut i = lo.len();
            loop {
                if i == 0 {
                    return Ok(Window { offsets });
                }
                i -= 1;
                if cur[i] < hi[i] {
                    cur[i] += 1;
                    break;
                }
                cur[i] = lo[i];
            }
        }
    }

    pub fn single(point: LatticePoint) -> Self {
        Window { offsets: vec![point] }
    }

    pub fn origin(d: usize) -> Self {
        Window::single(LatticePoint::zero(d))
    }

    pub fn dim(&self) -> usize {
        self.offsets[0].dim()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn offsets(&self) -> &[LatticePoint] {
        &self.offsets
    }

    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.offsets.binary_search(p).ok()
    }

    pub fn bounding_box(&self) -> (Vec<i64>, Vec<i64>) {
        bounding_box(&self.offsets)
    }

    /// `(lo, hi)` if the window is exactly the full box it spans.
    pub fn as_box(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let (lo, hi) = self.bounding_box();
        let mut volume: u128 = 1;
        for (a, b) in lo.iter().zip(&hi) {
            volume = volume.checked_mul((b - a + 1) as u128)?;
        }
        (volume == self.len() as u128).then_some((lo, hi))
    }

    pub fn translate(&self, v: &[i64]) -> Result<Window> {
        let offsets = self.offsets.iter().map(|o| o.checked_add(v)).collect::<Result<Vec<_>>>()?;
        Window::new(offsets)
    }
}

impl FromStr for Window {
    type Err = Error;

    /// Parses offsets separated by `;`, e.g. `"0,0;1,0"`.
    fn from_str(s: &str) -> Result<Self> {
        let pts = s
            .split(';')
            .filter(|t| !t.trim().is_empty())
            .map(LatticePoint::from_str)
            .collect::<Result<Vec<_>>>()?;
        Window::new(pts)
    }
}

impl Serialize for Window {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.offsets.serialize(s)
    }
}

pub(crate) fn bounding_box(points: &[LatticePoint]) -> (Vec<i64>, Vec<i64>) {
    let d = points[0].dim();
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for p in points {
        for i in 0..d {
            lo[i] = lo[i].min(p.0[i]);
            hi[i] = hi[i].max(p.0[i]);
        }
    }
    (lo, hi)
}
