//! Cylinder probabilities of the limit laws.
//!
//! Under the coprime limit law a point is black iff it lies in the random coset
//! `ρ_p + pZ^d` for some prime `p`, the cosets being independent and uniform.
//! The probability that a finite set `A` is entirely white is therefore
//! `∏_p (1 − r_p(A)/p^d)`, where `r_p(A)` counts the residues of `A` mod `p`.
//! The gcd law refines each coset into a nested chain of cosets of `p^n Z^d`,
//! which makes `V_p(x) = v_p(x − Y)` for a Haar point `Y` of `Z_p^d`.
//!
//! Every Euler product is split at a truncation prime `P`. For `p > P` the
//! factors are `1 − m p^{-s}` with `m = |A|`, so the true value lies in
//! `[head·(1 − m·τ), head]` with `τ` the certified prime tail
//! [`prime_tail_bound`]. The prime table stops at [`PRIME_CAP`]; requests
//! whose `eps` cannot be met there return the radius actually achieved.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certified::{rounding_slack, CertifiedValue};
use crate::error::{Error, Result};
use crate::lattice::{prime_table, prime_tail_bound, truncation_prime, zeta, LatticePoint, Window, PRIME_CAP};

/// Largest black set accepted by the inclusion-exclusion formulas.
pub const MAX_BLACK: usize = 20;
/// Largest residue box `p^{d(e+1)}` enumerated for one prime of a gcd cylinder.
pub const PRIME_COUNT_BUDGET: u64 = 10_000_000;
/// Largest number of partial cylinders enumerated by [`limit_cylinder_distribution`].
pub const PATTERN_BUDGET: u64 = 1 << 20;

/// Which colouring or labelling of `Z^d` is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    /// White iff the gcd is 1.
    Cop,
    /// The gcd itself, labels above `cap` pooled.
    Gcd { cap: u64 },
    /// White iff the gcd is `k`-free (no `p^k` divides it).
    KFree { k: u32 },
}

impl Law {
    pub fn kind(&self) -> &'static str {
        match self {
            Law::Cop => "cop",
            Law::Gcd { .. } => "gcd",
            Law::KFree { .. } => "kfree",
        }
    }

    /// The exponent `k` for colour laws (`1` for the coprime colouring).
    fn colour_exponent(&self) -> Option<u32> {
        match *self {
            Law::Cop => Some(1),
            Law::KFree { k } => Some(k),
            Law::Gcd { .. } => None,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            Law::Gcd { cap } if cap == 0 => Err(Error::param("gcd label cap must be at least 1")),
            Law::KFree { k } if k == 0 => Err(Error::param("k-free exponent must be at least 1")),
            _ => Ok(()),
        }
    }
}

/// The value seen at one window offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cell {
    White,
    Black,
    Label(u64),
    /// A gcd label outside `1..=cap`.
    Overflow,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::White => write!(f, "W"),
            Cell::Black => write!(f, "B"),
            Cell::Label(g) => write!(f, "{g}"),
            Cell::Overflow => write!(f, "over"),
        }
    }
}

/// Encodes window patterns as integer keys.
///
/// Colour laws use a bitmask (cell 0 is the most significant bit, 1 = white).
/// The gcd law uses base `cap + 1` digits, cell 0 most significant, with digit
/// 0 for overflow. Key order is therefore lexicographic pattern order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternSpace {
    pub law: Law,
    pub cells: usize,
}

impl PatternSpace {
    pub fn new(law: Law, cells: usize) -> Result<Self> {
        law.validate()?;
        let space = PatternSpace { law, cells };
        space.size().ok_or_else(|| Error::budget("pattern space does not fit in 64 bits"))?;
        Ok(space)
    }

    pub fn radix(&self) -> u64 {
        match self.law {
            Law::Gcd { cap } => cap + 1,
            _ => 2,
        }
    }

    /// Number of distinct patterns.
    pub fn size(&self) -> Option<u64> {
        self.radix().checked_pow(self.cells as u32)
    }

    /// Digit of a raw gcd value under this law.
    #[inline]
    pub fn digit(&self, g: u64) -> u64 {
        match self.law {
            Law::Cop => (g == 1) as u64,
            Law::KFree { k } => is_kfree(g, k) as u64,
            Law::Gcd { cap } => {
                if (1..=cap).contains(&g) {
                    g
                } else {
                    0
                }
            }
        }
    }

    pub fn cell(&self, digit: u64) -> Cell {
        match self.law {
            Law::Gcd { .. } => {
                if digit == 0 {
                    Cell::Overflow
                } else {
                    Cell::Label(digit)
                }
            }
            _ => {
                if digit == 1 {
                    Cell::White
                } else {
                    Cell::Black
                }
            }
        }
    }

    pub fn encode_cells(&self, cells: &[Cell]) -> Result<u64> {
        if cells.len() != self.cells {
            return Err(Error::WindowMismatch(format!("{} cells for a {}-cell window", cells.len(), self.cells)));
        }
        let mut key = 0u64;
        for c in cells {
            let digit = match (self.law, *c) {
                (Law::Gcd { cap }, Cell::Label(g)) if (1..=cap).contains(&g) => g,
                (Law::Gcd { .. }, Cell::Label(_) | Cell::Overflow) => 0,
                (Law::Cop | Law::KFree { .. }, Cell::White) => 1,
                (Law::Cop | Law::KFree { .. }, Cell::Black) => 0,
                _ => return Err(Error::param(format!("cell {c} does not belong to the {} law", self.law.kind()))),
            };
            key = key * self.radix() + digit;
        }
        Ok(key)
    }

    pub fn digits(&self, mut key: u64) -> Vec<u64> {
        let r = self.radix();
        let mut out = vec![0; self.cells];
        for slot in out.iter_mut().rev() {
            *slot = key % r;
            key /= r;
        }
        out
    }

    pub fn decode(&self, key: u64) -> Vec<Cell> {
        self.digits(key).into_iter().map(|d| self.cell(d)).collect()
    }

    /// Human-readable pattern, e.g. `"WB"` or `"1,2,over"`.
    pub fn format(&self, key: u64) -> String {
        let cells = self.decode(key);
        match self.law {
            Law::Gcd { .. } => cells.iter().map(Cell::to_string).collect::<Vec<_>>().join(","),
            _ => cells.iter().map(Cell::to_string).collect(),
        }
    }

    /// Whether the pattern has an overflow cell.
    pub fn has_overflow(&self, key: u64) -> bool {
        matches!(self.law, Law::Gcd { .. }) && self.digits(key).contains(&0)
    }
}

/// Is `g` free of `k`-th prime powers? `0` is not.
pub fn is_kfree(g: u64, k: u32) -> bool {
    if g == 0 {
        return false;
    }
    if k == 1 {
        return g == 1;
    }
    let mut n = g;
    let table = prime_table();
    for &p in table {
        let Some(pk) = p.checked_pow(k) else { break };
        if pk > n {
            break;
        }
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        if e >= k {
            return false;
        }
    }
    // any leftover is coprime to all small p; its k-th power divisors need p^k ≤ n
    if n > 1 && table.last().and_then(|&p| p.checked_pow(k)).map_or(false, |pk| pk <= n) {
        return kfree_slow(n, k);
    }
    true
}

fn kfree_slow(mut n: u64, k: u32) -> bool {
    let mut p = PRIME_CAP + 1;
    while p.checked_pow(k).map_or(false, |pk| pk <= n) {
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        if e >= k {
            return false;
        }
        p += 1;
    }
    true
}

/// A colour cylinder: these offsets white, those black.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopCylinder {
    pub white: Vec<LatticePoint>,
    pub black: Vec<LatticePoint>,
}

impl CopCylinder {
    pub fn new(white: Vec<LatticePoint>, black: Vec<LatticePoint>) -> Result<Self> {
        if white.iter().any(|w| black.contains(w)) {
            return Err(Error::param("white and black offsets must be disjoint"));
        }
        let mut all = white.iter().chain(&black);
        if let Some(first) = all.next() {
            if all.any(|p| p.dim() != first.dim()) {
                return Err(Error::param("cylinder offsets have mixed dimensions"));
            }
        }
        Ok(CopCylinder { white: dedup(white), black: dedup(black) })
    }
}

fn dedup(mut v: Vec<LatticePoint>) -> Vec<LatticePoint> {
    v.sort();
    v.dedup();
    v
}

/// A gcd cylinder: offset `x` carries label `g(x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GcdCylinder {
    pub assignment: Vec<(LatticePoint, u64)>,
}

impl GcdCylinder {
    pub fn new(mut assignment: Vec<(LatticePoint, u64)>) -> Result<Self> {
        if assignment.iter().any(|(_, g)| *g == 0) {
            return Err(Error::param("gcd cylinder labels must be at least 1"));
        }
        assignment.sort();
        if assignment.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("gcd cylinder assigns one offset twice"));
        }
        if let Some((first, _)) = assignment.first() {
            if assignment.iter().any(|(p, _)| p.dim() != first.dim()) {
                return Err(Error::param("cylinder offsets have mixed dimensions"));
            }
        }
        Ok(GcdCylinder { assignment })
    }

    pub fn offsets(&self) -> Vec<&[i64]> {
        self.assignment.iter().map(|(p, _)| p.coords()).collect()
    }

    /// Primes dividing some label, ascending.
    pub fn label_primes(&self) -> Vec<u64> {
        let mut ps: Vec<u64> =
            self.assignment.iter().flat_map(|(_, g)| ValuationVector::of(*g).primes()).collect();
        ps.sort_unstable();
        ps.dedup();
        ps
    }
}

/// Finitely supported exponent map `p ↦ e_p`, the finite supernatural numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct ValuationVector(pub BTreeMap<u64, u32>);

impl ValuationVector {
    /// Factorisation of `n ≥ 1`.
    pub fn of(mut n: u64) -> Self {
        assert!(n >= 1, "valuation vector of 0 is not finite");
        let mut map = BTreeMap::new();
        let mut p = 2u64;
        while p * p <= n {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            if e > 0 {
                map.insert(p, e);
            }
            p += if p == 2 { 1 } else { 2 };
        }
        if n > 1 {
            map.insert(n, 1);
        }
        ValuationVector(map)
    }

    pub fn exponent(&self, p: u64) -> u32 {
        self.0.get(&p).copied().unwrap_or(0)
    }

    pub fn primes(&self) -> Vec<u64> {
        self.0.keys().copied().collect()
    }

    /// `∏ p^{e_p}`, or `None` on overflow.
    pub fn value(&self) -> Option<u64> {
        self.0.iter().try_fold(1u64, |acc, (&p, &e)| acc.checked_mul(p.checked_pow(e)?))
    }
}

/// `v_p(n)` for `n ≠ 0`.
#[inline]
pub fn valuation(mut n: u64, p: u64) -> u32 {
    debug_assert!(n != 0);
    let mut e = 0;
    while n % p == 0 {
        n /= p;
        e += 1;
    }
    e
}

/// Number of distinct residues of `points` modulo `p^e`, componentwise.
pub fn residue_count(points: &[LatticePoint], p: u64, e: u32) -> u64 {
    let refs: Vec<&[i64]> = points.iter().map(|x| x.coords()).collect();
    residue_count_refs(&refs, p, e)
}

fn residue_count_refs(points: &[&[i64]], p: u64, e: u32) -> u64 {
    if points.len() <= 1 {
        return points.len() as u64;
    }
    let Some(m) = p.checked_pow(e).filter(|&m| m <= i64::MAX as u64) else {
        // modulus beyond every coordinate difference
        return points.len() as u64;
    };
    if m > diameter(points) {
        return points.len() as u64;
    }
    let m = m as i64;
    let mut res: Vec<Vec<i64>> = points.iter().map(|x| x.iter().map(|c| c.rem_euclid(m)).collect()).collect();
    res.sort_unstable();
    res.dedup();
    res.len() as u64
}

/// ℓ∞ diameter (largest coordinate difference).
fn diameter(points: &[&[i64]]) -> u64 {
    let Some(first) = points.first() else { return 0 };
    (0..first.len())
        .map(|i| {
            let (lo, hi) = points.iter().fold((i64::MAX, i64::MIN), |(lo, hi), x| (lo.min(x[i]), hi.max(x[i])));
            (hi as i128 - lo as i128) as u64
        })
        .max()
        .unwrap_or(0)
}

/// The truncation prime for `target`, saturated at the cap.
fn truncation_or_cap(target: f64, s: u32) -> u64 {
    truncation_prime(target, s).unwrap_or_else(|| *prime_table().last().expect("nonempty table"))
}

type SegmentKey = (u64, u32, usize, usize);

/// `∏ (1 − m p^{-s})` over `table[lo..hi]`, cached; the values repeat
/// across inclusion-exclusion terms.
fn segment_product(m: u64, s: u32, lo: usize, hi: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<SegmentKey, f64>>> = OnceLock::new();
    if lo >= hi {
        return 1.0;
    }
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&v) = cache.lock().expect("segment cache").get(&(m, s, lo, hi)) {
        return v;
    }
    let mf = m as f64;
    let e = -(s as i32);
    let v = prime_table()[lo..hi].iter().fold(1.0, |acc, &p| acc * (1.0 - mf * (p as f64).powi(e)));
    cache.lock().expect("segment cache").insert((m, s, lo, hi), v);
    v
}

/// `P[no p ∉ excluded has p^k | x for some x ∈ points]` (distinct points).
///
/// The head runs over primes small enough for residues to collide (and over
/// every excluded prime); the rest are identical `1 − m p^{-s}` factors.
fn euler_all_white(points: &[&[i64]], d: usize, k: u32, excluded: &[u64], eps: f64) -> Result<CertifiedValue> {
    if !(eps > 0.0) {
        return Err(Error::param("eps must be positive"));
    }
    let m = points.len() as u64;
    if m == 0 {
        return Ok(CertifiedValue::ONE);
    }
    let s = d as u32 * k;
    if s == 1 {
        // Σ 1/p diverges: every point is black almost surely
        return Ok(CertifiedValue::ZERO);
    }
    let table = prime_table();
    let diam = diameter(points);
    // residues mod p^k are all distinct once p^k > diam
    let collide = |p: u64| p.checked_pow(k).map_or(false, |pk| pk <= diam);
    let head_end = table.partition_point(|&p| collide(p) || excluded.iter().any(|&q| q >= p));
    if head_end == table.len() && collide(*table.last().unwrap()) {
        return Err(Error::budget(format!("window diameter {diam} exceeds the prime table")));
    }
    let big_p = truncation_or_cap(eps / m as f64, s);
    let p_end = table.partition_point(|&p| p <= big_p).max(head_end);

    let mut head = 1.0f64;
    let e = -(s as i32);
    for &p in &table[..head_end] {
        if excluded.contains(&p) {
            continue;
        }
        let r = residue_count_refs(points, p, k);
        head *= 1.0 - r as f64 * (p as f64).powi(e);
    }
    let value = head * segment_product(m, s, head_end, p_end);
    let last = table[p_end - 1];
    let tau = m as f64 * prime_tail_bound(last, s);
    let enclosure = CertifiedValue::from_interval(value * (1.0 - tau.min(1.0)), value);
    Ok(CertifiedValue::new(enclosure.value, enclosure.error + rounding_slack(value, 3 * p_end + 8)))
}

fn refs(points: &[LatticePoint]) -> Vec<&[i64]> {
    points.iter().map(|x| x.coords()).collect()
}

fn check_dims(points: &[&[i64]], d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    if points.iter().any(|x| x.len() != d) {
        return Err(Error::param(format!("offsets must have dimension {d}")));
    }
    Ok(())
}

/// `P[every point of A is white] = ∏_p (1 − r_p(A)/p^d)`.
pub fn prob_all_white(points: &[LatticePoint], d: usize, eps: f64) -> Result<CertifiedValue> {
    let pts = dedup(points.to_vec());
    let r = refs(&pts);
    check_dims(&r, d)?;
    euler_all_white(&r, d, 1, &[], eps)
}

/// Inclusion-exclusion over the black set with all-white base terms.
fn colour_cylinder(white: &[LatticePoint], black: &[LatticePoint], k: u32, d: usize, eps: f64) -> Result<CertifiedValue> {
    if !(eps > 0.0) {
        return Err(Error::param("eps must be positive"));
    }
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if white.iter().any(|w| black.contains(w)) {
        return Err(Error::param("white and black offsets must be disjoint"));
    }
    let white = dedup(white.to_vec());
    let black = dedup(black.to_vec());
    check_dims(&refs(&white), d)?;
    check_dims(&refs(&black), d)?;
    if black.len() > MAX_BLACK {
        return Err(Error::budget(format!(
            "{} black offsets exceed the inclusion-exclusion budget of {MAX_BLACK}",
            black.len()
        )));
    }
    let b = black.len();
    if b == 0 {
        let set: Vec<&[i64]> = white.iter().map(|x| x.coords()).collect();
        return euler_all_white(&set, d, k, &[], eps);
    }
    let term_eps = eps / (1u64 << b) as f64;
    let terms: Vec<(f64, CertifiedValue)> = (0..1u64 << b)
        .into_par_iter()
        .map(|mask| {
            let mut set: Vec<&[i64]> = white.iter().map(|x| x.coords()).collect();
            set.extend((0..b).filter(|i| mask >> i & 1 == 1).map(|i| black[i].coords()));
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            euler_all_white(&set, d, k, &[], term_eps).map(|v| (sign, v))
        })
        .collect::<Result<_>>()?;
    Ok(CertifiedValue::signed_sum(terms).clamp_probability())
}

/// `P[white offsets white, black offsets black]` under the coprime law.
pub fn prob_cop_cylinder(cyl: &CopCylinder, d: usize, eps: f64) -> Result<CertifiedValue> {
    colour_cylinder(&cyl.white, &cyl.black, 1, d, eps)
}

/// The `k`-free analogue of [`prob_cop_cylinder`]: `good` gcds `k`-free, `bad` ones not.
/// For `k = 1` this is the same computation as the coprime case.
pub fn prob_kfree_cylinder(good: &[LatticePoint], bad: &[LatticePoint], k: u32, d: usize, eps: f64) -> Result<CertifiedValue> {
    colour_cylinder(good, bad, k, d, eps)
}

/// Exact count behind the gcd-cylinder factor at prime `p`.
///
/// Returns `(count, e)`: `count` residues `y mod p^{e+1}` (per coordinate)
/// satisfy `min_i v_p(y_i + x_i) = v_p(g(x))` for every constrained `x`,
/// where `e` is the largest `v_p(g(x))`.
pub fn gcd_prime_count(offsets: &[&[i64]], targets: &[u32], p: u64, d: usize) -> Result<(u64, u32)> {
    let e = targets.iter().copied().max().unwrap_or(0);
    let prec = e + 1;
    let modulus = p.checked_pow(prec).filter(|&m| m <= i64::MAX as u64);
    let cells = modulus.and_then(|m| m.checked_pow(d as u32)).filter(|&c| c <= PRIME_COUNT_BUDGET);
    let (Some(m), Some(_)) = (modulus, cells) else {
        return Err(Error::budget(format!(
            "counting residues mod {p}^{prec} in dimension {d} exceeds {PRIME_COUNT_BUDGET}"
        )));
    };
    let n = offsets.len();
    // val[j][i][y] = min(v_p(y + x_j,i mod m), prec)
    let val: Vec<Vec<Vec<u8>>> = offsets
        .iter()
        .map(|x| {
            x.iter()
                .map(|&xi| {
                    (0..m)
                        .map(|y| {
                            let r = (y as i128 + xi as i128).rem_euclid(m as i128) as u64;
                            if r == 0 {
                                prec as u8
                            } else {
                                valuation(r, p) as u8
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let targets: Vec<u8> = targets.iter().map(|&t| t as u8).collect();
    let mut mins = vec![vec![prec as u8; n]; d + 1];
    Ok((count_rec(0, d, m, &val, &targets, &mut mins), e))
}

fn count_rec(i: usize, d: usize, m: u64, val: &[Vec<Vec<u8>>], targets: &[u8], mins: &mut [Vec<u8>]) -> u64 {
    if i == d {
        return mins[d].iter().zip(targets).all(|(a, b)| a == b) as u64;
    }
    let mut total = 0;
    'y: for y in 0..m as usize {
        for j in 0..targets.len() {
            let v = mins[i][j].min(val[j][i][y]);
            // mins only decrease further down
            if v < targets[j] {
                continue 'y;
            }
            mins[i + 1][j] = v;
        }
        total += count_rec(i + 1, d, m, val, targets, mins);
    }
    total
}

/// `P[label(x) = g(x) for every constrained x]` under the gcd law.
pub fn prob_gcd_cylinder(cyl: &GcdCylinder, d: usize, eps: f64) -> Result<CertifiedValue> {
    if d < 2 {
        return Err(Error::param("the gcd law needs d >= 2"));
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps must be positive"));
    }
    let offsets = cyl.offsets();
    check_dims(&offsets, d)?;
    let primes = cyl.label_primes();
    let mut factor = 1.0f64;
    let mut ops = 0;
    for &p in &primes {
        let targets: Vec<u32> = cyl.assignment.iter().map(|(_, g)| valuation(*g, p)).collect();
        let (count, e) = gcd_prime_count(&offsets, &targets, p, d)?;
        let total = (p as f64).powi(((e + 1) as usize * d) as i32);
        factor *= count as f64 / total;
        ops += 3;
    }
    let rest = euler_all_white(&offsets, d, 1, &primes, eps)?;
    let value = factor * rest.value;
    Ok(CertifiedValue::new(value, factor * rest.error + rounding_slack(value, ops + 4)).clamp_probability())
}

/// Limit-law masses of every pattern on a window.
#[derive(Debug, Clone, Serialize)]
pub struct LimitDistribution {
    pub window: Window,
    #[serde(flatten)]
    pub law: Law,
    pub d: usize,
    /// `(key, mass)` for every pattern, ascending keys (see [`PatternSpace`]).
    #[serde(skip)]
    pub masses: Vec<(u64, CertifiedValue)>,
    /// Total mass of patterns with an overflow cell (gcd law).
    pub remainder: Option<CertifiedValue>,
    /// Sum of all masses.
    pub total: CertifiedValue,
}

impl LimitDistribution {
    pub fn space(&self) -> PatternSpace {
        PatternSpace { law: self.law, cells: self.window.len() }
    }

    pub fn mass(&self, key: u64) -> CertifiedValue {
        self.masses
            .binary_search_by_key(&key, |(k, _)| *k)
            .map(|i| self.masses[i].1)
            .unwrap_or(CertifiedValue::ZERO)
    }

    /// Point masses as a plain pmf.
    pub fn pmf(&self) -> BTreeMap<u64, f64> {
        self.masses.iter().map(|(k, v)| (*k, v.value)).collect()
    }

    /// Sum of the error radii.
    pub fn total_error(&self) -> f64 {
        self.masses.iter().map(|(_, v)| v.error).sum()
    }

    /// `(pattern, mass)` rows for display.
    pub fn rows(&self) -> Vec<(String, CertifiedValue)> {
        let s = self.space();
        self.masses.iter().map(|(k, v)| (s.format(*k), *v)).collect()
    }
}

/// The full limit marginal on `window`.
///
/// Colour laws compute `f(T) = P[T all white]` for every `T ⊆ window` and
/// apply the Möbius inversion over supersets. The gcd law computes every
/// partial cylinder (each cell either free or labelled `1..=cap`) and turns
/// free cells into overflow cells by subtracting the labelled ones. Error
/// radii are carried through the same transforms with absolute values.
pub fn limit_cylinder_distribution(window: &Window, law: Law, d: usize, eps: f64) -> Result<LimitDistribution> {
    law.validate()?;
    if window.dim() != d {
        return Err(Error::param(format!("window has dimension {}, expected {d}", window.dim())));
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps must be positive"));
    }
    let n = window.len();
    let space = PatternSpace::new(law, n)?;
    let size = space.size().filter(|&s| s <= PATTERN_BUDGET).ok_or_else(|| {
        Error::budget(format!("pattern space of a {n}-cell window exceeds {PATTERN_BUDGET}"))
    })?;
    let offsets: Vec<&[i64]> = window.offsets().iter().map(|o| o.coords()).collect();
    let term_eps = eps / size as f64;

    let (mut values, mut errors): (Vec<f64>, Vec<f64>) = match law.colour_exponent() {
        Some(k) => {
            // key bit (n−1−i) ↔ cell i white
            let terms: Vec<CertifiedValue> = (0..size)
                .into_par_iter()
                .map(|mask| {
                    let set: Vec<&[i64]> = (0..n).filter(|i| mask >> (n - 1 - i) & 1 == 1).map(|i| offsets[i]).collect();
                    euler_all_white(&set, d, k, &[], term_eps)
                })
                .collect::<Result<_>>()?;
            let (mut v, mut e): (Vec<f64>, Vec<f64>) = terms.iter().map(|t| (t.value, t.error)).unzip();
            for bit in 0..n {
                let b = 1usize << bit;
                for mask in 0..size as usize {
                    if mask & b == 0 {
                        v[mask] -= v[mask | b];
                        e[mask] += e[mask | b];
                    }
                }
            }
            (v, e)
        }
        None => {
            if d < 2 {
                return Err(Error::param("the gcd law needs d >= 2"));
            }
            let terms: Vec<CertifiedValue> = (0..size)
                .into_par_iter()
                .map(|key| {
                    let digits = space.digits(key);
                    let assignment: Vec<(LatticePoint, u64)> = digits
                        .iter()
                        .enumerate()
                        .filter(|(_, &g)| g != 0)
                        .map(|(i, &g)| (window.offsets()[i].clone(), g))
                        .collect();
                    prob_gcd_cylinder(&GcdCylinder { assignment }, d, term_eps)
                })
                .collect::<Result<_>>()?;
            let (mut v, mut e): (Vec<f64>, Vec<f64>) = terms.iter().map(|t| (t.value, t.error)).unzip();
            let r = space.radix() as usize;
            let mut stride = 1usize;
            for _ in 0..n {
                for key in 0..size as usize {
                    if (key / stride) % r == 0 {
                        for g in 1..r {
                            v[key] -= v[key + g * stride];
                            e[key] += e[key + g * stride];
                        }
                    }
                }
                stride *= r;
            }
            (v, e)
        }
    };

    let mut masses = Vec::with_capacity(size as usize);
    for key in 0..size as usize {
        let slack = rounding_slack(1.0, 2 * space.radix() as usize * n + 4);
        let c = CertifiedValue::new(values[key], errors[key] + slack).clamp_probability();
        values[key] = c.value;
        errors[key] = c.error;
        masses.push((key as u64, c));
    }
    let total = CertifiedValue::sum(masses.iter().map(|(_, v)| *v));
    let remainder = matches!(law, Law::Gcd { .. })
        .then(|| CertifiedValue::sum(masses.iter().filter(|(k, _)| space.has_overflow(*k)).map(|(_, v)| *v)));
    Ok(LimitDistribution { window: window.clone(), law, d, masses, remainder, total })
}

/// The zeta pmf `g ↦ g^{-d}/ζ(d)` for `g ≤ cap`, and the remaining mass.
pub fn zeta_pmf(d: u32, cap: u64, eps: f64) -> Result<(Vec<CertifiedValue>, CertifiedValue)> {
    if cap == 0 {
        return Err(Error::param("cap must be at least 1"));
    }
    let z = zeta(d, eps)?;
    let inv = z.recip();
    let pmf: Vec<CertifiedValue> = (1..=cap)
        .map(|g| {
            let w = (g as f64).powi(-(d as i32));
            let v = w * inv.value;
            CertifiedValue::new(v, w * inv.error + rounding_slack(v, 2))
        })
        .collect();
    let head = CertifiedValue::sum(pmf.iter().copied());
    let rem = CertifiedValue::new(1.0 - head.value, head.error + rounding_slack(1.0, 2)).clamp_probability();
    Ok((pmf, rem))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[i64]) -> LatticePoint {
        LatticePoint(c.to_vec())
    }

    #[test]
    fn residue_counts() {
        assert_eq!(residue_count(&[pt(&[0, 0]), pt(&[1, 0])], 2, 1), 2);
        assert_eq!(residue_count(&[pt(&[0, 0]), pt(&[2, 0])], 2, 1), 1);
        assert_eq!(residue_count(&[pt(&[0, 0]), pt(&[2, 0])], 2, 2), 2);
        assert_eq!(residue_count(&[], 3, 1), 0);
    }

    #[test]
    fn single_point_is_inverse_zeta() {
        let v = prob_all_white(&[pt(&[0, 0])], 2, 1e-8).unwrap();
        let z = zeta(2, 1e-12).unwrap().recip();
        assert!((v.value - z.value).abs() <= v.error + z.error + 1e-12, "{v:?}");
        assert_eq!(prob_all_white(&[], 2, 1e-8).unwrap(), CertifiedValue::ONE);
    }

    #[test]
    fn d1_is_degenerate() {
        assert_eq!(prob_all_white(&[pt(&[0])], 1, 1e-6).unwrap(), CertifiedValue::ZERO);
        let all_black = CopCylinder::new(vec![], vec![pt(&[0]), pt(&[1])]).unwrap();
        assert!(prob_cop_cylinder(&all_black, 1, 1e-6).unwrap().contains(1.0));
    }

    #[test]
    fn two_adjacent_points() {
        let v = prob_all_white(&[pt(&[0, 0]), pt(&[1, 0])], 2, 1e-8).unwrap();
        assert!((v.value - 0.32263).abs() < 1e-5, "{v:?}");
    }

    #[test]
    fn cylinder_total_probability() {
        let a = pt(&[0, 0]);
        let b = pt(&[1, 0]);
        let mut total = 0.0;
        for mask in 0..4 {
            let (mut w, mut bl) = (vec![], vec![]);
            for (i, p) in [&a, &b].into_iter().enumerate() {
                if mask >> i & 1 == 1 { w.push(p.clone()) } else { bl.push(p.clone()) }
            }
            total += prob_cop_cylinder(&CopCylinder::new(w, bl).unwrap(), 2, 1e-6).unwrap().value;
        }
        assert!((total - 1.0).abs() <= 4e-6);
    }

    #[test]
    fn black_budget_enforced() {
        let black: Vec<_> = (0..21).map(|i| pt(&[i, 0])).collect();
        let err = prob_cop_cylinder(&CopCylinder::new(vec![], black).unwrap(), 2, 1e-3).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn gcd_single_point_zeta_pmf() {
        let (pmf, _) = zeta_pmf(2, 12, 1e-12).unwrap();
        for g in 1..=12u64 {
            let cyl = GcdCylinder::new(vec![(pt(&[0, 0]), g)]).unwrap();
            let v = prob_gcd_cylinder(&cyl, 2, 1e-8).unwrap();
            let z = pmf[g as usize - 1];
            assert!((v.value - z.value).abs() <= v.error + z.error + 1e-12, "g={g}: {v:?} vs {z:?}");
        }
    }

    #[test]
    fn gcd_prime_count_matches_formula() {
        // one point: p^d − 1 residues mod p^{e+1}, i.e. mass p^{-de}(1 − p^{-d})
        for p in [2u64, 3] {
            for e in 0..=2u32 {
                for d in 2..=3usize {
                    let zero = vec![0i64; d];
                    let (count, emax) = gcd_prime_count(&[&zero], &[e], p, d).unwrap();
                    assert_eq!(emax, e);
                    assert_eq!(count, p.pow(d as u32) - 1, "p={p} e={e} d={d}");
                }
            }
        }
    }

    #[test]
    fn gcd_budget_names_prime() {
        let cyl = GcdCylinder::new(vec![(pt(&[0, 0]), 4099)]).unwrap();
        match prob_gcd_cylinder(&cyl, 2, 1e-6) {
            Err(Error::Budget(msg)) => assert!(msg.contains("4099")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kfree_examples() {
        let one = [pt(&[0, 0])];
        let k1 = prob_kfree_cylinder(&one, &[], 1, 2, 1e-8).unwrap();
        let cop = prob_all_white(&one, 2, 1e-8).unwrap();
        assert_eq!(k1, CopCylinder::new(one.to_vec(), vec![]).map(|c| prob_cop_cylinder(&c, 2, 1e-8).unwrap()).unwrap());
        assert!((k1.value - cop.value).abs() <= k1.error + cop.error);
        let k2 = prob_kfree_cylinder(&one, &[], 2, 2, 1e-9).unwrap();
        let z4 = zeta(4, 1e-13).unwrap().recip();
        assert!((k2.value - z4.value).abs() <= k2.error + z4.error + 1e-9);
        assert!((k2.value - 0.92394).abs() < 1e-5);
        assert_eq!(prob_kfree_cylinder(&[], &[], 2, 2, 1e-9).unwrap(), CertifiedValue::ONE);
    }

    #[test]
    fn kfree_predicate() {
        assert!(is_kfree(1, 2));
        assert!(is_kfree(12, 3));
        assert!(!is_kfree(12, 2));
        assert!(!is_kfree(0, 2));
        assert!(is_kfree(30, 2));
        assert!(!is_kfree(8, 3));
        assert!(is_kfree(1, 1));
        assert!(!is_kfree(2, 1));
    }

    #[test]
    fn cop_distribution_one_point() {
        let w = Window::origin(2);
        let dist = limit_cylinder_distribution(&w, Law::Cop, 2, 1e-8).unwrap();
        let s = dist.space();
        let white = dist.mass(s.encode_cells(&[Cell::White]).unwrap());
        let black = dist.mass(s.encode_cells(&[Cell::Black]).unwrap());
        assert!((white.value - 0.607_927_1).abs() < 1e-6);
        assert!((black.value - 0.392_072_9).abs() < 1e-6);
        assert!((dist.total.value - 1.0).abs() <= dist.total.error + 1e-12);
    }

    #[test]
    fn gcd_distribution_one_point_remainder() {
        let w = Window::origin(2);
        let dist = limit_cylinder_distribution(&w, Law::Gcd { cap: 10 }, 2, 1e-8).unwrap();
        let (pmf, rem) = zeta_pmf(2, 10, 1e-12).unwrap();
        for g in 1..=10u64 {
            let m = dist.mass(g);
            assert!((m.value - pmf[g as usize - 1].value).abs() <= m.error + 1e-10);
        }
        let r = dist.remainder.unwrap();
        assert!((r.value - rem.value).abs() <= r.error + rem.error + 1e-10, "{r:?} vs {rem:?}");
    }

    #[test]
    fn pattern_codec_roundtrip() {
        let s = PatternSpace::new(Law::Gcd { cap: 10 }, 3).unwrap();
        for key in [0u64, 1, 17, 1330] {
            assert_eq!(s.encode_cells(&s.decode(key)).unwrap(), key);
        }
        let c = PatternSpace::new(Law::Cop, 4).unwrap();
        assert_eq!(c.format(0b1010), "WBWB");
        assert_eq!(s.format(1 * 121 + 0 * 11 + 3), "1,over,3");
    }

    #[test]
    fn valuation_vectors() {
        let v = ValuationVector::of(360);
        assert_eq!(v.exponent(2), 3);
        assert_eq!(v.exponent(3), 2);
        assert_eq!(v.exponent(5), 1);
        assert_eq!(v.value(), Some(360));
        assert_eq!(ValuationVector::of(1).primes(), Vec::<u64>::new());
    }
}
