//! The visibility graphon on `∏_p (Z/p)^d`, graph sampling, homomorphism
//! densities, the joint local/graphon law and the subdivided-square figure.
//!
//! A graphon point is the level-1 digit vector of a Haar point, i.e. the
//! residues `X(p) ∈ (Z/p)^d` drawn by [`digit_vector`] at level 1. Two points
//! are adjacent iff their residues differ at every prime.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::certified::{rounding_slack, CertifiedValue};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::lattice::{gcd_coords, prime_table, prime_tail_bound, truncation_prime, LatticePoint, Region, Window};
use crate::rng::{digit_coordinate0, digit_vector, domain, Seed, Substream};

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        // in d = 1 every pair collides at some prime: the graphon is empty
        return Err(Error::param("graphon operations need d >= 2"));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::param("eps must be positive"));
    }
    Ok(())
}

/// Smallest prime with `pairs · Σ_{p>P} p^{-d} ≤ eps`.
fn pair_truncation(pairs: usize, d: usize, eps: f64) -> Result<u64> {
    check_eps(eps)?;
    truncation_prime(eps / pairs.max(1) as f64, d as u32)
        .ok_or_else(|| Error::budget(format!("eps = {eps:e} needs primes beyond the prime table")))
}

/// A point of `∏_p (Z/p)^d`.
///
/// Residues are pure functions of the seed. `extend_to` caches them for a
/// prefix of the primes; uncached primes are computed on demand, so raising
/// the precision refines the point and never resamples it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphonPoint {
    pub d: usize,
    pub seed: Seed,
    /// Residues at `prime_table()[..cached.len() / d]`, flattened.
    cached: Vec<u64>,
}

impl GraphonPoint {
    pub fn new(d: usize, seed: Seed) -> Self {
        GraphonPoint { d, seed, cached: Vec::new() }
    }

    pub fn cached_primes(&self) -> usize {
        self.cached.len() / self.d
    }

    /// Caches the residues at every prime `≤ max_prime`.
    pub fn extend_to(&mut self, max_prime: u64) {
        let table = prime_table();
        let n = table.partition_point(|&p| p <= max_prime);
        let mut buf = vec![0; self.d];
        for &p in &table[self.cached_primes().min(n)..n] {
            digit_vector(self.seed, p, 1, &mut buf);
            self.cached.extend_from_slice(&buf);
        }
    }

    /// `X(p)` for the `i`-th prime `p`.
    fn residue_at(&self, i: usize, p: u64, out: &mut [u64]) {
        if i < self.cached_primes() {
            out.copy_from_slice(&self.cached[i * self.d..(i + 1) * self.d]);
        } else {
            digit_vector(self.seed, p, 1, out);
        }
    }

    fn coordinate0_at(&self, i: usize, p: u64) -> u64 {
        if i < self.cached_primes() {
            self.cached[i * self.d]
        } else {
            digit_coordinate0(self.seed, p, 1)
        }
    }

    /// `X(p)` for a prime `p`.
    pub fn residue(&self, p: u64) -> Vec<u64> {
        let i = prime_table().partition_point(|&q| q < p);
        let mut out = vec![0; self.d];
        if prime_table().get(i) == Some(&p) {
            self.residue_at(i, p, &mut out);
        } else {
            digit_vector(self.seed, p, 1, &mut out);
        }
        out
    }
}

/// Value of the graphon kernel on a pair of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "delta", rename_all = "snake_case")]
pub enum Delta {
    /// Residues agree at `prime`: the kernel is exactly 0.
    Collision { prime: u64 },
    /// No collision up to `truncation_prime`: the kernel is 1 up to a
    /// one-sided error `≤ error`.
    Distinct { truncation_prime: u64, error: f64 },
}

impl Delta {
    pub fn value(&self) -> u8 {
        match self {
            Delta::Collision { .. } => 0,
            Delta::Distinct { .. } => 1,
        }
    }
}

/// Scans primes upward for a collision; one-sided error `≤ eps`.
pub fn graphon_delta(x1: &GraphonPoint, x2: &GraphonPoint, eps: f64) -> Result<Delta> {
    if x1.d != x2.d {
        return Err(Error::param("graphon points of different dimension"));
    }
    check_dim(x1.d)?;
    let max_prime = pair_truncation(1, x1.d, eps)?;
    let (mut a, mut b) = (vec![0; x1.d], vec![0; x1.d]);
    for (i, &p) in prime_table().iter().take_while(|&&p| p <= max_prime).enumerate() {
        if x1.coordinate0_at(i, p) != x2.coordinate0_at(i, p) {
            continue;
        }
        x1.residue_at(i, p, &mut a);
        x2.residue_at(i, p, &mut b);
        if a == b {
            return Ok(Delta::Collision { prime: p });
        }
    }
    Ok(Delta::Distinct { truncation_prime: max_prime, error: prime_tail_bound(max_prime, x1.d as u32) })
}

/// An undirected graph without loops, stored as adjacency bit rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleGraph {
    k: usize,
    words: usize,
    rows: Vec<u64>,
}

impl SimpleGraph {
    pub fn empty(k: usize) -> Self {
        let words = k.div_ceil(64);
        SimpleGraph { k, words, rows: vec![0; k * words] }
    }

    pub fn complete(k: usize) -> Self {
        let mut g = SimpleGraph::empty(k);
        for i in 0..k {
            for j in i + 1..k {
                g.set(i, j, true);
            }
        }
        g
    }

    pub fn from_edges(k: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = SimpleGraph::empty(k);
        for &(i, j) in edges {
            if i >= k || j >= k {
                return Err(Error::param(format!("edge ({i},{j}) out of range for {k} vertices")));
            }
            if i == j {
                return Err(Error::param("loops are not allowed"));
            }
            g.set(i, j, true);
        }
        Ok(g)
    }

    pub fn edge() -> Self {
        SimpleGraph::complete(2)
    }

    pub fn triangle() -> Self {
        SimpleGraph::complete(3)
    }

    pub fn vertices(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.rows[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    /// Sets or clears `{i, j}`; loops are ignored.
    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        if i == j {
            return;
        }
        for (a, b) in [(i, j), (j, i)] {
            let w = &mut self.rows[a * self.words + b / 64];
            if on {
                *w |= 1 << (b % 64);
            } else {
                *w &= !(1 << (b % 64));
            }
        }
    }

    pub fn edge_count(&self) -> u64 {
        self.rows.iter().map(|w| w.count_ones() as u64).sum::<u64>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.k {
            for j in i + 1..self.k {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn pairs(&self) -> u64 {
        let k = self.k as u64;
        k * k.saturating_sub(1) / 2
    }

    /// Edge count over `C(k,2)` with its binomial standard error.
    pub fn edge_density(&self) -> Estimate {
        Estimate::from_counts(self.edge_count(), self.pairs())
    }
}

impl Serialize for SimpleGraph {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SimpleGraph", 2)?;
        st.serialize_field("vertices", &self.k)?;
        st.serialize_field("edges", &self.edges())?;
        st.end()
    }
}

/// A Bernoulli frequency with binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let n = trials.max(1) as f64;
        let value = successes as f64 / n;
        Estimate { successes, trials, value, std_err: (value * (1.0 - value) / n).sqrt() }
    }

    /// `|value − target| ≤ z·σ + slack`.
    pub fn agrees_with(&self, target: f64, z: f64, slack: f64) -> bool {
        (self.value - target).abs() <= z * self.std_err + slack
    }
}

/// A graphon sample together with its truncation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphonGraph {
    pub graph: SimpleGraph,
    pub truncation_prime: u64,
    /// Total variation bound `C(k,2)·Σ_{p>P} p^{-d}`.
    pub tv_bound: f64,
}

/// `k` independent graphon points, adjacency by [`graphon_delta`] at error `eps` per pair.
///
/// Edges are found prime by prime: vertices are bucketed by their residue at
/// `p` and every pair inside a bucket is removed. This is the same graph as
/// the pairwise scan, at `O(k)` residue draws per prime.
pub fn sample_graphon_graph(k: usize, d: usize, eps: f64, seed: Seed) -> Result<GraphonGraph> {
    check_dim(d)?;
    if k < 2 {
        return Err(Error::param("graphon graphs need k >= 2"));
    }
    if k > u32::MAX as usize {
        return Err(Error::budget("too many vertices"));
    }
    let max_prime = pair_truncation(1, d, eps)?;
    let seeds: Vec<Seed> = (0..k).map(|i| seed.child(domain::VERTEX, i as u64)).collect();
    let primes: Vec<u64> = prime_table().iter().copied().take_while(|&p| p <= max_prime).collect();

    let collisions: Vec<Vec<(u32, u32)>> = primes
        .par_chunks(64)
        .map(|chunk| {
            let mut out = Vec::new();
            let mut keyed: Vec<(u64, u32)> = Vec::with_capacity(k);
            let mut full = Vec::new();
            for &p in chunk {
                keyed.clear();
                keyed.extend(seeds.iter().enumerate().map(|(i, &s)| (digit_coordinate0(s, p, 1), i as u32)));
                keyed.sort_unstable();
                for run in keyed.chunk_by(|a, b| a.0 == b.0).filter(|r| r.len() > 1) {
                    full.clear();
                    full.extend(run.iter().map(|&(_, v)| {
                        let mut r = vec![0; d];
                        digit_vector(seeds[v as usize], p, 1, &mut r);
                        (r, v)
                    }));
                    full.sort_unstable();
                    for group in full.chunk_by(|a, b| a.0 == b.0) {
                        for (x, a) in group.iter().enumerate() {
                            for b in &group[x + 1..] {
                                out.push((a.1, b.1));
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();

    let mut graph = SimpleGraph::complete(k);
    for (a, b) in collisions.into_iter().flatten() {
        graph.set(a as usize, b as usize, false);
    }
    let pairs = graph.pairs() as f64;
    Ok(GraphonGraph { graph, truncation_prime: max_prime, tv_bound: pairs * prime_tail_bound(max_prime, d as u32) })
}

/// `k` uniform points of `r·region` (with replacement), adjacent iff their
/// difference is coprime. Repeated points are not adjacent.
pub fn lattice_visibility_graph(region: &Region, r: Ratio<i64>, k: usize, seed: Seed) -> Result<SimpleGraph> {
    let scaled = region.scale(r)?;
    if scaled.len()? < k as u64 {
        return Err(Error::param(format!("region has fewer than {k} points")));
    }
    let mut rng = Substream::new(seed, domain::ANCHOR, 0, 0);
    let points: Vec<LatticePoint> = (0..k).map(|_| LatticePoint(scaled.sample_uniform(&mut rng))).collect();
    let mut g = SimpleGraph::empty(k);
    for i in 0..k {
        for j in i + 1..k {
            let diff = points[i].checked_sub(&points[j].0)?;
            g.set(i, j, gcd_coords(&diff.0) == 1);
        }
    }
    Ok(g)
}

/// Probability that `n` graphon points are pairwise adjacent:
/// `∏_p ∏_{j<n} (1 − j p^{-d})`.
///
/// For `n = 2` this is `1/ζ(d)`. Each factor beyond the truncation prime is
/// at least `1 − C(n,2) p^{-d}`, which gives the enclosure.
pub fn clique_density(n: usize, d: usize, eps: f64) -> Result<CertifiedValue> {
    check_dim(d)?;
    check_eps(eps)?;
    if n <= 1 {
        return Ok(CertifiedValue::ONE);
    }
    let c = (n * (n - 1) / 2) as f64;
    let max_prime = truncation_prime(eps / c, d as u32).unwrap_or(*prime_table().last().expect("primes"));
    let mut v = 1.0f64;
    let mut ops = 0;
    for &p in prime_table().iter().take_while(|&&p| p <= max_prime) {
        let q = (p as f64).powi(-(d as i32));
        for j in 1..n {
            v *= 1.0 - j as f64 * q;
            ops += 2;
        }
        if v <= 0.0 {
            return Ok(CertifiedValue::ZERO);
        }
    }
    let tail = c * prime_tail_bound(max_prime, d as u32);
    let slack = rounding_slack(v, ops);
    Ok(CertifiedValue::from_interval(v * (1.0 - tail.min(1.0)) - slack, v + slack))
}

/// Where homomorphism-density samples come from.
#[derive(Debug, Clone)]
pub enum DensitySource {
    /// Uniform points of `r·region`, adjacency by coprime difference.
    Lattice { region: Region, r: Ratio<i64> },
    /// Independent graphon points in dimension `d`.
    Graphon { d: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomDensity {
    pub source: &'static str,
    pub d: usize,
    pub pattern: SimpleGraph,
    /// Probability that every pattern edge is present among the sampled vertices.
    pub hom: Estimate,
    /// Probability that the sampled graph equals the pattern.
    pub induced: Estimate,
    /// Graphon source: primes used per trial, and the resulting bias bound.
    pub truncation_prime: Option<u64>,
    pub bias_bound: f64,
}

/// Adjacency bits of the pairs of `n ≤ 4` vertices, pair `(i,j)` at bit `pair_bit(i,j)`.
fn pair_bit(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Adjacency bitmask of `n` graphon points, residues scanned up to `max_prime`.
fn graphon_adjacency(seeds: &[Seed], d: usize, max_prime: u64) -> u32 {
    let n = seeds.len();
    let mut alive: u32 = (1 << (n * (n - 1) / 2)) - 1;
    let mut c0 = [0u64; 4];
    let mut full: [Option<Vec<u64>>; 4] = Default::default();
    for &p in prime_table().iter().take_while(|&&p| p <= max_prime) {
        if alive == 0 {
            break;
        }
        for (c, &s) in c0.iter_mut().zip(seeds) {
            *c = digit_coordinate0(s, p, 1);
        }
        full.iter_mut().for_each(|f| *f = None);
        for i in 0..n {
            for j in i + 1..n {
                let bit = 1 << pair_bit(i, j, n);
                if alive & bit == 0 || c0[i] != c0[j] {
                    continue;
                }
                for v in [i, j] {
                    if full[v].is_none() {
                        let mut r = vec![0; d];
                        digit_vector(seeds[v], p, 1, &mut r);
                        full[v] = Some(r);
                    }
                }
                if full[i] == full[j] {
                    alive &= !bit;
                }
            }
        }
    }
    alive
}

/// Injective homomorphism and induced densities of a pattern on at most 4 vertices.
///
/// Each trial draws fresh vertices. For the graphon source `eps` bounds the
/// total truncation bias of one trial.
pub fn homomorphism_density(pattern: &SimpleGraph, source: &DensitySource, trials: usize, eps: f64, seed: Seed) -> Result<HomDensity> {
    let n = pattern.vertices();
    if n == 0 || n > 4 {
        return Err(Error::param("patterns need 1 to 4 vertices"));
    }
    if trials < 1000 {
        return Err(Error::param("homomorphism densities need at least 1000 trials"));
    }
    let npairs = n * (n - 1) / 2;
    let mut want = 0u32;
    for (i, j) in pattern.edges() {
        want |= 1 << pair_bit(i, j, n);
    }

    enum Prepared {
        Lattice(crate::lattice::ScaledRegion),
        Graphon(u64),
    }
    let (prepared, d, truncation, bias) = match source {
        DensitySource::Lattice { region, r } => {
            let scaled = region.scale(*r)?;
            let d = scaled.dim();
            (Prepared::Lattice(scaled), d, None, 0.0)
        }
        &DensitySource::Graphon { d } => {
            check_dim(d)?;
            let p = pair_truncation(npairs, d, eps)?;
            let bias = if npairs == 0 { 0.0 } else { npairs as f64 * prime_tail_bound(p, d as u32) };
            (Prepared::Graphon(p), d, Some(p), bias)
        }
    };

    let adjacency = |t: usize| -> Result<u32> {
        let s = seed.child(domain::TRIAL, t as u64);
        match &prepared {
            Prepared::Graphon(p) => {
                let seeds: Vec<Seed> = (0..n).map(|i| s.child(domain::VERTEX, i as u64)).collect();
                Ok(graphon_adjacency(&seeds, d, *p))
            }
            Prepared::Lattice(scaled) => {
                let mut rng = Substream::new(s, domain::ANCHOR, 0, 0);
                let pts: Vec<LatticePoint> = (0..n).map(|_| LatticePoint(scaled.sample_uniform(&mut rng))).collect();
                let mut bits = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if gcd_coords(&pts[i].checked_sub(&pts[j].0)?.0) == 1 {
                            bits |= 1 << pair_bit(i, j, n);
                        }
                    }
                }
                Ok(bits)
            }
        }
    };

    let (hom, induced) = (0..trials)
        .into_par_iter()
        .map(|t| adjacency(t).map(|a| ((a & want == want) as u64, (a == want) as u64)))
        .try_reduce(|| (0, 0), |x, y| Ok((x.0 + y.0, x.1 + y.1)))?;
    Ok(HomDensity {
        source: match source {
            DensitySource::Lattice { .. } => "lattice",
            DensitySource::Graphon { .. } => "graphon",
        },
        d,
        pattern: pattern.clone(),
        hom: Estimate::from_counts(hom, trials as u64),
        induced: Estimate::from_counts(induced, trials as u64),
        truncation_prime: truncation,
        bias_bound: bias,
    })
}

/// One coordinate `{(m_a, y_a), (m_b, y_b)}` of the joint law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateRecord {
    pub a: usize,
    pub b: usize,
    pub same_anchor: bool,
    pub lattice: f64,
    pub graphon: f64,
    pub tv: f64,
}

/// Joint law of two coordinates; outcomes ordered `00, 01, 10, 11`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMarginalRecord {
    pub first: usize,
    pub second: usize,
    pub lattice: [f64; 4],
    pub graphon: [f64; 4],
    pub tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointReport {
    pub anchors: usize,
    pub radius: usize,
    pub d: usize,
    /// Index → (anchor, window offset).
    pub points: Vec<(usize, LatticePoint)>,
    pub lattice_trials: usize,
    pub graphon_trials: usize,
    pub truncation_prime: u64,
    /// Bound on the total variation between truncated and exact graphon samples.
    pub tv_bound: f64,
    pub coordinates: Vec<CoordinateRecord>,
    pub pairs: Vec<PairMarginalRecord>,
    pub max_single_tv: f64,
    pub max_pair_tv: f64,
    /// Same-anchor coordinates equalled `is_coprime(y_a − y_b)` in every sample.
    pub same_anchor_deterministic: bool,
}

/// Compares the visibility pattern around `M` uniform lattice anchors with
/// the one generated by `M` graphon points, on every single coordinate and
/// on 10 random coordinate pairs.
///
/// A coordinate is an unordered pair of indices `(m, y)`, `y ∈ [−R, R]^d`.
/// In the graphon, indices `(m0, y0)`, `(m1, y1)` with `m0 ≠ m1` are
/// adjacent iff `X_{m0}(p) − X_{m1}(p) ≢ y1 − y0 (mod p)` for every prime.
#[allow(clippy::too_many_arguments)]
pub fn joint_local_graphon(
    anchors: usize,
    radius: usize,
    region: &Region,
    r: Ratio<i64>,
    lattice_trials: usize,
    graphon_trials: usize,
    eps: f64,
    seed: Seed,
) -> Result<JointReport> {
    let d = region.dim();
    check_dim(d)?;
    if anchors == 0 || radius > 1 || anchors > 2 {
        return Err(Error::budget("joint laws are limited to M <= 2 anchors and R <= 1"));
    }
    if lattice_trials < 10_000 || graphon_trials < 10_000 {
        return Err(Error::param("joint laws need at least 10^4 trials per side"));
    }
    let scaled = region.scale(r)?;
    let rr = radius as i64;
    let window = Window::box_window(&vec![-rr; d], &vec![rr; d])?;
    let points: Vec<(usize, LatticePoint)> =
        (0..anchors).flat_map(|m| window.offsets().iter().map(move |y| (m, y.clone()))).collect();
    let n = points.len();
    let coords: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let n_cross = coords.iter().filter(|&&(a, b)| points[a].0 != points[b].0).count();

    // differences y_b − y_a range over [−2R, 2R]^d
    let dwin = Window::box_window(&vec![-2 * rr; d], &vec![2 * rr; d])?;
    let diff_index = |a: usize, b: usize| -> usize {
        let v: Vec<i64> = points[b].1 .0.iter().zip(&points[a].1 .0).map(|(x, y)| x - y).collect();
        dwin.index_of(&LatticePoint(v)).expect("difference in range")
    };
    let cross_diff: Vec<Option<usize>> =
        coords.iter().map(|&(a, b)| (points[a].0 != points[b].0).then(|| diff_index(a, b))).collect();
    let deterministic: Vec<bool> = coords
        .iter()
        .map(|&(a, b)| gcd_coords(&points[a].1.checked_sub(&points[b].1 .0).expect("small").0) == 1)
        .collect();

    let mut pick = Substream::new(seed, domain::SELECT, 0, 0);
    let mut selected = Vec::new();
    while selected.len() < 10.min(coords.len() * (coords.len() - 1) / 2) {
        let i = pick.below(coords.len() as u64) as usize;
        let j = pick.below(coords.len() as u64) as usize;
        let (i, j) = (i.min(j), i.max(j));
        if i != j && !selected.contains(&(i, j)) {
            selected.push((i, j));
        }
    }

    let max_prime = pair_truncation(n_cross.max(1), d, eps)?;
    let tv_bound = n_cross as f64 * prime_tail_bound(max_prime, d as u32);

    struct Tally {
        singles: Vec<u64>,
        pairs: Vec<[u64; 4]>,
        deterministic: bool,
    }
    let tally = |values: &[bool], t: &mut Tally| {
        for (k, &v) in values.iter().enumerate() {
            t.singles[k] += v as u64;
            if cross_diff[k].is_none() && v != deterministic[k] {
                t.deterministic = false;
            }
        }
        for (s, &(i, j)) in t.pairs.iter_mut().zip(&selected) {
            s[2 * values[i] as usize + values[j] as usize] += 1;
        }
    };
    let new_tally = || Tally { singles: vec![0; coords.len()], pairs: vec![[0; 4]; selected.len()], deterministic: true };
    let merge = |mut x: Tally, y: Tally| {
        x.singles.iter_mut().zip(&y.singles).for_each(|(a, b)| *a += b);
        for (a, b) in x.pairs.iter_mut().zip(&y.pairs) {
            a.iter_mut().zip(b).for_each(|(u, v)| *u += v);
        }
        x.deterministic &= y.deterministic;
        x
    };

    let lattice: Tally = (0..lattice_trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<bool>> {
            let mut rng = Substream::new(seed.child(domain::TRIAL, t as u64), domain::ANCHOR, 0, 0);
            let xs: Vec<LatticePoint> = (0..anchors).map(|_| LatticePoint(scaled.sample_uniform(&mut rng))).collect();
            let shifted: Vec<LatticePoint> =
                points.iter().map(|(m, y)| xs[*m].checked_add(&y.0)).collect::<Result<_>>()?;
            coords
                .iter()
                .map(|&(a, b)| Ok(gcd_coords(&shifted[a].checked_sub(&shifted[b].0)?.0) == 1))
                .collect()
        })
        .try_fold(new_tally, |mut acc, v| {
            tally(&v?, &mut acc);
            Ok::<_, Error>(acc)
        })
        .try_reduce(new_tally, |x, y| Ok(merge(x, y)))?;

    let primes: Vec<u64> = prime_table().iter().copied().take_while(|&p| p <= max_prime).collect();
    let graphon: Tally = (0..graphon_trials)
        .into_par_iter()
        .map(|t| {
            let s = seed.child(domain::TRIAL ^ domain::VERTEX, t as u64);
            let seeds: Vec<Seed> = (0..anchors).map(|m| s.child(domain::VERTEX, m as u64)).collect();
            // collided[diff] for the anchor pair (0, 1)
            let mut collided = vec![false; dwin.len()];
            if anchors == 2 {
                let (mut u, mut v) = (vec![0i64; d], vec![0i64; d]);
                let mut buf = vec![0u64; d];
                for &p in &primes {
                    let pi = p as i64;
                    let z0 = (digit_coordinate0(seeds[0], p, 1) as i64 - digit_coordinate0(seeds[1], p, 1) as i64)
                        .rem_euclid(pi);
                    // X0 − X1 ≡ y_b − y_a, coordinate 0 first
                    let centred = if z0 > pi / 2 { z0 - pi } else { z0 };
                    if pi > 4 * rr && centred.abs() > 2 * rr {
                        continue;
                    }
                    digit_vector(seeds[0], p, 1, &mut buf);
                    u.iter_mut().zip(&buf).for_each(|(a, &b)| *a = b as i64);
                    digit_vector(seeds[1], p, 1, &mut buf);
                    v.iter_mut().zip(&buf).for_each(|(a, &b)| *a = b as i64);
                    for (k, o) in dwin.offsets().iter().enumerate() {
                        if (0..d).all(|i| (u[i] - v[i] - o.0[i]).rem_euclid(pi) == 0) {
                            collided[k] = true;
                        }
                    }
                }
            }
            coords
                .iter()
                .enumerate()
                .map(|(k, _)| match cross_diff[k] {
                    Some(di) => !collided[di],
                    None => deterministic[k],
                })
                .collect::<Vec<bool>>()
        })
        .fold(new_tally, |mut acc, v| {
            tally(&v, &mut acc);
            acc
        })
        .reduce(new_tally, merge);

    let (lt, gt) = (lattice_trials as f64, graphon_trials as f64);
    let coordinates: Vec<CoordinateRecord> = coords
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let (l, g) = (lattice.singles[k] as f64 / lt, graphon.singles[k] as f64 / gt);
            CoordinateRecord { a, b, same_anchor: cross_diff[k].is_none(), lattice: l, graphon: g, tv: (l - g).abs() }
        })
        .collect();
    let pairs: Vec<PairMarginalRecord> = selected
        .iter()
        .enumerate()
        .map(|(s, &(i, j))| {
            let l = lattice.pairs[s].map(|c| c as f64 / lt);
            let g = graphon.pairs[s].map(|c| c as f64 / gt);
            let tv = 0.5 * l.iter().zip(&g).map(|(x, y)| (x - y).abs()).sum::<f64>();
            PairMarginalRecord { first: i, second: j, lattice: l, graphon: g, tv }
        })
        .collect();
    Ok(JointReport {
        anchors,
        radius,
        d,
        points,
        lattice_trials,
        graphon_trials,
        truncation_prime: max_prime,
        tv_bound,
        max_single_tv: coordinates.iter().map(|c| c.tv).fold(0.0, f64::max),
        max_pair_tv: pairs.iter().map(|c| c.tv).fold(0.0, f64::max),
        coordinates,
        pairs,
        same_anchor_deterministic: lattice.deterministic && graphon.deterministic,
    })
}

/// The largest supported figure depth (primes 2 to 13).
pub const MAX_FIGURE_DEPTH: usize = 6;

/// Residue digit of the axis pixel centre `u = (2i+1)/(2N)` at each level.
///
/// The unit interval is read as a mixed-radix expansion, most significant
/// level first: level `n` has radix `p_n^d`, so the level-`n` digit is
/// `⌊u·M_n⌋ mod p_n^d` with `M_n = ∏_{m≤n} p_m^d`.
pub fn figure_axis_digits(depth: usize, pixels: usize, d: usize) -> Result<Vec<Vec<u64>>> {
    if depth == 0 || depth > MAX_FIGURE_DEPTH {
        return Err(Error::param(format!("figure depth must be between 1 and {MAX_FIGURE_DEPTH}")));
    }
    if pixels == 0 || d == 0 || d > 3 {
        return Err(Error::param("figures need at least one pixel and 1 <= d <= 3"));
    }
    let radices: Vec<u128> = prime_table()[..depth].iter().map(|&p| (p as u128).pow(d as u32)).collect();
    let n2 = 2 * pixels as u128;
    Ok((0..pixels as u128)
        .map(|i| {
            let mut m = 1u128;
            radices
                .iter()
                .map(|&rad| {
                    m *= rad;
                    ((2 * i + 1) * m / n2 % rad) as u64
                })
                .collect()
        })
        .collect())
}

/// The subdivided unit square: pixel `(x, y)` is black iff the two axis
/// positions share a residue digit at some level `≤ depth`.
pub fn render_graphon_figure(depth: usize, pixels: usize, d: usize) -> Result<Image> {
    if (pixels as u64).checked_mul(pixels as u64).map_or(true, |n| n > 1 << 28) {
        return Err(Error::budget("figure too large"));
    }
    let digits = figure_axis_digits(depth, pixels, d)?;
    let white: Vec<bool> = (0..pixels)
        .into_par_iter()
        .flat_map_iter(|y| {
            let dy = &digits[y];
            digits.iter().map(move |dx| dx.iter().zip(dy).all(|(a, b)| a != b))
        })
        .collect();
    Image::from_mask(pixels, pixels, &white)
}
