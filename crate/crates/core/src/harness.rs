//! Exact censuses over scaled regions and their comparison with the limit laws.

use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use serde::Serialize;

use crate::certified::CertifiedValue;
use crate::error::{Error, Result};
use crate::lattice::{gcd_coords, Region, ScaledRegion, Window};
use crate::limit_law::{limit_cylinder_distribution, zeta_pmf, Law, LimitDistribution, PatternSpace};

/// Pattern spaces up to this size are counted in a dense array.
const DENSE_PATTERNS: u64 = 1 << 16;

/// Exact pattern counts around every point of a region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternDistribution {
    pub window: Window,
    pub law: Law,
    /// Pattern key (see [`PatternSpace`]) → count; zero counts omitted.
    pub counts: BTreeMap<u64, u64>,
    pub total: u64,
}

#[derive(Serialize)]
struct PatternRow {
    pattern: String,
    count: u64,
    fraction: f64,
}

impl Serialize for PatternDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let space = self.space();
        let rows: Vec<PatternRow> = self
            .counts
            .iter()
            .map(|(&k, &c)| PatternRow { pattern: space.format(k), count: c, fraction: self.fraction(k) })
            .collect();
        let mut st = s.serialize_struct("PatternDistribution", 4)?;
        st.serialize_field("window", &self.window)?;
        st.serialize_field("law", &self.law)?;
        st.serialize_field("total", &self.total)?;
        st.serialize_field("patterns", &rows)?;
        st.end()
    }
}

impl PatternDistribution {
    pub fn space(&self) -> PatternSpace {
        PatternSpace { law: self.law, cells: self.window.len() }
    }

    pub fn count(&self, key: u64) -> u64 {
        self.counts.get(&key).copied().unwrap_or(0)
    }

    pub fn fraction(&self, key: u64) -> f64 {
        self.count(key) as f64 / self.total as f64
    }

    pub fn pmf(&self) -> BTreeMap<u64, f64> {
        self.counts.keys().map(|&k| (k, self.fraction(k))).collect()
    }
}

enum Counts {
    Dense(Vec<u64>),
    Sparse(HashMap<u64, u64>),
}

impl Counts {
    fn new(size: u64) -> Self {
        if size <= DENSE_PATTERNS {
            Counts::Dense(vec![0; size as usize])
        } else {
            Counts::Sparse(HashMap::new())
        }
    }

    #[inline]
    fn bump(&mut self, key: u64) {
        match self {
            Counts::Dense(v) => v[key as usize] += 1,
            Counts::Sparse(m) => *m.entry(key).or_insert(0) += 1,
        }
    }

    fn merge_into(self, out: &mut BTreeMap<u64, u64>) {
        match self {
            Counts::Dense(v) => {
                for (k, c) in v.into_iter().enumerate() {
                    if c > 0 {
                        *out.entry(k as u64).or_insert(0) += c;
                    }
                }
            }
            Counts::Sparse(m) => {
                for (k, c) in m {
                    *out.entry(k).or_insert(0) += c;
                }
            }
        }
    }
}

/// Rejects windows whose translates by region points would overflow `i64`.
fn check_translates(scaled: &ScaledRegion, window: &Window) -> Result<()> {
    let (rlo, rhi) = scaled.bounding_box();
    let (wlo, whi) = window.bounding_box();
    for i in 0..rlo.len() {
        let lo = rlo[i] as i128 + wlo[i] as i128;
        let hi = rhi[i] as i128 + whi[i] as i128;
        if lo < i64::MIN as i128 || hi > i64::MAX as i128 {
            return Err(Error::overflow("window translates leave the i64 range"));
        }
    }
    Ok(())
}

/// Sweeps every `Y ∈ scaled` and counts the window pattern of `Y + window`.
pub(crate) fn census_scaled(scaled: &ScaledRegion, window: &Window, law: Law) -> Result<PatternDistribution> {
    let d = scaled.dim();
    if window.dim() != d {
        return Err(Error::param(format!("window has dimension {}, region has {d}", window.dim())));
    }
    check_translates(scaled, window)?;
    let space = PatternSpace::new(law, window.len())?;
    let size = space.size().expect("validated");
    let radix = space.radix();
    let flat: Vec<i64> = window.offsets().iter().flat_map(|o| o.coords().iter().copied()).collect();

    let parts = scaled.par_fold(
        || (Counts::new(size), vec![0i64; d], 0u64),
        |(counts, buf, n), y| {
            let mut key = 0u64;
            for off in flat.chunks_exact(d) {
                for i in 0..d {
                    buf[i] = y[i] + off[i];
                }
                key = key * radix + space.digit(gcd_coords(buf));
            }
            counts.bump(key);
            *n += 1;
            Ok(())
        },
    )?;
    let mut counts = BTreeMap::new();
    let mut total = 0;
    for (c, _, n) in parts {
        c.merge_into(&mut counts);
        total += n;
    }
    Ok(PatternDistribution { window: window.clone(), law, counts, total })
}

/// Exact distribution of the window pattern around a uniform point of `F_r`.
pub fn census_patterns(region: &Region, r: Ratio<i64>, window: &Window, law: Law) -> Result<PatternDistribution> {
    let scaled = region.scale(r)?;
    census_scaled(&scaled, window, law)
}

/// Residue counts of `F_r` modulo `n`, componentwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResidueCensus {
    pub modulus: u64,
    pub d: usize,
    /// Counts indexed by the residue vector in lexicographic order.
    pub counts: Vec<u64>,
    pub total: u64,
}

impl ResidueCensus {
    /// `max_c |count_c / (total/N^d) − 1|`.
    pub fn max_relative_deviation(&self) -> f64 {
        let expected = self.total as f64 / self.counts.len() as f64;
        self.counts.iter().map(|&c| (c as f64 / expected - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Largest residue table built by [`residue_census`].
pub const RESIDUE_BUDGET: u64 = 1 << 24;

pub fn residue_census(region: &Region, r: Ratio<i64>, n: u64) -> Result<ResidueCensus> {
    if n == 0 {
        return Err(Error::param("modulus must be at least 1"));
    }
    let scaled = region.scale(r)?;
    let d = scaled.dim();
    let cells = n.checked_pow(d as u32).filter(|&c| c <= RESIDUE_BUDGET).ok_or_else(|| {
        Error::budget(format!("{n}^{d} residue classes exceed {RESIDUE_BUDGET}"))
    })?;
    let m = n as i64;
    let parts = scaled.par_fold(
        || vec![0u64; cells as usize],
        |counts, x| {
            let idx = x.iter().fold(0u64, |acc, &c| acc * n + c.rem_euclid(m) as u64);
            counts[idx as usize] += 1;
            Ok(())
        },
    )?;
    let mut counts = vec![0u64; cells as usize];
    for part in parts {
        for (c, p) in counts.iter_mut().zip(part) {
            *c += p;
        }
    }
    let total = counts.iter().sum();
    Ok(ResidueCensus { modulus: n, d, counts, total })
}

/// `½ Σ |p − q|` over the union of supports.
pub fn tv_distance(p: &BTreeMap<u64, f64>, q: &BTreeMap<u64, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, a) in p {
        sum += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in q {
        if !p.contains_key(k) {
            sum += b.abs();
        }
    }
    (0.5 * sum).min(1.0)
}

/// Census-versus-limit total variation.
#[derive(Debug, Clone, Serialize)]
pub struct TvReport {
    pub tv: f64,
    /// The true distance to the limit law lies within `tv ± limit_error`.
    pub limit_error: f64,
    pub census_total: u64,
    pub patterns: usize,
}

pub fn compare_to_limit(census: &PatternDistribution, limit: &LimitDistribution) -> Result<TvReport> {
    if census.window != limit.window || census.law != limit.law {
        return Err(Error::WindowMismatch("census and limit use different windows or laws".into()));
    }
    Ok(TvReport {
        tv: tv_distance(&census.pmf(), &limit.pmf()),
        limit_error: 0.5 * limit.total_error(),
        census_total: census.total,
        patterns: limit.masses.len(),
    })
}

/// Exact gcd histogram of `F_r` against the zeta pmf.
#[derive(Debug, Clone, Serialize)]
pub struct GcdHistogramReport {
    pub d: usize,
    pub cap: u64,
    pub total: u64,
    /// Empirical pmf at `g = 1..=cap`.
    pub empirical: Vec<f64>,
    /// Fraction with gcd above `cap` (or gcd 0).
    pub empirical_overflow: f64,
    pub zeta: Vec<CertifiedValue>,
    pub zeta_remainder: CertifiedValue,
    pub tv: f64,
    pub tv_error: f64,
}

pub fn gcd_histogram_test(region: &Region, r: Ratio<i64>, cap: u64) -> Result<GcdHistogramReport> {
    let d = region.dim();
    if d < 2 {
        return Err(Error::param("the zeta law needs d >= 2"));
    }
    let census = census_patterns(region, r, &Window::origin(d), Law::Gcd { cap })?;
    let (zeta, zeta_remainder) = zeta_pmf(d as u32, cap, 1e-12)?;
    let empirical: Vec<f64> = (1..=cap).map(|g| census.fraction(g)).collect();
    let empirical_overflow = census.fraction(0);
    let mut tv = (empirical_overflow - zeta_remainder.value).abs();
    let mut tv_error = zeta_remainder.error;
    for (e, z) in empirical.iter().zip(&zeta) {
        tv += (e - z.value).abs();
        tv_error += z.error;
    }
    Ok(GcdHistogramReport {
        d,
        cap,
        total: census.total,
        empirical,
        empirical_overflow,
        zeta,
        zeta_remainder,
        tv: 0.5 * tv,
        tv_error: 0.5 * tv_error,
    })
}

/// Upward-closed families of white sets over `n ≤ 4` cells, as bitmasks over
/// the `2^n` colour-pattern keys.
pub fn monotone_events(n: usize) -> Vec<u64> {
    assert!(n <= 4, "monotone events are enumerated for at most 4 cells");
    let sets = 1u64 << n;
    (0..1u64 << sets)
        .filter(|&fam| {
            (0..sets).all(|s| fam >> s & 1 == 0 || (0..n).all(|i| fam >> (s | 1 << i) & 1 == 1))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotoneEventRecord {
    /// White sets in the event, as colour patterns.
    pub event: Vec<String>,
    pub census: f64,
    pub limit: CertifiedValue,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub tol: f64,
    pub events: Vec<MonotoneEventRecord>,
    pub violations: usize,
    /// Largest `census − limit upper bound` over all events.
    pub max_excess: f64,
}

/// For every increasing event `A` of the window colouring, checks
/// `census P[A] ≤ limit P[A] + tol`.
pub fn domination_check(window: &Window, region: &Region, r: Ratio<i64>, tol: f64, eps: f64) -> Result<DominationReport> {
    let n = window.len();
    if n > 4 {
        return Err(Error::budget("domination check enumerates windows of at most 4 offsets"));
    }
    let census = census_patterns(region, r, window, Law::Cop)?;
    let limit = limit_cylinder_distribution(window, Law::Cop, window.dim(), eps)?;
    let space = census.space();
    let mut events = Vec::new();
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for fam in monotone_events(n) {
        let keys: Vec<u64> = (0..1u64 << n).filter(|k| fam >> k & 1 == 1).collect();
        let emp: f64 = keys.iter().map(|&k| census.count(k)).sum::<u64>() as f64 / census.total as f64;
        let lim = CertifiedValue::sum(keys.iter().map(|&k| limit.mass(k))).clamp_probability();
        let excess = emp - lim.upper();
        let holds = excess <= tol;
        violations += !holds as usize;
        max_excess = max_excess.max(excess);
        events.push(MonotoneEventRecord { event: keys.iter().map(|&k| space.format(k)).collect(), census: emp, limit: lim, holds });
    }
    Ok(DominationReport { tol, events, violations, max_excess })
}
