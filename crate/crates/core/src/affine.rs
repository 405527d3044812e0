//! Subgroups `Γ ⊂ Z^d` given by a basis, Smith normal form, and the
//! `Γ`-anchored censuses.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{census_scaled, tv_distance, PatternDistribution};
use crate::lattice::{LatticePoint, Region, Window};
use crate::limit_law::Law;
use crate::rng::{domain, Seed};
use crate::sampler::sample_gcd_window_affine;

/// Smith normal form `U·B·V = D` of a `d×k` matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Snf {
    factors: Vec<i64>,
    /// `d×d` unimodular, row-major.
    u: Vec<Vec<i64>>,
    u_inv: Vec<Vec<i64>>,
    /// `k×k` unimodular, row-major.
    v: Vec<Vec<i64>>,
}

/// A rank-`k` subgroup of `Z^d` given by `k` independent columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupBasis {
    columns: Vec<Vec<i64>>,
    snf: Snf,
}

/// Outcome of [`snf_maximality_check`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Maximality {
    Maximal,
    NotMaximal { invariant_factors: Vec<i64> },
}

impl SubgroupBasis {
    /// Builds the subgroup spanned by `columns` (each of length `d`).
    pub fn new(columns: Vec<Vec<i64>>) -> Result<Self> {
        let k = columns.len();
        let d = columns.first().map(Vec::len).ok_or_else(|| Error::param("basis needs at least one column"))?;
        if d == 0 || columns.iter().any(|c| c.len() != d) {
            return Err(Error::param("basis columns must share a positive dimension"));
        }
        if k > d {
            return Err(Error::RankDeficient { rank: d, expected: k });
        }
        let snf = smith_normal_form(&columns, d)?;
        let rank = snf.factors.iter().filter(|&&f| f != 0).count();
        if rank < k {
            return Err(Error::RankDeficient { rank, expected: k });
        }
        Ok(SubgroupBasis { columns, snf })
    }

    /// `Z^d` itself.
    pub fn full(d: usize) -> Self {
        let cols = (0..d).map(|j| (0..d).map(|i| (i == j) as i64).collect()).collect();
        SubgroupBasis::new(cols).expect("identity basis")
    }

    pub fn dim(&self) -> usize {
        self.columns[0].len()
    }

    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<i64>] {
        &self.columns
    }

    pub fn invariant_factors(&self) -> &[i64] {
        &self.snf.factors
    }

    pub fn is_maximal(&self) -> bool {
        self.snf.factors.iter().all(|&f| f == 1)
    }

    pub fn require_maximal(&self) -> Result<()> {
        if self.is_maximal() {
            Ok(())
        } else {
            Err(Error::NotMaximal { factors: self.snf.factors.clone() })
        }
    }

    /// `B·t` without overflow checks; callers bound `t` beforehand.
    #[inline]
    pub fn apply_unchecked(&self, t: &[i64], out: &mut [i64]) {
        out.iter_mut().for_each(|o| *o = 0);
        for (col, &tj) in self.columns.iter().zip(t) {
            for (o, &b) in out.iter_mut().zip(col) {
                *o += b * tj;
            }
        }
    }

    /// `B·t`, checked.
    pub fn apply(&self, t: &[i64]) -> Result<Vec<i64>> {
        if t.len() != self.rank() {
            return Err(Error::param("coefficient vector has the wrong length"));
        }
        let mut out = vec![0i128; self.dim()];
        for (col, &tj) in self.columns.iter().zip(t) {
            for (o, &b) in out.iter_mut().zip(col) {
                *o += b as i128 * tj as i128;
            }
        }
        out.into_iter().map(|v| i64::try_from(v).map_err(|_| Error::overflow("B·t"))).collect()
    }

    /// `U·x` for the unimodular `U` with `U·Γ = D·Z^k × {0}`.
    pub fn adapted_coordinates(&self, x: &[i64]) -> Result<Vec<i64>> {
        mat_vec(&self.snf.u, x)
    }

    /// The coefficients `t` with `B·t = x`, if `x ∈ Γ`.
    pub fn coefficients(&self, x: &[i64]) -> Option<Vec<i64>> {
        let y = self.adapted_coordinates(x).ok()?;
        let k = self.rank();
        if y[k..].iter().any(|&c| c != 0) {
            return None;
        }
        let mut s = Vec::with_capacity(k);
        for (i, &f) in self.snf.factors.iter().enumerate() {
            if y[i] % f != 0 {
                return None;
            }
            s.push(y[i] / f);
        }
        mat_vec(&self.snf.v, &s).ok()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.coefficients(x).is_some()
    }

    /// The saturation `span_Q(Γ) ∩ Z^d`, spanned by the first `k` columns of `U⁻¹`.
    pub fn saturate(&self) -> SubgroupBasis {
        let k = self.rank();
        let cols = (0..k).map(|j| self.snf.u_inv.iter().map(|row| row[j]).collect()).collect();
        SubgroupBasis::new(cols).expect("saturation has full rank")
    }
}

impl fmt::Display for SubgroupBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols: Vec<String> =
            self.columns.iter().map(|c| c.iter().map(i64::to_string).collect::<Vec<_>>().join(",")).collect();
        write!(f, "{}", cols.join(";"))
    }
}

impl FromStr for SubgroupBasis {
    type Err = Error;

    /// Columns separated by `;`, entries by `,`: `"1,0"` is `Z×{0}` in `Z^2`.
    fn from_str(s: &str) -> Result<Self> {
        let cols = s
            .split(';')
            .filter(|c| !c.trim().is_empty())
            .map(|c| LatticePoint::from_str(c).map(|p| p.0))
            .collect::<Result<Vec<_>>>()?;
        SubgroupBasis::new(cols)
    }
}

impl Serialize for SubgroupBasis {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.columns.serialize(s)
    }
}

fn mat_vec(m: &[Vec<i64>], x: &[i64]) -> Result<Vec<i64>> {
    m.iter()
        .map(|row| {
            let v: i128 = row.iter().zip(x).map(|(&a, &b)| a as i128 * b as i128).sum();
            i64::try_from(v).map_err(|_| Error::overflow("matrix-vector product"))
        })
        .collect()
}

/// Smith normal form over `i128` with the transforms tracked.
fn smith_normal_form(columns: &[Vec<i64>], d: usize) -> Result<Snf> {
    let k = columns.len();
    let mut a: Vec<Vec<i128>> = (0..d).map(|i| columns.iter().map(|c| c[i] as i128).collect()).collect();
    let mut u = identity(d);
    let mut u_inv = identity(d);
    let mut v = identity(k);
    let ovf = || Error::overflow("Smith normal form entries exceed i128");

    let mut factors = Vec::with_capacity(k);
    for t in 0..k.min(d) {
        loop {
            // smallest nonzero entry of the trailing submatrix
            let mut best: Option<(usize, usize)> = None;
            for i in t..d {
                for j in t..k {
                    if a[i][j] != 0 && best.map_or(true, |(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else {
                break;
            };
            if pi != t {
                a.swap(pi, t);
                u.swap(pi, t);
                for row in u_inv.iter_mut() {
                    row.swap(pi, t);
                }
            }
            if pj != t {
                for row in a.iter_mut() {
                    row.swap(pj, t);
                }
                for row in v.iter_mut() {
                    row.swap(pj, t);
                }
            }
            let piv = a[t][t];
            let mut clean = true;
            for i in t + 1..d {
                let q = a[i][t] / piv;
                if q != 0 {
                    row_sub(&mut a, i, t, q).ok_or_else(ovf)?;
                    row_sub(&mut u, i, t, q).ok_or_else(ovf)?;
                    // U⁻¹ ← U⁻¹·E⁻¹: column t gains q·column i
                    for row in u_inv.iter_mut() {
                        row[t] = row[t].checked_add(q.checked_mul(row[i]).ok_or_else(ovf)?).ok_or_else(ovf)?;
                    }
                }
                clean &= a[i][t] == 0;
            }
            for j in t + 1..k {
                let q = a[t][j] / piv;
                if q != 0 {
                    col_sub(&mut a, j, t, q).ok_or_else(ovf)?;
                    col_sub(&mut v, j, t, q).ok_or_else(ovf)?;
                }
                clean &= a[t][j] == 0;
            }
            if !clean {
                continue;
            }
            // the pivot must divide the rest; otherwise fold an offending row in
            let bad = (t + 1..d).find(|&i| (t + 1..k).any(|j| a[i][j] % piv != 0));
            match bad {
                Some(i) => {
                    row_sub(&mut a, t, i, -1).ok_or_else(ovf)?;
                    row_sub(&mut u, t, i, -1).ok_or_else(ovf)?;
                    for row in u_inv.iter_mut() {
                        row[i] = row[i].checked_sub(row[t]).ok_or_else(ovf)?;
                    }
                }
                None => break,
            }
        }
        if a[t][t] < 0 {
            for x in a[t].iter_mut() {
                *x = -*x;
            }
            for x in u[t].iter_mut() {
                *x = -*x;
            }
            for row in u_inv.iter_mut() {
                row[t] = -row[t];
            }
        }
        factors.push(i64::try_from(a[t][t]).map_err(|_| ovf())?);
    }
    let narrow = |m: Vec<Vec<i128>>| -> Result<Vec<Vec<i64>>> {
        m.into_iter()
            .map(|r| r.into_iter().map(|x| i64::try_from(x).map_err(|_| ovf())).collect())
            .collect()
    };
    Ok(Snf { factors, u: narrow(u)?, u_inv: narrow(u_inv)?, v: narrow(v)? })
}

fn identity(n: usize) -> Vec<Vec<i128>> {
    (0..n).map(|i| (0..n).map(|j| (i == j) as i128).collect()).collect()
}

/// `row_i -= q·row_t`
fn row_sub(m: &mut [Vec<i128>], i: usize, t: usize, q: i128) -> Option<()> {
    for j in 0..m[i].len() {
        m[i][j] = m[i][j].checked_sub(q.checked_mul(m[t][j])?)?;
    }
    Some(())
}

/// `col_j -= q·col_t`
fn col_sub(m: &mut [Vec<i128>], j: usize, t: usize, q: i128) -> Option<()> {
    for row in m.iter_mut() {
        row[j] = row[j].checked_sub(q.checked_mul(row[t])?)?;
    }
    Some(())
}

/// Maximal iff every Smith invariant factor is 1.
pub fn snf_maximality_check(basis: &SubgroupBasis) -> Maximality {
    if basis.is_maximal() {
        Maximality::Maximal
    } else {
        Maximality::NotMaximal { invariant_factors: basis.invariant_factors().to_vec() }
    }
}

/// ℓ∞ norm of the last `d−k` adapted coordinates `U·x`; zero iff `x ∈ Γ`.
///
/// If `x ≡ y (mod p^n)` for some `y ∈ Γ` and `x ∉ Γ`, the result is at least
/// `p^n`: `U·(x−y)` is divisible by `p^n` and its tail equals that of `U·x`.
pub fn distance_to_gamma(x: &LatticePoint, basis: &SubgroupBasis) -> Result<u64> {
    basis.require_maximal()?;
    if x.dim() != basis.dim() {
        return Err(Error::param("point and basis dimensions differ"));
    }
    let y = basis.adapted_coordinates(&x.0)?;
    Ok(y[basis.rank()..].iter().map(|c| c.unsigned_abs()).max().unwrap_or(0))
}

/// Gcd-label censuses anchored on `Γ`: the whole window, and separately its
/// offsets off `Γ` and on `Γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineCensus {
    pub basis: SubgroupBasis,
    /// `d(x, Γ)` per window offset, in window order.
    pub distances: Vec<u64>,
    pub full: PatternDistribution,
    pub off_gamma: Option<PatternDistribution>,
    /// For rank 1 these labels grow with the anchor box and escape every cap.
    pub on_gamma: Option<PatternDistribution>,
}

/// Exact sweep of the anchors `Y = B·t`, `t ∈ ⟦lo, hi⟧`, labelling
/// `gcd(Y + x)` capped at `cap` with the overflow pooled.
pub fn affine_census(basis: &SubgroupBasis, lo: &[i64], hi: &[i64], window: &Window, cap: u64) -> Result<AffineCensus> {
    basis.require_maximal()?;
    if window.dim() != basis.dim() {
        return Err(Error::param("window and basis dimensions differ"));
    }
    let law = Law::Gcd { cap };
    law.validate()?;
    let scaled = Region::gamma_box(basis.clone(), lo.to_vec(), hi.to_vec())?.scale(Ratio::from_integer(1))?;
    let distances = window.offsets().iter().map(|x| distance_to_gamma(x, basis)).collect::<Result<Vec<_>>>()?;
    let part = |on: bool| -> Result<Option<PatternDistribution>> {
        let offs: Vec<LatticePoint> = window
            .offsets()
            .iter()
            .zip(&distances)
            .filter(|(_, &dist)| (dist == 0) == on)
            .map(|(x, _)| x.clone())
            .collect();
        if offs.is_empty() {
            return Ok(None);
        }
        census_scaled(&scaled, &Window::new(offs)?, law).map(Some)
    };
    Ok(AffineCensus {
        basis: basis.clone(),
        full: census_scaled(&scaled, window, law)?,
        off_gamma: part(false)?,
        on_gamma: part(true)?,
        distances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineComparison {
    pub census: PatternDistribution,
    /// Pattern counts of `trials` independent samples of the conditioned law.
    pub sampled: PatternDistribution,
    pub tv: f64,
    /// `½ Σ 3σ` over the sampled patterns: the size of the Monte-Carlo noise in `tv`.
    pub sampling_ci: f64,
}

/// Census of the off-`Γ` window against Monte-Carlo samples of the limit law on `Γ`.
#[allow(clippy::too_many_arguments)]
pub fn affine_limit_compare(
    basis: &SubgroupBasis,
    lo: &[i64],
    hi: &[i64],
    window: &Window,
    cap: u64,
    eps: f64,
    trials: usize,
    seed: Seed,
) -> Result<AffineComparison> {
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    basis.require_maximal()?;
    for x in window.offsets() {
        if distance_to_gamma(x, basis)? == 0 {
            return Err(Error::param(format!("offset {x} lies on the subgroup")));
        }
    }
    let census = affine_census(basis, lo, hi, window, cap)?.full;
    let space = census.space();
    let keys: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = sample_gcd_window_affine(basis, window, basis.dim(), eps, seed.child(domain::TRIAL, t as u64))?;
            Ok(s.labels.iter().fold(0u64, |key, l| {
                key * space.radix() + l.finite().map_or(0, |g| space.digit(g))
            }))
        })
        .collect::<Result<_>>()?;
    let mut counts = BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_insert(0u64) += 1;
    }
    let sampled = PatternDistribution { window: window.clone(), law: census.law, counts, total: trials as u64 };
    let n = trials as f64;
    let sampling_ci = 0.5 * sampled.pmf().values().map(|&p| 3.0 * (p * (1.0 - p) / n).sqrt()).sum::<f64>();
    Ok(AffineComparison { tv: tv_distance(&census.pmf(), &sampled.pmf()), census, sampled, sampling_ci })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::census_patterns;
    use crate::lattice::GcdLabel;
    use crate::sampler::sample_gcd_window;
    use proptest::prelude::*;

    fn basis(cols: &[&[i64]]) -> SubgroupBasis {
        SubgroupBasis::new(cols.iter().map(|c| c.to_vec()).collect()).unwrap()
    }

    fn pt(c: &[i64]) -> LatticePoint {
        LatticePoint(c.to_vec())
    }

    #[test]
    fn maximality_examples() {
        assert_eq!(snf_maximality_check(&SubgroupBasis::full(3)), Maximality::Maximal);
        assert_eq!(snf_maximality_check(&basis(&[&[2, 3]])), Maximality::Maximal);
        let b = basis(&[&[2, 4]]);
        assert_eq!(snf_maximality_check(&b), Maximality::NotMaximal { invariant_factors: vec![2] });
        let sat = b.saturate();
        assert!(sat.is_maximal());
        assert!(sat.columns()[0] == [1, 2] || sat.columns()[0] == [-1, -2]);
        assert!(matches!(distance_to_gamma(&pt(&[1, 1]), &b), Err(Error::NotMaximal { .. })));
    }

    #[test]
    fn rank_deficient_bases_are_rejected() {
        let r = SubgroupBasis::new(vec![vec![1, 2], vec![2, 4]]);
        assert_eq!(r.unwrap_err(), Error::RankDeficient { rank: 1, expected: 2 });
        assert!(SubgroupBasis::new(vec![vec![0, 0]]).is_err());
    }

    #[test]
    fn distance_examples() {
        let g = basis(&[&[1, 0]]);
        assert_eq!(distance_to_gamma(&pt(&[5, 3]), &g).unwrap(), 3);
        assert_eq!(distance_to_gamma(&pt(&[-7, 0]), &g).unwrap(), 0);
        let g = basis(&[&[2, 3]]);
        assert_eq!(distance_to_gamma(&pt(&[4, 6]), &g).unwrap(), 0);
        assert_eq!(g.coefficients(&[-6, -9]), Some(vec![-3]));
        assert!(!g.contains(&[1, 1]));
    }

    #[test]
    fn parse_and_display_round_trip() {
        let b: SubgroupBasis = "1,0,2;0,1,5".parse().unwrap();
        assert_eq!(b.to_string(), "1,0,2;0,1,5");
        assert_eq!(b.rank(), 2);
        assert!(b.is_maximal());
    }

    fn unimodular(ops: &[(usize, i64)], k: usize) -> Vec<Vec<i64>> {
        let mut v: Vec<Vec<i64>> = (0..k).map(|i| (0..k).map(|j| (i == j) as i64).collect()).collect();
        for &(op, q) in ops {
            let (a, b) = (op % k, (op / k) % k);
            if a == b {
                // column sign flip
                for row in v.iter_mut() {
                    row[a] = -row[a];
                }
            } else {
                for row in v.iter_mut() {
                    row[a] += q * row[b];
                }
            }
        }
        v
    }

    proptest! {
        #[test]
        fn snf_invariant_under_unimodular_change(
            entries in proptest::collection::vec(-9i64..=9, 6),
            ops in proptest::collection::vec((0usize..4, -3i64..=3), 0..6),
        ) {
            let cols = vec![entries[..3].to_vec(), entries[3..].to_vec()];
            let Ok(b) = SubgroupBasis::new(cols.clone()) else { return Ok(()) };
            let v = unimodular(&ops, 2);
            // columns of B·V
            let new_cols: Vec<Vec<i64>> = (0..2)
                .map(|j| (0..3).map(|i| cols[0][i] * v[0][j] + cols[1][i] * v[1][j]).collect())
                .collect();
            let b2 = SubgroupBasis::new(new_cols).unwrap();
            prop_assert_eq!(b.invariant_factors(), b2.invariant_factors());
            prop_assert_eq!(snf_maximality_check(&b), snf_maximality_check(&b2));
        }

        #[test]
        fn snf_factors_divide_and_match_minors(entries in proptest::collection::vec(-12i64..=12, 4)) {
            let cols = vec![entries[..2].to_vec(), entries[2..].to_vec()];
            let Ok(b) = SubgroupBasis::new(cols) else { return Ok(()) };
            let f = b.invariant_factors();
            prop_assert_eq!(f[1] % f[0], 0);
            // the product of the factors is |det|, the first is the gcd of the entries
            let det = (entries[0] * entries[3] - entries[1] * entries[2]).abs();
            prop_assert_eq!(f[0] * f[1], det);
            let g = entries.iter().fold(0u64, |g, &e| crate::lattice::gcd_u64(g, e.unsigned_abs()));
            prop_assert_eq!(f[0] as u64, g);
        }

        #[test]
        fn distance_lower_bound(
            a in -6i64..=6, b in -6i64..=6,
            x0 in -40i64..=40, x1 in -40i64..=40,
            pidx in 0usize..3, n in 1u32..=3,
        ) {
            prop_assume!(crate::lattice::gcd_u64(a.unsigned_abs(), b.unsigned_abs()) == 1);
            let g = basis(&[&[a, b]]);
            let x = pt(&[x0, x1]);
            let dist = distance_to_gamma(&x, &g).unwrap();
            prop_assert_eq!(dist == 0, g.contains(&x.0));
            let m = [2i64, 3, 5][pidx].pow(n);
            // y = t·(a,b) with t mod m covers Γ mod m
            let congruent = (0..m).any(|t| (x0 - t * a).rem_euclid(m) == 0 && (x1 - t * b).rem_euclid(m) == 0);
            if congruent && dist > 0 {
                prop_assert!(dist >= m as u64, "dist {} < {}", dist, m);
            }
        }

        #[test]
        fn sampled_off_gamma_labels_stay_below_distance(x0 in -20i64..=20, x1 in 1i64..=30, s in 0u64..50) {
            let g = basis(&[&[1, 0]]);
            let w = Window::single(pt(&[x0, x1]));
            let sample = sample_gcd_window_affine(&g, &w, 2, 1e-3, Seed(s)).unwrap();
            let dist = distance_to_gamma(&w.offsets()[0], &g).unwrap();
            match sample.labels[0] {
                GcdLabel::Finite(v) => prop_assert!(v >= 1 && v <= dist),
                GcdLabel::Infinite => prop_assert!(false),
            }
        }
    }

    #[test]
    fn census_of_full_lattice_matches_main_census() {
        let w = Window::box_window(&[0, 0], &[1, 1]).unwrap();
        let a = affine_census(&SubgroupBasis::full(2), &[-30, 5], &[40, 70], &w, 6).unwrap();
        let b = census_patterns(&Region::boxed(vec![-30, 5], vec![40, 70]).unwrap(), Ratio::from_integer(1), &w, Law::Gcd { cap: 6 }).unwrap();
        assert_eq!(a.full, b);
        assert!(a.off_gamma.is_none());
        assert_eq!(a.on_gamma.as_ref(), Some(&b));
    }

    #[test]
    fn rank_one_census_examples() {
        let g = basis(&[&[1, 0]]);
        let w = Window::new(vec![pt(&[0, 1]), pt(&[0, 2]), pt(&[0, 0])]).unwrap();
        let c = affine_census(&g, &[1], &[1000], &w, 10).unwrap();
        let one = Window::single(pt(&[0, 1]));
        let off = c.off_gamma.unwrap();
        assert_eq!(off.window.len(), 2);
        let single = affine_census(&g, &[1], &[1000], &one, 10).unwrap().full;
        assert_eq!(single.counts.len(), 1);
        assert_eq!(single.count(1), 1000);
        // labels on Γ are |Y_1|: everything above the cap pools into overflow
        let on = c.on_gamma.unwrap();
        assert_eq!(on.count(0), 990);
    }

    #[test]
    fn rank_two_on_gamma_follows_coefficient_chain() {
        let g = basis(&[&[1, 0, 0], &[0, 1, 0]]);
        let w = Window::new(vec![pt(&[0, 0, 0]), pt(&[1, 0, 0]), pt(&[0, 0, 4])]).unwrap();
        let s = sample_gcd_window_affine(&g, &w, 3, 1e-4, Seed(21)).unwrap();
        let coeff = Window::new(vec![pt(&[0, 0]), pt(&[1, 0])]).unwrap();
        let t = sample_gcd_window(&coeff, 2, 1e-4, Seed(21)).unwrap();
        assert_eq!(s.label(&pt(&[0, 0, 0])), t.label(&pt(&[0, 0])));
        assert_eq!(s.label(&pt(&[1, 0, 0])), t.label(&pt(&[1, 0])));
        let off = s.label(&pt(&[0, 0, 4])).unwrap().finite().unwrap();
        assert!([1, 2, 4].contains(&off));
    }

    #[test]
    fn compare_rejects_on_gamma_windows() {
        let g = basis(&[&[1, 0]]);
        let w = Window::single(pt(&[3, 0]));
        assert!(affine_limit_compare(&g, &[1], &[10], &w, 5, 1e-3, 10, Seed(1)).is_err());
        let w = Window::single(pt(&[0, 1]));
        let r = affine_limit_compare(&g, &[1], &[100], &w, 5, 1e-3, 200, Seed(1)).unwrap();
        assert_eq!(r.tv, 0.0);
    }
}
