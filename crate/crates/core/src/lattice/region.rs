use num_integer::{Integer, Roots};
use num_rational::Ratio;
use rayon::prelude::*;

use super::LatticePoint;
use crate::affine::SubgroupBasis;
use crate::error::{Error, Result};
use crate::rng::Substream;

/// A bounded region `F`; all bounds inclusive.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Axis-parallel box `lo ≤ x ≤ hi`.
    Box { lo: Vec<i64>, hi: Vec<i64> },
    /// Euclidean ball `‖x − center‖₂ ≤ radius`.
    Ball { center: Vec<Ratio<i64>>, radius: Ratio<i64> },
    /// `{B·t : lo ≤ t ≤ hi}` inside the subgroup spanned by `basis`.
    GammaBox { basis: SubgroupBasis, lo: Vec<i64>, hi: Vec<i64> },
}

impl Region {
    pub fn cube(d: usize, lo: i64, hi: i64) -> Result<Region> {
        Region::boxed(vec![lo; d], vec![hi; d])
    }

    pub fn boxed(lo: Vec<i64>, hi: Vec<i64>) -> Result<Region> {
        check_box(&lo, &hi)?;
        Ok(Region::Box { lo, hi })
    }

    pub fn ball(center: Vec<Ratio<i64>>, radius: Ratio<i64>) -> Result<Region> {
        if center.is_empty() {
            return Err(Error::param("ball needs a center of positive dimension"));
        }
        if radius <= Ratio::from_integer(0) {
            return Err(Error::param("ball radius must be positive"));
        }
        Ok(Region::Ball { center, radius })
    }

    /// Ball around an integer center with integer radius.
    pub fn int_ball(center: &[i64], radius: i64) -> Result<Region> {
        Region::ball(center.iter().map(|&c| Ratio::from_integer(c)).collect(), Ratio::from_integer(radius))
    }

    pub fn gamma_box(basis: SubgroupBasis, lo: Vec<i64>, hi: Vec<i64>) -> Result<Region> {
        check_box(&lo, &hi)?;
        if lo.len() != basis.rank() {
            return Err(Error::param("gamma box bounds must have one entry per basis column"));
        }
        Ok(Region::GammaBox { basis, lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lo, .. } => lo.len(),
            Region::Ball { center, .. } => center.len(),
            Region::GammaBox { basis, .. } => basis.dim(),
        }
    }

    /// The lattice points of `F_r = {x : x/r ∈ F}`.
    pub fn scale(&self, r: Ratio<i64>) -> Result<ScaledRegion> {
        if r <= Ratio::from_integer(0) {
            return Err(Error::param("scale r must be positive"));
        }
        let (rn, rd) = (*r.numer() as i128, *r.denom() as i128);
        let scaled = match self {
            Region::Box { lo, hi } => {
                let (lo, hi) = scale_box(lo, hi, rn, rd)?;
                ScaledRegion::Box { lo, hi }
            }
            Region::GammaBox { basis, lo, hi } => {
                let (lo, hi) = scale_box(lo, hi, rn, rd)?;
                // every B·t must fit in i64
                for row in 0..basis.dim() {
                    let mut bound: i128 = 0;
                    for (j, col) in basis.columns().iter().enumerate() {
                        let m = lo[j].unsigned_abs().max(hi[j].unsigned_abs()) as i128;
                        bound += (col[row] as i128).abs() * m;
                    }
                    if bound > i64::MAX as i128 {
                        return Err(Error::overflow("gamma box image exceeds i64"));
                    }
                }
                ScaledRegion::GammaBox { basis: basis.clone(), lo, hi }
            }
            Region::Ball { center, radius } => {
                // r·c_i = a_i / q and r·ρ = b / q over a common denominator q
                let mut q: i128 = rd * *radius.denom() as i128;
                for c in center {
                    q = q.lcm(&(rd * *c.denom() as i128));
                }
                let a: Vec<i128> = center
                    .iter()
                    .map(|c| rn * *c.numer() as i128 * (q / (rd * *c.denom() as i128)))
                    .collect();
                let b = rn * *radius.numer() as i128 * (q / (rd * *radius.denom() as i128));
                let b2 = b.checked_mul(b).ok_or_else(|| Error::overflow("ball radius"))?;
                let lo: Vec<i64> = a.iter().map(|&ai| ceil_div(ai - b, q)).map(to_i64).collect::<Result<_>>()?;
                let hi: Vec<i64> = a.iter().map(|&ai| floor_div(ai + b, q)).map(to_i64).collect::<Result<_>>()?;
                ScaledRegion::Ball { q, a, b2, lo, hi }
            }
        };
        if scaled.len()? == 0 {
            return Err(Error::EmptyRegion);
        }
        Ok(scaled)
    }
}

fn check_box(lo: &[i64], hi: &[i64]) -> Result<()> {
    if lo.is_empty() || lo.len() != hi.len() {
        return Err(Error::param("box corners must share a positive dimension"));
    }
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return Err(Error::param("box requires lo <= hi componentwise"));
    }
    Ok(())
}

#[inline]
fn floor_div(a: i128, b: i128) -> i128 {
    Integer::div_floor(&a, &b)
}

#[inline]
fn ceil_div(a: i128, b: i128) -> i128 {
    -Integer::div_floor(&-a, &b)
}

fn to_i64(v: i128) -> Result<i64> {
    i64::try_from(v).map_err(|_| Error::overflow("scaled bound exceeds i64"))
}

fn scale_box(lo: &[i64], hi: &[i64], rn: i128, rd: i128) -> Result<(Vec<i64>, Vec<i64>)> {
    let lo = lo.iter().map(|&l| to_i64(ceil_div(l as i128 * rn, rd))).collect::<Result<Vec<_>>>()?;
    let hi = hi.iter().map(|&h| to_i64(floor_div(h as i128 * rn, rd))).collect::<Result<Vec<_>>>()?;
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return Err(Error::EmptyRegion);
    }
    Ok((lo, hi))
}

/// The finite point set `F_r`, ready for enumeration.
///
/// Points are produced in lexicographic order (of `x` for boxes and balls, of
/// the coefficient vector `t` for gamma boxes). The first coordinate splits
/// the set into slabs that can be swept independently.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaledRegion {
    Box { lo: Vec<i64>, hi: Vec<i64> },
    /// `Σ (q·x_i − a_i)² ≤ b2`, with bounding box `lo..=hi`.
    Ball { q: i128, a: Vec<i128>, b2: i128, lo: Vec<i64>, hi: Vec<i64> },
    GammaBox { basis: SubgroupBasis, lo: Vec<i64>, hi: Vec<i64> },
}

impl ScaledRegion {
    pub fn dim(&self) -> usize {
        match self {
            ScaledRegion::Box { lo, .. } | ScaledRegion::Ball { lo, .. } => lo.len(),
            ScaledRegion::GammaBox { basis, .. } => basis.dim(),
        }
    }

    /// Number of points.
    pub fn len(&self) -> Result<u64> {
        match self {
            ScaledRegion::Box { lo, hi } | ScaledRegion::GammaBox { lo, hi, .. } => {
                lo.iter().zip(hi).try_fold(1u64, |acc, (a, b)| {
                    acc.checked_mul((*b as i128 - *a as i128 + 1) as u64)
                        .ok_or_else(|| Error::overflow("region size"))
                })
            }
            ScaledRegion::Ball { .. } => {
                let mut total = 0u64;
                for s in self.slabs() {
                    total += self.ball_count(1, self.ball_rem0(s));
                }
                Ok(total)
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.len(), Ok(0))
    }

    /// Axis-aligned bounding box of the points.
    pub fn bounding_box(&self) -> (Vec<i64>, Vec<i64>) {
        match self {
            ScaledRegion::Box { lo, hi } | ScaledRegion::Ball { lo, hi, .. } => (lo.clone(), hi.clone()),
            ScaledRegion::GammaBox { basis, lo, hi } => {
                let d = basis.dim();
                let mut blo = vec![0i64; d];
                let mut bhi = vec![0i64; d];
                for row in 0..d {
                    for (j, col) in basis.columns().iter().enumerate() {
                        let (x, y) = (col[row] * lo[j], col[row] * hi[j]);
                        blo[row] += x.min(y);
                        bhi[row] += x.max(y);
                    }
                }
                (blo, bhi)
            }
        }
    }

    /// First-coordinate values (of `x`, or of `t` for gamma boxes).
    pub fn slabs(&self) -> Vec<i64> {
        let (lo, hi) = match self {
            ScaledRegion::Box { lo, hi } | ScaledRegion::Ball { lo, hi, .. } => (lo[0], hi[0]),
            ScaledRegion::GammaBox { lo, hi, .. } => (lo[0], hi[0]),
        };
        (lo..=hi).collect()
    }

    /// Visits the points of one slab in lexicographic order.
    pub fn for_each_in_slab<F: FnMut(&[i64])>(&self, slab: i64, mut f: F) {
        match self {
            ScaledRegion::Box { lo, hi } => {
                let mut cur = lo.clone();
                cur[0] = slab;
                odometer(&mut cur, lo, hi, 1, &mut f);
            }
            ScaledRegion::Ball { lo, .. } => {
                let rem = self.ball_rem0(slab);
                if rem < 0 {
                    return;
                }
                let mut cur = lo.clone();
                cur[0] = slab;
                self.ball_visit(1, rem, &mut cur, &mut f);
            }
            ScaledRegion::GammaBox { basis, lo, hi } => {
                let mut t = lo.clone();
                t[0] = slab;
                let mut x = vec![0i64; basis.dim()];
                odometer(&mut t, lo, hi, 1, &mut |t: &[i64]| {
                    basis.apply_unchecked(t, &mut x);
                    f(&x);
                });
            }
        }
    }

    pub fn for_each<F: FnMut(&[i64])>(&self, mut f: F) {
        for s in self.slabs() {
            self.for_each_in_slab(s, &mut f);
        }
    }

    /// Sweeps every point in parallel and returns one accumulator per chunk of
    /// slabs, in slab order. Merging them in order gives results independent
    /// of the thread count.
    pub fn par_fold<T, I, F>(&self, init: I, fold: F) -> Result<Vec<T>>
    where
        T: Send,
        I: Fn() -> T + Sync + Send,
        F: Fn(&mut T, &[i64]) -> Result<()> + Sync + Send,
    {
        const SLABS_PER_CHUNK: usize = 16;
        let slabs = self.slabs();
        slabs
            .par_chunks(SLABS_PER_CHUNK)
            .map(|chunk| {
                let mut acc = init();
                let mut status = Ok(());
                for &s in chunk {
                    self.for_each_in_slab(s, |x| {
                        if status.is_ok() {
                            status = fold(&mut acc, x);
                        }
                    });
                    status.clone()?;
                }
                Ok(acc)
            })
            .collect()
    }

    /// Lazily enumerated points, slab by slab.
    pub fn iter(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        self.slabs().into_iter().flat_map(move |s| {
            let mut pts = Vec::new();
            self.for_each_in_slab(s, |x| pts.push(LatticePoint(x.to_vec())));
            pts
        })
    }

    /// A uniformly random point.
    pub fn sample_uniform(&self, rng: &mut Substream) -> Vec<i64> {
        match self {
            ScaledRegion::Box { lo, hi } => uniform_in_box(lo, hi, rng),
            ScaledRegion::Ball { lo, hi, .. } => loop {
                let x = uniform_in_box(lo, hi, rng);
                if self.contains(&x) {
                    return x;
                }
            },
            ScaledRegion::GammaBox { basis, lo, hi } => {
                let t = uniform_in_box(lo, hi, rng);
                let mut x = vec![0; basis.dim()];
                basis.apply_unchecked(&t, &mut x);
                x
            }
        }
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        match self {
            ScaledRegion::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| a <= v && v <= b),
            ScaledRegion::Ball { q, a, b2, .. } => {
                let mut s: i128 = 0;
                for (xi, ai) in x.iter().zip(a) {
                    let t = q * *xi as i128 - ai;
                    s += t * t;
                    if s > *b2 {
                        return false;
                    }
                }
                true
            }
            ScaledRegion::GammaBox { basis, lo, hi } => match basis.coefficients(x) {
                Some(t) => t.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| a <= v && v <= b),
                None => false,
            },
        }
    }

    fn ball_rem0(&self, x0: i64) -> i128 {
        let ScaledRegion::Ball { q, a, b2, .. } = self else { unreachable!() };
        let t = q * x0 as i128 - a[0];
        b2 - t * t
    }

    fn ball_range(&self, i: usize, rem: i128) -> (i64, i64) {
        let ScaledRegion::Ball { q, a, .. } = self else { unreachable!() };
        let s = rem.sqrt();
        (ceil_div(a[i] - s, *q) as i64, floor_div(a[i] + s, *q) as i64)
    }

    fn ball_count(&self, i: usize, rem: i128) -> u64 {
        let ScaledRegion::Ball { q, a, .. } = self else { unreachable!() };
        if rem < 0 {
            return 0;
        }
        if i == a.len() {
            return 1;
        }
        let (lo, hi) = self.ball_range(i, rem);
        if i + 1 == a.len() {
            return (hi - lo + 1).max(0) as u64;
        }
        (lo..=hi)
            .map(|x| {
                let t = q * x as i128 - a[i];
                self.ball_count(i + 1, rem - t * t)
            })
            .sum()
    }

    fn ball_visit<F: FnMut(&[i64])>(&self, i: usize, rem: i128, cur: &mut Vec<i64>, f: &mut F) {
        let ScaledRegion::Ball { q, a, .. } = self else { unreachable!() };
        if i == a.len() {
            f(cur);
            return;
        }
        let (lo, hi) = self.ball_range(i, rem);
        for x in lo..=hi {
            cur[i] = x;
            let t = q * x as i128 - a[i];
            self.ball_visit(i + 1, rem - t * t, cur, f);
        }
    }
}

fn uniform_in_box(lo: &[i64], hi: &[i64], rng: &mut Substream) -> Vec<i64> {
    lo.iter()
        .zip(hi)
        .map(|(&a, &b)| {
            let width = (b as i128 - a as i128 + 1) as u64;
            (a as i128 + rng.below(width) as i128) as i64
        })
        .collect()
}

/// Visits `cur` with coordinates `from..` running over `lo..=hi` lexicographically.
fn odometer<F: FnMut(&[i64])>(cur: &mut [i64], lo: &[i64], hi: &[i64], from: usize, f: &mut F) {
    let d = cur.len();
    for i in from..d {
        cur[i] = lo[i];
    }
    loop {
        f(cur);
        let mut i = d;
        loop {
            if i == from {
                return;
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

/// The points of `F_r`, lexicographically, each once.
pub fn enumerate_region(region: &Region, r: Ratio<i64>) -> Result<impl Iterator<Item = LatticePoint>> {
    let scaled = region.scale(r)?;
    let pts: Vec<_> = scaled.slabs();
    Ok(pts.into_iter().flat_map(move |s| {
        let mut out = Vec::new();
        scaled.for_each_in_slab(s, |x| out.push(LatticePoint(x.to_vec())));
        out
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one() -> Ratio<i64> {
        Ratio::from_integer(1)
    }

    fn collect(region: &Region, r: Ratio<i64>) -> Vec<Vec<i64>> {
        enumerate_region(region, r).unwrap().map(|p| p.0).collect()
    }

    #[test]
    fn small_box() {
        let b = Region::boxed(vec![1, 1], vec![2, 2]).unwrap();
        assert_eq!(collect(&b, one()), vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
    }

    #[test]
    fn unit_ball() {
        let b = Region::int_ball(&[0, 0], 1).unwrap();
        assert_eq!(collect(&b, one()), vec![vec![-1, 0], vec![0, -1], vec![0, 0], vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn box_cardinality() {
        let b = Region::cube(2, 1, 37).unwrap();
        let s = b.scale(one()).unwrap();
        assert_eq!(s.len().unwrap(), 37 * 37);
        assert_eq!(s.iter().count(), 37 * 37);
    }

    #[test]
    fn scaling_a_box() {
        let b = Region::cube(2, 0, 1).unwrap();
        let s = b.scale(Ratio::new(5, 2)).unwrap();
        assert_eq!(s, ScaledRegion::Box { lo: vec![0, 0], hi: vec![2, 2] });
        let thin = Region::boxed(vec![1], vec![1]).unwrap();
        assert_eq!(thin.scale(Ratio::new(1, 2)).unwrap_err(), Error::EmptyRegion);
    }

    #[test]
    fn rejects_bad_regions() {
        assert!(Region::boxed(vec![2], vec![1]).is_err());
        assert!(Region::int_ball(&[0, 0], 0).is_err());
        assert!(Region::cube(2, 0, 1).unwrap().scale(Ratio::from_integer(0)).is_err());
    }

    fn brute_ball(center: &[Ratio<i64>], radius: Ratio<i64>, r: Ratio<i64>) -> Vec<Vec<i64>> {
        let rc: Vec<Ratio<i64>> = center.iter().map(|c| c * r).collect();
        let rr = radius * r;
        let reach = (rr.to_integer().abs() + 2) as i64;
        let mut out = Vec::new();
        let c0 = rc[0].to_integer();
        let c1 = rc[1].to_integer();
        for x in c0 - reach..=c0 + reach {
            for y in c1 - reach..=c1 + reach {
                let dx = Ratio::from_integer(x) - rc[0];
                let dy = Ratio::from_integer(y) - rc[1];
                if dx * dx + dy * dy <= rr * rr {
                    out.push(vec![x, y]);
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn ball_matches_bounding_box_scan(
            cx in -20i64..20, cxd in 1i64..4, cy in -20i64..20, cyd in 1i64..4,
            rn in 1i64..30, rd in 1i64..4, sn in 1i64..5, sd in 1i64..3,
        ) {
            let center = vec![Ratio::new(cx, cxd), Ratio::new(cy, cyd)];
            let radius = Ratio::new(rn, rd);
            let r = Ratio::new(sn, sd);
            let region = Region::ball(center.clone(), radius).unwrap();
            let expected = brute_ball(&center, radius, r);
            match region.scale(r) {
                Ok(s) => {
                    let got: Vec<Vec<i64>> = s.iter().map(|p| p.0).collect();
                    prop_assert_eq!(s.len().unwrap() as usize, got.len());
                    prop_assert_eq!(got, expected);
                }
                Err(Error::EmptyRegion) => prop_assert!(expected.is_empty()),
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }

        #[test]
        fn par_fold_counts_every_point(lo in -5i64..5, w in 0i64..40, h in 0i64..40) {
            let region = Region::boxed(vec![lo, lo], vec![lo + w, lo + h]).unwrap();
            let s = region.scale(Ratio::from_integer(1)).unwrap();
            let parts = s.par_fold(|| 0u64, |acc, _| { *acc += 1; Ok(()) }).unwrap();
            prop_assert_eq!(parts.iter().sum::<u64>(), s.len().unwrap());
        }
    }

    #[test]
    fn three_dimensional_ball_is_symmetric() {
        let b = Region::int_ball(&[0, 0, 0], 3).unwrap().scale(one()).unwrap();
        let pts: Vec<_> = b.iter().collect();
        for p in &pts {
            let neg = LatticePoint(p.0.iter().map(|c| -c).collect());
            assert!(pts.contains(&neg));
            assert!(p.0.iter().map(|c| c * c).sum::<i64>() <= 9);
        }
        assert_eq!(pts.len() as u64, b.len().unwrap());
        // number of integer points with x²+y²+z² ≤ 9
        assert_eq!(pts.len(), 123);
    }

    #[test]
    fn uniform_samples_stay_inside() {
        let b = Region::int_ball(&[3, -2], 5).unwrap().scale(one()).unwrap();
        let mut rng = Substream::new(crate::rng::Seed(1), 0, 0, 0);
        for _ in 0..1000 {
            assert!(b.contains(&b.sample_uniform(&mut rng)));
        }
    }
}
