use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::primes::primes_up_to;
use crate::error::{Error, Result};

/// Largest box volume `N^d` accepted by [`coprime_free_box`].
pub const FREE_BOX_MAX_CELLS: u64 = 100_000;

/// A box `corner + ⟦0, N−1⟧^d` with no coprime point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeBox {
    pub n: u64,
    pub d: usize,
    #[serde(serialize_with = "ser_bigints")]
    pub corner: Vec<BigInt>,
    /// `(offset, prime)`: the prime forced to divide `corner + offset`.
    pub assignment: Vec<(Vec<u64>, u64)>,
    #[serde(serialize_with = "ser_bigint")]
    pub modulus: BigInt,
}

/// Exhaustive check of a [`FreeBox`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeBoxCheck {
    pub points_checked: u64,
    pub coprime_points: u64,
    /// gcd of every point of the box, offsets in lexicographic order.
    #[serde(serialize_with = "ser_bigint_pairs")]
    pub gcds: Vec<(Vec<u64>, BigInt)>,
}

impl FreeBoxCheck {
    pub fn passed(&self) -> bool {
        self.coprime_points == 0 && self.points_checked > 0
    }
}

fn ser_bigint<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn ser_bigints<S: serde::Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    let strs: Vec<String> = v.iter().map(|b| b.to_string()).collect();
    strs.serialize(s)
}

fn ser_bigint_pairs<S: serde::Serializer>(
    v: &[(Vec<u64>, BigInt)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<(&Vec<u64>, String)> = v.iter().map(|(o, g)| (o, g.to_string())).collect();
    pairs.serialize(s)
}

/// Offsets of `⟦0, n−1⟧^d` in lexicographic order.
fn box_offsets(n: u64, d: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = vec![0u64; d];
    loop {
        out.push(cur.clone());
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] + 1 < n {
                cur[i] += 1;
                break;
            }
            cur[i] = 0;
        }
    }
}

/// The first `count` primes.
fn first_primes(count: usize) -> Vec<u64> {
    let mut bound = 16u64;
    loop {
        let ps = primes_up_to(bound);
        if ps.len() >= count {
            return ps[..count].to_vec();
        }
        bound *= 2;
    }
}

fn mod_pow(b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u128;
    let mut b128 = (b % m) as u128;
    let m128 = m as u128;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b128 % m128;
        }
        b128 = b128 * b128 % m128;
        e >>= 1;
    }
    r as u64
}

/// Corner of an `N^d` box free of coprime points.
///
/// The `i`-th offset `o` of the box (lexicographic order) gets the `i`-th
/// prime `p_o`; the corner solves `x ≡ −o (mod p_o)` in every coordinate, so
/// `p_o` divides every coordinate of `x + o`. The smallest nonnegative
/// solution modulo `∏ p_o` is returned.
pub fn coprime_free_box(n: u64, d: usize) -> Result<FreeBox> {
    if n < 1 {
        return Err(Error::param("box side N must be at least 1"));
    }
    if d < 2 {
        return Err(Error::param("coprime-free boxes need d >= 2"));
    }
    let cells = (n as u128).checked_pow(d as u32).filter(|&c| c <= FREE_BOX_MAX_CELLS as u128);
    let Some(cells) = cells else {
        return Err(Error::budget(format!("box with N^d > {FREE_BOX_MAX_CELLS} cells")));
    };
    let offsets = box_offsets(n, d);
    debug_assert_eq!(offsets.len() as u128, cells);
    let primes = first_primes(offsets.len());

    let mut modulus = BigInt::one();
    let mut corner = vec![BigInt::zero(); d];
    for (o, &p) in offsets.iter().zip(&primes) {
        let m_mod_p = (&modulus % p).to_u64().expect("residue fits");
        let inv = mod_pow(m_mod_p, p - 2, p);
        for (x, &oi) in corner.iter_mut().zip(o) {
            let target = (p - oi % p) % p;
            let cur = (&*x % p).to_u64().expect("residue fits");
            let step = ((target + p - cur) % p) as u128 * inv as u128 % p as u128;
            *x += &modulus * BigInt::from(step as u64);
        }
        modulus *= p;
    }
    Ok(FreeBox {
        n,
        d,
        corner,
        assignment: offsets.into_iter().zip(primes).collect(),
        modulus,
    })
}

/// Computes the gcd of every point in the box and counts coprime ones.
pub fn verify_free_box(fb: &FreeBox) -> FreeBoxCheck {
    let mut gcds = Vec::new();
    let mut coprime = 0;
    for o in box_offsets(fb.n, fb.d) {
        let g = fb
            .corner
            .iter()
            .zip(&o)
            .fold(BigInt::zero(), |g, (c, &oi)| g.gcd(&(c + BigInt::from(oi))));
        if g.is_one() {
            coprime += 1;
        }
        gcds.push((o, g));
    }
    FreeBoxCheck { points_checked: gcds.len() as u64, coprime_points: coprime, gcds }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_box() {
        let fb = coprime_free_box(2, 2).unwrap();
        assert_eq!(fb.corner, vec![BigInt::from(174), BigInt::from(20)]);
        let check = verify_free_box(&fb);
        let gs: Vec<BigInt> = check.gcds.iter().map(|(_, g)| g.clone()).collect();
        assert_eq!(gs, [2, 3, 5, 7].map(BigInt::from));
        assert!(check.passed());
    }

    #[test]
    fn single_cell() {
        let fb = coprime_free_box(1, 2).unwrap();
        assert_eq!(fb.corner, vec![BigInt::zero(), BigInt::zero()]);
        assert!(verify_free_box(&fb).passed());
    }

    #[test]
    fn small_boxes_verify_exhaustively() {
        for d in 2..=3 {
            for n in 1..=3 {
                let fb = coprime_free_box(n, d).unwrap();
                let check = verify_free_box(&fb);
                assert_eq!(check.points_checked, n.pow(d as u32));
                assert!(check.passed(), "N={n} d={d}");
                for ((o, g), (o2, p)) in check.gcds.iter().zip(&fb.assignment) {
                    assert_eq!(o, o2);
                    assert!((g % BigInt::from(*p)).is_zero());
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(coprime_free_box(0, 2).is_err());
        assert!(coprime_free_box(2, 1).is_err());
        assert!(coprime_free_box(1000, 2).unwrap_err().is_budget());
    }
}
