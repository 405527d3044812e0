//! Seeded samplers for the limit laws.
//!
//! All samplers read the same digit stream: the level-`n` digit vector
//! `δ_n ∈ (Z/p)^d` of prime `p` is `rng::digit_vector(seed, p, n)`, and the
//! Haar point of `Z_p^d` is `Y = Σ_n δ_n p^{n−1}`. The coprime colouring marks
//! `x` black iff `x ≡ Y (mod p)` for some `p ≤ P`; the gcd labelling sets
//! `V_p(x) = v_p(x − Y)` by walking the coset chain
//! `Y mod p ⊃ Y mod p^2 ⊃ …` while it still meets the window. A colouring and
//! a gcd sample drawn with the same seed are therefore coupled: `x` is white
//! iff its label is 1.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::affine::{distance_to_gamma, SubgroupBasis};
use crate::error::{Error, Result};
use crate::lattice::{prime_table, prime_tail_bound, truncation_prime, GcdLabel, LatticePoint, Window, PRIME_CAP};
use crate::rng::{digit_coordinate0, digit_vector, Seed};

/// Levels walked down one coset chain before giving up.
pub const CHAIN_DEPTH_CAP: u32 = 64;

/// One sampled colouring of a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColouringSample {
    pub window: Window,
    /// `white[i]` for the `i`-th offset of the window.
    pub white: Vec<bool>,
    pub truncation_prime: u64,
    pub tv_bound: f64,
}

impl ColouringSample {
    pub fn is_white(&self, offset: &LatticePoint) -> Option<bool> {
        self.window.index_of(offset).map(|i| self.white[i])
    }

    pub fn white_count(&self) -> usize {
        self.white.iter().filter(|&&w| w).count()
    }
}

/// One sampled gcd labelling of a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GcdSample {
    pub window: Window,
    pub labels: Vec<GcdLabel>,
    pub truncation_prime: u64,
    pub tv_bound: f64,
    /// Offsets (window indices) whose label is infinite or overflowed `u64`.
    pub divergent: Vec<usize>,
}

impl GcdSample {
    pub fn label(&self, offset: &LatticePoint) -> Option<GcdLabel> {
        self.window.index_of(offset).map(|i| self.labels[i])
    }
}

/// Residues of a Haar point of `Ẑ^d` at finitely many primes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TruncatedProfinitePoint {
    pub d: usize,
    #[serde(skip)]
    pub seed: Seed,
    /// `p ↦ (e_p, Y mod p^{e_p})`.
    pub residues: BTreeMap<u64, (u32, Vec<u64>)>,
}

impl TruncatedProfinitePoint {
    /// `Y mod p^e`, computed from the seed; agrees with stored residues.
    pub fn residue(&self, p: u64, e: u32) -> Result<Vec<u64>> {
        haar_residue(self.seed, self.d, p, e)
    }

    /// Raises the precision at `p` to `e` (never lowers it, never resamples).
    pub fn refine(&mut self, p: u64, e: u32) -> Result<()> {
        let cur = self.residues.get(&p).map_or(0, |(ep, _)| *ep);
        if e > cur {
            let r = self.residue(p, e)?;
            self.residues.insert(p, (e, r));
        }
        Ok(())
    }
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|q| q * q <= p).all(|q| p % q != 0)
}

/// `Y mod p^e` with `Y = Σ_{n ≤ e} δ_n p^{n−1}`.
fn haar_residue(seed: Seed, d: usize, p: u64, e: u32) -> Result<Vec<u64>> {
    p.checked_pow(e).ok_or_else(|| Error::overflow(format!("{p}^{e} exceeds u64")))?;
    let mut out = vec![0u64; d];
    let mut digits = vec![0u64; d];
    let mut scale = 1u64;
    for level in 1..=e as u64 {
        digit_vector(seed, p, level, &mut digits);
        for (o, &g) in out.iter_mut().zip(&digits) {
            *o += g * scale;
        }
        scale = scale.wrapping_mul(p);
    }
    Ok(out)
}

/// Independent uniform residues `Y mod p^{e_p}` for each requested prime.
pub fn sample_haar_profinite(d: usize, precisions: &[(u64, u32)], seed: Seed) -> Result<TruncatedProfinitePoint> {
    if d == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    let mut residues = BTreeMap::new();
    for &(p, e) in precisions {
        if !is_prime(p) {
            return Err(Error::param(format!("{p} is not prime")));
        }
        if e == 0 {
            return Err(Error::param("precisions must be at least 1"));
        }
        residues.insert(p, (e, haar_residue(seed, d, p, e)?));
    }
    Ok(TruncatedProfinitePoint { d, seed, residues })
}

/// The truncation prime for window size `m` and tolerance `eps`, or an error.
pub fn sampler_truncation(m: usize, d: usize, eps: f64) -> Result<u64> {
    if !(eps > 0.0) {
        return Err(Error::param("eps must be positive"));
    }
    truncation_prime(eps / m.max(1) as f64, d as u32).ok_or_else(|| {
        Error::budget(format!(
            "eps = {eps:e} needs primes beyond {PRIME_CAP} for a {m}-point window in dimension {d}"
        ))
    })
}

/// `|W|·Σ_{p>P} p^{-d}` bound on the truncation error.
pub fn truncation_tv(m: usize, d: usize, p: u64) -> f64 {
    m as f64 * prime_tail_bound(p, d as u32)
}

/// The window as seen by the samplers: a full box gets arithmetic fast paths.
enum Offsets<'a> {
    Box { lo: Vec<i64>, hi: Vec<i64>, strides: Vec<usize> },
    List(&'a [LatticePoint]),
}

impl<'a> Offsets<'a> {
    fn new(window: &'a Window) -> Self {
        match window.as_box() {
            Some((lo, hi)) => {
                let d = lo.len();
                let mut strides = vec![1usize; d];
                for i in (0..d.saturating_sub(1)).rev() {
                    strides[i] = strides[i + 1] * (hi[i + 1] - lo[i + 1] + 1) as usize;
                }
                Offsets::Box { lo, hi, strides }
            }
            None => Offsets::List(window.offsets()),
        }
    }

    /// Calls `f(index, x)` for every offset `x ≡ ρ (mod p)`, where `ρ` is the
    /// level-1 digit vector. Coordinate 0 is drawn first and the rest only
    /// when it can match.
    fn level1_hits<F: FnMut(usize, &[i64], &[u64])>(&self, seed: Seed, p: u64, d: usize, rho: &mut [u64], mut f: F) {
        let r0 = digit_coordinate0(seed, p, 1) as i64;
        let pi = p as i64;
        match self {
            Offsets::Box { lo, hi, strides } => {
                let first0 = lo[0] + (r0 - lo[0]).rem_euclid(pi);
                if first0 > hi[0] {
                    return;
                }
                digit_vector(seed, p, 1, rho);
                let mut firsts = Vec::with_capacity(d);
                for i in 0..d {
                    let f = lo[i] + (rho[i] as i64 - lo[i]).rem_euclid(pi);
                    if f > hi[i] {
                        return;
                    }
                    firsts.push(f);
                }
                let mut x = firsts.clone();
                loop {
                    let idx: usize = (0..d).map(|i| (x[i] - lo[i]) as usize * strides[i]).sum();
                    f(idx, &x, rho);
                    let mut i = d;
                    loop {
                        if i == 0 {
                            return;
                        }
                        i -= 1;
                        if x[i] + pi <= hi[i] {
                            x[i] += pi;
                            break;
                        }
                        x[i] = firsts[i];
                    }
                }
            }
            Offsets::List(pts) => {
                let mut drawn = false;
                for (idx, x) in pts.iter().enumerate() {
                    if x.0[0].rem_euclid(pi) != r0 {
                        continue;
                    }
                    if !drawn {
                        digit_vector(seed, p, 1, rho);
                        drawn = true;
                    }
                    if x.0.iter().zip(rho.iter()).all(|(&c, &r)| c.rem_euclid(pi) == r as i64) {
                        f(idx, &x.0, rho);
                    }
                }
            }
        }
    }
}

fn check_window(window: &Window, d: usize) -> Result<()> {
    if window.dim() != d {
        return Err(Error::param(format!("window has dimension {}, expected {d}", window.dim())));
    }
    Ok(())
}

/// Coprime colouring of `window` with primes `≤ P(eps)`.
pub fn sample_cop_window(window: &Window, d: usize, eps: f64, seed: Seed) -> Result<ColouringSample> {
    check_window(window, d)?;
    if d == 1 {
        if !(eps > 0.0) {
            return Err(Error::param("eps must be positive"));
        }
        return Ok(ColouringSample { window: window.clone(), white: vec![false; window.len()], truncation_prime: 0, tv_bound: 0.0 });
    }
    let p = sampler_truncation(window.len(), d, eps)?;
    sample_cop_window_truncated(window, d, p, seed)
}

/// Coprime colouring using every prime `≤ max_prime`, whatever the error.
pub fn sample_cop_window_truncated(window: &Window, d: usize, max_prime: u64, seed: Seed) -> Result<ColouringSample> {
    check_window(window, d)?;
    if d == 1 {
        return Ok(ColouringSample { window: window.clone(), white: vec![false; window.len()], truncation_prime: 0, tv_bound: 0.0 });
    }
    if !(2..=PRIME_CAP).contains(&max_prime) {
        return Err(Error::param(format!("truncation prime must lie in 2..={PRIME_CAP}")));
    }
    let offsets = Offsets::new(window);
    let mut white = vec![true; window.len()];
    let mut rho = vec![0u64; d];
    let table = prime_table();
    let end = table.partition_point(|&q| q <= max_prime);
    for &p in &table[..end] {
        offsets.level1_hits(seed, p, d, &mut rho, |idx, _, _| white[idx] = false);
    }
    let last = table[end - 1];
    Ok(ColouringSample { window: window.clone(), white, truncation_prime: last, tv_bound: truncation_tv(window.len(), d, last) })
}

/// Coset chain at one prime: `V_p` for every hit offset, as `(index, V)`.
fn chain_at_prime(offsets: &Offsets, seed: Seed, p: u64, d: usize, rho: &mut [u64]) -> Result<Vec<(usize, u32)>> {
    // (index, q) with q = (x − c_n)/p^n for the current coset c_n + p^n Z^d
    let mut live: Vec<(usize, Vec<i64>)> = Vec::new();
    offsets.level1_hits(seed, p, d, rho, |idx, x, r| {
        let q = x.iter().zip(r).map(|(&c, &ri)| (c - ri as i64).div_euclid(p as i64)).collect();
        live.push((idx, q));
    });
    let mut out = Vec::with_capacity(live.len());
    let pi = p as i64;
    let mut delta = vec![0u64; d];
    let mut level = 1u32;
    while !live.is_empty() {
        if level >= CHAIN_DEPTH_CAP {
            return Err(Error::ChainDepth { prime: p, depth: CHAIN_DEPTH_CAP });
        }
        digit_vector(seed, p, level as u64 + 1, &mut delta);
        let mut next = Vec::new();
        for (idx, q) in live {
            if q.iter().zip(&delta).all(|(&qi, &di)| qi.rem_euclid(pi) == di as i64) {
                let q2 = q.iter().zip(&delta).map(|(&qi, &di)| (qi - di as i64).div_euclid(pi)).collect();
                next.push((idx, q2));
            } else {
                out.push((idx, level));
            }
        }
        live = next;
        level += 1;
    }
    Ok(out)
}

fn multiply_label(label: &mut GcdLabel, p: u64, v: u32) {
    if let GcdLabel::Finite(g) = label {
        *label = match p.checked_pow(v).and_then(|pv| g.checked_mul(pv)) {
            Some(n) => GcdLabel::Finite(n),
            None => GcdLabel::Infinite,
        };
    }
}

/// Gcd labelling of `window` with primes `≤ P(eps)`.
pub fn sample_gcd_window(window: &Window, d: usize, eps: f64, seed: Seed) -> Result<GcdSample> {
    check_window(window, d)?;
    if d < 2 {
        return Err(Error::param("the gcd law needs d >= 2"));
    }
    let p = sampler_truncation(window.len(), d, eps)?;
    sample_gcd_window_truncated(window, d, p, seed)
}

/// Gcd labelling using every prime `≤ max_prime`.
pub fn sample_gcd_window_truncated(window: &Window, d: usize, max_prime: u64, seed: Seed) -> Result<GcdSample> {
    check_window(window, d)?;
    if d < 2 {
        return Err(Error::param("the gcd law needs d >= 2"));
    }
    if !(2..=PRIME_CAP).contains(&max_prime) {
        return Err(Error::param(format!("truncation prime must lie in 2..={PRIME_CAP}")));
    }
    let offsets = Offsets::new(window);
    let mut labels = vec![GcdLabel::Finite(1); window.len()];
    let mut rho = vec![0u64; d];
    let table = prime_table();
    let end = table.partition_point(|&q| q <= max_prime);
    for &p in &table[..end] {
        for (idx, v) in chain_at_prime(&offsets, seed, p, d, &mut rho)? {
            multiply_label(&mut labels[idx], p, v);
        }
    }
    let divergent = labels.iter().enumerate().filter(|(_, l)| **l == GcdLabel::Infinite).map(|(i, _)| i).collect();
    let last = table[end - 1];
    Ok(GcdSample { window: window.clone(), labels, truncation_prime: last, tv_bound: truncation_tv(window.len(), d, last), divergent })
}

/// `v_p(n)` capped at `cap`, with `v_p(0) = cap`.
fn capped_valuation(n: u64, p: u64, cap: u32) -> u32 {
    if n == 0 {
        return cap;
    }
    let mut n = n;
    let mut e = 0;
    while e < cap && n % p == 0 {
        n /= p;
        e += 1;
    }
    e
}

/// Gcd labelling under the limit law conditioned on `Γ = B·Z^k`.
///
/// The Haar point is `Y = B·t` with `t` Haar in `Ẑ^k` (digit vectors of
/// length `k`). An offset `x ∉ Γ` can only be divisible by `p^n` when
/// `p^n ≤ d(x, Γ)`, so its label is computed exactly from `t mod p^e`,
/// `e = ⌊log_p d(x, Γ)⌋`. Offsets on `Γ` get label `∞` for `k = 1`; for
/// `k ≥ 2` they follow the coset chain of `t` in `Z^k` up to `P(eps)`.
pub fn sample_gcd_window_affine(basis: &SubgroupBasis, window: &Window, d: usize, eps: f64, seed: Seed) -> Result<GcdSample> {
    check_window(window, d)?;
    if basis.dim() != d {
        return Err(Error::param("basis and window dimensions differ"));
    }
    basis.require_maximal()?;
    let k = basis.rank();
    let mut labels = vec![GcdLabel::Finite(1); window.len()];
    let mut on_gamma: Vec<(usize, Vec<i64>)> = Vec::new();

    for (idx, x) in window.offsets().iter().enumerate() {
        let dist = distance_to_gamma(x, basis)?;
        if dist == 0 {
            on_gamma.push((idx, basis.coefficients(&x.0).expect("on Γ")));
            continue;
        }
        for &p in prime_table().iter().take_while(|&&p| p <= dist) {
            let mut e = 0u32;
            let mut pe = 1u64;
            while pe.checked_mul(p).map_or(false, |n| n <= dist) {
                pe *= p;
                e += 1;
            }
            let t = haar_residue(seed, k, p, e)?;
            // x − B·t mod p^e
            let m = pe as i128;
            let mut v = e;
            for (i, &xi) in x.0.iter().enumerate() {
                let bt: i128 = basis.columns().iter().zip(&t).map(|(col, &tj)| col[i] as i128 * tj as i128 % m).sum();
                let r = (xi as i128 - bt).rem_euclid(m) as u64;
                v = v.min(capped_valuation(r, p, e));
                if v == 0 {
                    break;
                }
            }
            multiply_label(&mut labels[idx], p, v);
        }
    }

    let mut divergent = Vec::new();
    let mut truncation = 0;
    let mut tv_bound = 0.0;
    if !on_gamma.is_empty() {
        if k == 1 {
            for (idx, _) in &on_gamma {
                labels[*idx] = GcdLabel::Infinite;
            }
        } else {
            let coeffs = Window::new(on_gamma.iter().map(|(_, s)| LatticePoint(s.clone())).collect())?;
            let sub = sample_gcd_window(&coeffs, k, eps, seed)?;
            for (idx, s) in &on_gamma {
                labels[*idx] = sub.label(&LatticePoint(s.clone())).expect("coefficient offset");
            }
            truncation = sub.truncation_prime;
            tv_bound = sub.tv_bound;
        }
    }
    divergent.extend(labels.iter().enumerate().filter(|(_, l)| **l == GcdLabel::Infinite).map(|(i, _)| i));
    Ok(GcdSample { window: window.clone(), labels, truncation_prime: truncation, tv_bound, divergent })
}
