use std::sync::OnceLock;

use crate::certified::{rounding_slack, CertifiedValue};
use crate::error::{Error, Result};

/// Largest truncation prime any computation will use.
pub const PRIME_CAP: u64 = 1_000_000;

/// Upper bound `π(x) ≤ x/ln x · (1 + C/ln x)` for all `x > 1` (Dusart).
const DUSART_PI_CONSTANT: f64 = 1.2762;

/// All primes `≤ n`, ascending. Odd-only sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = usize::try_from(n).expect("sieve bound exceeds address space");
    // index i stands for 2i + 1
    let half = (n - 1) / 2 + 1;
    let mut composite = vec![false; half];
    let mut i = 1;
    while (2 * i + 1) * (2 * i + 1) <= n {
        if !composite[i] {
            let p = 2 * i + 1;
            let mut j = (p * p - 1) / 2;
            while j < half {
                composite[j] = true;
                j += p;
            }
        }
        i += 1;
    }
    let mut primes = Vec::with_capacity(if n > 10 { n / ((n as f64).ln() as usize).max(1) } else { 4 });
    primes.push(2);
    primes.extend((1..half).filter(|&i| !composite[i]).map(|i| (2 * i + 1) as u64));
    primes
}

/// The primes up to [`PRIME_CAP`], computed once.
pub fn prime_table() -> &'static [u64] {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| primes_up_to(PRIME_CAP))
}

/// `π(x)` for `x ≤ PRIME_CAP`.
pub fn prime_count(x: u64) -> Option<u64> {
    (x <= PRIME_CAP).then(|| prime_table().partition_point(|&p| p <= x) as u64)
}

/// Certified upper bound on `Σ_{q prime, q > p} q^{-s}` for `p ≥ 2`, `s ≥ 2`.
///
/// Minimum of two valid bounds: the integral comparison
/// `Σ_{n > p} n^{-s} ≤ p^{1-s}/(s-1)`, and partial summation against Dusart's
/// bound on `π`, `Σ_{q > p} q^{-s} = -π(p) p^{-s} + s ∫_p^∞ π(t) t^{-s-1} dt
/// ≤ s/(s-1) · (1 + C/ln p)/ln p · p^{1-s} - π(p) p^{-s}` (the second needs the
/// exact `π(p)`, so it is only used for `p ≤ PRIME_CAP`).
pub fn prime_tail_bound(p: u64, s: u32) -> f64 {
    assert!(p >= 2 && s >= 2, "prime_tail_bound needs p >= 2, s >= 2");
    let pf = p as f64;
    let sf = s as f64;
    let head = pf.powf(1.0 - sf) / (sf - 1.0);
    let mut bound = head;
    if let Some(pi) = prime_count(p) {
        let lnp = pf.ln();
        let dusart = sf / (sf - 1.0) * (1.0 + DUSART_PI_CONSTANT / lnp) / lnp * pf.powf(1.0 - sf)
            - pi as f64 * pf.powf(-sf);
        if dusart > 0.0 {
            bound = bound.min(dusart);
        }
    }
    // powf/ln are faithfully rounded; inflate to cover them.
    bound * (1.0 + 64.0 * f64::EPSILON)
}

/// Smallest prime `P ≤ PRIME_CAP` with `prime_tail_bound(P, s) ≤ target`.
pub fn truncation_prime(target: f64, s: u32) -> Option<u64> {
    let table = prime_table();
    if !(target > 0.0) {
        return None;
    }
    let idx = table.partition_point(|&p| prime_tail_bound(p, s) > target);
    // the bound is monotone up to tiny wiggles; walk forward to be safe
    table[idx.min(table.len())..].iter().copied().find(|&p| prime_tail_bound(p, s) <= target)
}

/// `ζ(s)` for integer `s ≥ 2` to within `eps`.
///
/// Direct summation of `n^{-s}` for `n ≤ N`, plus the tail enclosed by
/// `∫_{N+1}^∞ t^{-s} dt ≤ Σ_{n>N} n^{-s} ≤ ∫_N^∞ t^{-s} dt`. When `eps` would
/// need more than `10^7` terms, the returned radius reflects what was reached.
pub fn zeta(s: u32, eps: f64) -> Result<CertifiedValue> {
    if s < 2 {
        return Err(Error::param("zeta needs s >= 2"));
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps must be positive"));
    }
    const MAX_TERMS: u64 = 10_000_000;
    let sf = s as f64;
    // tail width ≤ N^{-s} by the mean value theorem
    let n = (eps.powf(-1.0 / sf).ceil() as u64).clamp(1, MAX_TERMS);
    let e = -(s as i32);
    let mut sum = 0.0;
    for k in (1..=n).rev() {
        sum += (k as f64).powi(e);
    }
    let nf = n as f64;
    let tail_hi = nf.powf(1.0 - sf) / (sf - 1.0);
    let tail_lo = (nf + 1.0).powf(1.0 - sf) / (sf - 1.0);
    let enclosure = CertifiedValue::from_interval(sum + tail_lo, sum + tail_hi);
    Ok(CertifiedValue::new(
        enclosure.value,
        enclosure.error + rounding_slack(enclosure.value, 2 * n as usize + 8),
    ))
}
