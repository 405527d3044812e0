//! Real numbers carried together with a rigorous error radius.

use serde::Serialize;

/// A value `v` with error radius `e`: the true quantity lies in `[v - e, v + e]`.
///
/// Radii come from explicit truncation inequalities plus a forward
/// rounding-error allowance; see [`rounding_slack`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedValue {
    pub value: f64,
    pub error: f64,
}

impl CertifiedValue {
    pub const ZERO: CertifiedValue = CertifiedValue { value: 0.0, error: 0.0 };
    pub const ONE: CertifiedValue = CertifiedValue { value: 1.0, error: 0.0 };

    pub fn new(value: f64, error: f64) -> Self {
        debug_assert!(error >= 0.0 && error.is_finite(), "bad error radius {error}");
        CertifiedValue { value, error }
    }

    pub fn exact(value: f64) -> Self {
        CertifiedValue { value, error: 0.0 }
    }

    /// Builds the midpoint form of the enclosure `[lo, hi]`.
    pub fn from_interval(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        CertifiedValue { value: 0.5 * (lo + hi), error: 0.5 * (hi - lo) }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.error
    }

    pub fn upper(&self) -> f64 {
        self.value + self.error
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }

    /// Intersects the enclosure with `[0, 1]`.
    pub fn clamp_probability(self) -> Self {
        let lo = self.lower().max(0.0);
        let hi = self.upper().min(1.0);
        if lo > hi {
            // Only reachable through rounding at the boundary.
            let v = self.value.clamp(0.0, 1.0);
            return CertifiedValue { value: v, error: (v - self.value).abs() };
        }
        CertifiedValue::from_interval(lo, hi)
    }

    /// Enclosure of `1 / x`; requires `x` to be bounded away from zero.
    pub fn recip(self) -> Self {
        let lo = self.lower();
        let hi = self.upper();
        assert!(lo > 0.0, "reciprocal of an enclosure containing 0");
        let a = 1.0 / hi;
        let b = 1.0 / lo;
        let v = 1.0 / self.value;
        let err = (v - a).max(b - v) + rounding_slack(v, 2);
        CertifiedValue::new(v, err)
    }

    /// Signed sum `Σ sign_i · x_i`, errors added in absolute value.
    pub fn signed_sum<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (f64, CertifiedValue)>,
    {
        let mut value = 0.0;
        let mut error = 0.0;
        let mut magnitude = 0.0;
        let mut count = 0usize;
        for (sign, term) in terms {
            value += sign * term.value;
            error += term.error;
            magnitude += term.value.abs();
            count += 1;
        }
        CertifiedValue::new(value, error + rounding_slack(magnitude, count))
    }

    pub fn sum<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = CertifiedValue>,
    {
        Self::signed_sum(terms.into_iter().map(|t| (1.0, t)))
    }
}

/// Forward rounding allowance for `ops` floating-point operations whose
/// intermediate values are bounded by `magnitude`.
///
/// Each IEEE operation contributes at most one unit roundoff of relative error;
/// we charge two per operation plus a constant so that compounding over long
/// products (`(1 + u)^n - 1 ≤ 1.01·n·u` for `n·u < 0.01`) is covered.
pub fn rounding_slack(magnitude: f64, ops: usize) -> f64 {
    magnitude.abs() * f64::EPSILON * (2.0 * ops as f64 + 8.0)
}
