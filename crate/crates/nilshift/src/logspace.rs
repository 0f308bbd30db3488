//! Signed scalars stored as (sign, natural-log magnitude).
//!
//! Every coefficient, weight, and norm in this crate lives in the log
//! domain so that magnitudes like `M^(-2^40)` stay representable and
//! comparable long after they underflow an `f64` in linear scale.
//! Exact zero is a distinguished sign state, never a very negative
//! log-magnitude: the shift truncations need true zeros.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

/// Counts additions that nearly cancelled (opposite signs, log magnitudes
/// within one ulp but not bit-equal). Purely diagnostic.
static CANCELLATION_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of near-cancellation events observed since the last reset.
pub fn cancellation_events() -> u64 {
    CANCELLATION_EVENTS.load(AtomicOrdering::Relaxed)
}

/// Resets the near-cancellation counter.
pub fn reset_cancellation_events() {
    CANCELLATION_EVENTS.store(0, AtomicOrdering::Relaxed);
}

/// A real number represented as a sign in {-1, 0, +1} and the natural log
/// of its absolute value. `log_mag` is meaningful only when `sign != 0`;
/// the zero value keeps `log_mag = 0.0` so equality stays well defined.
#[derive(Clone, Copy, Debug)]
pub struct LogScalar {
    sign: i8,
    log_mag: f64,
}

// `mul` and `add` are the primary names; the operator impls delegate.
#[allow(clippy::should_implement_trait)]
impl LogScalar {
    pub const ZERO: LogScalar = LogScalar { sign: 0, log_mag: 0.0 };
    pub const ONE: LogScalar = LogScalar { sign: 1, log_mag: 0.0 };

    /// Positive value with the given log magnitude.
    pub fn pos(log_mag: f64) -> Self {
        LogScalar { sign: 1, log_mag }
    }

    /// Negative value with the given log magnitude.
    pub fn neg(log_mag: f64) -> Self {
        LogScalar { sign: -1, log_mag }
    }

    /// Builds from an explicit sign; a zero sign yields the canonical zero.
    pub fn from_sign_log(sign: i8, log_mag: f64) -> Self {
        match sign.signum() {
            0 => LogScalar::ZERO,
            s => LogScalar { sign: s, log_mag },
        }
    }

    /// Converts a linear-scale value. `0.0` maps to the exact zero state.
    pub fn from_real(x: f64) -> Self {
        if x == 0.0 {
            LogScalar::ZERO
        } else if x > 0.0 {
            LogScalar { sign: 1, log_mag: x.ln() }
        } else {
            LogScalar { sign: -1, log_mag: (-x).ln() }
        }
    }

    /// Converts back to linear scale; underflows to 0.0 past the f64 range.
    pub fn to_real(self) -> f64 {
        self.sign as f64 * self.log_mag.exp()
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    /// Natural log of the absolute value. Only meaningful when nonzero.
    pub fn log_mag(self) -> f64 {
        self.log_mag
    }

    /// Log magnitude, with exact zero mapped to -inf so magnitude
    /// comparisons remain total.
    pub fn log_mag_or_neg_inf(self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            self.log_mag
        }
    }

    pub fn abs(self) -> Self {
        LogScalar { sign: self.sign.abs(), log_mag: self.log_mag }
    }

    /// Multiplication: signs multiply, log magnitudes add, zero absorbs.
    pub fn mul(self, other: LogScalar) -> LogScalar {
        if self.sign == 0 || other.sign == 0 {
            return LogScalar::ZERO;
        }
        LogScalar {
            sign: self.sign * other.sign,
            log_mag: self.log_mag + other.log_mag,
        }
    }

    /// Reciprocal; panics on zero.
    pub fn recip(self) -> LogScalar {
        assert!(self.sign != 0, "reciprocal of exact zero");
        LogScalar { sign: self.sign, log_mag: -self.log_mag }
    }

    /// Addition through a shifted exponential. Opposite signs with
    /// bit-identical log magnitudes cancel to the exact zero state.
    pub fn add(self, other: LogScalar) -> LogScalar {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        if self.sign != other.sign && self.log_mag == other.log_mag {
            return LogScalar::ZERO;
        }
        let (big, small) = if self.log_mag >= other.log_mag {
            (self, other)
        } else {
            (other, self)
        };
        let delta = small.log_mag - big.log_mag; // <= 0
        if big.sign == small.sign {
            LogScalar {
                sign: big.sign,
                log_mag: big.log_mag + delta.exp().ln_1p(),
            }
        } else {
            let ulp = (big.log_mag.abs() * f64::EPSILON).max(f64::MIN_POSITIVE);
            if -delta <= ulp {
                CANCELLATION_EVENTS.fetch_add(1, AtomicOrdering::Relaxed);
            }
            LogScalar {
                sign: big.sign,
                log_mag: big.log_mag + (-delta.exp()).ln_1p(),
            }
        }
    }

    /// Orders by magnitude only.
    pub fn abs_cmp(self, other: LogScalar) -> Ordering {
        self.log_mag_or_neg_inf()
            .partial_cmp(&other.log_mag_or_neg_inf())
            .expect("log magnitudes are never NaN")
    }

    /// Orders by signed value.
    pub fn value_cmp(self, other: LogScalar) -> Ordering {
        match (self.sign, other.sign) {
            (0, 0) => Ordering::Equal,
            (a, b) if a != b => a.cmp(&b),
            (1, _) => self.abs_cmp(other),
            _ => other.abs_cmp(self),
        }
    }
}

impl PartialEq for LogScalar {
    fn eq(&self, other: &Self) -> bool {
        if self.sign == 0 && other.sign == 0 {
            return true;
        }
        self.sign == other.sign && self.log_mag == other.log_mag
    }
}

impl Mul for LogScalar {
    type Output = LogScalar;
    fn mul(self, rhs: LogScalar) -> LogScalar {
        LogScalar::mul(self, rhs)
    }
}

impl Add for LogScalar {
    type Output = LogScalar;
    fn add(self, rhs: LogScalar) -> LogScalar {
        LogScalar::add(self, rhs)
    }
}

impl Neg for LogScalar {
    type Output = LogScalar;
    fn neg(self) -> LogScalar {
        LogScalar { sign: -self.sign, log_mag: self.log_mag }
    }
}

impl fmt::Display for LogScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            1 => write!(f, "exp({})", self.log_mag),
            _ => write!(f, "-exp({})", self.log_mag),
        }
    }
}

/// Log-domain l2 accumulation: returns the positive scalar whose log
/// magnitude is `0.5 * ln(sum_i exp(2 * m_i))`, with the largest magnitude
/// factored out and the remaining terms accumulated in descending order.
/// Zero terms are skipped; an empty input gives exact zero.
pub fn log_sum_exp_sq(terms: &[LogScalar]) -> LogScalar {
    let mut mags: Vec<f64> = terms
        .iter()
        .filter(|t| !t.is_zero())
        .map(|t| t.log_mag)
        .collect();
    if mags.is_empty() {
        return LogScalar::ZERO;
    }
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).expect("log magnitudes are never NaN"));
    let top = mags[0];
    let mut sum = 1.0;
    for &m in &mags[1..] {
        sum += (2.0 * (m - top)).exp();
    }
    LogScalar::pos(top + 0.5 * sum.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close_ulps(a: f64, b: f64, ulps: f64) -> bool {
        let scale = a.abs().max(b.abs()).max(1.0);
        (a - b).abs() <= ulps * scale * f64::EPSILON
    }

    #[test]
    fn mul_adds_log_mags() {
        let five = LogScalar::from_real(5.0);
        let sq = five.mul(five);
        assert_eq!(sq.sign(), 1);
        assert_eq!(sq.log_mag(), 2.0 * 5.0_f64.ln());
    }

    #[test]
    fn mul_zero_absorbs() {
        let x = LogScalar::neg(123.456);
        assert!(x.mul(LogScalar::ZERO).is_zero());
        assert!(LogScalar::ZERO.mul(x).is_zero());
    }

    #[test]
    fn mul_sign_rule() {
        let a = LogScalar::neg(2.0_f64.ln());
        let b = LogScalar::pos(3.0_f64.ln());
        let p = a.mul(b);
        assert_eq!(p.sign(), -1);
        assert!(close_ulps(p.log_mag(), 6.0_f64.ln(), 2.0));
    }

    #[test]
    fn add_identity() {
        let x = LogScalar::neg(-712.25);
        let s = x.add(LogScalar::ZERO);
        assert_eq!(s, x);
        assert_eq!(LogScalar::ZERO.add(x), x);
    }

    #[test]
    fn add_three_plus_one_is_four() {
        // 3 + 1 = 4 through the log1p path, against direct real arithmetic.
        let s = LogScalar::from_real(3.0).add(LogScalar::from_real(1.0));
        assert_eq!(s.sign(), 1);
        assert!(close_ulps(s.log_mag(), 4.0_f64.ln(), 2.0));
    }

    #[test]
    fn add_exact_cancellation() {
        for c in [0.0, -5.5, 1e300, -88_431.75] {
            let s = LogScalar::pos(c).add(LogScalar::neg(c));
            assert!(s.is_zero());
        }
    }

    #[test]
    fn near_cancellation_is_counted() {
        reset_cancellation_events();
        let c = 100.0_f64;
        let nudged = f64::from_bits(c.to_bits() + 1);
        let s = LogScalar::pos(c).add(LogScalar::neg(nudged));
        assert!(!s.is_zero());
        assert!(cancellation_events() >= 1);
    }

    #[test]
    fn lse_sq_single_term_keeps_log_mag() {
        for t in [LogScalar::pos(-4000.0), LogScalar::neg(7.25)] {
            let n = log_sum_exp_sq(&[t]);
            assert_eq!(n.sign(), 1);
            assert_eq!(n.log_mag(), t.log_mag());
        }
    }

    #[test]
    fn lse_sq_equal_terms_gain_half_ln2() {
        let c = -1.0e6;
        let n = log_sum_exp_sq(&[LogScalar::pos(c), LogScalar::neg(c)]);
        assert_eq!(n.log_mag(), c + 0.5 * 2.0_f64.ln());
    }

    #[test]
    fn lse_sq_absorbs_tiny_term() {
        // exp(2 * -800) underflows; the big term must pass through untouched.
        let n = log_sum_exp_sq(&[LogScalar::pos(0.0), LogScalar::pos(-800.0)]);
        assert_eq!(n.log_mag(), 0.0);
        assert!(n.log_mag().is_finite());
    }

    #[test]
    fn lse_sq_empty_is_zero() {
        assert!(log_sum_exp_sq(&[]).is_zero());
        assert!(log_sum_exp_sq(&[LogScalar::ZERO, LogScalar::ZERO]).is_zero());
    }

    fn arb_scalar() -> impl Strategy<Value = LogScalar> {
        (prop_oneof![Just(-1i8), Just(1i8)], -600.0f64..600.0)
            .prop_map(|(s, m)| LogScalar::from_sign_log(s, m))
    }

    proptest! {
        #[test]
        fn mul_commutes_and_associates(a in arb_scalar(), b in arb_scalar(), c in arb_scalar()) {
            let ab = a.mul(b);
            let ba = b.mul(a);
            prop_assert_eq!(ab.sign(), ba.sign());
            prop_assert_eq!(ab.log_mag(), ba.log_mag());
            let left = a.mul(b).mul(c);
            let right = a.mul(b.mul(c));
            prop_assert_eq!(left.sign(), right.sign());
            // Reassociation error is a couple of ulps of the running sum.
            let scale = (a.log_mag().abs() + b.log_mag().abs() + c.log_mag().abs()).max(1.0);
            prop_assert!((left.log_mag() - right.log_mag()).abs() <= 2.0 * scale * f64::EPSILON);
        }

        #[test]
        fn add_commutes(a in arb_scalar(), b in arb_scalar()) {
            let ab = a.add(b);
            let ba = b.add(a);
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn add_zero_is_bit_exact(a in arb_scalar()) {
            prop_assert_eq!(a.add(LogScalar::ZERO), a);
        }

        #[test]
        fn real_roundtrip(x in -1.0e12f64..1.0e12) {
            prop_assume!(x != 0.0);
            let back = LogScalar::from_real(x).to_real();
            // The ln/exp round trip amplifies the log's rounding by |ln x|.
            let ulps = 2.0 + x.abs().ln().abs();
            prop_assert!(close_ulps(back, x, ulps));
        }

        #[test]
        fn add_matches_reals(x in -1.0e6f64..1.0e6, y in -1.0e6f64..1.0e6) {
            prop_assume!(x != 0.0 && y != 0.0);
            let exact = x + y;
            let got = LogScalar::from_real(x).add(LogScalar::from_real(y)).to_real();
            // Cancellation can legitimately shed digits; compare against input scale.
            let scale = x.abs().max(y.abs());
            prop_assert!((got - exact).abs() <= 1e-9 * scale);
        }

        #[test]
        fn lse_sq_permutation_and_scale(ms in prop::collection::vec(-400.0f64..400.0, 1..12), s in -200.0f64..200.0) {
            let terms: Vec<LogScalar> = ms.iter().map(|&m| LogScalar::pos(m)).collect();
            let base = log_sum_exp_sq(&terms);

            let mut reversed = terms.clone();
            reversed.reverse();
            let rev = log_sum_exp_sq(&reversed);
            prop_assert!(close_ulps(rev.log_mag(), base.log_mag(), 4.0));

            let scaled: Vec<LogScalar> = terms.iter().map(|t| t.mul(LogScalar::pos(s))).collect();
            let shifted = log_sum_exp_sq(&scaled);
            prop_assert!(close_ulps(shifted.log_mag(), base.log_mag() + s, 4.0));
        }
    }
}
