//! C1 cutoff ramps.
//!
//! The ramp shape is the cubic Hermite smoothstep `3s^2 - 2s^3`: the
//! minimal-degree polynomial with value 0/1 and slope 0 at both ends,
//! whose slope peaks at `1.5/(b-a)`, inside the required `2/(b-a)` cap.
//!
//! Ramps are parameterized in linear scale but evaluated from log
//! coordinates: with `alpha = ln a`, `beta = ln b`, `lambda = ln t`, the
//! ramp fraction is `s = (e^(lambda-beta) - e^(alpha-beta)) / (1 - e^(alpha-beta))`,
//! which stays well defined long after `a`, `b`, and `t` underflow.
//!
//! Interval validation is written as `!(a < b)` so NaN endpoints are
//! rejected rather than silently ordered.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use thiserror::Error;

use crate::logspace::LogScalar;

#[derive(Debug, Error, PartialEq)]
pub enum CutoffError {
    #[error("ramp endpoints must satisfy a < b (got a = {a}, b = {b})")]
    EmptyInterval { a: f64, b: f64 },
}

pub fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// `1 - smoothstep(s)` without cancellation near `s = 1`.
pub fn smoothstep_complement(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    (1.0 - s) * (1.0 - s) * (1.0 + 2.0 * s)
}

/// Derivative of the smoothstep with respect to `s`; peaks at 1.5.
pub fn smoothstep_slope(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    6.0 * s * (1.0 - s)
}

/// Rising cutoff in linear coordinates: 0 at `a`, 1 at `b`, flat at both
/// ends. Arguments outside `[a, b]` clamp to the boundary values.
pub fn phi1(a: f64, b: f64, t: f64) -> Result<f64, CutoffError> {
    if !(a < b) {
        return Err(CutoffError::EmptyInterval { a, b });
    }
    Ok(smoothstep((t - a) / (b - a)))
}

/// Derivative of `phi1` in `t`; zero outside `[a, b]`.
pub fn phi1_prime(a: f64, b: f64, t: f64) -> Result<f64, CutoffError> {
    if !(a < b) {
        return Err(CutoffError::EmptyInterval { a, b });
    }
    Ok(smoothstep_slope((t - a) / (b - a)) / (b - a))
}

/// Falling cutoff: `1 - phi1`.
pub fn phi2(a: f64, b: f64, t: f64) -> Result<f64, CutoffError> {
    if !(a < b) {
        return Err(CutoffError::EmptyInterval { a, b });
    }
    Ok(smoothstep_complement((t - a) / (b - a)))
}

/// A ramp interval held in log coordinates, for evaluation at depths where
/// the linear endpoints underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    ln_lower: f64,
    ln_upper: f64,
    /// `e^(ln_lower - ln_upper) = a/b`; underflows harmlessly to 0 for
    /// very wide ramps.
    gap: f64,
    /// `ln(b - a) = ln_upper + ln1p(-a/b)`.
    ln_width: f64,
}

impl CutoffSpec {
    pub fn new(ln_lower: f64, ln_upper: f64) -> Result<Self, CutoffError> {
        if !(ln_lower < ln_upper) {
            return Err(CutoffError::EmptyInterval { a: ln_lower, b: ln_upper });
        }
        let gap = (ln_lower - ln_upper).exp();
        let ln_width = ln_upper + (-gap).ln_1p();
        Ok(CutoffSpec { ln_lower, ln_upper, gap, ln_width })
    }

    pub fn ln_lower(&self) -> f64 {
        self.ln_lower
    }

    pub fn ln_upper(&self) -> f64 {
        self.ln_upper
    }

    /// Natural log of the linear width `b - a`.
    pub fn ln_width(&self) -> f64 {
        self.ln_width
    }

    /// Linear ramp fraction `s = (t - a)/(b - a)` from `ln t`, clamped.
    pub fn fraction(&self, log_t: f64) -> f64 {
        let s = ((log_t - self.ln_upper).exp() - self.gap) / (1.0 - self.gap);
        s.clamp(0.0, 1.0)
    }

    /// Rising cutoff value at `ln t`.
    pub fn rise(&self, log_t: f64) -> f64 {
        smoothstep(self.fraction(log_t))
    }

    /// `1 - rise`, computed without cancellation.
    pub fn rise_complement(&self, log_t: f64) -> f64 {
        smoothstep_complement(self.fraction(log_t))
    }

    /// Falling cutoff value at `ln t`.
    pub fn fall(&self, log_t: f64) -> f64 {
        smoothstep_complement(self.fraction(log_t))
    }

    /// `1 - fall`, computed without cancellation.
    pub fn fall_complement(&self, log_t: f64) -> f64 {
        smoothstep(self.fraction(log_t))
    }

    /// Magnitude of the cutoff slope in `t` as a log scalar:
    /// `h'(s) / (b - a)`, exact zero at the flat ends.
    pub fn slope_magnitude(&self, log_t: f64) -> LogScalar {
        let h = smoothstep_slope(self.fraction(log_t));
        if h == 0.0 {
            LogScalar::ZERO
        } else {
            LogScalar::pos(h.ln() - self.ln_width)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_conditions() {
        assert_eq!(phi1(0.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(phi1_prime(0.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(phi1(0.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(phi1_prime(0.0, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn midpoint_value_and_slope() {
        assert_eq!(phi1(0.0, 1.0, 0.5).unwrap(), 0.5);
        assert_eq!(phi1_prime(0.0, 1.0, 0.5).unwrap(), 1.5);
        // Scaled interval: slope scales by 1/(b-a).
        assert!((phi1_prime(2.0, 6.0, 4.0).unwrap() - 1.5 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn clamps_outside_the_interval() {
        assert_eq!(phi1(0.0, 1.0, -3.0).unwrap(), 0.0);
        assert_eq!(phi1(0.0, 1.0, 7.0).unwrap(), 1.0);
        assert_eq!(phi1_prime(0.0, 1.0, -3.0).unwrap(), 0.0);
        assert_eq!(phi1_prime(0.0, 1.0, 7.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(phi1(1.0, 1.0, 1.0).is_err());
        assert!(phi1(2.0, 1.0, 1.5).is_err());
        assert!(CutoffSpec::new(0.0, 0.0).is_err());
    }

    #[test]
    fn stays_inside_unit_band_with_capped_slope() {
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let v = phi1(0.0, 1.0, t).unwrap();
            let d = phi1_prime(0.0, 1.0, t).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert!((0.0..=2.0).contains(&d)); // cap 2/(b-a) with b-a = 1
        }
    }

    #[test]
    fn phi2_reverses_the_limits() {
        assert_eq!(phi2(0.0, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(phi2(0.0, 1.0, 1.0).unwrap(), 0.0);
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let sum = phi1(0.0, 1.0, t).unwrap() + phi2(0.0, 1.0, t).unwrap();
            assert!((sum - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn log_frame_matches_linear_frame_when_representable() {
        // Interval [5^-16, 5^-8]: both endpoints comfortably linear.
        let a = 5.0f64.powi(-16);
        let b = 5.0f64.powi(-8);
        let ramp = CutoffSpec::new(a.ln(), b.ln()).unwrap();
        for i in 0..=64 {
            let t = a + (b - a) * i as f64 / 64.0;
            let lin = phi1(a, b, t).unwrap();
            let log = ramp.rise(t.ln());
            assert!((lin - log).abs() < 1e-12, "i = {i}: {lin} vs {log}");
        }
        let width = (b - a).ln();
        assert!((ramp.ln_width() - width).abs() < 1e-12);
    }

    #[test]
    fn log_frame_survives_underflowing_endpoints() {
        // Interval [M^(-2^40), M^(-2^39)]: hopeless in linear scale.
        let ln_m = 5.0f64.ln();
        let lo = -f64::exp2(40.0) * ln_m;
        let hi = -f64::exp2(39.0) * ln_m;
        let ramp = CutoffSpec::new(lo, hi).unwrap();
        assert_eq!(ramp.rise(lo), 0.0);
        assert_eq!(ramp.rise(hi), 1.0);
        let mid = hi + (2.0f64).ln() - (2.0f64).ln() - 0.7; // just below the top
        let v = ramp.rise(mid);
        assert!(v.is_finite() && (0.0..=1.0).contains(&v));
        assert!(ramp.ln_width().is_finite());
        let slope = ramp.slope_magnitude(mid);
        assert!(!slope.is_zero());
        assert!(slope.log_mag().is_finite());
    }

    #[test]
    fn complements_are_stable_near_one() {
        let ramp = CutoffSpec::new(-32.0, -16.0).unwrap();
        // Close to the upper end the rise is nearly 1; the complement must
        // come from the factored form, not from 1 - rise.
        let log_t = -16.0 - 1e-9;
        let c = ramp.rise_complement(log_t);
        assert!(c > 0.0);
        let s = ramp.fraction(log_t);
        assert!((c - (1.0 - s) * (1.0 - s) * (1.0 + 2.0 * s)).abs() <= f64::EPSILON);
    }

    #[test]
    fn slope_magnitude_matches_linear_derivative() {
        let a = 5.0f64.powi(-16);
        let b = 5.0f64.powi(-8);
        let ramp = CutoffSpec::new(a.ln(), b.ln()).unwrap();
        for i in 1..64 {
            let t = a + (b - a) * i as f64 / 64.0;
            let lin = phi1_prime(a, b, t).unwrap();
            let log = ramp.slope_magnitude(t.ln()).to_real();
            assert!((lin - log).abs() <= 1e-10 * lin.abs().max(1.0));
        }
    }
}
