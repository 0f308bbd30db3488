//! The weight sequence behind the shift construction.
//!
//! A pair `(M, K)` with `M > K > 1` fixes a geometric family
//! `eps_m = M / K^(m-1)`. The shift weight at position `n` is
//! `alpha_n = eps_{1 + v(n)}`, where `v(n)` is the dyadic valuation of `n`.
//! Truncation levels `L_m` keep only the `eps_m` weights (one hit every
//! `2^m` positions starting at `2^(m-1)`); their complements have weights
//! vanishing on exactly that mask.

use thiserror::Error;

use crate::logspace::LogScalar;

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("M > K > 1 is required (got M = {m}, K = {k})")]
    BadParams { m: f64, k: f64 },
    #[error("position index must be >= 1")]
    ZeroIndex,
    #[error("weight level must be >= 1")]
    ZeroLevel,
    #[error("window up to {got} cannot certify level {level}: need at least {needed}")]
    InsufficientWindow { level: u32, needed: u64, got: u64 },
}

/// The construction parameters: `M > K > 1`, with their natural logs
/// precomputed once. Validation is strict; nothing downstream survives a
/// degenerate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    m: f64,
    k: f64,
    ln_m: f64,
    ln_k: f64,
}

impl Params {
    pub fn new(m: f64, k: f64) -> Result<Self, WeightError> {
        if !(m.is_finite() && k.is_finite() && m > k && k > 1.0) {
            return Err(WeightError::BadParams { m, k });
        }
        Ok(Params { m, k, ln_m: m.ln(), ln_k: k.ln() })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn ln_m(&self) -> f64 {
        self.ln_m
    }

    pub fn ln_k(&self) -> f64 {
        self.ln_k
    }

    /// Natural log of the cutoff radius `M^(-2^j)`.
    pub fn threshold_log(&self, j: u32) -> f64 {
        -f64::exp2(j as f64) * self.ln_m
    }

    /// Norm depth `u = -log(t) / log(M)`, i.e. `t = M^(-u)`.
    pub fn depth(&self, log_t: f64) -> f64 {
        -log_t / self.ln_m
    }
}

impl Default for Params {
    fn default() -> Self {
        Params::new(5.0, 3.0).expect("default parameters are valid")
    }
}

/// Dyadic valuation: the unique `v` with `n = 2^v * odd`.
pub fn dyadic_valuation(n: u64) -> Result<u32, WeightError> {
    if n == 0 {
        return Err(WeightError::ZeroIndex);
    }
    Ok(n.trailing_zeros())
}

/// `eps_m = M / K^(m-1)`, computed in the log domain as
/// `ln M - (m-1) ln K` so deep levels neither underflow nor drift.
pub fn epsilon(m: u32, p: &Params) -> Result<LogScalar, WeightError> {
    if m == 0 {
        return Err(WeightError::ZeroLevel);
    }
    Ok(LogScalar::pos(p.ln_m - (m - 1) as f64 * p.ln_k))
}

/// Shift weight at position `n`: `alpha_n = eps_{1 + v(n)}`.
pub fn alpha(n: u64, p: &Params) -> Result<LogScalar, WeightError> {
    let v = dyadic_valuation(n)?;
    epsilon(v + 1, p)
}

/// Whether the level-`m` truncation has a nonzero weight at position `n`,
/// i.e. `n = 2^(m-1) mod 2^m`, equivalently `v(n) = m - 1`.
pub fn lm_hits(m: u32, n: u64) -> Result<bool, WeightError> {
    if m == 0 {
        return Err(WeightError::ZeroLevel);
    }
    Ok(dyadic_valuation(n)? == m - 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    /// The full sequence `alpha_n`.
    Full,
    /// Only the level-`m` weights (`L_m`).
    Level(u32),
    /// The full sequence with the level-`m` weights zeroed (`W - L_m`).
    Complement(u32),
}

/// A pure, total weight profile over positions `n >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightProfile {
    params: Params,
    kind: ProfileKind,
}

impl WeightProfile {
    pub fn full(params: Params) -> Self {
        WeightProfile { params, kind: ProfileKind::Full }
    }

    pub fn level(params: Params, m: u32) -> Result<Self, WeightError> {
        if m == 0 {
            return Err(WeightError::ZeroLevel);
        }
        Ok(WeightProfile { params, kind: ProfileKind::Level(m) })
    }

    pub fn complement(params: Params, m: u32) -> Result<Self, WeightError> {
        if m == 0 {
            return Err(WeightError::ZeroLevel);
        }
        Ok(WeightProfile { params, kind: ProfileKind::Complement(m) })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn weight(&self, n: u64) -> LogScalar {
        assert!(n >= 1, "weight profiles are defined for n >= 1");
        let v = n.trailing_zeros();
        match self.kind {
            ProfileKind::Full => epsilon(v + 1, &self.params).expect("v + 1 >= 1"),
            ProfileKind::Level(m) => {
                if v == m - 1 {
                    epsilon(m, &self.params).expect("m >= 1")
                } else {
                    LogScalar::ZERO
                }
            }
            ProfileKind::Complement(m) => {
                if v == m - 1 {
                    LogScalar::ZERO
                } else {
                    epsilon(v + 1, &self.params).expect("v + 1 >= 1")
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            ProfileKind::Full => "W".to_string(),
            ProfileKind::Level(m) => format!("L{m}"),
            ProfileKind::Complement(m) => format!("W-L{m}"),
        }
    }
}

/// Certifies membership in the class of shifts whose weights vanish at
/// every position with dyadic valuation `k - 1`, checked over the window
/// `1..=window_end`. A window shorter than `2^k` cannot certify anything
/// and is rejected rather than reported as `false`.
pub fn in_omega_k<F>(weight: F, window_end: u64, k: u32) -> Result<bool, WeightError>
where
    F: Fn(u64) -> LogScalar,
{
    if k == 0 {
        return Err(WeightError::ZeroLevel);
    }
    let period = 1u64 << k;
    if window_end < period {
        return Err(WeightError::InsufficientWindow {
            level: k,
            needed: period,
            got: window_end,
        });
    }
    let mut n = period / 2; // first masked position, 2^(k-1)
    while n <= window_end {
        if !weight(n).is_zero() {
            return Ok(false);
        }
        n += period;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p53() -> Params {
        Params::new(5.0, 3.0).unwrap()
    }

    #[test]
    fn params_rejects_bad_pairs() {
        assert!(Params::new(3.0, 5.0).is_err());
        assert!(Params::new(5.0, 1.0).is_err());
        assert!(Params::new(5.0, 5.0).is_err());
        assert!(Params::new(f64::NAN, 3.0).is_err());
        assert!(Params::new(5.0, 3.0).is_ok());
    }

    #[test]
    fn params_logs_are_exact() {
        let p = p53();
        assert_eq!(p.ln_m(), 5.0_f64.ln());
        assert_eq!(p.ln_k(), 3.0_f64.ln());
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(dyadic_valuation(1).unwrap(), 0);
        assert_eq!(dyadic_valuation(8).unwrap(), 3);
        assert_eq!(dyadic_valuation(12).unwrap(), 2);
        assert_eq!(dyadic_valuation(0), Err(WeightError::ZeroIndex));
    }

    #[test]
    fn epsilon_examples() {
        let p = p53();
        assert_eq!(epsilon(0, &p), Err(WeightError::ZeroLevel));
        assert_eq!(epsilon(1, &p).unwrap().log_mag(), 5.0_f64.ln());
        // Direct substitution: eps_3 = 5/9, eps_5 = 5/81.
        let e3 = epsilon(3, &p).unwrap().to_real();
        assert!((e3 - 5.0 / 9.0).abs() < 1e-15);
        let e5 = epsilon(5, &p).unwrap().to_real();
        assert!((e5 - 5.0 / 81.0).abs() < 1e-15);
    }

    #[test]
    fn epsilon_is_strictly_decreasing() {
        let p = p53();
        for m in 1..60 {
            let a = epsilon(m, &p).unwrap().log_mag();
            let b = epsilon(m + 1, &p).unwrap().log_mag();
            assert!(b < a);
        }
    }

    #[test]
    fn alpha_examples() {
        let p = p53();
        assert!((alpha(1, &p).unwrap().to_real() - 5.0).abs() < 1e-15);
        assert!((alpha(4, &p).unwrap().to_real() - 5.0 / 9.0).abs() < 1e-15);
        assert!((alpha(16, &p).unwrap().to_real() - 5.0 / 81.0).abs() < 1e-15);
    }

    #[test]
    fn first_31_terms_follow_the_ruler_pattern() {
        // Indices of eps in alpha_1..alpha_31.
        let expected = [
            1, 2, 1, 3, 1, 2, 1, 4, 1, 2, 1, 3, 1, 2, 1, 5, 1, 2, 1, 3, 1, 2, 1, 4, 1, 2, 1, 3,
            1, 2, 1,
        ];
        for (i, &e) in expected.iter().enumerate() {
            let n = i as u64 + 1;
            assert_eq!(dyadic_valuation(n).unwrap() + 1, e, "at n = {n}");
        }
        // And alpha matches epsilon at those levels bit-for-bit.
        let p = p53();
        for (i, &e) in expected.iter().enumerate() {
            let n = i as u64 + 1;
            assert_eq!(alpha(n, &p).unwrap(), epsilon(e, &p).unwrap());
        }
    }

    #[test]
    fn alpha_sup_is_eps_1() {
        let p = p53();
        let top = epsilon(1, &p).unwrap().log_mag();
        for n in 1..=4096u64 {
            assert!(alpha(n, &p).unwrap().log_mag() <= top);
        }
        assert_eq!(alpha(1, &p).unwrap().log_mag(), top);
    }

    #[test]
    fn lm_hits_examples() {
        assert!(lm_hits(3, 4).unwrap());
        assert!(lm_hits(3, 12).unwrap());
        assert!(!lm_hits(3, 8).unwrap());
        assert_eq!(lm_hits(0, 4), Err(WeightError::ZeroLevel));
        assert_eq!(lm_hits(3, 0), Err(WeightError::ZeroIndex));
    }

    #[test]
    fn lm_hits_matches_valuation_brute_force() {
        // Exhaustive residue check against the periodic description:
        // hits exactly at n = 2^(m-1) (mod 2^m).
        for m in 1u32..=20 {
            let period = 1u64 << m;
            let first = period / 2;
            for n in 1..=1_000_000u64 {
                let expect = n % period == first;
                assert_eq!(lm_hits(m, n).unwrap(), expect, "m = {m}, n = {n}");
            }
        }
    }

    #[test]
    fn profile_level_and_complement_split_alpha() {
        let p = p53();
        let full = WeightProfile::full(p);
        for m in 1..=6u32 {
            let lvl = WeightProfile::level(p, m).unwrap();
            let comp = WeightProfile::complement(p, m).unwrap();
            for n in 1..=256u64 {
                let w = full.weight(n);
                let l = lvl.weight(n);
                let c = comp.weight(n);
                if lm_hits(m, n).unwrap() {
                    assert_eq!(l, w);
                    assert!(c.is_zero());
                } else {
                    assert!(l.is_zero());
                    assert_eq!(c, w);
                }
            }
        }
    }

    #[test]
    fn omega_certification() {
        let p = p53();
        let comp2 = WeightProfile::complement(p, 2).unwrap();
        assert!(in_omega_k(|n| comp2.weight(n), 64, 2).unwrap());

        let full = WeightProfile::full(p);
        assert!(!in_omega_k(|n| full.weight(n), 64, 1).unwrap());

        let comp3 = WeightProfile::complement(p, 3).unwrap();
        assert!(in_omega_k(|n| comp3.weight(n), 64, 3).unwrap());
        // Complement of L_3 is not in the class one level up.
        assert!(!in_omega_k(|n| comp3.weight(n), 64, 2).unwrap());
    }

    #[test]
    fn omega_window_too_short_is_an_error() {
        let p = p53();
        let comp = WeightProfile::complement(p, 3).unwrap();
        match in_omega_k(|n| comp.weight(n), 7, 3) {
            Err(WeightError::InsufficientWindow { level: 3, needed: 8, got: 7 }) => {}
            other => panic!("expected insufficient-window error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn alpha_is_periodic_per_level(m in 1u32..16, l in 0u64..1000) {
            let p = p53();
            let n = (1u64 << (m - 1)) * (2 * l + 1);
            prop_assert_eq!(alpha(n, &p).unwrap(), epsilon(m, &p).unwrap());
        }

        #[test]
        fn valuation_reconstructs_n(v in 0u32..40, odd_half in 0u64..1000) {
            let n = (1u64 << v) * (2 * odd_half + 1);
            prop_assert_eq!(dyadic_valuation(n).unwrap(), v);
        }
    }
}
