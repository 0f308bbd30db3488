//! Weighted-shift application, windowed operator norms, and the
//! annihilation test for products drawn from a common vanishing class.
//!
//! A shift never mixes coordinates: `e_n -> weight(n) * e_{n+1}`. Powers
//! and norms therefore reduce to products of weights along windows of
//! consecutive positions, and composition is evaluated by repeated
//! application rather than by materializing matrices.

use std::sync::Arc;

use thiserror::Error;

use crate::logspace::LogScalar;
use crate::sparse::SparseVec;
use crate::weights::{in_omega_k, Params, WeightError, WeightProfile};

#[derive(Debug, Error, PartialEq)]
pub enum ShiftError {
    #[error("power must be >= 1")]
    ZeroPower,
    #[error("p must be >= 1")]
    ZeroP,
    #[error("horizon {horizon} is shorter than the window length {power}")]
    HorizonTooShort { power: u64, horizon: u64 },
    #[error("operator {index} failed vanishing-class certification for level {level}")]
    NotInClass { index: usize, level: u32 },
    #[error(transparent)]
    Weights(#[from] WeightError),
}

type WeightFn = Arc<dyn Fn(u64) -> LogScalar + Send + Sync>;

/// A weighted shift described by its weight function and a diagnostic
/// label. Cloning shares the weight closure.
#[derive(Clone)]
pub struct ShiftSpec {
    label: String,
    weight: WeightFn,
}

impl ShiftSpec {
    pub fn from_profile(profile: WeightProfile) -> Self {
        ShiftSpec {
            label: profile.label(),
            weight: Arc::new(move |n| profile.weight(n)),
        }
    }

    pub fn from_fn<F>(label: impl Into<String>, weight: F) -> Self
    where
        F: Fn(u64) -> LogScalar + Send + Sync + 'static,
    {
        ShiftSpec { label: label.into(), weight: Arc::new(weight) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn weight(&self, n: u64) -> LogScalar {
        (self.weight)(n)
    }

    /// Applies the shift: each entry `(n, c)` maps to `(n+1, weight(n)*c)`,
    /// with zero products pruned.
    pub fn apply(&self, x: &SparseVec) -> SparseVec {
        SparseVec::from_entries(
            x.iter().map(|(n, c)| (n + 1, self.weight(n).mul(c))),
        )
        .expect("shifted indices stay positive")
    }
}

impl std::fmt::Debug for ShiftSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShiftSpec").field("label", &self.label).finish()
    }
}

/// Norm of the `power`-th operator power: the maximum over starting
/// positions `n <= horizon` of the product of `power` consecutive weights,
/// computed as a sliding log-sum (add one log, drop one log). Windows
/// containing an exact zero contribute nothing; if every window does, the
/// result is exact zero.
pub fn op_norm_power(op: &ShiftSpec, power: u64, horizon: u64) -> Result<LogScalar, ShiftError> {
    if power == 0 {
        return Err(ShiftError::ZeroPower);
    }
    if horizon < power {
        return Err(ShiftError::HorizonTooShort { power, horizon });
    }
    let mut sum = 0.0f64;
    let mut zeros = 0u64;
    let push = |w: LogScalar, sum: &mut f64, zeros: &mut u64, add: bool| {
        if w.is_zero() {
            *zeros = if add { *zeros + 1 } else { *zeros - 1 };
        } else if add {
            *sum += w.log_mag();
        } else {
            *sum -= w.log_mag();
        }
    };
    for n in 1..=power {
        push(op.weight(n), &mut sum, &mut zeros, true);
    }
    let mut best: Option<f64> = None;
    for start in 1..=horizon {
        if zeros == 0 {
            best = Some(match best {
                Some(b) if b >= sum => b,
                _ => sum,
            });
        }
        if start < horizon {
            push(op.weight(start), &mut sum, &mut zeros, false);
            push(op.weight(start + power), &mut sum, &mut zeros, true);
        }
    }
    Ok(match best {
        Some(log) => LogScalar::pos(log),
        None => LogScalar::ZERO,
    })
}

/// Closed form for the norm of the `(2^p - 1)`-th power of the full shift:
/// log value `sum_{q=1..p} 2^(p-q) * ln eps_q`.
pub fn wn_norm_closed(p: u32, params: &Params) -> Result<LogScalar, ShiftError> {
    if p == 0 {
        return Err(ShiftError::ZeroP);
    }
    let mut log = 0.0f64;
    for q in 1..=p {
        let ln_eps = params.ln_m() - (q - 1) as f64 * params.ln_k();
        log += f64::exp2((p - q) as f64) * ln_eps;
    }
    Ok(LogScalar::pos(log))
}

/// Partial spectral-radius data: `exp` of
/// `(2^p / (2^p - 1)) * sum_{q=1..p} ln(eps_q) / 2^q`,
/// which equals the `(2^p - 1)`-th root of the corresponding power norm.
/// The sequence decreases monotonically to `M / K`.
pub fn rho_estimate(p: u32, params: &Params) -> Result<f64, ShiftError> {
    if p == 0 {
        return Err(ShiftError::ZeroP);
    }
    let mut sum = 0.0f64;
    for q in 1..=p {
        let ln_eps = params.ln_m() - (q - 1) as f64 * params.ln_k();
        sum += ln_eps * f64::exp2(-(q as f64));
    }
    let factor = 1.0 / (1.0 - f64::exp2(-(p as f64)));
    Ok((factor * sum).exp())
}

/// Outcome of the annihilation test for a family of shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct Annihilation {
    pub annihilated: bool,
    /// First basis index whose image survived, if any.
    pub survivor: Option<u64>,
}

/// Certifies each operator against the level-`k` vanishing class (weights
/// zero at every position of dyadic valuation `k - 1`), then checks that
/// the composed product sends every `e_i` in `basis_range` to the exact
/// zero vector. Certification failures are reported per operator index.
pub fn verify_nilpotent_set(
    ops: &[ShiftSpec],
    k: u32,
    basis_range: std::ops::RangeInclusive<u64>,
) -> Result<Annihilation, ShiftError> {
    let window_end = basis_range.end() + ops.len() as u64;
    for (index, op) in ops.iter().enumerate() {
        if !in_omega_k(|n| op.weight(n), window_end, k)? {
            return Err(ShiftError::NotInClass { index, level: k });
        }
    }
    for i in basis_range {
        let mut v = SparseVec::basis(i, LogScalar::ONE).expect("i >= 1");
        // Operator product W_1 W_2 ... W_r acts rightmost first.
        for op in ops.iter().rev() {
            v = op.apply(&v);
            if v.is_zero() {
                break;
            }
        }
        if !v.is_zero() {
            return Ok(Annihilation { annihilated: false, survivor: Some(i) });
        }
    }
    Ok(Annihilation { annihilated: true, survivor: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::alpha;

    fn p53() -> Params {
        Params::new(5.0, 3.0).unwrap()
    }

    fn full_shift() -> ShiftSpec {
        ShiftSpec::from_profile(WeightProfile::full(p53()))
    }

    fn complement(m: u32) -> ShiftSpec {
        ShiftSpec::from_profile(WeightProfile::complement(p53(), m).unwrap())
    }

    #[test]
    fn apply_moves_and_scales() {
        let e1 = SparseVec::basis(1, LogScalar::ONE).unwrap();
        let img = full_shift().apply(&e1);
        assert_eq!(img.support_min(), Some(2));
        assert!((img.entry(2).to_real() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn apply_kills_masked_positions() {
        let e1 = SparseVec::basis(1, LogScalar::ONE).unwrap();
        assert!(complement(1).apply(&e1).is_zero());
        assert!(full_shift().apply(&SparseVec::zero()).is_zero());
    }

    #[test]
    fn apply_shifts_support_by_one() {
        let v = SparseVec::from_entries([
            (3, LogScalar::pos(-2.0)),
            (10, LogScalar::neg(-7.0)),
        ])
        .unwrap();
        let img = full_shift().apply(&v);
        let support: Vec<u64> = img.iter().map(|(i, _)| i).collect();
        assert_eq!(support, vec![4, 11]);
    }

    #[test]
    fn op_norm_single_power_is_sup_weight() {
        let n = op_norm_power(&full_shift(), 1, 64).unwrap();
        assert!((n.to_real() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn op_norm_window_of_three() {
        // Brute-force oracle over all windows in linear arithmetic.
        let p = p53();
        let mut best = 0.0f64;
        for n in 1..=1000u64 {
            let prod: f64 = (n..n + 3).map(|i| alpha(i, &p).unwrap().to_real()).product();
            best = best.max(prod);
        }
        assert!((best - 125.0 / 3.0).abs() < 1e-10);
        let got = op_norm_power(&full_shift(), 3, 1000).unwrap();
        assert!((got.to_real() - 125.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn op_norm_of_nilpotent_power_is_exact_zero() {
        for m in 1..=8u32 {
            let len = 1u64 << m;
            let n = op_norm_power(&complement(m), len, 4 * len).unwrap();
            assert!(n.is_zero(), "level {m}");
        }
    }

    #[test]
    fn op_norm_rejects_short_horizon() {
        assert_eq!(
            op_norm_power(&full_shift(), 10, 9),
            Err(ShiftError::HorizonTooShort { power: 10, horizon: 9 })
        );
        assert_eq!(op_norm_power(&full_shift(), 0, 9), Err(ShiftError::ZeroPower));
    }

    #[test]
    fn closed_form_matches_small_cases() {
        let p = p53();
        assert!((wn_norm_closed(1, &p).unwrap().to_real() - 5.0).abs() < 1e-12);
        assert!((wn_norm_closed(2, &p).unwrap().to_real() - 125.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn closed_form_matches_sliding_window() {
        let p = p53();
        for pp in 1..=6u32 {
            let n = (1u64 << pp) - 1;
            let closed = wn_norm_closed(pp, &p).unwrap().log_mag();
            let windowed = op_norm_power(&full_shift(), n, 512).unwrap().log_mag();
            let scale = closed.abs().max(1.0);
            assert!((closed - windowed).abs() <= 1e-12 * scale, "p = {pp}");
        }
    }

    #[test]
    fn prefix_product_attains_the_power_norm() {
        let p = p53();
        let op = full_shift();
        let mut prefix = 0.0f64;
        for n in 1..=64u64 {
            prefix += alpha(n, &p).unwrap().log_mag();
            let norm = op_norm_power(&op, n, 4096).unwrap().log_mag();
            let scale = prefix.abs().max(1.0);
            assert!((norm - prefix).abs() <= 1e-11 * scale, "n = {n}");
        }
    }

    #[test]
    fn complement_norm_never_exceeds_full_norm() {
        let full = op_norm_power(&full_shift(), 1, 4096).unwrap().log_mag();
        for m in 1..=20u32 {
            let c = op_norm_power(&complement(m), 1, 4096).unwrap();
            assert!(c.log_mag() <= full, "m = {m}");
        }
    }

    #[test]
    fn level_norm_is_eps_m_and_vanishes() {
        // The horizon must reach the first mask hit at 2^(m-1).
        let p = p53();
        let mut prev = f64::INFINITY;
        for m in 1..=20u32 {
            let lvl = ShiftSpec::from_profile(WeightProfile::level(p, m).unwrap());
            let n = op_norm_power(&lvl, 1, 1u64 << m).unwrap();
            let eps = crate::weights::epsilon(m, &p).unwrap();
            assert_eq!(n.log_mag(), eps.log_mag(), "m = {m}");
            assert!(n.log_mag() < prev, "norms must decrease toward zero");
            prev = n.log_mag();
        }
    }

    #[test]
    fn rho_estimate_examples() {
        let p = p53();
        assert!((rho_estimate(1, &p).unwrap() - 5.0).abs() < 1e-12);
        let expect = (125.0f64 / 3.0).powf(1.0 / 3.0);
        assert!((rho_estimate(2, &p).unwrap() - expect).abs() < 1e-12);
        // Consistency with the closed-form power norm.
        let n = wn_norm_closed(2, &p).unwrap().log_mag();
        assert!((rho_estimate(2, &p).unwrap().ln() - n / 3.0).abs() < 1e-13);
    }

    #[test]
    fn rho_residual_matches_exact_tail() {
        // For the geometric family the residual has the closed form
        // p * ln K / (2^p - 1); pin it rather than a looser bound.
        let p = p53();
        let limit = (p.m() / p.k()).ln();
        for pp in 1..=48u32 {
            let diff = rho_estimate(pp, &p).unwrap().ln() - limit;
            let exact = pp as f64 * p.ln_k() / (f64::exp2(pp as f64) - 1.0);
            assert!((diff - exact).abs() <= 1e-12, "p = {pp}: {diff} vs {exact}");
        }
    }

    #[test]
    fn nilpotent_pair_annihilates() {
        let ops = vec![complement(1), complement(1)];
        let out = verify_nilpotent_set(&ops, 1, 1..=64).unwrap();
        assert!(out.annihilated);
    }

    #[test]
    fn mixed_class_members_annihilate() {
        // Complements of level 3 with different non-mask weights all sit in
        // the same vanishing class, so any 8 of them compose to zero.
        let p = p53();
        let ops: Vec<ShiftSpec> = (0..8u32)
            .map(|j| {
                let scale = LogScalar::pos(-(j as f64) * 0.37);
                ShiftSpec::from_fn(format!("custom{j}"), move |n| {
                    let base = WeightProfile::complement(p, 3).unwrap().weight(n);
                    base.mul(scale)
                })
            })
            .collect();
        let out = verify_nilpotent_set(&ops, 3, 1..=64).unwrap();
        assert!(out.annihilated);
    }

    #[test]
    fn one_fewer_factor_leaves_a_survivor() {
        for k in 1..=6u32 {
            let len = (1usize << k) - 1;
            let ops = vec![complement(k); len];
            let out = verify_nilpotent_set(&ops, k, 1..=64.max(1 << (k + 1))).unwrap();
            assert!(!out.annihilated, "k = {k}");
            assert!(out.survivor.is_some());
        }
    }

    #[test]
    fn class_certification_failure_names_the_operator() {
        let ops = vec![complement(2), full_shift(), complement(2), complement(2)];
        match verify_nilpotent_set(&ops, 2, 1..=32) {
            Err(ShiftError::NotInClass { index: 1, level: 2 }) => {}
            other => panic!("expected per-operator failure, got {other:?}"),
        }
    }
}
