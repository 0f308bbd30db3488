//! The nonlinear perturbation and the full map.
//!
//! Each truncation level `k` carries a C1 envelope `c_k(t)` in `[0, 1]`
//! that is 0 far from the norm band of level `k`, ramps up across
//! `[M^(-2^(k+3)), M^(-2^(k+2)))`, holds 1 on `[M^(-2^(k+2)), M^(-2^k))`,
//! and ramps back down across `[M^(-2^k), M^(-2^(k-1)))`. The
//! perturbation at norm `t` subtracts `c_k(t) * L_k` over the active
//! levels, so for fixed `t` the whole map is again a weighted shift with
//! effective weights `beta_n(t) = alpha_n * (1 - c_{v(n)+1}(t))` — exactly
//! zero on the level mask whenever the envelope sits on its plateau.
//!
//! All interval tests compare `ln t` against precomputed `-2^j ln M`
//! boundaries, half-open on the right.

use crate::cutoff::CutoffSpec;
use crate::logspace::LogScalar;
use crate::shift::ShiftSpec;
use crate::sparse::SparseVec;
use crate::weights::{epsilon, Params, WeightProfile};

/// Which of the piecewise regions of an envelope a log-norm falls in.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Region {
    Below,
    Rise,
    Plateau,
    Fall,
    Above,
}

fn region(k: u32, log_t: f64, p: &Params) -> Region {
    // Boundaries in increasing log order: thr(k+3) < thr(k+2) < thr(k) < thr(k-1).
    if log_t < p.threshold_log(k + 3) {
        Region::Below
    } else if log_t < p.threshold_log(k + 2) {
        Region::Rise
    } else if log_t < p.threshold_log(k) {
        Region::Plateau
    } else if log_t < p.threshold_log(k - 1) {
        Region::Fall
    } else {
        Region::Above
    }
}

fn rise_ramp(k: u32, p: &Params) -> CutoffSpec {
    CutoffSpec::new(p.threshold_log(k + 3), p.threshold_log(k + 2))
        .expect("thresholds are strictly increasing in log")
}

fn fall_ramp(k: u32, p: &Params) -> CutoffSpec {
    CutoffSpec::new(p.threshold_log(k), p.threshold_log(k - 1))
        .expect("thresholds are strictly increasing in log")
}

/// Envelope scalar `c_k(t)` evaluated at `ln t`.
pub fn envelope(k: u32, log_t: f64, p: &Params) -> f64 {
    assert!(k >= 1, "envelope levels start at 1");
    match region(k, log_t, p) {
        Region::Below | Region::Above => 0.0,
        Region::Rise => rise_ramp(k, p).rise(log_t),
        Region::Plateau => 1.0,
        Region::Fall => fall_ramp(k, p).fall(log_t),
    }
}

/// `1 - c_k(t)`, computed without cancellation so plateau zeros are exact
/// and near-plateau values keep their digits.
pub fn envelope_complement(k: u32, log_t: f64, p: &Params) -> f64 {
    assert!(k >= 1, "envelope levels start at 1");
    match region(k, log_t, p) {
        Region::Below | Region::Above => 1.0,
        Region::Rise => rise_ramp(k, p).rise_complement(log_t),
        Region::Plateau => 0.0,
        Region::Fall => fall_ramp(k, p).fall_complement(log_t),
    }
}

/// Derivative `d c_k / d t` (in linear `t`) as a signed log scalar:
/// positive on the rising ramp, negative on the falling ramp, exact zero
/// elsewhere. Representable even when the ramp width underflows.
pub fn envelope_slope(k: u32, log_t: f64, p: &Params) -> LogScalar {
    assert!(k >= 1, "envelope levels start at 1");
    match region(k, log_t, p) {
        Region::Below | Region::Above | Region::Plateau => LogScalar::ZERO,
        Region::Rise => rise_ramp(k, p).slope_magnitude(log_t),
        Region::Fall => -fall_ramp(k, p).slope_magnitude(log_t),
    }
}

/// The consecutive run of levels whose envelope case is one of the three
/// nonzero branches at a given norm, together with the envelope values.
/// At most four levels are active at any single point; the value at the
/// foot of a ramp may still be 0.0.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveBand {
    first: u32,
    envelopes: Vec<f64>,
}

impl ActiveBand {
    pub fn empty() -> Self {
        ActiveBand { first: 0, envelopes: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.envelopes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.envelopes.len()
    }

    /// Smallest and largest active level, if any.
    pub fn k_range(&self) -> Option<(u32, u32)> {
        if self.envelopes.is_empty() {
            None
        } else {
            Some((self.first, self.first + self.envelopes.len() as u32 - 1))
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.envelopes
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.first + i as u32, c))
    }
}

/// Active levels at `ln t`. Empty for `t >= M^(-1)` (depth `u <= 1`),
/// where the perturbation vanishes identically.
pub fn active_set(log_t: f64, p: &Params) -> ActiveBand {
    if log_t >= -p.ln_m() {
        return ActiveBand::empty();
    }
    let depth = p.depth(log_t); // > 1 here
    let guess = depth.log2().floor();
    let lo = if guess > 5.0 { guess as u32 - 4 } else { 1 };
    let mut first = 0u32;
    let mut envelopes = Vec::new();
    for k in lo..=(guess as u32 + 2) {
        let r = region(k, log_t, p);
        if matches!(r, Region::Rise | Region::Plateau | Region::Fall) {
            if envelopes.is_empty() {
                first = k;
            }
            envelopes.push(envelope(k, log_t, p));
        } else if !envelopes.is_empty() {
            break; // the active run is consecutive
        }
    }
    debug_assert!(envelopes.len() <= 4);
    ActiveBand { first, envelopes }
}

/// The norm band index: the `k >= 1` with
/// `ln t` in `[-2^(k+1) ln M, -2^k ln M)`, if one exists.
pub fn band_of_log_norm(log_norm: f64, p: &Params) -> Option<u32> {
    if log_norm >= p.threshold_log(1) {
        return None;
    }
    let depth = p.depth(log_norm); // > 2 here
    let guess = depth.log2().floor() as u32;
    (guess.saturating_sub(1).max(1)..=guess + 1)
        .find(|&k| p.threshold_log(k + 1) <= log_norm && log_norm < p.threshold_log(k))
}

/// Effective weight at position `n` for norm level `exp(log_t)`:
/// `beta_n(t) = alpha_n * (1 - c_{v(n)+1}(t))`, exactly zero on the level
/// mask whenever the envelope sits on its plateau.
pub fn effective_weight(n: u64, log_t: f64, p: &Params) -> LogScalar {
    EffectiveShift::new(*p, log_t).weight(n)
}

/// For fixed norm level `t`, the full map is this weighted shift with
/// weights `beta_n(t) = alpha_n * (1 - c_{v(n)+1}(t))`.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveShift {
    params: Params,
    log_t: f64,
}

impl EffectiveShift {
    pub fn new(params: Params, log_t: f64) -> Self {
        EffectiveShift { params, log_t }
    }

    pub fn log_t(&self) -> f64 {
        self.log_t
    }

    pub fn weight(&self, n: u64) -> LogScalar {
        assert!(n >= 1);
        let level = n.trailing_zeros() + 1;
        let comp = envelope_complement(level, self.log_t, &self.params);
        if comp == 0.0 {
            return LogScalar::ZERO;
        }
        epsilon(level, &self.params)
            .expect("level >= 1")
            .mul(LogScalar::from_real(comp))
    }

    pub fn apply(&self, x: &SparseVec) -> SparseVec {
        SparseVec::from_entries(x.iter().map(|(n, c)| (n + 1, self.weight(n).mul(c))))
            .expect("shifted indices stay positive")
    }

    pub fn shift_spec(&self) -> ShiftSpec {
        let copy = *self;
        ShiftSpec::from_fn(format!("effective@{}", self.log_t), move |n| copy.weight(n))
    }
}

/// The full map: zero at zero, otherwise the effective shift at the
/// vector's own norm applied to the vector.
pub fn full_map(x: &SparseVec, p: &Params) -> SparseVec {
    if x.is_zero() {
        return SparseVec::zero();
    }
    EffectiveShift::new(*p, x.norm().log_mag()).apply(x)
}

/// The perturbation operator pinned at norm level `exp(log_t)`, applied to
/// `x`: sums `-c_k(t) * L_k x` over active levels in a single pass.
pub fn perturbation_at(log_t: f64, x: &SparseVec, p: &Params) -> SparseVec {
    let band = active_set(log_t, p);
    if band.is_empty() {
        return SparseVec::zero();
    }
    let (k_lo, k_hi) = band.k_range().expect("nonempty");
    SparseVec::from_entries(x.iter().filter_map(|(n, c)| {
        let level = n.trailing_zeros() + 1;
        if level < k_lo || level > k_hi {
            return None;
        }
        let c_k = envelope(level, log_t, p);
        if c_k == 0.0 {
            return None;
        }
        let eps = epsilon(level, p).expect("level >= 1");
        Some((n + 1, LogScalar::from_real(-c_k).mul(eps).mul(c)))
    }))
    .expect("shifted indices stay positive")
}

/// The perturbation at the vector's own norm.
pub fn perturbation(x: &SparseVec, p: &Params) -> SparseVec {
    if x.is_zero() {
        return SparseVec::zero();
    }
    perturbation_at(x.norm().log_mag(), x, p)
}

/// Derivative of the perturbation at `x`, applied to a direction `y`:
/// over active levels, `-c_k'(|x|) <x/|x|, y> L_k x - c_k(|x|) L_k y`.
/// At `x = 0` the derivative is zero.
pub fn perturbation_derivative(x: &SparseVec, y: &SparseVec, p: &Params) -> SparseVec {
    if x.is_zero() {
        return SparseVec::zero();
    }
    let norm = x.norm();
    let log_t = norm.log_mag();
    let band = active_set(log_t, p);
    if band.is_empty() {
        return SparseVec::zero();
    }
    let radial = SparseVec::inner(x, y).mul(norm.recip()); // <x/|x|, y>
    let mut out = SparseVec::zero();
    for (k, c_k) in band.iter() {
        let level = ShiftSpec::from_profile(
            WeightProfile::level(*p, k).expect("k >= 1"),
        );
        let slope = envelope_slope(k, log_t, p);
        if !slope.is_zero() && !radial.is_zero() {
            let coeff = (-slope).mul(radial);
            out = SparseVec::axpy(coeff, &level.apply(x), &out);
        }
        if c_k != 0.0 {
            out = SparseVec::axpy(LogScalar::from_real(-c_k), &level.apply(y), &out);
        }
    }
    out
}

/// Derivative of the full map at `x`, applied to `y`: the plain shift on
/// `y` plus the perturbation derivative. At `x = 0` this is exactly the
/// plain shift.
pub fn full_map_derivative(x: &SparseVec, y: &SparseVec, p: &Params) -> SparseVec {
    let linear = ShiftSpec::from_profile(WeightProfile::full(*p)).apply(y);
    SparseVec::axpy(LogScalar::ONE, &perturbation_derivative(x, y, p), &linear)
}
