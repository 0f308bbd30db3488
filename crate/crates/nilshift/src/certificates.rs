//! Runtime-checkable certificates for the stability and bound structure
//! of the dynamics, plus the seeded random sampling they share.
//!
//! Each check produces a [`CertificateReport`]: pass/fail, the tolerance
//! used, and — on failure — a witness carrying the step and values at the
//! first violation. Ratio-style certificates evaluate the perturbation on
//! unit-normalized directions with the envelopes pinned at the target
//! radius; the scale structure makes this exact and it keeps the log
//! arithmetic free of large-magnitude cancellation.
//!
//! Comparisons are written as `!(a < bound)` on purpose: a certificate
//! may only pass when the inequality definitively holds, so a NaN must
//! register as a violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::logspace::LogScalar;
use crate::nonlinear::{band_of_log_norm, full_map, full_map_derivative, perturbation_at};
use crate::shift::{verify_nilpotent_set, wn_norm_closed, ShiftError, ShiftSpec};
use crate::sparse::SparseVec;
use crate::trajectory::{iterate, TrajectoryRecord};
use crate::weights::{epsilon, Params, WeightError, WeightProfile};

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("exponents must satisfy 0 < c1 < ln K / ln 2 < c2 (got c1 = {c1}, c2 = {c2}, ln K / ln 2 = {ratio})")]
    BadExponents { c1: f64, c2: f64, ratio: f64 },
    #[error("log radius {log_r} is not inside band {k}")]
    RadiusOutOfBand { k: u32, log_r: f64 },
    #[error("band index must be at least {min} (got {got})")]
    BandTooSmall { min: u32, got: u32 },
    #[error("band index {got} too deep: canonical index 2^(k-1) needs k <= 63")]
    BandTooDeep { got: u32 },
    #[error("p_max must be at least 3 (got {got})")]
    PMaxTooSmall { got: u32 },
    #[error("empty band range {lo}..={hi}")]
    EmptyRange { lo: u32, hi: u32 },
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Weights(#[from] WeightError),
}

/// Step and values at the first violation of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
    pub context: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
}

impl Witness {
    fn new(step: Option<u64>, context: impl Into<String>) -> Self {
        Witness { step, context: context.into(), values: BTreeMap::new() }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }
}

/// Pass/fail evidence for one certificate. A failing report always
/// carries a witness.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub certificate: String,
    pub params: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub tolerance: f64,
    pub runtime_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

struct ReportBuilder {
    certificate: String,
    params: BTreeMap<String, Value>,
    seed: Option<u64>,
    pass: bool,
    witness: Option<Witness>,
    tolerance: f64,
    note: Option<String>,
    started: Instant,
}

impl ReportBuilder {
    fn new(certificate: &str, tolerance: f64) -> Self {
        ReportBuilder {
            certificate: certificate.to_string(),
            params: BTreeMap::new(),
            seed: None,
            pass: true,
            witness: None,
            tolerance,
            note: None,
            started: Instant::now(),
        }
    }

    fn param(&mut self, key: &str, value: Value) -> &mut Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.note = Some(note.into());
        self
    }

    /// Records the first violation only.
    fn fail(&mut self, witness: Witness) -> &mut Self {
        if self.pass {
            self.pass = false;
            self.witness = Some(witness);
        }
        self
    }

    fn finish(self) -> CertificateReport {
        CertificateReport {
            certificate: self.certificate,
            params: self.params,
            seed: self.seed,
            pass: self.pass,
            witness: self.witness,
            tolerance: self.tolerance,
            runtime_ms: self.started.elapsed().as_secs_f64() * 1e3,
            note: self.note,
        }
    }
}

fn params_json(p: &Params) -> (Value, Value) {
    (json!(p.m()), json!(p.k()))
}

fn describe_params(b: &mut ReportBuilder, p: &Params) {
    let (m, k) = params_json(p);
    b.param("M", m);
    b.param("K", k);
}

/// The largest `k >= 1` with `|x_0| < M^(-2^(k+1))`: the level whose
/// ceiling `M^(-2^k)` the trajectory is certified never to reach. One
/// below the norm band index.
pub fn stability_level(log_norm: f64, p: &Params) -> Option<u32> {
    band_of_log_norm(log_norm, p).and_then(|band| if band >= 2 { Some(band - 1) } else { None })
}

/// Stability certificate for one trajectory: with `|x_0| < M^(-2^(k+1))`
/// the log norm must stay strictly below `-2^k ln M` at every step, and —
/// when additionally `|x_0| < M^(-4)` — strictly below a quarter of the
/// initial log norm. Strict log-domain comparisons, zero tolerance.
/// An initial norm outside the hypotheses yields "not applicable".
pub fn check_stability(
    records: &[TrajectoryRecord],
    k: u32,
    p: &Params,
) -> CertificateReport {
    let mut b = ReportBuilder::new("stability", 0.0);
    describe_params(&mut b, p);
    b.param("level", json!(k));
    let x0_log = match records.first().and_then(|r| r.log_norm) {
        None => {
            b.note("vacuous: zero initial state");
            return b.finish();
        }
        Some(l) => l,
    };
    if k == 0 || x0_log >= p.threshold_log(k + 1) {
        b.note("not applicable: initial norm misses the level hypothesis");
        return b.finish();
    }
    let ceiling = p.threshold_log(k);
    let quarter = if x0_log < -4.0 * p.ln_m() { Some(x0_log / 4.0) } else { None };
    if quarter.is_none() {
        b.note("quarter-root clause not applicable: initial norm at or above M^-4");
    }
    for r in records {
        let log_norm = match r.log_norm {
            None => break, // exact zero: stable forever after
            Some(l) => l,
        };
        if !(log_norm < ceiling) {
            b.fail(
                Witness::new(Some(r.step), "log norm reached the ceiling")
                    .with("log_norm", log_norm)
                    .with("ceiling_log", ceiling),
            );
            break;
        }
        if let Some(q) = quarter {
            if !(log_norm < q) {
                b.fail(
                    Witness::new(Some(r.step), "log norm reached a quarter of the initial")
                        .with("log_norm", log_norm)
                        .with("quarter_log", q),
                );
                break;
            }
        }
    }
    b.finish()
}

/// Natural-log slack allowed on the exponential-decay bound.
pub const EXPONENTIAL_SLACK: f64 = 1e-6;

/// Exponential-decay certificate against an explicit initial log norm:
/// `log|x_n| <= -(n/2) ln M + log|x_0| / 8 + slack` for every step.
pub fn check_exponential_from(
    records: &[TrajectoryRecord],
    x0_log: f64,
    p: &Params,
) -> CertificateReport {
    let mut b = ReportBuilder::new("exponential-decay", EXPONENTIAL_SLACK);
    describe_params(&mut b, p);
    if !(x0_log < -4.0 * p.ln_m()) {
        b.note("not applicable: no level-1 band below the initial norm");
        return b.finish();
    }
    for r in records {
        let log_norm = match r.log_norm {
            None => break,
            Some(l) => l,
        };
        let bound = -(r.step as f64 / 2.0) * p.ln_m() + x0_log / 8.0;
        if log_norm > bound + EXPONENTIAL_SLACK {
            b.fail(
                Witness::new(Some(r.step), "log norm exceeded the decay bound")
                    .with("log_norm", log_norm)
                    .with("bound_log", bound),
            );
            break;
        }
    }
    b.finish()
}

/// Exponential-decay certificate with the initial norm read from the
/// first record. A zero start passes vacuously.
pub fn check_exponential(records: &[TrajectoryRecord], p: &Params) -> CertificateReport {
    match records.first().and_then(|r| r.log_norm) {
        Some(x0_log) => check_exponential_from(records, x0_log, p),
        None => {
            let mut b = ReportBuilder::new("exponential-decay", EXPONENTIAL_SLACK);
            describe_params(&mut b, p);
            b.note("vacuous: zero initial state");
            b.finish()
        }
    }
}

/// Relative log-domain tolerance on the canonical ratio identity.
pub const RATIO_TOLERANCE: f64 = 1e-12;

/// Ratio sandwich at one radius: the canonical direction `e_{2^(k-1)}`
/// attains ratio exactly `eps_k`, and every sampled unit direction stays
/// below `4 eps_{k-2}`. `log_r` must lie in band `k`.
pub fn check_ratio_band(
    k: u32,
    log_r: f64,
    samples: usize,
    seed: u64,
    p: &Params,
) -> Result<CertificateReport, CertificateError> {
    if k < 3 {
        return Err(CertificateError::BandTooSmall { min: 3, got: k });
    }
    if k > 63 {
        return Err(CertificateError::BandTooDeep { got: k });
    }
    if !(p.threshold_log(k + 1) <= log_r && log_r < p.threshold_log(k)) {
        return Err(CertificateError::RadiusOutOfBand { k, log_r });
    }
    let mut b = ReportBuilder::new("ratio-sandwich", RATIO_TOLERANCE);
    describe_params(&mut b, p);
    b.param("band", json!(k));
    b.param("log_r", json!(log_r));
    b.param("samples", json!(samples));
    b.seed(seed);

    let eps_k = epsilon(k, p)?.log_mag();
    let canonical = SparseVec::basis(1u64 << (k - 1), LogScalar::ONE).expect("index >= 1");
    let ratio = ratio_at(log_r, &canonical, p);
    let scale = eps_k.abs().max(1.0);
    if !((ratio - eps_k).abs() <= RATIO_TOLERANCE * scale) {
        b.fail(
            Witness::new(None, "canonical direction missed the exact ratio")
                .with("ratio_log", ratio)
                .with("eps_k_log", eps_k),
        );
    }

    let cap = 4.0f64.ln() + epsilon(k - 2, p)?.log_mag();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..samples {
        let dir = random_unit_direction(&mut rng, p);
        let ratio = ratio_at(log_r, &dir, p);
        if !(ratio <= cap) {
            b.fail(
                Witness::new(Some(i as u64), "sampled direction exceeded the upper ratio")
                    .with("ratio_log", ratio)
                    .with("cap_log", cap),
            );
            break;
        }
    }
    Ok(b.finish())
}

/// `log(|N_t(x/|x|)|)`: the perturbation ratio at radius `exp(log_r)` in
/// the direction of `x`. Returns -inf when the image is exactly zero.
fn ratio_at(log_r: f64, direction: &SparseVec, p: &Params) -> f64 {
    let unit = direction.normalize_to_log(0.0);
    let image = perturbation_at(log_r, &unit, p);
    image.norm().log_mag_or_neg_inf() - unit.norm().log_mag()
}

/// Log-log envelope certificate: at canonical mid-band witnesses the
/// ratio is squeezed between `(-log|x|)^(-c2)` and `(-log|x|)^(-c1)`
/// (constants cancel against the four-term bound) for every `k` from some
/// `k0` on. Reports the smallest such `k0` in the scanned range.
pub fn check_loglog_bound(
    c1: f64,
    c2: f64,
    k_min: u32,
    k_max: u32,
    p: &Params,
) -> Result<CertificateReport, CertificateError> {
    let ratio = p.ln_k() / 2.0f64.ln();
    if !(0.0 < c1 && c1 < ratio && ratio < c2) {
        return Err(CertificateError::BadExponents { c1, c2, ratio });
    }
    if k_min < 3 {
        return Err(CertificateError::BandTooSmall { min: 3, got: k_min });
    }
    if k_max > 63 {
        return Err(CertificateError::BandTooDeep { got: k_max });
    }
    if k_max < k_min {
        return Err(CertificateError::EmptyRange { lo: k_min, hi: k_max });
    }
    let mut b = ReportBuilder::new("loglog-bound", 0.0);
    describe_params(&mut b, p);
    b.param("c1", json!(c1));
    b.param("c2", json!(c2));
    b.param("k_min", json!(k_min));
    b.param("k_max", json!(k_max));

    // Scan from the top down for the smallest k whose tail is all good.
    let mut k0: Option<u32> = None;
    let mut tail_good = true;
    let mut first_bad_high: Option<(u32, f64, f64, f64)> = None;
    for k in (k_min..=k_max).rev() {
        let mid_log = 0.5 * (p.threshold_log(k + 1) + p.threshold_log(k));
        let canonical = SparseVec::basis(1u64 << (k - 1), LogScalar::ONE).expect("index >= 1");
        let ratio_log = ratio_at(mid_log, &canonical, p);
        let ln_neg_log = (-mid_log).ln();
        let lower_ok = -c2 * ln_neg_log < ratio_log;
        let eps_km2 = epsilon(k - 2, p)?.log_mag();
        let upper_ok = -c1 * ln_neg_log > eps_km2;
        if lower_ok && upper_ok {
            if tail_good {
                k0 = Some(k);
            }
        } else {
            tail_good = false;
            if first_bad_high.is_none() {
                first_bad_high = Some((k, ratio_log, -c2 * ln_neg_log, -c1 * ln_neg_log));
            }
        }
    }
    match k0 {
        Some(k0) => {
            b.param("k0_discovered", json!(k0));
            b.note(format!("both sides hold for all scanned k >= {k0}"));
        }
        None => {
            let (k, ratio_log, lower, upper) =
                first_bad_high.expect("no k0 implies some k failed");
            b.fail(
                Witness::new(None, format!("no threshold inside the scanned range (k = {k} fails)"))
                    .with("k", k as f64)
                    .with("ratio_log", ratio_log)
                    .with("lower_log", lower)
                    .with("upper_log", upper),
            );
        }
    }
    Ok(b.finish())
}

/// Central-difference check of the closed-form derivative at seeded
/// points with norms inside `[M^(-16), M^(-4)]`, where linear-scale
/// differencing is meaningful. Step size `1e-6 * |x|`.
pub fn fd_derivative_check(
    points: usize,
    tol: f64,
    seed: u64,
    p: &Params,
) -> CertificateReport {
    let mut b = ReportBuilder::new("derivative-fd", tol);
    describe_params(&mut b, p);
    b.param("points", json!(points));
    b.seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..points {
        let target = rng.random_range((-16.0 * p.ln_m())..(-4.0 * p.ln_m()));
        let x = random_unit_direction(&mut rng, p).normalize_to_log(target);
        let y = random_unit_direction(&mut rng, p);
        let h_log = target + (1e-6f64).ln();
        let h = LogScalar::pos(h_log);
        let plus = full_map(&SparseVec::axpy(h, &y, &x), p);
        let minus = full_map(&SparseVec::axpy(-h, &y, &x), p);
        let fd = SparseVec::axpy(LogScalar::from_real(-1.0), &minus, &plus)
            .scale(LogScalar::pos(-(2.0f64.ln() + h_log)));
        let dt = full_map_derivative(&x, &y, p);
        if dt.is_zero() {
            // Exact mask kills can null the derivative in a direction; the
            // finite difference must then be small at the unit-y scale.
            let fd_log = fd.norm().log_mag_or_neg_inf();
            if !(fd_log <= tol.ln()) {
                b.fail(
                    Witness::new(Some(i as u64), "zero derivative but a large finite difference")
                        .with("fd_log_norm", fd_log)
                        .with("x_log_norm", target),
                );
                break;
            }
            continue;
        }
        let diff = SparseVec::axpy(LogScalar::from_real(-1.0), &dt, &fd);
        let rel_log = diff.norm().log_mag_or_neg_inf() - dt.norm().log_mag();
        if !(rel_log <= tol.ln()) {
            b.fail(
                Witness::new(Some(i as u64), "finite difference disagrees with the derivative")
                    .with("rel_error", rel_log.exp())
                    .with("x_log_norm", target),
            );
            break;
        }
    }
    b.finish()
}

/// Cap, as a multiple of `eps_{k-2}`, on sampled derivative-of-perturbation
/// norms: the per-level case bounds summed over at most four active levels.
pub const DN_CAP_FACTOR: f64 = 12.0;

/// Sampled operator-norm estimates of the perturbation derivative at
/// mid-band points: each stays below `12 eps_{k-2}` and the estimates
/// decrease with the band index.
pub fn check_dn_decay(
    k_lo: u32,
    k_hi: u32,
    dirs: usize,
    seed: u64,
    p: &Params,
) -> Result<CertificateReport, CertificateError> {
    if k_lo < 3 {
        return Err(CertificateError::BandTooSmall { min: 3, got: k_lo });
    }
    if k_hi > 63 {
        return Err(CertificateError::BandTooDeep { got: k_hi });
    }
    if k_hi < k_lo {
        return Err(CertificateError::EmptyRange { lo: k_lo, hi: k_hi });
    }
    let mut b = ReportBuilder::new("derivative-norm-cap", 0.0);
    describe_params(&mut b, p);
    b.param("bands", json!(format!("{k_lo}..={k_hi}")));
    b.param("directions", json!(dirs));
    b.seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut previous: Option<f64> = None;
    for k in k_lo..=k_hi {
        let mid_log = 0.5 * (p.threshold_log(k + 1) + p.threshold_log(k));
        let x = random_unit_direction(&mut rng, p).normalize_to_log(mid_log);
        let mut estimate = f64::NEG_INFINITY;
        let canonical = SparseVec::basis(1u64 << (k - 1), LogScalar::ONE).expect("index >= 1");
        for i in 0..=dirs {
            let y = if i == 0 {
                canonical.clone()
            } else {
                random_unit_direction(&mut rng, p)
            };
            let image = crate::nonlinear::perturbation_derivative(&x, &y, p);
            let val = image.norm().log_mag_or_neg_inf() - y.norm().log_mag();
            estimate = estimate.max(val);
        }
        let cap = DN_CAP_FACTOR.ln() + epsilon(k - 2, p)?.log_mag();
        if !(estimate <= cap) {
            b.fail(
                Witness::new(None, format!("band {k} estimate exceeded the cap"))
                    .with("estimate_log", estimate)
                    .with("cap_log", cap),
            );
        }
        if let Some(prev) = previous {
            if !(estimate < prev) {
                b.fail(
                    Witness::new(None, format!("band {k} estimate did not decrease"))
                        .with("estimate_log", estimate)
                        .with("previous_log", prev),
                );
            }
        }
        previous = Some(estimate);
    }
    Ok(b.finish())
}

/// Canonical ratios shrink to zero: for each `k` the ratio sits below
/// `4 eps_{k-2}` and decreases strictly, witnessing a zero derivative of
/// the perturbation at the origin.
pub fn check_vanishing_at_origin(
    k_lo: u32,
    k_hi: u32,
    p: &Params,
) -> Result<CertificateReport, CertificateError> {
    if k_lo < 3 {
        return Err(CertificateError::BandTooSmall { min: 3, got: k_lo });
    }
    if k_hi > 63 {
        return Err(CertificateError::BandTooDeep { got: k_hi });
    }
    if k_hi < k_lo {
        return Err(CertificateError::EmptyRange { lo: k_lo, hi: k_hi });
    }
    let mut b = ReportBuilder::new("derivative-vanishing", 0.0);
    describe_params(&mut b, p);
    b.param("bands", json!(format!("{k_lo}..={k_hi}")));
    let mut previous: Option<f64> = None;
    for k in k_lo..=k_hi {
        let mid_log = 0.5 * (p.threshold_log(k + 1) + p.threshold_log(k));
        let canonical = SparseVec::basis(1u64 << (k - 1), LogScalar::ONE).expect("index >= 1");
        let ratio = ratio_at(mid_log, &canonical, p);
        let cap = 4.0f64.ln() + epsilon(k - 2, p)?.log_mag();
        if !(ratio <= cap) {
            b.fail(
                Witness::new(None, format!("band {k} ratio exceeded the four-term cap"))
                    .with("ratio_log", ratio)
                    .with("cap_log", cap),
            );
        }
        if let Some(prev) = previous {
            if !(ratio < prev) {
                b.fail(
                    Witness::new(None, format!("band {k} ratio did not shrink"))
                        .with("ratio_log", ratio)
                        .with("previous_log", prev),
                );
            }
        }
        previous = Some(ratio);
    }
    Ok(b.finish())
}

/// Growth of the plain-shift orbit of `e_1`: the `(2^p - 1)`-th root of
/// its norm exceeds 1.05 from `p = 3` on and approaches `M/K`, the same
/// origin being linearly unstable that the nonlinear dynamics stabilize.
pub fn linear_instability_demo(
    p_max: u32,
    p: &Params,
) -> Result<CertificateReport, CertificateError> {
    if p_max < 3 {
        return Err(CertificateError::PMaxTooSmall { got: p_max });
    }
    let mut b = ReportBuilder::new("linear-instability", 0.01);
    describe_params(&mut b, p);
    b.param("p_max", json!(p_max));
    let shift = ShiftSpec::from_profile(WeightProfile::full(*p));
    let mut v = SparseVec::basis(1, LogScalar::ONE).expect("index 1");
    let mut roots: Vec<(u32, f64)> = Vec::new();
    let mut n = 0u64;
    for pp in 1..=p_max {
        let upto = (1u64 << pp) - 1;
        while n < upto {
            v = shift.apply(&v);
            n += 1;
        }
        let log_norm = v.norm().log_mag();
        roots.push((pp, (log_norm / n as f64).exp()));
        // Orbit norm of e_1 equals the closed-form power norm.
        let closed = wn_norm_closed(pp, p)?.log_mag();
        let scale = closed.abs().max(1.0);
        if (log_norm - closed).abs() > 1e-12 * scale {
            b.fail(
                Witness::new(Some(n), "orbit norm drifted from the closed form")
                    .with("orbit_log", log_norm)
                    .with("closed_log", closed),
            );
        }
    }
    for &(pp, root) in &roots {
        if pp >= 3 && !(root >= 1.05) {
            b.fail(
                Witness::new(None, format!("root at p = {pp} sits below 1.05"))
                    .with("root", root),
            );
        }
    }
    let limit = p.m() / p.k();
    let last = roots.last().expect("p_max >= 3").1;
    b.param("root_at_p_max", json!(last));
    b.param("limit", json!(limit));
    if p_max >= 12 && !((last / limit - 1.0).abs() <= 0.01) {
        b.fail(
            Witness::new(None, "root at p_max strayed more than 1% from M/K")
                .with("root", last)
                .with("limit", limit),
        );
    }
    Ok(b.finish())
}

/// Index-of-nilpotency certificate: for each level `m`, `2^m` copies of
/// the complement shift annihilate every basis vector in range (exact
/// sign-zero), while `2^m - 1` copies leave a survivor.
pub fn check_nilpotency(
    m_max: u32,
    basis_max: u64,
    p: &Params,
) -> Result<CertificateReport, CertificateError> {
    let mut b = ReportBuilder::new("nilpotency-index", 0.0);
    describe_params(&mut b, p);
    b.param("m_max", json!(m_max));
    b.param("basis_max", json!(basis_max));
    for m in 1..=m_max {
        let op = ShiftSpec::from_profile(WeightProfile::complement(*p, m)?);
        let len = 1usize << m;
        let full = verify_nilpotent_set(&vec![op.clone(); len], m, 1..=basis_max)?;
        if !full.annihilated {
            b.fail(
                Witness::new(None, format!("level {m}: full product left a survivor"))
                    .with("survivor_index", full.survivor.unwrap_or(0) as f64),
            );
            continue;
        }
        let short = verify_nilpotent_set(&vec![op; len - 1], m, 1..=basis_max)?;
        if short.annihilated {
            b.fail(Witness::new(
                None,
                format!("level {m}: product of {} factors already annihilates", len - 1),
            ));
        }
    }
    Ok(b.finish())
}

/// Growth-cap certificate over a set of records: every step respected the
/// per-step factor-of-M cap.
pub fn check_growth_cap(records: &[TrajectoryRecord], p: &Params) -> CertificateReport {
    let mut b = ReportBuilder::new("growth-cap", crate::trajectory::GROWTH_CAP_SLACK);
    describe_params(&mut b, p);
    for r in records {
        if !r.growth_cap_ok {
            b.fail(Witness::new(Some(r.step), "per-step growth exceeded a factor of M"));
            break;
        }
    }
    b.finish()
}

/// Draws a finitely supported vector with support size 1..=16 on indices
/// 1..=64, random signs, and log magnitudes spread over about two factors
/// of M, normalized so its log norm is exactly `0.0`.
pub fn random_unit_direction(rng: &mut ChaCha8Rng, p: &Params) -> SparseVec {
    let support = rng.random_range(1..=16usize);
    let picks = rand::seq::index::sample(rng, 64, support);
    let entries: Vec<(u64, LogScalar)> = picks
        .into_iter()
        .map(|i| {
            let sign = if rng.random::<bool>() { 1i8 } else { -1i8 };
            let lm = rng.random_range(-2.0 * p.ln_m()..=0.0);
            (i as u64 + 1, LogScalar::from_sign_log(sign, lm))
        })
        .collect();
    SparseVec::from_entries(entries)
        .expect("indices are positive")
        .normalize_to_log(0.0)
}

/// Draws a vector whose norm lands uniformly (in the log coordinate)
/// inside the given band.
pub fn random_vector_in_band(rng: &mut ChaCha8Rng, band: u32, p: &Params) -> SparseVec {
    let lo = p.threshold_log(band + 1);
    let hi = p.threshold_log(band);
    let target = rng.random_range(lo..hi);
    random_unit_direction(rng, p).normalize_to_log(target)
}

fn subseed(seed: u64, tag: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for byte in tag.bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ seed
}

/// Configuration shared by the verification suites. Defaults match the
/// scales the certificates are specified at.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub params: Params,
    pub seed: u64,
    pub steps: u64,
    pub per_band: usize,
    pub band_lo: u32,
    pub band_hi: u32,
    pub c1: f64,
    pub c2: f64,
    pub loglog_k_min: u32,
    pub loglog_k_max: u32,
    pub ratio_k_lo: u32,
    pub ratio_k_hi: u32,
    pub ratio_samples: usize,
    pub fd_points: usize,
    pub fd_tol: f64,
    pub p_max: u32,
    pub nilpotency_m_max: u32,
    pub nilpotency_basis_max: u64,
}

impl SuiteConfig {
    pub fn new(params: Params, seed: u64) -> Self {
        SuiteConfig {
            params,
            seed,
            steps: 20_000,
            per_band: 10,
            band_lo: 3,
            band_hi: 12,
            c1: 1.2,
            c2: 1.8,
            loglog_k_min: 3,
            loglog_k_max: 48,
            ratio_k_lo: 3,
            ratio_k_hi: 30,
            ratio_samples: 200,
            fd_points: 20,
            fd_tol: 1e-5,
            p_max: 12,
            nilpotency_m_max: 8,
            nilpotency_basis_max: 512,
        }
    }
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig::new(Params::default(), 7)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Stability,
    Exponential,
    Bounds,
    Nilpotency,
    Derivative,
    LinearInstability,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = [
        "stability",
        "exponential",
        "bounds",
        "nilpotency",
        "derivative",
        "linear-instability",
        "all",
    ];
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stability" => Ok(Suite::Stability),
            "exponential" => Ok(Suite::Exponential),
            "bounds" => Ok(Suite::Bounds),
            "nilpotency" => Ok(Suite::Nilpotency),
            "derivative" => Ok(Suite::Derivative),
            "linear-instability" => Ok(Suite::LinearInstability),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite {other:?}; expected one of {}",
                Suite::NAMES.join(", ")
            )),
        }
    }
}

/// Merges per-trajectory reports of one certificate into a single
/// aggregate, keeping the first witness.
fn aggregate(
    id: &str,
    tolerance: f64,
    cfg: &SuiteConfig,
    reports: Vec<(usize, u32, CertificateReport)>,
) -> CertificateReport {
    let mut b = ReportBuilder::new(id, tolerance);
    describe_params(&mut b, &cfg.params);
    b.seed(cfg.seed);
    b.param("bands", json!(format!("{}..={}", cfg.band_lo, cfg.band_hi)));
    b.param("per_band", json!(cfg.per_band));
    b.param("steps", json!(cfg.steps));
    b.param("trajectories", json!(reports.len()));
    for (index, band, r) in reports {
        if !r.pass {
            let mut w = r.witness.unwrap_or_else(|| Witness::new(None, "violation"));
            w.context = format!("trajectory {index} (band {band}): {}", w.context);
            b.fail(w);
        }
    }
    b.finish()
}

fn run_stability_suite(cfg: &SuiteConfig) -> Vec<CertificateReport> {
    let p = &cfg.params;
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "trajectories"));
    let mut stability = Vec::new();
    let mut caps = Vec::new();
    let mut index = 0usize;
    for band in cfg.band_lo..=cfg.band_hi {
        for _ in 0..cfg.per_band {
            let x0 = random_vector_in_band(&mut rng, band, p);
            let level = stability_level(x0.norm().log_mag(), p).expect("bands >= 2");
            let records = iterate(x0, cfg.steps, p);
            stability.push((index, band, check_stability(&records, level, p)));
            caps.push((index, band, check_growth_cap(&records, p)));
            index += 1;
        }
    }
    let mut out = vec![
        aggregate("stability", 0.0, cfg, stability),
        aggregate("growth-cap", crate::trajectory::GROWTH_CAP_SLACK, cfg, caps),
    ];
    out.push(reference_orbit_certificate(cfg));
    out
}

/// The worked deep-start instance: from `|x_0| = M^(-257) e_1` the norm
/// never reaches `M^(-128)`.
fn reference_orbit_certificate(cfg: &SuiteConfig) -> CertificateReport {
    let p = &cfg.params;
    let mut b = ReportBuilder::new("reference-orbit", 0.0);
    describe_params(&mut b, p);
    b.param("start_log_norm_pow", json!(257));
    b.param("ceiling_log_norm_pow", json!(128));
    b.param("steps", json!(cfg.steps));
    let x0 = SparseVec::basis(1, LogScalar::pos(-257.0 * p.ln_m())).expect("index 1");
    let records = iterate(x0, cfg.steps, p);
    let ceiling = -128.0 * p.ln_m();
    for r in &records {
        if let Some(log_norm) = r.log_norm {
            if !(log_norm < ceiling) {
                b.fail(
                    Witness::new(Some(r.step), "deep-start orbit reached the ceiling")
                        .with("log_norm", log_norm)
                        .with("ceiling_log", ceiling),
                );
                break;
            }
        }
        if !r.growth_cap_ok {
            b.fail(Witness::new(Some(r.step), "growth cap violated"));
            break;
        }
    }
    b.finish()
}

fn run_exponential_suite(cfg: &SuiteConfig) -> Vec<CertificateReport> {
    let p = &cfg.params;
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "trajectories"));
    let mut reports = Vec::new();
    let mut index = 0usize;
    for band in cfg.band_lo..=cfg.band_hi {
        for _ in 0..cfg.per_band {
            let x0 = random_vector_in_band(&mut rng, band, p);
            let records = iterate(x0, cfg.steps, p);
            reports.push((index, band, check_exponential(&records, p)));
            index += 1;
        }
    }
    vec![aggregate("exponential-decay", EXPONENTIAL_SLACK, cfg, reports)]
}

fn run_bounds_suite(cfg: &SuiteConfig) -> Result<Vec<CertificateReport>, CertificateError> {
    let p = &cfg.params;
    // One aggregated sandwich report across the band range.
    let mut b = ReportBuilder::new("ratio-sandwich", RATIO_TOLERANCE);
    describe_params(&mut b, p);
    b.seed(cfg.seed);
    b.param("bands", json!(format!("{}..={}", cfg.ratio_k_lo, cfg.ratio_k_hi)));
    b.param("samples", json!(cfg.ratio_samples));
    for k in cfg.ratio_k_lo..=cfg.ratio_k_hi {
        let mid_log = 0.5 * (p.threshold_log(k + 1) + p.threshold_log(k));
        let r = check_ratio_band(k, mid_log, cfg.ratio_samples, subseed(cfg.seed, "ratio"), p)?;
        if !r.pass {
            let mut w = r.witness.unwrap_or_else(|| Witness::new(None, "violation"));
            w.context = format!("band {k}: {}", w.context);
            b.fail(w);
        }
    }
    let sandwich = b.finish();
    let loglog = check_loglog_bound(cfg.c1, cfg.c2, cfg.loglog_k_min, cfg.loglog_k_max, p)?;
    Ok(vec![sandwich, loglog])
}

fn run_derivative_suite(cfg: &SuiteConfig) -> Result<Vec<CertificateReport>, CertificateError> {
    let p = &cfg.params;
    Ok(vec![
        fd_derivative_check(cfg.fd_points, cfg.fd_tol, subseed(cfg.seed, "fd"), p),
        check_dn_decay(3, 10, 20, subseed(cfg.seed, "dn"), p)?,
        check_vanishing_at_origin(3, 16, p)?,
    ])
}

/// Runs the selected suite and returns its reports (unsorted; callers
/// that need deterministic output sort by certificate id).
pub fn run_suite(
    suite: Suite,
    cfg: &SuiteConfig,
) -> Result<Vec<CertificateReport>, CertificateError> {
    let mut out = Vec::new();
    match suite {
        Suite::Stability => out.extend(run_stability_suite(cfg)),
        Suite::Exponential => out.extend(run_exponential_suite(cfg)),
        Suite::Bounds => out.extend(run_bounds_suite(cfg)?),
        Suite::Nilpotency => {
            out.push(check_nilpotency(cfg.nilpotency_m_max, cfg.nilpotency_basis_max, &cfg.params)?)
        }
        Suite::Derivative => out.extend(run_derivative_suite(cfg)?),
        Suite::LinearInstability => out.push(linear_instability_demo(cfg.p_max, &cfg.params)?),
        Suite::All => {
            out.extend(run_stability_suite(cfg));
            out.extend(run_exponential_suite(cfg));
            out.extend(run_bounds_suite(cfg)?);
            out.push(check_nilpotency(cfg.nilpotency_m_max, cfg.nilpotency_basis_max, &cfg.params)?);
            out.extend(run_derivative_suite(cfg)?);
            out.push(linear_instability_demo(cfg.p_max, &cfg.params)?);
        }
    }
    Ok(out)
}
