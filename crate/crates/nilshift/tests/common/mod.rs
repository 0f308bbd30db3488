//! Plain linear-scale (f64) reimplementation of the dynamics, kept
//! deliberately independent of the log-domain code paths it cross-checks.
//! Valid while norms stay far above f64 underflow.

use std::collections::BTreeMap;

/// Linear-scale sparse vector: index -> f64 coefficient.
pub type LinVec = BTreeMap<u64, f64>;

pub fn lin_norm(x: &LinVec) -> f64 {
    x.values().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn lin_alpha(n: u64, m: f64, k: f64) -> f64 {
    let v = n.trailing_zeros();
    m / k.powi(v as i32)
}

fn smooth(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

fn thr(j: u32, m: f64) -> f64 {
    // Underflows to 0.0 for deep j; the branch logic below stays correct
    // because any representable t is far above such thresholds.
    m.powf(-f64::exp2(j as f64))
}

pub fn lin_envelope(level: u32, t: f64, m: f64) -> f64 {
    let lo = thr(level + 3, m);
    let a1 = thr(level + 2, m);
    let b1 = thr(level, m);
    let hi = thr(level - 1, m);
    if t < lo {
        0.0
    } else if t < a1 {
        smooth((t - lo) / (a1 - lo))
    } else if t < b1 {
        1.0
    } else if t < hi {
        1.0 - smooth((t - b1) / (hi - b1))
    } else {
        0.0
    }
}

/// One step of the full map in linear scale.
pub fn lin_step(x: &LinVec, m: f64, k: f64) -> LinVec {
    let t = lin_norm(x);
    let mut out = LinVec::new();
    if t == 0.0 {
        return out;
    }
    for (&n, &v) in x {
        let level = n.trailing_zeros() + 1;
        let w = lin_alpha(n, m, k) * (1.0 - lin_envelope(level, t, m));
        let c = w * v;
        if c != 0.0 {
            out.insert(n + 1, c);
        }
    }
    out
}
