//! Trajectory engine: exact iteration of the full map with a per-step
//! ledger of log norms, support, active levels, and the per-step growth
//! cap (the norm can gain at most a factor of `M` per step).
//!
//! A trajectory that reaches the exact zero vector stays there; the
//! engine emits a single zero record and stops.

use crate::nonlinear::{active_set, band_of_log_norm, EffectiveShift};
use crate::sparse::SparseVec;
use crate::weights::Params;

/// Slack, in natural-log units, allowed on the growth cap to absorb
/// rounding in the norm accumulation.
pub const GROWTH_CAP_SLACK: f64 = 1e-9;

/// One step of a trajectory. `log_norm` is `None` exactly when the state
/// is the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub step: u64,
    pub log_norm: Option<f64>,
    pub support_min: Option<u64>,
    pub support_max: Option<u64>,
    pub active_k_range: Option<(u32, u32)>,
    pub band_k: Option<u32>,
    /// Whether this step respected `log|x_{n+1}| <= log|x_n| + ln M`
    /// (always true on the initial record and on the zero record).
    pub growth_cap_ok: bool,
}

impl TrajectoryRecord {
    pub fn is_zero(&self) -> bool {
        self.log_norm.is_none()
    }
}

/// Iterator over trajectory records, starting with the initial state.
pub struct Trajectory {
    params: Params,
    state: SparseVec,
    step: u64,
    prev_log_norm: Option<f64>,
    finished: bool,
}

impl Trajectory {
    pub fn new(x0: SparseVec, params: Params) -> Self {
        Trajectory { params, state: x0, step: 0, prev_log_norm: None, finished: false }
    }

    fn record_current(&mut self) -> TrajectoryRecord {
        if self.state.is_zero() {
            self.finished = true;
            return TrajectoryRecord {
                step: self.step,
                log_norm: None,
                support_min: None,
                support_max: None,
                active_k_range: None,
                band_k: None,
                growth_cap_ok: true,
            };
        }
        let log_norm = self.state.norm().log_mag();
        let cap_ok = match self.prev_log_norm {
            None => true,
            Some(prev) => log_norm <= prev + self.params.ln_m() + GROWTH_CAP_SLACK,
        };
        let band = active_set(log_norm, &self.params);
        TrajectoryRecord {
            step: self.step,
            log_norm: Some(log_norm),
            support_min: self.state.support_min(),
            support_max: self.state.support_max(),
            active_k_range: band.k_range(),
            band_k: band_of_log_norm(log_norm, &self.params),
            growth_cap_ok: cap_ok,
        }
    }

    fn advance(&mut self) {
        let log_norm = self.state.norm().log_mag();
        self.prev_log_norm = Some(log_norm);
        self.state = EffectiveShift::new(self.params, log_norm).apply(&self.state);
        self.step += 1;
    }
}

impl Iterator for Trajectory {
    type Item = TrajectoryRecord;

    fn next(&mut self) -> Option<TrajectoryRecord> {
        if self.finished {
            return None;
        }
        let record = self.record_current();
        if !self.finished {
            self.advance();
        }
        Some(record)
    }
}

/// Runs `steps` iterations of the full map from `x0` and collects the
/// records (at most `steps + 1`, fewer if the state dies earlier).
pub fn iterate(x0: SparseVec, steps: u64, params: &Params) -> Vec<TrajectoryRecord> {
    Trajectory::new(x0, *params)
        .take(steps as usize + 1)
        .collect()
}
