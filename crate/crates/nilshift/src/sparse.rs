//! Finitely supported l2 vectors over the basis `(e_n)`, with log-domain
//! coefficients.
//!
//! Vectors are immutable values: every operation builds a new vector, so
//! the cached norm never goes stale. Stored entries are never the zero
//! scalar; an empty entry map is the zero vector. Support is unbounded a
//! priori — the shift structure keeps everything finite.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::logspace::{log_sum_exp_sq, LogScalar};

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("basis indices start at 1")]
    ZeroIndex,
    #[error("malformed entry line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// A finitely supported vector: ordered map from positive index to a
/// nonzero log-domain coefficient, plus a lazily computed l2 norm.
pub struct SparseVec {
    entries: BTreeMap<u64, LogScalar>,
    cached_norm: OnceLock<LogScalar>,
}

impl SparseVec {
    pub fn zero() -> Self {
        SparseVec { entries: BTreeMap::new(), cached_norm: OnceLock::new() }
    }

    /// The vector `c * e_i`; a zero coefficient gives the zero vector.
    pub fn basis(i: u64, c: LogScalar) -> Result<Self, SparseError> {
        if i == 0 {
            return Err(SparseError::ZeroIndex);
        }
        let mut entries = BTreeMap::new();
        if !c.is_zero() {
            entries.insert(i, c);
        }
        Ok(SparseVec { entries, cached_norm: OnceLock::new() })
    }

    /// Builds from (index, coefficient) pairs. Zero coefficients are
    /// dropped; duplicate indices are summed in log arithmetic.
    pub fn from_entries<I>(pairs: I) -> Result<Self, SparseError>
    where
        I: IntoIterator<Item = (u64, LogScalar)>,
    {
        let mut entries: BTreeMap<u64, LogScalar> = BTreeMap::new();
        for (i, c) in pairs {
            if i == 0 {
                return Err(SparseError::ZeroIndex);
            }
            if c.is_zero() {
                continue;
            }
            let merged = match entries.get(&i) {
                Some(&existing) => existing.add(c),
                None => c,
            };
            if merged.is_zero() {
                entries.remove(&i);
            } else {
                entries.insert(i, merged);
            }
        }
        Ok(SparseVec { entries, cached_norm: OnceLock::new() })
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn support_min(&self) -> Option<u64> {
        self.entries.keys().next().copied()
    }

    pub fn support_max(&self) -> Option<u64> {
        self.entries.keys().next_back().copied()
    }

    /// Coefficient at index `i` (exact zero when absent).
    pub fn entry(&self, i: u64) -> LogScalar {
        self.entries.get(&i).copied().unwrap_or(LogScalar::ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, LogScalar)> + '_ {
        self.entries.iter().map(|(&i, &c)| (i, c))
    }

    /// l2 norm in the log domain; exact zero for the zero vector.
    /// Computed once per vector and cached.
    pub fn norm(&self) -> LogScalar {
        *self.cached_norm.get_or_init(|| {
            let coeffs: Vec<LogScalar> = self.entries.values().copied().collect();
            log_sum_exp_sq(&coeffs)
        })
    }

    /// Coordinatewise scaling, exact in the log domain.
    pub fn scale(&self, c: LogScalar) -> SparseVec {
        if c.is_zero() {
            return SparseVec::zero();
        }
        let entries = self.entries.iter().map(|(&i, &v)| (i, v.mul(c))).collect();
        SparseVec { entries, cached_norm: OnceLock::new() }
    }

    /// Rescales so the norm's log magnitude equals `target_log` exactly
    /// (a pure log-domain shift). The zero vector stays zero.
    pub fn normalize_to_log(&self, target_log: f64) -> SparseVec {
        let n = self.norm();
        if n.is_zero() {
            return SparseVec::zero();
        }
        self.scale(LogScalar::pos(target_log - n.log_mag()))
    }

    /// `a * x + y`, with exact cancellations pruned.
    pub fn axpy(a: LogScalar, x: &SparseVec, y: &SparseVec) -> SparseVec {
        if a.is_zero() {
            return y.clone();
        }
        let mut entries = y.entries.clone();
        for (&i, &xc) in &x.entries {
            let term = a.mul(xc);
            let merged = match entries.get(&i) {
                Some(&yc) => yc.add(term),
                None => term,
            };
            if merged.is_zero() {
                entries.remove(&i);
            } else {
                entries.insert(i, merged);
            }
        }
        SparseVec { entries, cached_norm: OnceLock::new() }
    }

    /// Inner product: signed products over the common support, summed
    /// largest magnitude first.
    pub fn inner(x: &SparseVec, y: &SparseVec) -> LogScalar {
        let mut products: Vec<LogScalar> = x
            .entries
            .iter()
            .filter_map(|(i, &xc)| y.entries.get(i).map(|&yc| xc.mul(yc)))
            .collect();
        products.sort_unstable_by(|a, b| b.abs_cmp(*a));
        products
            .into_iter()
            .fold(LogScalar::ZERO, |acc, t| acc.add(t))
    }

    /// Textual form: one `index:sign:log_mag` triple per line, in index
    /// order. The zero vector serializes to an empty string.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (&i, &c) in &self.entries {
            let sign = if c.sign() >= 0 { "+1" } else { "-1" };
            out.push_str(&format!("{i}:{sign}:{}\n", c.log_mag()));
        }
        out
    }

    /// Parses the `index:sign:log_mag` line format. Blank lines and lines
    /// starting with `#` are skipped. An empty input is the zero vector.
    pub fn parse(text: &str) -> Result<SparseVec, SparseError> {
        let mut entries: BTreeMap<u64, LogScalar> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(':');
            let (a, b, c) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c), None) => (a, b, c),
                _ => {
                    return Err(SparseError::Parse {
                        line: lineno + 1,
                        reason: "expected index:sign:log_mag".into(),
                    })
                }
            };
            let index: u64 = a.parse().map_err(|_| SparseError::Parse {
                line: lineno + 1,
                reason: format!("bad index {a:?}"),
            })?;
            if index == 0 {
                return Err(SparseError::Parse {
                    line: lineno + 1,
                    reason: "basis indices start at 1".into(),
                });
            }
            let sign: i8 = match b {
                "+1" | "1" => 1,
                "-1" => -1,
                _ => {
                    return Err(SparseError::Parse {
                        line: lineno + 1,
                        reason: format!("bad sign {b:?} (stored entries are never zero)"),
                    })
                }
            };
            let log_mag: f64 = c.parse().map_err(|_| SparseError::Parse {
                line: lineno + 1,
                reason: format!("bad log magnitude {c:?}"),
            })?;
            if !log_mag.is_finite() {
                return Err(SparseError::Parse {
                    line: lineno + 1,
                    reason: "log magnitude must be finite".into(),
                });
            }
            if entries.insert(index, LogScalar::from_sign_log(sign, log_mag)).is_some() {
                return Err(SparseError::Parse {
                    line: lineno + 1,
                    reason: format!("duplicate index {index}"),
                });
            }
        }
        Ok(SparseVec { entries, cached_norm: OnceLock::new() })
    }
}

impl Clone for SparseVec {
    fn clone(&self) -> Self {
        SparseVec { entries: self.entries.clone(), cached_norm: OnceLock::new() }
    }
}

impl PartialEq for SparseVec {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl fmt::Debug for SparseVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries.iter()).finish()
    }
}
