use serde::{Deserialize, Serialize};

use super::PpgWindow;
use crate::util::{mean, peak_to_peak, std_dev};
use crate::{Error, Result};

/// Hard quality floors plus the continuous gate threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualityThresholds {
    /// Minimum window length in samples.
    pub min_len: usize,
    /// Amplitude SD must exceed this.
    pub min_sd: f64,
    /// Peak-to-peak amplitude must exceed this (normalized units).
    pub min_pp: f64,
    /// Windows scoring below this are rejected.
    pub gate_theta: f64,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        Self {
            min_len: 64,
            min_sd: 0.05,
            min_pp: 0.10,
            gate_theta: 0.976,
        }
    }
}

impl QualityThresholds {
    pub fn validate(&self) -> Result<()> {
        if self.min_len == 0 {
            return Err(Error::schema("quality.min_len", "must be positive"));
        }
        if !(self.min_sd > 0.0 && self.min_sd.is_finite()) {
            return Err(Error::schema("quality.min_sd", "must be positive"));
        }
        if !(self.min_pp > 0.0 && self.min_pp.is_finite()) {
            return Err(Error::schema("quality.min_pp", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gate_theta) {
            return Err(Error::schema("quality.gate_theta", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// True when any hard rule fails.
    pub fn hard_fail(&self, w: &PpgWindow<'_>) -> bool {
        w.len() < self.min_len
            || !(std_dev(w.data) > self.min_sd)
            || !(peak_to_peak(w.data) > self.min_pp)
    }
}

/// Continuous signal quality in [0, 1].
///
/// Zero exactly when a hard rule fails. Above the floors, each margin
/// `value / floor - 1` is clipped to [0, 1], mapped through `(1 + x) / 2`
/// and the two are combined by geometric mean, so a passing window scores
/// in (0.5, 1].
pub fn quality_score(w: &PpgWindow<'_>, t: &QualityThresholds) -> f64 {
    if t.hard_fail(w) {
        return 0.0;
    }
    let margin = |value: f64, floor: f64| (1.0 + (value / floor - 1.0).clamp(0.0, 1.0)) / 2.0;
    let sd = margin(std_dev(w.data), t.min_sd);
    let pp = margin(peak_to_peak(w.data), t.min_pp);
    (sd * pp).sqrt().min(1.0)
}

/// Fraction of samples whose window z-score stays within `gamma_omega`.
/// A constant window counts as fully confined.
pub fn homeostasis(w: &PpgWindow<'_>, gamma_omega: f64) -> f64 {
    let sd = std_dev(w.data);
    if w.is_empty() || !(sd > 0.0) {
        return 1.0;
    }
    let m = mean(w.data);
    let outliers = w
        .data
        .iter()
        .filter(|&&x| ((x - m) / sd).abs() > gamma_omega)
        .count();
    1.0 - outliers as f64 / w.len() as f64
}
