use serde::{Deserialize, Serialize};

use crate::signal::{BeatDetection, PpgWindow};
use crate::util::{mean, std_dev};

/// Peripheral proxies derived from the beat sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proxies {
    /// Saturating map of RMSSD: `rmssd / (rmssd + c_A)`.
    pub autonomic: f64,
    /// `1 - CV` of per-beat amplitude.
    pub vascular: f64,
    /// Lag-1 autocorrelation of beat amplitude, floored at 0.
    pub recovery: f64,
}

impl Proxies {
    pub const NEUTRAL: Proxies = Proxies { autonomic: 0.5, vascular: 0.5, recovery: 0.5 };
}

/// Sub-sample peak position from a parabola through the peak and its
/// neighbours.
fn refine_peak(x: &[f64], p: usize) -> f64 {
    if p == 0 || p + 1 >= x.len() {
        return p as f64;
    }
    let (a, b, c) = (x[p - 1], x[p], x[p + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return p as f64;
    }
    p as f64 + (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// RMSSD in milliseconds of the inter-beat intervals between refined peak
/// times. `None` with fewer than three peaks.
pub fn rmssd_ms(w: &PpgWindow<'_>, peaks: &[usize]) -> Option<f64> {
    if peaks.len() < 3 {
        return None;
    }
    let times: Vec<f64> = peaks.iter().map(|&p| refine_peak(w.data, p) / w.fs * 1000.0).collect();
    let ibis: Vec<f64> = times.windows(2).map(|t| t[1] - t[0]).collect();
    let sq: Vec<f64> = ibis.windows(2).map(|d| (d[1] - d[0]).powi(2)).collect();
    Some(mean(&sq).sqrt())
}

/// Peak height above the lowest sample since the previous peak, for every
/// peak after the first.
pub fn beat_amplitudes(w: &PpgWindow<'_>, peaks: &[usize]) -> Vec<f64> {
    peaks
        .windows(2)
        .map(|p| {
            let trough = w.data[p[0]..=p[1]].iter().copied().fold(f64::INFINITY, f64::min);
            w.data[p[1]] - trough
        })
        .collect()
}

fn lag1_autocorrelation(a: &[f64]) -> Option<f64> {
    let m = mean(a);
    let var: f64 = a.iter().map(|v| (v - m).powi(2)).sum();
    let scale = a.iter().map(|v| v.abs()).sum::<f64>() / a.len() as f64;
    if var <= (1e-9 * scale).powi(2) * a.len() as f64 {
        return None;
    }
    let cov: f64 = a.windows(2).map(|p| (p[0] - m) * (p[1] - m)).sum();
    Some(cov / var)
}

/// Autonomic, vascular and recovery proxies. Fewer than three beats give
/// the neutral value 0.5 for all three.
pub fn cst_proxies(w: &PpgWindow<'_>, beats: &BeatDetection, c_a_ms: f64) -> Proxies {
    let Some(rmssd) = rmssd_ms(w, &beats.peaks) else {
        return Proxies::NEUTRAL;
    };
    let autonomic = rmssd / (rmssd + c_a_ms);
    let amps = beat_amplitudes(w, &beats.peaks);
    let amp_mean = mean(&amps);
    let vascular = if amp_mean > 0.0 {
        (1.0 - std_dev(&amps) / amp_mean).clamp(0.0, 1.0)
    } else {
        0.0
    };
    // Constant amplitude is perfectly persistent.
    let recovery = lag1_autocorrelation(&amps).map_or(1.0, |r| r.clamp(0.0, 1.0));
    Proxies { autonomic, vascular, recovery }
}
