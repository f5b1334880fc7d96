use super::PpgWindow;
use crate::util::peak_to_peak;

/// Fraction of the window peak-to-peak a peak must rise above its bases.
const MIN_PROMINENCE_FRAC: f64 = 0.25;
/// Maximum heart rate in beats per second (180 bpm).
const MAX_BEAT_RATE_HZ: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BeatDetection {
    /// Sample indices of accepted systolic peaks, ascending.
    pub peaks: Vec<usize>,
    /// Mean inter-beat interval in samples; falls back to `fs` (one
    /// second) when fewer than two peaks are found.
    pub mean_ibi: f64,
}

/// Detects pulse peaks as local maxima separated by at least `fs / 3`
/// samples and with prominence of at least a quarter of the window
/// peak-to-peak amplitude.
pub fn detect_beats(w: &PpgWindow<'_>) -> BeatDetection {
    let x = w.data;
    let pp = peak_to_peak(x);
    let mut peaks = Vec::new();
    if pp > 0.0 {
        let min_prominence = MIN_PROMINENCE_FRAC * pp;
        let candidates: Vec<usize> = local_maxima(x)
            .into_iter()
            .filter(|&i| prominence(x, i) >= min_prominence)
            .collect();
        peaks = enforce_distance(x, candidates, w.fs / MAX_BEAT_RATE_HZ);
    }
    let mean_ibi = if peaks.len() >= 2 {
        (peaks[peaks.len() - 1] - peaks[0]) as f64 / (peaks.len() - 1) as f64
    } else {
        w.fs
    };
    BeatDetection { peaks, mean_ibi }
}

/// Interior local maxima; a flat top reports its middle sample.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Height above the higher of the two bases, where each base is the
/// minimum between the peak and the nearest higher sample on that side.
fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Keeps the tallest peaks first, dropping any closer than `distance`
/// samples to one already kept.
fn enforce_distance(x: &[f64], mut candidates: Vec<usize>, distance: f64) -> Vec<usize> {
    let mut order = candidates.clone();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::with_capacity(order.len());
    for i in order {
        if kept.iter().all(|&k| (k.abs_diff(i) as f64) >= distance) {
            kept.push(i);
        }
    }
    candidates.retain(|c| kept.contains(c));
    candidates
}
