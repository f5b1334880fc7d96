use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::signal::PpgWindow;

/// Shortest window for which the spectral estimate is trusted.
pub const SPECTRAL_MIN_LEN: usize = 64;

const MAX_SEGMENT: usize = 128;

/// One-sided power spectral density on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

/// Welch estimate with segment length `min(len, 128)`, 50% overlap, a
/// periodic Hann taper and per-segment mean removal. `None` for an empty
/// input.
pub fn welch_psd(x: &[f64], fs: f64) -> Option<Psd> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let seg = n.min(MAX_SEGMENT);
    let step = (seg / 2).max(1);
    let n_seg = (n - seg) / step + 1;
    let taper: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos())
        .collect();
    let taper_energy: f64 = taper.iter().map(|t| t * t).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let n_bins = seg / 2 + 1;
    let mut power = vec![0.0; n_bins];
    let mut buf = vec![Complex::new(0.0, 0.0); seg];
    for s in 0..n_seg {
        let chunk = &x[s * step..s * step + seg];
        let mu = chunk.iter().sum::<f64>() / seg as f64;
        for (b, (v, t)) in buf.iter_mut().zip(chunk.iter().zip(&taper)) {
            *b = Complex::new((v - mu) * t, 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            *p += buf[k].norm_sqr();
        }
    }
    let scale = 1.0 / (fs * taper_energy * n_seg as f64);
    for (k, p) in power.iter_mut().enumerate() {
        let one_sided = if k == 0 || (seg % 2 == 0 && k == seg / 2) { 1.0 } else { 2.0 };
        *p *= scale * one_sided;
    }
    let freqs = (0..n_bins).map(|k| k as f64 * fs / seg as f64).collect();
    Some(Psd { freqs, power })
}

/// Fraction of non-DC power within `half_band` Hz of the dominant non-DC
/// peak. `None` for windows shorter than [`SPECTRAL_MIN_LEN`] or with no
/// non-DC power.
pub fn spectral_energy(w: &PpgWindow<'_>, half_band: f64) -> Option<f64> {
    if w.data.len() < SPECTRAL_MIN_LEN {
        return None;
    }
    let psd = welch_psd(w.data, w.fs)?;
    let total: f64 = psd.power[1..].iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let peak = (1..psd.power.len())
        .max_by(|&a, &b| psd.power[a].total_cmp(&psd.power[b]))?;
    let f0 = psd.freqs[peak];
    let band: f64 = (1..psd.power.len())
        .filter(|&k| (psd.freqs[k] - f0).abs() <= half_band + 1e-12)
        .map(|k| psd.power[k])
        .sum();
    Some((band / total).clamp(0.0, 1.0))
}
