use crate::util::ls_slope;
use crate::{Error, Result};

/// Higuchi curve lengths `L(k)` for `k = 1..=k_max`, each averaged over the
/// `k` start offsets.
pub fn higuchi_curve_lengths(x: &[f64], k_max: usize) -> Result<Vec<f64>> {
    if k_max < 2 {
        return Err(Error::InvalidInput(format!("k_max must be at least 2, got {k_max}")));
    }
    let n = x.len();
    if n <= 2 * k_max {
        return Err(Error::InvalidInput(format!(
            "window of {n} samples too short for k_max = {k_max}"
        )));
    }
    let lengths = (1..=k_max)
        .map(|k| {
            let total: f64 = (0..k)
                .map(|offset| {
                    let steps = (n - 1 - offset) / k;
                    let dist: f64 = (1..=steps)
                        .map(|i| (x[offset + i * k] - x[offset + (i - 1) * k]).abs())
                        .sum();
                    dist * (n - 1) as f64 / (steps * k) as f64 / k as f64
                })
                .sum();
            total / k as f64
        })
        .collect();
    Ok(lengths)
}

/// Higuchi fractal dimension: least-squares slope of `ln L(k)` against
/// `ln(1/k)`. Not clipped to [1, 2]. A constant window has zero curve length
/// and is rejected.
pub fn hfd(x: &[f64], k_max: usize) -> Result<f64> {
    let lengths = higuchi_curve_lengths(x, k_max)?;
    if lengths.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidInput("zero curve length".into()));
    }
    let xs: Vec<f64> = (1..=k_max).map(|k| -(k as f64).ln()).collect();
    let ys: Vec<f64> = lengths.iter().map(|l| l.ln()).collect();
    Ok(ls_slope(&xs, &ys))
}
