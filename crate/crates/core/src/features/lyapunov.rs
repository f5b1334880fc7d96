use super::embed::Embedding;
use super::M_MIN;
use crate::util::ls_slope;
use crate::{Error, Result};

/// Outcome of the stabilized Rosenstein estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LleResult {
    /// Divergence rate per sample (slope of mean log distance).
    pub lambda: f64,
    /// At least [`M_MIN`] neighbour pairs contributed at every fitted step.
    pub valid: bool,
    /// `exp(-max(lambda, 0))`, present only when valid.
    pub stability: Option<f64>,
    /// Number of divergence steps after k = 0 used in the fit.
    pub fit_len: usize,
    /// Smallest number of contributing pairs across the fitted steps.
    pub min_pairs: usize,
    /// Mean log divergence for k = 0..=fit_len.
    pub divergence: Vec<f64>,
}

impl LleResult {
    fn invalid(fit_len: usize) -> Self {
        LleResult {
            lambda: f64::NAN,
            valid: false,
            stability: None,
            fit_len,
            min_pairs: 0,
            divergence: Vec::new(),
        }
    }
}

/// Default linear-region length: a quarter of the point count, at least 5.
pub fn default_fit_len(points: usize) -> usize {
    (points / 4).max(5)
}

/// Rosenstein largest Lyapunov exponent with a minimum temporal separation
/// between neighbours and a per-pair bound on how far each pair is
/// followed: pair (i, j) contributes at step k only while
/// `max(i, j) + k` stays inside the embedding.
///
/// Returns an invalid result (not an error) when fewer than [`M_MIN`] points
/// or pairs are available.
pub fn lle_stabilized(e: &Embedding, min_sep: usize, fit_len: Option<usize>) -> LleResult {
    let n = e.len();
    let min_sep = min_sep.max(1);
    let fit_len = fit_len.unwrap_or_else(|| default_fit_len(n));
    if n < M_MIN || fit_len == 0 {
        return LleResult::invalid(fit_len);
    }

    let dist = |a: usize, b: usize| -> f64 {
        e.point(a)
            .iter()
            .zip(e.point(b))
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    };

    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if i.abs_diff(j) < min_sep {
                continue;
            }
            let d = dist(i, j);
            if d > 0.0 && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            pairs.push((i, j));
        }
    }

    let mut divergence = Vec::with_capacity(fit_len + 1);
    let mut min_pairs = usize::MAX;
    for k in 0..=fit_len {
        let (mut sum, mut count) = (0.0, 0usize);
        for &(i, j) in &pairs {
            if i.max(j) + k >= n {
                continue;
            }
            let d = dist(i + k, j + k);
            if d > 0.0 {
                sum += d.ln();
                count += 1;
            }
        }
        min_pairs = min_pairs.min(count);
        if count == 0 {
            break;
        }
        divergence.push(sum / count as f64);
    }

    if min_pairs < M_MIN || divergence.len() != fit_len + 1 {
        return LleResult {
            min_pairs,
            divergence,
            ..LleResult::invalid(fit_len)
        };
    }
    let ks: Vec<f64> = (0..=fit_len).map(|k| k as f64).collect();
    let lambda = ls_slope(&ks, &divergence);
    let stability = lle_to_stability(lambda).ok();
    LleResult {
        lambda,
        valid: stability.is_some(),
        stability,
        fit_len,
        min_pairs,
        divergence,
    }
}

/// `exp(-lambda)` clipped to (0, 1]: negative (contracting) exponents map
/// to 1.
pub fn lle_to_stability(lambda: f64) -> Result<f64> {
    if !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite exponent {lambda}")));
    }
    Ok((-lambda.max(0.0)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::derive_rng;
    use rand::Rng;

    fn logistic(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = derive_rng(seed, 11);
        let mut x: f64 = rng.random_range(0.05..0.95);
        for _ in 0..100 {
            x = 4.0 * x * (1.0 - x);
        }
        (0..n)
            .map(|_| {
                x = 4.0 * x * (1.0 - x);
                x
            })
            .collect()
    }

    /// Lyapunov exponent straight from the map derivative: mean ln|f'(x)|.
    fn derivative_oracle(x: &[f64]) -> f64 {
        x.iter().map(|&v| (4.0 - 8.0 * v).abs().max(1e-300).ln()).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn logistic_map_recovers_ln2() {
        for seed in 0..20 {
            let x = logistic(seed, 2000);
            let oracle = derivative_oracle(&x);
            assert!((oracle - 2f64.ln()).abs() < 0.05, "oracle {oracle}");
            let e = Embedding::new(&x, 3, 1).unwrap();
            let r = lle_stabilized(&e, 10, Some(5));
            assert!(r.valid);
            assert!((r.lambda - oracle).abs() <= 0.1, "seed {seed}: {} vs {oracle}", r.lambda);
        }
    }

    #[test]
    fn sine_is_neutral() {
        let x: Vec<f64> = (0..1024)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 23.7).sin())
            .collect();
        let e = Embedding::new(&x, 3, 6).unwrap();
        let r = lle_stabilized(&e, 12, None);
        assert!(r.valid);
        assert!(r.lambda.abs() <= 0.05, "{}", r.lambda);
        assert!((r.stability.unwrap() - (-r.lambda.max(0.0)).exp()).abs() < 1e-12);
    }

    #[test]
    fn short_embedding_is_invalid() {
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let e = Embedding::new(&x, 1, 1).unwrap();
        let r = lle_stabilized(&e, 1, None);
        assert!(!r.valid);
        assert!(r.stability.is_none());
    }

    #[test]
    fn stability_transform() {
        assert_eq!(lle_to_stability(0.0).unwrap(), 1.0);
        assert!((lle_to_stability(0.104).unwrap() - 0.9012).abs() < 5e-5);
        assert_eq!(lle_to_stability(-0.5).unwrap(), 1.0);
        assert!(lle_to_stability(f64::NAN).is_err());
        assert!(lle_to_stability(f64::INFINITY).is_err());
        let mut prev = 1.0 + 1e-9;
        for i in 0..1000 {
            let v = lle_to_stability(i as f64 * 0.003).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }
}
