use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::space::{dirichlet, Dim, Point, SearchSpace, Value};
use crate::util::std_dev;

/// Sampler settings: random startup followed by a tree-structured Parzen
/// estimator with independent per-dimension densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeSettings {
    pub n_startup: usize,
    /// Fraction of completed trials forming the good set.
    pub gamma: f64,
    pub n_candidates: usize,
    /// Concentration of the Dirichlet perturbation around a good simplex
    /// vector.
    pub simplex_concentration: f64,
}

impl Default for TpeSettings {
    fn default() -> Self {
        TpeSettings { n_startup: 30, gamma: 0.25, n_candidates: 24, simplex_concentration: 50.0 }
    }
}

/// Sampler phase that produced a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Startup,
    Tpe,
}

/// Observation used by the sampler: a point and its objective. Pruned
/// trials enter with `good_eligible = false` and only ever join the bad set.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<'a> {
    pub point: &'a Point,
    pub value: f64,
    pub good_eligible: bool,
}

/// Proposes the next point. The first `n_startup` proposals (counted by
/// `trial_index`) are uniform; later ones maximize the good/bad density
/// ratio over `n_candidates` draws from the good-set density.
pub fn sample_point(
    space: &SearchSpace,
    history: &[Observation<'_>],
    trial_index: usize,
    settings: &TpeSettings,
    rng: &mut ChaCha8Rng,
) -> (Point, Phase) {
    let eligible = history.iter().filter(|o| o.good_eligible).count();
    if trial_index < settings.n_startup || eligible < 2 {
        return (space.sample_uniform(rng), Phase::Startup);
    }
    let (good, bad) = split_good_bad(history, settings.gamma);

    let mut best: Option<(f64, Point)> = None;
    for _ in 0..settings.n_candidates.max(1) {
        let cand: Point = space
            .dims
            .iter()
            .enumerate()
            .map(|(d, dim)| draw_from(dim, &column(&good, d), settings, rng))
            .collect();
        let score: f64 = space
            .dims
            .iter()
            .enumerate()
            .map(|(d, dim)| {
                log_density(dim, &cand[d], &column(&good, d), settings)
                    - log_density(dim, &cand[d], &column(&bad, d), settings)
            })
            .sum();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cand));
        }
    }
    (best.expect("at least one candidate").1, Phase::Tpe)
}

/// Good set: the top `ceil(gamma * n)` eligible observations (at least one).
/// Everything else, pruned trials included, is bad.
fn split_good_bad<'a>(history: &[Observation<'a>], gamma: f64) -> (Vec<&'a Point>, Vec<&'a Point>) {
    let mut eligible: Vec<&Observation<'a>> = history.iter().filter(|o| o.good_eligible).collect();
    // Stable sort keeps ties in trial order, so the split is reproducible.
    eligible.sort_by(|a, b| b.value.total_cmp(&a.value));
    let n_good = ((gamma * eligible.len() as f64).ceil() as usize).clamp(1, eligible.len());
    let good = eligible[..n_good].iter().map(|o| o.point).collect();
    let mut bad: Vec<&Point> = eligible[n_good..].iter().map(|o| o.point).collect();
    bad.extend(history.iter().filter(|o| !o.good_eligible).map(|o| o.point));
    (good, bad)
}

fn column<'a>(set: &[&'a Point], d: usize) -> Vec<&'a Value> {
    set.iter().map(|p| &p[d]).collect()
}

/// Scott's rule bandwidth, floored at `span / min(100, n + 1)`. The floor
/// keeps a small or collapsed good set exploring and tightens as the set
/// grows.
fn bandwidth(xs: &[f64], span: f64) -> f64 {
    let n = xs.len().max(1) as f64;
    let sd = if xs.len() > 1 { std_dev(xs) } else { 0.0 };
    (sd * n.powf(-0.2)).max(span / (n + 1.0).min(25.0)).max(1e-12)
}

fn numeric_bounds(dim: &Dim) -> (f64, f64) {
    match dim {
        // Integers are modelled on the continuous range covering each level.
        Dim::Int { lo, hi, .. } => (*lo as f64 - 0.5, *hi as f64 + 0.5),
        Dim::Float { lo, hi, .. } => (*lo, *hi),
        _ => unreachable!("numeric dimension"),
    }
}

fn draw_from(dim: &Dim, set: &[&Value], settings: &TpeSettings, rng: &mut ChaCha8Rng) -> Value {
    match dim {
        Dim::Int { .. } | Dim::Float { .. } => {
            let (lo, hi) = numeric_bounds(dim);
            let xs: Vec<f64> = set.iter().filter_map(|v| v.as_f64()).collect();
            let h = bandwidth(&xs, hi - lo);
            // Mixture of the uniform prior (one component) and one Gaussian
            // per good observation.
            let k = rng.random_range(0..=xs.len());
            let x = if k == xs.len() {
                lo + (hi - lo) * rng.random::<f64>()
            } else {
                let mut x;
                let mut tries = 0;
                loop {
                    let z: f64 = StandardNormal.sample(rng);
                    x = xs[k] + h * z;
                    tries += 1;
                    if (lo..=hi).contains(&x) || tries > 64 {
                        break;
                    }
                }
                x.clamp(lo, hi)
            };
            match dim {
                Dim::Int { lo, hi, .. } => Value::Int((x.round() as i64).clamp(*lo, *hi)),
                _ => Value::Float(x),
            }
        }
        Dim::Cat { choices, .. } => {
            let w = cat_weights(choices.len(), set);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, wi) in w.iter().enumerate() {
                acc += wi;
                if u < acc {
                    return Value::Cat(i);
                }
            }
            Value::Cat(choices.len() - 1)
        }
        Dim::Simplex { .. } => {
            let vs: Vec<&Vec<f64>> = set
                .iter()
                .filter_map(|v| match v {
                    Value::Simplex(w) => Some(w),
                    _ => None,
                })
                .collect();
            let j = rng.random_range(0..=vs.len());
            if j == vs.len() {
                dim.sample_uniform(rng)
            } else {
                Value::Simplex(dirichlet(&simplex_alpha(vs[j], settings), rng))
            }
        }
    }
}

fn simplex_alpha(centre: &[f64], settings: &TpeSettings) -> Vec<f64> {
    centre.iter().map(|c| 1.0 + settings.simplex_concentration * c).collect()
}

/// Smoothed empirical frequencies: `(count + 1) / (n + K)`.
fn cat_weights(k: usize, set: &[&Value]) -> Vec<f64> {
    let mut counts = vec![1.0; k];
    for v in set {
        if let Value::Cat(i) = v {
            counts[*i] += 1.0;
        }
    }
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + statrs::function::erf::erf(z / std::f64::consts::SQRT_2))
}

fn log_dirichlet_pdf(x: &[f64], alpha: &[f64]) -> f64 {
    let a0: f64 = alpha.iter().sum();
    let norm = ln_gamma(a0) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>();
    norm + x.iter().zip(alpha).map(|(&xi, &a)| (a - 1.0) * xi.max(1e-300).ln()).sum::<f64>()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log density of `v` under the Parzen mixture built from `set` (plus the
/// uniform prior component).
fn log_density(dim: &Dim, v: &Value, set: &[&Value], settings: &TpeSettings) -> f64 {
    let n = set.len() as f64 + 1.0;
    match dim {
        Dim::Int { .. } | Dim::Float { .. } => {
            let (lo, hi) = numeric_bounds(dim);
            let x = v.as_f64().expect("numeric value");
            let xs: Vec<f64> = set.iter().filter_map(|v| v.as_f64()).collect();
            let h = bandwidth(&xs, hi - lo);
            let mut terms = vec![-(hi - lo).ln()];
            for &c in &xs {
                // Gaussian truncated to the bounds.
                let mass = (normal_cdf((hi - c) / h) - normal_cdf((lo - c) / h)).max(1e-300);
                let z = (x - c) / h;
                terms.push(-0.5 * z * z - (h * (2.0 * PI).sqrt()).ln() - mass.ln());
            }
            log_sum_exp(&terms) - n.ln()
        }
        Dim::Cat { choices, .. } => {
            let Value::Cat(i) = v else { unreachable!("categorical value") };
            cat_weights(choices.len(), set)[*i].ln()
        }
        Dim::Simplex { k, .. } => {
            let Value::Simplex(x) = v else { unreachable!("simplex value") };
            // Uniform Dirichlet density on the simplex is (k-1)!.
            let mut terms = vec![ln_gamma(*k as f64)];
            for c in set {
                if let Value::Simplex(w) = c {
                    terms.push(log_dirichlet_pdf(x, &simplex_alpha(w, settings)));
                }
            }
            log_sum_exp(&terms) - n.ln()
        }
    }
}
