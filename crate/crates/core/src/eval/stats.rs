use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::metrics::auc;
use crate::util::{derive_rng, midranks, percentile_sorted};
use crate::{Error, Result};

const BOOTSTRAP_STREAM: u64 = 0xB007;
const PERMUTATION_STREAM: u64 = 0x9E57;

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

fn require_both(labels: &[bool]) -> Result<()> {
    let (p, n) = class_counts(labels);
    if p == 0 || n == 0 {
        return Err(Error::UndefinedAuc(format!("{p} positive and {n} negative samples")));
    }
    Ok(())
}

/// AUC of a weighted sample whose scores are already grouped into
/// ascending tie groups of (positive weight, negative weight).
fn grouped_auc(groups: &[(u32, u32)]) -> Option<f64> {
    let (mut u, mut neg_below, mut pos_total) = (0.0, 0u64, 0u64);
    for &(p, n) in groups {
        u += p as f64 * (neg_below as f64 + 0.5 * n as f64);
        neg_below += n as u64;
        pos_total += p as u64;
    }
    if pos_total == 0 || neg_below == 0 {
        None
    } else {
        Some(u / (pos_total as f64 * neg_below as f64))
    }
}

/// Percentile bootstrap interval for the AUC from segment-level resamples
/// with replacement (unstratified; resamples missing a class are redrawn).
/// The interval is widened to contain the point estimate if needed.
pub fn bootstrap_ci(scores: &[f64], labels: &[bool], b: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    require_both(labels)?;
    if b < 100 {
        return Err(Error::InvalidInput(format!("bootstrap needs at least 100 resamples, got {b}")));
    }
    let point = auc(scores, labels)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| scores[a].total_cmp(&scores[c]));
    // group id of each sample in ascending score order
    let mut group_of = vec![0usize; n];
    let mut n_groups = 0;
    for (k, &i) in order.iter().enumerate() {
        if k > 0 && scores[i] != scores[order[k - 1]] {
            n_groups += 1;
        }
        group_of[i] = n_groups;
    }
    n_groups += 1;

    let mut rng = derive_rng(seed, BOOTSTRAP_STREAM);
    let mut stats = Vec::with_capacity(b);
    let mut groups = vec![(0u32, 0u32); n_groups];
    while stats.len() < b {
        groups.iter_mut().for_each(|g| *g = (0, 0));
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let g = &mut groups[group_of[i]];
            if labels[i] {
                g.0 += 1;
            } else {
                g.1 += 1;
            }
        }
        if let Some(a) = grouped_auc(&groups) {
            stats.push(a);
        }
    }
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0 * 100.0;
    let lo = percentile_sorted(&stats, tail).min(point);
    let hi = percentile_sorted(&stats, 100.0 - tail).max(point);
    Ok((lo, hi))
}

/// One-sided label-permutation test of AUC against chance:
/// `(1 + #{perm >= observed}) / (1 + n_perm)`.
pub fn permutation_test(scores: &[f64], labels: &[bool], n_perm: usize, seed: u64) -> Result<f64> {
    require_both(labels)?;
    let (n_pos, n_neg) = class_counts(labels);
    let ranks = midranks(scores);
    let auc_of = |lab: &[bool]| {
        let r: f64 = ranks.iter().zip(lab).filter(|(_, &l)| l).map(|(r, _)| r).sum();
        (r - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64)
    };
    let observed = auc_of(labels);
    let mut rng = derive_rng(seed, PERMUTATION_STREAM);
    let mut perm = labels.to_vec();
    let mut exceed = 0usize;
    for _ in 0..n_perm {
        perm.shuffle(&mut rng);
        if auc_of(&perm) >= observed - 1e-12 {
            exceed += 1;
        }
    }
    Ok((1 + exceed) as f64 / (1 + n_perm) as f64)
}

/// Wilcoxon signed-rank result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Smaller of the positive and negative rank sums.
    pub w: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Pairs remaining after dropping zero differences.
    pub n: usize,
    pub exact: bool,
}

/// Largest pair count for which the exact null distribution is used.
pub const WILCOXON_EXACT_MAX: usize = 20;

/// Wilcoxon signed-rank test on paired differences. Zero differences are
/// dropped; at least five must remain. Tied magnitudes share midranks.
/// Exact null distribution for n <= 20, otherwise a normal approximation
/// with tie and continuity corrections.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<WilcoxonResult> {
    let d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n < 5 {
        return Err(Error::InvalidInput(format!("{n} non-zero differences, at least 5 required")));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite difference".into()));
    }
    let ranks = midranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let w_plus: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w = w_plus.min(total - w_plus);

    if n <= WILCOXON_EXACT_MAX {
        // Midranks are multiples of 1/2, so doubled ranks are integers.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut counts = vec![0f64; max_sum + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=max_sum).rev() {
                counts[s] += counts[s - r];
            }
        }
        let target = (2.0 * w).round() as usize;
        let below: f64 = counts[..=target].iter().sum();
        let p = (2.0 * below / 2f64.powi(n as i32)).min(1.0);
        return Ok(WilcoxonResult { w, p, n, exact: true });
    }

    let nf = n as f64;
    let mut sorted = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = (2.0 * (1.0 - normal.cdf(z))).min(1.0);
    Ok(WilcoxonResult { w, p, n, exact: false })
}

/// DeLong comparison of two correlated AUCs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    /// `auc_a - auc_b`.
    pub delta: f64,
    pub z: f64,
    pub p: f64,
}

/// Fraction of `others` below `x`, ties counting one half. `others` sorted.
fn placement(x: f64, others: &[f64]) -> f64 {
    let below = others.partition_point(|v| *v < x);
    let not_above = others.partition_point(|v| *v <= x);
    (below as f64 + 0.5 * (not_above - below) as f64) / others.len() as f64
}

fn placements(scores: &[f64], labels: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let mut pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let mut neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    let v10: Vec<f64> = {
        neg.sort_by(f64::total_cmp);
        pos.iter().map(|&x| placement(x, &neg)).collect()
    };
    let v01: Vec<f64> = {
        pos.sort_by(f64::total_cmp);
        scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| !l)
            .map(|(&y, _)| 1.0 - placement(y, &pos))
            .collect()
    };
    (v10, v01)
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

/// Two-sided DeLong test for the difference between two AUCs computed on
/// the same labeled samples.
pub fn delong_test(scores_a: &[f64], scores_b: &[f64], labels: &[bool]) -> Result<DelongResult> {
    assert_eq!(scores_a.len(), labels.len());
    assert_eq!(scores_b.len(), labels.len());
    require_both(labels)?;
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos < 2 || n_neg < 2 {
        return Err(Error::DegenerateVariance("DeLong needs at least two samples per class".into()));
    }
    let (a10, a01) = placements(scores_a, labels);
    let (b10, b01) = placements(scores_b, labels);
    let auc_a = a10.iter().sum::<f64>() / n_pos as f64;
    let auc_b = b10.iter().sum::<f64>() / n_pos as f64;
    let delta = auc_a - auc_b;
    let var = (cov(&a10, &a10) + cov(&b10, &b10) - 2.0 * cov(&a10, &b10)) / n_pos as f64
        + (cov(&a01, &a01) + cov(&b01, &b01) - 2.0 * cov(&a01, &b01)) / n_neg as f64;
    if !(var > 1e-15) {
        if delta.abs() < 1e-12 {
            return Ok(DelongResult { auc_a, auc_b, delta: 0.0, z: 0.0, p: 1.0 });
        }
        return Err(Error::DegenerateVariance(format!("zero variance with AUC difference {delta}")));
    }
    let z = delta / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0);
    Ok(DelongResult { auc_a, auc_b, delta, z, p })
}
