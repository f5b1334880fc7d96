use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::util::midranks;
use crate::{Error, Result};

/// Area under the ROC curve via the Mann-Whitney U statistic with midranks
/// for ties. Higher scores are taken to indicate the positive class.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels must align");
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc(format!("{n_pos} positive and {n_neg} negative samples")));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Segment-weighted and record-weighted discrimination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedAuc {
    pub pooled: f64,
    /// Per-record AUC keyed by record id, single-class records omitted.
    pub per_record: BTreeMap<String, f64>,
    /// Records skipped because all their segments share one label.
    pub skipped: usize,
}

impl GroupedAuc {
    pub fn per_record_mean(&self) -> Option<f64> {
        if self.per_record.is_empty() {
            return None;
        }
        Some(self.per_record.values().sum::<f64>() / self.per_record.len() as f64)
    }

    pub fn per_record_sd(&self) -> Option<f64> {
        let m = self.per_record_mean()?;
        let n = self.per_record.len() as f64;
        Some((self.per_record.values().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
    }
}

/// Pooled AUC over all segments plus per-record AUCs.
pub fn pooled_and_per_record_auc(scores: &[f64], labels: &[bool], groups: &[&str]) -> Result<GroupedAuc> {
    assert_eq!(scores.len(), groups.len(), "scores and groups must align");
    let pooled = auc(scores, labels)?;
    let mut by_record: BTreeMap<&str, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for ((s, l), g) in scores.iter().zip(labels).zip(groups) {
        let e = by_record.entry(g).or_default();
        e.0.push(*s);
        e.1.push(*l);
    }
    let mut per_record = BTreeMap::new();
    let mut skipped = 0;
    for (id, (s, l)) in by_record {
        match auc(&s, &l) {
            Ok(a) => {
                per_record.insert(id.to_string(), a);
            }
            Err(_) => skipped += 1,
        }
    }
    Ok(GroupedAuc { pooled, per_record, skipped })
}

/// Confusion-derived metrics at a threshold. Undefined ratios are NaN
/// (serialized as `null`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub npv: f64,
    pub ppv: f64,
    pub youden_j: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if a + b == 0 {
        f64::NAN
    } else {
        a as f64 / (a + b) as f64
    }
}

/// Metrics when predicting positive for `score >= threshold`.
pub fn confusion_at(scores: &[f64], labels: &[bool], threshold: f64) -> OperatingPoint {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let sensitivity = ratio(tp, fn_);
    let specificity = ratio(tn, fp);
    OperatingPoint {
        threshold,
        sensitivity,
        specificity,
        npv: ratio(tn, fn_),
        ppv: ratio(tp, fp),
        youden_j: sensitivity + specificity - 1.0,
        tp,
        fp,
        tn,
        fn_,
    }
}

/// Threshold maximizing Youden's J over the midpoints between adjacent
/// distinct scores, ties going to the higher specificity (then to the
/// lower threshold). With a single distinct score the threshold is that
/// score.
pub fn youden_operating_point(scores: &[f64], labels: &[bool]) -> Result<OperatingPoint> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::UndefinedAuc("Youden threshold needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_neg = labels.len() - n_pos;

    // Sweep thresholds upward; below the first midpoint everything is
    // predicted positive.
    let (mut tp, mut fp) = (n_pos, n_neg);
    let mut best: Option<(f64, f64, f64)> = None; // (j, spec, threshold)
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        while i < order.len() && scores[order[i]] == v {
            if labels[order[i]] {
                tp -= 1;
            } else {
                fp -= 1;
            }
            i += 1;
        }
        if i == order.len() {
            break;
        }
        let threshold = 0.5 * (v + scores[order[i]]);
        let sens = tp as f64 / n_pos as f64;
        let spec = (n_neg - fp) as f64 / n_neg as f64;
        let j = sens + spec - 1.0;
        let better = match best {
            None => true,
            Some((bj, bs, _)) => j > bj || (j == bj && spec > bs),
        };
        if better {
            best = Some((j, spec, threshold));
        }
    }
    let threshold = best.map_or(scores[order[0]], |b| b.2);
    Ok(confusion_at(scores, labels, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_inverted() {
        let s = [0.1, 0.2, 0.8, 0.9];
        let l = [false, false, true, true];
        assert_eq!(auc(&s, &l).unwrap(), 1.0);
        let inv = [true, true, false, false];
        assert_eq!(auc(&s, &inv).unwrap(), 0.0);
        assert!(matches!(auc(&s, &[true; 4]), Err(Error::UndefinedAuc(_))));
    }

    #[test]
    fn ties_count_half() {
        assert_eq!(auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
    }

    #[test]
    fn youden_simple() {
        let op = youden_operating_point(&[0.1, 0.9], &[false, true]).unwrap();
        assert_eq!(op.threshold, 0.5);
        assert_eq!((op.sensitivity, op.specificity), (1.0, 1.0));
    }

    #[test]
    fn all_negative_truth_npv() {
        let op = confusion_at(&[0.1, 0.2, 0.3], &[false, false, false], 0.5);
        assert_eq!(op.npv, 1.0);
        assert!(op.sensitivity.is_nan());
    }

    #[test]
    fn single_class_records_skipped() {
        let s = [0.1, 0.9, 0.2, 0.3, 0.7];
        let l = [false, true, false, false, true];
        let g = ["a", "a", "b", "b", "c"];
        let r = pooled_and_per_record_auc(&s, &l, &g).unwrap();
        assert_eq!(r.skipped, 2);
        assert_eq!(r.per_record.len(), 1);
    }
}
