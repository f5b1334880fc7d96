use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::folds::{group_kfold, FoldPlan};
use super::metrics::{pooled_and_per_record_auc, youden_operating_point, OperatingPoint};
use super::stats::{bootstrap_ci, permutation_test};
use crate::composite::{extract_observables, score_observables, Invalid, ObservableVector, ScoringStats};
use crate::io::ParamConfig;
use crate::signal::PpgRecord;
use crate::util::derive_rng;
use crate::{Error, Result, TOOL_VERSION};

/// How the evaluation is run. Every mode other than `Corrected` breaks one
/// step of the protocol on purpose, to measure the resulting inflation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Record-level folds, training-only statistics, one test access.
    Corrected,
    /// Folds are drawn over segments, so a record's windows land on both
    /// sides of a split.
    Artifact1,
    /// Normalization and kernel statistics are fitted on every record,
    /// including validation and test records.
    Artifact2,
    /// Per-record AUC is not reported; only the pooled figure is.
    #[serde(rename = "artifact3_pooled_only", alias = "artifact3")]
    Artifact3PooledOnly,
}

impl EvalMode {
    pub const ALL: [EvalMode; 4] =
        [EvalMode::Corrected, EvalMode::Artifact1, EvalMode::Artifact2, EvalMode::Artifact3PooledOnly];

    pub fn name(&self) -> &'static str {
        match self {
            EvalMode::Corrected => "corrected",
            EvalMode::Artifact1 => "artifact1",
            EvalMode::Artifact2 => "artifact2",
            EvalMode::Artifact3PooledOnly => "artifact3_pooled_only",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(EvalMode::Corrected),
            "artifact1" => Ok(EvalMode::Artifact1),
            "artifact2" => Ok(EvalMode::Artifact2),
            "artifact3" | "artifact3_pooled_only" => Ok(EvalMode::Artifact3PooledOnly),
            other => Err(Error::schema("mode", format!("unknown mode {other:?}"))),
        }
    }
}

/// Development/test partition of record ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub development: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

impl Split {
    pub fn new<I, J, S, T>(development: I, test: J) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        let development: BTreeSet<String> = development.into_iter().map(Into::into).collect();
        let test: BTreeSet<String> = test.into_iter().map(Into::into).collect();
        if let Some(id) = development.intersection(&test).next() {
            return Err(Error::Leakage(format!("record {id} is in both development and test")));
        }
        Ok(Split { development, test })
    }

    /// SHA-256 over the sorted development and test ids.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for id in &self.development {
            h.update(b"D:");
            h.update(id.as_bytes());
            h.update(b"\n");
        }
        for id in &self.test {
            h.update(b"T:");
            h.update(id.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// One window after statistics-free extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedWindow {
    pub record_id: String,
    pub start: usize,
    pub label: Option<bool>,
    pub outcome: std::result::Result<ObservableVector, Invalid>,
}

/// Extracted windows for a set of records at one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedSet {
    pub window: usize,
    pub stride: usize,
    pub windows: Vec<ExtractedWindow>,
}

impl ExtractedSet {
    fn valid_rows(&self) -> impl Iterator<Item = (&ExtractedWindow, &ObservableVector, bool)> {
        self.windows.iter().filter_map(|w| match (&w.outcome, w.label) {
            (Ok(o), Some(l)) => Some((w, o, l)),
            _ => None,
        })
    }

    /// Number of labeled, valid windows per record.
    pub fn segment_counts(&self, ids: &BTreeSet<String>) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> = ids.iter().map(|id| (id.clone(), 0)).collect();
        for (w, _, _) in self.valid_rows() {
            if let Some(c) = counts.get_mut(&w.record_id) {
                *c += 1;
            }
        }
        counts
    }

    /// Fraction of windows that were scored.
    pub fn validity_rate(&self) -> f64 {
        if self.windows.is_empty() {
            return 0.0;
        }
        self.windows.iter().filter(|w| w.outcome.is_ok()).count() as f64 / self.windows.len() as f64
    }
}

/// Segments every record at `cfg.window` / `cfg.stride()` and extracts
/// observables, in parallel over windows.
pub fn extract_windows(records: &[PpgRecord], cfg: &ParamConfig) -> ExtractedSet {
    let (window, stride) = (cfg.window, cfg.stride());
    let jobs: Vec<(&PpgRecord, crate::signal::PpgWindow<'_>)> =
        records.iter().flat_map(|r| r.windows(window, stride).into_iter().map(move |w| (r, w))).collect();
    let windows = jobs
        .par_iter()
        .map(|(r, w)| ExtractedWindow {
            record_id: r.record_id.clone(),
            start: w.start,
            label: r.label_at(w.start),
            outcome: extract_observables(w, cfg),
        })
        .collect();
    ExtractedSet { window, stride, windows }
}

/// Per-window evaluation score: instability `1 - CSI`, so that higher
/// values indicate the positive (endpoint) class.
pub fn risk_score(csi: f64) -> f64 {
    1.0 - csi
}

/// Guards the held-out test set: the first access succeeds, every later
/// access in the same run fails.
#[derive(Debug, Default)]
pub struct TestSetGuard {
    accessed: AtomicBool,
}

impl TestSetGuard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn access(&self) -> Result<()> {
        if self.accessed.swap(true, Ordering::SeqCst) {
            Err(Error::TestSetAlreadyAccessed)
        } else {
            Ok(())
        }
    }

    pub fn was_accessed(&self) -> bool {
        self.accessed.load(Ordering::SeqCst)
    }
}

/// Which records a validation or test split used, kept for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAudit {
    /// Fold index, or `None` for the held-out test phase.
    pub fold: Option<usize>,
    pub train_records: BTreeSet<String>,
    pub eval_records: BTreeSet<String>,
    pub stats_provenance: BTreeSet<String>,
    /// Scored windows on the evaluation side.
    pub eval_windows: usize,
}

impl SplitAudit {
    pub fn record_overlap(&self) -> usize {
        self.train_records.intersection(&self.eval_records).count()
    }

    pub fn provenance_overlap(&self) -> usize {
        self.stats_provenance.intersection(&self.eval_records).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    /// Per-fold AUC under the mode's fold metric.
    pub fold_auc: Vec<Option<f64>>,
    pub mean_auc: f64,
    /// Per-fold pooled AUC, reported for every mode.
    pub fold_pooled_auc: Vec<Option<f64>>,
    /// Per-fold mean of per-record AUCs, reported for every mode.
    pub fold_per_record_auc: Vec<Option<f64>>,
    /// `per_record_mean` for record-level folds, `pooled` for segment folds.
    pub fold_metric: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub pooled_auc: f64,
    pub ci: (f64, f64),
    /// `None` when per-record reporting is suppressed.
    pub per_record_auc: Option<BTreeMap<String, f64>>,
    pub per_record_mean: Option<f64>,
    pub per_record_sd: Option<f64>,
    pub skipped_records: usize,
    pub operating_point: OperatingPoint,
    pub permutation_p: f64,
    pub n_windows: usize,
    pub n_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub split_hash: String,
    /// Hash of the statistics used on the test set.
    pub stats_hash: String,
    pub tool_version: String,
    /// True when every split kept statistics away from its evaluation
    /// records.
    pub stats_disjoint: bool,
    /// Protocol steps deliberately broken by the mode.
    pub violations: Vec<String>,
}

/// Result of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub seed: u64,
    pub window: usize,
    pub stride: usize,
    pub cv: CvSummary,
    pub test: TestSummary,
    /// The figure each mode would report: CV AUC for artifact1, pooled
    /// test AUC otherwise.
    pub headline_auc: f64,
    pub splits: Vec<SplitAudit>,
    pub provenance: Provenance,
    pub score: String,
    pub bootstrap_method: String,
}

fn rows_for<'a>(
    set: &'a ExtractedSet,
    ids: &'a BTreeSet<String>,
) -> impl Iterator<Item = (&'a ExtractedWindow, &'a ObservableVector, bool)> + 'a {
    set.valid_rows().filter(move |(w, _, _)| ids.contains(&w.record_id))
}

fn fit_stats<'a>(rows: impl Iterator<Item = (&'a ExtractedWindow, &'a ObservableVector, bool)>) -> Result<ScoringStats> {
    let mut feats = Vec::new();
    let mut prov = BTreeSet::new();
    for (w, o, _) in rows {
        feats.push(o.nonlinear());
        prov.insert(w.record_id.clone());
    }
    ScoringStats::fit(&feats, prov)
}

struct Scored<'a> {
    scores: Vec<f64>,
    labels: Vec<bool>,
    groups: Vec<&'a str>,
}

fn score_rows<'a>(
    rows: impl Iterator<Item = (&'a ExtractedWindow, &'a ObservableVector, bool)>,
    cfg: &ParamConfig,
    stats: &ScoringStats,
) -> Scored<'a> {
    let mut out = Scored { scores: Vec::new(), labels: Vec::new(), groups: Vec::new() };
    for (w, o, l) in rows {
        out.scores.push(risk_score(score_observables(o, cfg, stats).csi));
        out.labels.push(l);
        out.groups.push(&w.record_id);
    }
    out
}

/// Pooled and per-record-mean AUC of one validation fold; `None` where
/// undefined.
fn fold_metrics(scored: &Scored<'_>) -> (Option<f64>, Option<f64>) {
    match pooled_and_per_record_auc(&scored.scores, &scored.labels, &scored.groups) {
        Ok(g) => (Some(g.pooled), g.per_record_mean()),
        Err(_) => (None, None),
    }
}

/// Callback after each fold with (fold index, fold AUC); returning `true`
/// stops the CV phase early.
pub type FoldHook<'a> = &'a mut dyn FnMut(usize, f64) -> bool;

/// CV phase over development records only.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub summary: CvSummary,
    pub splits: Vec<SplitAudit>,
    /// True when a hook stopped the run before all folds finished.
    pub stopped_early: bool,
}

/// Runs the cross-validation phase of `mode` on the development records.
/// For `Artifact2`, `leaked` supplies statistics fitted on all records.
pub fn cv_phase(
    set: &ExtractedSet,
    split: &Split,
    cfg: &ParamConfig,
    mode: EvalMode,
    seed: u64,
    leaked: Option<&ScoringStats>,
    hook: Option<FoldHook<'_>>,
) -> Result<CvOutcome> {
    let k = cfg.eval.folds;
    let mut hook = hook;
    let mut fold_auc = Vec::with_capacity(k);
    let mut fold_pooled = Vec::with_capacity(k);
    let mut fold_per_record = Vec::with_capacity(k);
    let mut splits = Vec::with_capacity(k);
    let mut stopped_early = false;

    if mode == EvalMode::Artifact1 {
        let mut rows: Vec<_> = rows_for(set, &split.development).collect();
        if rows.len() < k {
            return Err(Error::Config(format!("{} development windows for {k} folds", rows.len())));
        }
        let mut rng = derive_rng(seed, 0xA1);
        rows.shuffle(&mut rng);
        for fold in 0..k {
            let (val, train): (Vec<_>, Vec<_>) =
                rows.iter().enumerate().partition(|(i, _)| i % k == fold);
            let train: Vec<_> = train.into_iter().map(|(_, r)| *r).collect();
            let val: Vec<_> = val.into_iter().map(|(_, r)| *r).collect();
            let stats = fit_stats(train.iter().copied())?;
            let scored = score_rows(val.iter().copied(), cfg, &stats);
            let (pooled, per_record) = fold_metrics(&scored);
            fold_pooled.push(pooled);
            fold_per_record.push(per_record);
            let a = pooled;
            splits.push(SplitAudit {
                fold: Some(fold),
                train_records: train.iter().map(|r| r.0.record_id.clone()).collect(),
                eval_records: val.iter().map(|r| r.0.record_id.clone()).collect(),
                stats_provenance: stats.provenance(),
                eval_windows: val.len(),
            });
            fold_auc.push(a);
            if let (Some(h), Some(a)) = (hook.as_mut(), a) {
                if h(fold, a) && fold + 1 < k {
                    stopped_early = true;
                    break;
                }
            }
        }
    } else {
        let counts = set.segment_counts(&split.development);
        let plan: FoldPlan = group_kfold(&counts, k, seed)?;
        plan.check_partition(split.development.iter().map(String::as_str))?;
        for fold in 0..k {
            let val_ids: BTreeSet<String> = plan.folds[fold].iter().cloned().collect();
            let train_ids: BTreeSet<String> = plan.train_ids(fold).into_iter().collect();
            if let Some(id) = train_ids.intersection(&val_ids).next() {
                return Err(Error::Leakage(format!("record {id} on both sides of fold {fold}")));
            }
            let stats = match (mode, leaked) {
                (EvalMode::Artifact2, Some(s)) => s.clone(),
                _ => {
                    let s = fit_stats(rows_for(set, &train_ids))?;
                    s.check_disjoint(val_ids.iter().map(String::as_str))?;
                    s
                }
            };
            let scored = score_rows(rows_for(set, &val_ids), cfg, &stats);
            let (pooled, per_record) = fold_metrics(&scored);
            fold_pooled.push(pooled);
            fold_per_record.push(per_record);
            let a = per_record.or(pooled);
            let eval_windows = scored.scores.len();
            drop(scored);
            splits.push(SplitAudit {
                fold: Some(fold),
                train_records: train_ids,
                eval_records: val_ids,
                stats_provenance: stats.provenance(),
                eval_windows,
            });
            fold_auc.push(a);
            if let (Some(h), Some(a)) = (hook.as_mut(), a) {
                if h(fold, a) && fold + 1 < k {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let defined: Vec<f64> = fold_auc.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedAuc("no fold had both classes".into()));
    }
    let mean_auc = defined.iter().sum::<f64>() / defined.len() as f64;
    let fold_metric = if mode == EvalMode::Artifact1 { "pooled" } else { "per_record_mean" };
    Ok(CvOutcome {
        summary: CvSummary {
            fold_auc,
            mean_auc,
            fold_pooled_auc: fold_pooled,
            fold_per_record_auc: fold_per_record,
            fold_metric: fold_metric.into(),
        },
        splits,
        stopped_early,
    })
}

/// Runs the full protocol for one mode: CV on development records, then a
/// single guarded access to the test records.
pub fn run_protocol(
    set: &ExtractedSet,
    split: &Split,
    cfg: &ParamConfig,
    mode: EvalMode,
    seed: u64,
    guard: &TestSetGuard,
) -> Result<EvalReport> {
    let mut violations = Vec::new();
    let leaked = if mode == EvalMode::Artifact2 {
        let all: BTreeSet<String> = split.development.union(&split.test).cloned().collect();
        violations.push("statistics fitted on all records, including evaluation records".to_string());
        Some(fit_stats(rows_for(set, &all))?)
    } else {
        None
    };
    match mode {
        EvalMode::Artifact1 => violations.push("folds drawn over segments, not records".into()),
        EvalMode::Artifact3PooledOnly => violations.push("per-record AUC suppressed".into()),
        _ => {}
    }

    let cv = cv_phase(set, split, cfg, mode, seed, leaked.as_ref(), None)?;

    let test_stats = match &leaked {
        Some(s) => s.clone(),
        None => fit_stats(rows_for(set, &split.development))?,
    };
    guard.access()?;
    if leaked.is_none() {
        test_stats.check_disjoint(split.test.iter().map(String::as_str))?;
    }
    let scored = score_rows(rows_for(set, &split.test), cfg, &test_stats);
    let grouped = pooled_and_per_record_auc(&scored.scores, &scored.labels, &scored.groups)?;
    let ci = bootstrap_ci(&scored.scores, &scored.labels, cfg.eval.bootstrap, 0.95, seed)?;
    let permutation_p = permutation_test(&scored.scores, &scored.labels, cfg.eval.permutations, seed)?;
    let operating_point = youden_operating_point(&scored.scores, &scored.labels)?;
    let suppress = mode == EvalMode::Artifact3PooledOnly;

    let mut splits = cv.splits;
    splits.push(SplitAudit {
        fold: None,
        train_records: split.development.clone(),
        eval_records: split.test.clone(),
        stats_provenance: test_stats.provenance(),
        eval_windows: scored.scores.len(),
    });
    let stats_disjoint = splits.iter().all(|s| s.provenance_overlap() == 0);

    let test = TestSummary {
        pooled_auc: grouped.pooled,
        ci,
        per_record_mean: if suppress { None } else { grouped.per_record_mean() },
        per_record_sd: if suppress { None } else { grouped.per_record_sd() },
        per_record_auc: if suppress { None } else { Some(grouped.per_record.clone()) },
        skipped_records: grouped.skipped,
        operating_point,
        permutation_p,
        n_windows: scored.scores.len(),
        n_positive: scored.labels.iter().filter(|&&l| l).count(),
    };
    let headline_auc = if mode == EvalMode::Artifact1 { cv.summary.mean_auc } else { test.pooled_auc };
    Ok(EvalReport {
        mode,
        seed,
        window: set.window,
        stride: set.stride,
        cv: cv.summary,
        test,
        headline_auc,
        splits,
        provenance: Provenance {
            config_hash: cfg.hash(),
            split_hash: split.hash(),
            stats_hash: test_stats.hash(),
            tool_version: TOOL_VERSION.to_string(),
            stats_disjoint,
            violations,
        },
        score: "1 - CSI (higher means the endpoint is more likely)".into(),
        bootstrap_method: "segment-level percentile bootstrap, unstratified, single-class resamples redrawn".into(),
    })
}
