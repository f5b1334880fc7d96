//! Record-level evaluation protocol, leakage artifact modes and the
//! statistics used to report them.

mod folds;
mod metrics;
mod protocol;
mod stats;

pub use folds::{group_kfold, FoldPlan};
pub use metrics::{auc, confusion_at, pooled_and_per_record_auc, youden_operating_point, GroupedAuc, OperatingPoint};
pub use protocol::{
    cv_phase, extract_windows, risk_score, run_protocol, CvOutcome, CvSummary, EvalMode, EvalReport, ExtractedSet,
    ExtractedWindow, FoldHook, Provenance, Split, SplitAudit, TestSetGuard, TestSummary,
};
pub use stats::{
    bootstrap_ci, delong_test, permutation_test, wilcoxon_signed_rank, DelongResult, WilcoxonResult,
    WILCOXON_EXACT_MAX,
};
