//! Kernels, proxies and the window score.

mod csi;
mod kernel;
mod proxies;
mod weights;

pub use csi::{
    cnl, csi_from_components, csi_multiscale, csi_sparse, csi_window, csi_window_traced, extract_observables,
    extract_traced, nl_gate, score_observables, ComponentVector, FeatureKind, Invalid, InvalidStage,
    ObservableVector, Stage, WindowResult, WindowScore,
};
pub use kernel::{
    fit_kernel_stats, kernel_psi, FeatureKernel, KernelStats, NormStats, ScoringStats, MIN_FIT_VALUES, NL_FEATURES,
};
pub use proxies::{beat_amplitudes, cst_proxies, rmssd_ms, Proxies};
pub use weights::{check_simplex, CnlWeights, CsiWeights, OuterWeights, SIMPLEX_TOL};
