use std::fmt;

use serde::{Deserialize, Serialize};

use super::kernel::ScoringStats;
use super::proxies::cst_proxies;
use super::weights::{CnlWeights, OuterWeights};
use crate::features::{ami_delay, hfd, lle_stabilized, sampen, spectral_energy, Embedding, M_MIN};
use crate::io::{ParamConfig, TauMode};
use crate::signal::{detect_beats, homeostasis, quality_score, PpgWindow};

/// Stage at which a window was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidStage {
    Quality,
    EmbedTooShort,
    FeatureInvalid,
}

/// Estimator responsible for a `FeatureInvalid` rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Delay,
    Sampen,
    Hfd,
    Lle,
    Energy,
}

/// A rejected window. Rejection is a result, never a NaN score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invalid {
    pub stage: InvalidStage,
    pub feature: Option<FeatureKind>,
    pub detail: String,
}

impl Invalid {
    fn new(stage: InvalidStage, feature: Option<FeatureKind>, detail: impl Into<String>) -> Self {
        Invalid { stage, feature, detail: detail.into() }
    }

    /// Short machine-readable reason such as `quality` or
    /// `feature_invalid:lle`.
    pub fn reason(&self) -> String {
        let stage = match self.stage {
            InvalidStage::Quality => "quality",
            InvalidStage::EmbedTooShort => "embed_too_short",
            InvalidStage::FeatureInvalid => "feature_invalid",
        };
        match self.feature {
            Some(f) => format!("{stage}:{}", serde_json::to_value(f).unwrap().as_str().unwrap()),
            None => stage.to_string(),
        }
    }
}

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.reason(), self.detail)
    }
}

/// Pipeline steps in execution order, recorded for conformance checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    QualityRules,
    QualityGate,
    DelaySelection,
    Embedding,
    Beats,
    Lyapunov,
    SampEn,
    Hfd,
    SpectralEnergy,
    Homeostasis,
    Proxies,
    Kernels,
    Cnl,
    Score,
}

/// The nine window observables plus bookkeeping from their extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableVector {
    pub q: f64,
    pub omega: f64,
    /// Sample entropy (non-negative, not bounded above).
    pub sampen: f64,
    /// Higuchi dimension clipped to [1, 2].
    pub hfd: f64,
    pub energy: f64,
    /// Stabilized exponent Lambda = exp(-max(lambda, 0)).
    pub stability: f64,
    pub autonomic: f64,
    pub vascular: f64,
    pub recovery: f64,
    /// Raw divergence rate behind `stability`.
    pub lle_lambda: f64,
    /// Delay used for SampEn.
    pub tau: usize,
    /// Mean inter-beat interval in samples.
    pub mean_ibi: f64,
}

impl ObservableVector {
    /// Nonlinear features in weight order: SampEn, HFD, Lambda, energy.
    pub fn nonlinear(&self) -> [f64; 4] {
        [self.sampen, self.hfd, self.stability, self.energy]
    }
}

/// The six components entering the weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentVector {
    pub cnl: f64,
    pub autonomic: f64,
    pub homeostasis: f64,
    pub signal_quality: f64,
    pub recovery: f64,
    pub vascular: f64,
}

impl ComponentVector {
    /// Order matches [`OuterWeights::as_array`].
    pub fn as_array(&self) -> [f64; 6] {
        [self.cnl, self.autonomic, self.homeostasis, self.signal_quality, self.recovery, self.vascular]
    }

    pub fn from_array(x: [f64; 6]) -> Self {
        ComponentVector {
            cnl: x[0],
            autonomic: x[1],
            homeostasis: x[2],
            signal_quality: x[3],
            recovery: x[4],
            vascular: x[5],
        }
    }
}

/// Runs the statistics-free part of the window pipeline: quality rules and
/// gate, delay, embedding, the four nonlinear estimators, homeostasis and
/// beat proxies. Stops at the first failing stage.
pub fn extract_observables(w: &PpgWindow<'_>, cfg: &ParamConfig) -> Result<ObservableVector, Invalid> {
    extract_traced(w, cfg, &mut Vec::new())
}

/// [`extract_observables`] that also appends each stage entered to `trace`.
pub fn extract_traced(
    w: &PpgWindow<'_>,
    cfg: &ParamConfig,
    trace: &mut Vec<Stage>,
) -> Result<ObservableVector, Invalid> {
    use FeatureKind as F;
    use InvalidStage::*;
    let thresholds = cfg.quality_thresholds();

    trace.push(Stage::QualityRules);
    if thresholds.hard_fail(w) {
        return Err(Invalid::new(Quality, None, "hard quality rule failed"));
    }
    trace.push(Stage::QualityGate);
    let q = quality_score(w, &thresholds);
    if q < cfg.theta {
        return Err(Invalid::new(Quality, None, format!("Q = {q:.4} below theta = {}", cfg.theta)));
    }

    trace.push(Stage::DelaySelection);
    let tau = match cfg.tau_mode {
        TauMode::Fixed => cfg.tau,
        TauMode::Ami => ami_delay(w, cfg.tau_max)
            .map_err(|e| Invalid::new(FeatureInvalid, Some(F::Delay), e.to_string()))?,
    };

    trace.push(Stage::Embedding);
    let short = |m: usize, t: usize| {
        Invalid::new(EmbedTooShort, None, format!("fewer than {M_MIN} points at m = {m}, tau = {t}"))
    };
    match Embedding::new(w.data, cfg.m, tau) {
        Ok(e) if e.len() >= M_MIN => {}
        _ => return Err(short(cfg.m, tau)),
    }
    let lle_embedding = match Embedding::new(w.data, cfg.m_lle, cfg.tau_lle) {
        Ok(e) if e.len() >= M_MIN => e,
        _ => return Err(short(cfg.m_lle, cfg.tau_lle)),
    };

    trace.push(Stage::Beats);
    let beats = detect_beats(w);
    let min_sep = ((beats.mean_ibi / 2.0).floor() as usize).max(1);

    trace.push(Stage::Lyapunov);
    let lle = lle_stabilized(&lle_embedding, min_sep, None);
    let stability = lle.stability.ok_or_else(|| {
        Invalid::new(FeatureInvalid, Some(F::Lle), format!("{} pairs at worst step", lle.min_pairs))
    })?;

    trace.push(Stage::SampEn);
    let h = sampen(w, cfg.m, cfg.r_frac, tau)
        .ok_or_else(|| Invalid::new(FeatureInvalid, Some(F::Sampen), "no template matches"))?;

    trace.push(Stage::Hfd);
    let d_f = hfd(w.data, cfg.k_max)
        .map_err(|e| Invalid::new(FeatureInvalid, Some(F::Hfd), e.to_string()))?;

    trace.push(Stage::SpectralEnergy);
    let energy = spectral_energy(w, cfg.half_band)
        .ok_or_else(|| Invalid::new(FeatureInvalid, Some(F::Energy), "no usable spectrum"))?;

    trace.push(Stage::Homeostasis);
    let omega = homeostasis(w, cfg.gamma_omega);

    trace.push(Stage::Proxies);
    let proxies = cst_proxies(w, &beats, cfg.c_a_ms);

    Ok(ObservableVector {
        q,
        omega,
        sampen: h,
        hfd: d_f.clamp(1.0, 2.0),
        energy,
        stability,
        autonomic: proxies.autonomic,
        vascular: proxies.vascular,
        recovery: proxies.recovery,
        lle_lambda: lle.lambda,
        tau,
        mean_ibi: beats.mean_ibi,
    })
}

/// Binary nonlinear gate: 1 when the mean absolute z-score is within
/// `gamma_nl`.
pub fn nl_gate(mean_abs_z: f64, gamma_nl: f64) -> f64 {
    if mean_abs_z <= gamma_nl {
        1.0
    } else {
        0.0
    }
}

/// Nonlinear complexity module: gated convex combination of the four
/// kernel values.
pub fn cnl(psis: [f64; 4], sub: &CnlWeights, mean_abs_z: f64, gamma_nl: f64) -> f64 {
    let s: f64 = sub.as_array().iter().zip(psis).map(|(w, p)| w * p).sum();
    nl_gate(mean_abs_z, gamma_nl) * s
}

/// `gate * sum(beta_j * X_j)`, clipped to [0, 1].
pub fn csi_from_components(x: &ComponentVector, beta: &OuterWeights, gate: f64) -> f64 {
    let s: f64 = beta.as_array().iter().zip(x.as_array()).map(|(b, v)| b * v).sum();
    (gate * s).clamp(0.0, 1.0)
}

/// Statistics-dependent part of a window score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub psis: [f64; 4],
    pub mean_abs_z: f64,
    pub g_nl: f64,
    pub components: ComponentVector,
    pub csi: f64,
}

/// Applies kernels, the nonlinear gate and the outer weighted sum to an
/// already extracted observable vector.
pub fn score_observables(obs: &ObservableVector, cfg: &ParamConfig, stats: &ScoringStats) -> WindowScore {
    score_traced(obs, cfg, stats, &mut Vec::new())
}

fn score_traced(
    obs: &ObservableVector,
    cfg: &ParamConfig,
    stats: &ScoringStats,
    trace: &mut Vec<Stage>,
) -> WindowScore {
    trace.push(Stage::Kernels);
    let nl = obs.nonlinear();
    let psis = stats.kernel.psis(nl);
    let mean_abs_z = stats.norm.mean_abs_z(nl);

    trace.push(Stage::Cnl);
    let g_nl = nl_gate(mean_abs_z, cfg.gamma_nl);
    let c = cnl(psis, &cfg.cnl_weights, mean_abs_z, cfg.gamma_nl);

    trace.push(Stage::Score);
    let components = ComponentVector {
        cnl: c,
        autonomic: obs.autonomic,
        homeostasis: obs.omega,
        signal_quality: obs.q,
        recovery: obs.recovery,
        vascular: obs.vascular,
    };
    let csi = csi_from_components(&components, &cfg.outer_weights, obs.q * g_nl);
    WindowScore { psis, mean_abs_z, g_nl, components, csi }
}

/// A fully scored window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub observables: ObservableVector,
    pub score: WindowScore,
}

/// Scores one window end to end.
pub fn csi_window(w: &PpgWindow<'_>, cfg: &ParamConfig, stats: &ScoringStats) -> Result<WindowResult, Invalid> {
    csi_window_traced(w, cfg, stats, &mut Vec::new())
}

pub fn csi_window_traced(
    w: &PpgWindow<'_>,
    cfg: &ParamConfig,
    stats: &ScoringStats,
    trace: &mut Vec<Stage>,
) -> Result<WindowResult, Invalid> {
    let observables = extract_traced(w, cfg, trace)?;
    let score = score_traced(&observables, cfg, stats, trace);
    Ok(WindowResult { observables, score })
}

/// Convex fusion of per-scale scores. Missing scales (`None`) drop out and
/// the remaining weights are renormalized; `None` when no scale is present
/// or the remaining weights are all zero.
pub fn csi_multiscale(per_scale: &[Option<f64>], gamma: &[f64]) -> Option<f64> {
    assert_eq!(per_scale.len(), gamma.len(), "one weight per scale");
    let (mut num, mut den) = (0.0, 0.0);
    for (c, g) in per_scale.iter().zip(gamma) {
        if let Some(c) = c {
            num += g * c;
            den += g;
        }
    }
    if den > 0.0 {
        Some((num / den).clamp(0.0, 1.0))
    } else {
        None
    }
}

/// Minimal score from SampEn and HFD kernels, autonomic tone and
/// homeostasis. The SampEn/HFD sub-weights are the shipped C_NL weights
/// renormalized over those two features.
pub fn csi_sparse(psi_h: f64, psi_df: f64, a: f64, omega: f64, alpha: [f64; 3], gate: f64) -> f64 {
    let (wh, wd) = CnlWeights::default().sparse_pair();
    let cnl_sparse = gate * (wh * psi_h + wd * psi_df);
    (gate * (alpha[0] * cnl_sparse + alpha[1] * a + alpha[2] * omega)).clamp(0.0, 1.0)
}
