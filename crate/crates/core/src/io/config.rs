//! Versioned parameter configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::composite::{check_simplex, CnlWeights, CsiWeights, OuterWeights};
use crate::signal::QualityThresholds;
use crate::{Error, Result};

/// Schema version accepted by [`load_config`].
pub const CONFIG_VERSION: &str = "1";

/// Window lengths admitted by the search space.
pub const WINDOW_CHOICES: [usize; 4] = [128, 256, 512, 1024];

/// How the SampEn delay is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauMode {
    /// Use the configured `tau`.
    #[default]
    Fixed,
    /// First AMI minimum up to `tau_max`, per window.
    Ami,
}

/// Hard signal-quality floors. The continuous gate `theta` is a top-level
/// parameter because it is searched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualityFloors {
    pub min_len: usize,
    pub min_sd: f64,
    pub min_pp: f64,
}

impl Default for QualityFloors {
    fn default() -> Self {
        let t = QualityThresholds::default();
        QualityFloors { min_len: t.min_len, min_sd: t.min_sd, min_pp: t.min_pp }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiscaleConfig {
    pub scales: Vec<usize>,
    pub gamma: Vec<f64>,
}

impl Default for MultiscaleConfig {
    fn default() -> Self {
        MultiscaleConfig { scales: vec![256, 512, 1024], gamma: vec![1.0 / 3.0; 3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub folds: usize,
    pub bootstrap: usize,
    pub permutations: usize,
    /// Window stride in samples; `null` means non-overlapping (stride = W).
    pub stride: Option<usize>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { folds: 5, bootstrap: 2000, permutations: 5000, stride: None }
    }
}

/// Complete parameter set for window scoring and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamConfig {
    pub version: String,
    #[serde(default = "d::window")]
    pub window: usize,
    #[serde(default = "d::m")]
    pub m: usize,
    #[serde(default = "d::tau")]
    pub tau: usize,
    #[serde(default = "d::r_frac")]
    pub r_frac: f64,
    #[serde(default = "d::k_max")]
    pub k_max: usize,
    #[serde(default = "d::m_lle")]
    pub m_lle: usize,
    #[serde(default = "d::tau_lle")]
    pub tau_lle: usize,
    #[serde(default = "d::theta")]
    pub theta: f64,
    #[serde(default)]
    pub cnl_weights: CnlWeights,
    #[serde(default)]
    pub outer_weights: OuterWeights,
    #[serde(default)]
    pub tau_mode: TauMode,
    #[serde(default = "d::tau_max")]
    pub tau_max: usize,
    #[serde(default = "d::gamma_nl")]
    pub gamma_nl: f64,
    #[serde(default = "d::gamma_omega")]
    pub gamma_omega: f64,
    #[serde(default)]
    pub quality: QualityFloors,
    #[serde(default)]
    pub multiscale: MultiscaleConfig,
    #[serde(default = "d::sparse_alpha")]
    pub sparse_alpha: [f64; 3],
    #[serde(default = "d::half_band")]
    pub half_band: f64,
    #[serde(default = "d::c_a_ms")]
    pub c_a_ms: f64,
    #[serde(default = "d::seed")]
    pub seed: u64,
    #[serde(default)]
    pub eval: EvalSettings,
}

mod d {
    pub fn window() -> usize {
        128
    }
    pub fn m() -> usize {
        8
    }
    pub fn tau() -> usize {
        7
    }
    pub fn r_frac() -> f64 {
        0.116
    }
    pub fn k_max() -> usize {
        13
    }
    pub fn m_lle() -> usize {
        7
    }
    pub fn tau_lle() -> usize {
        5
    }
    pub fn theta() -> f64 {
        0.976
    }
    pub fn tau_max() -> usize {
        10
    }
    pub fn gamma_nl() -> f64 {
        2.0
    }
    pub fn gamma_omega() -> f64 {
        3.0
    }
    pub fn sparse_alpha() -> [f64; 3] {
        super::OuterWeights::default().sparse_default()
    }
    pub fn half_band() -> f64 {
        0.5
    }
    pub fn c_a_ms() -> f64 {
        30.0
    }
    pub fn seed() -> u64 {
        42
    }
}

impl Default for ParamConfig {
    fn default() -> Self {
        ParamConfig {
            version: CONFIG_VERSION.to_string(),
            window: d::window(),
            m: d::m(),
            tau: d::tau(),
            r_frac: d::r_frac(),
            k_max: d::k_max(),
            m_lle: d::m_lle(),
            tau_lle: d::tau_lle(),
            theta: d::theta(),
            cnl_weights: CnlWeights::default(),
            outer_weights: OuterWeights::default(),
            tau_mode: TauMode::Fixed,
            tau_max: d::tau_max(),
            gamma_nl: d::gamma_nl(),
            gamma_omega: d::gamma_omega(),
            quality: QualityFloors::default(),
            multiscale: MultiscaleConfig::default(),
            sparse_alpha: d::sparse_alpha(),
            half_band: d::half_band(),
            c_a_ms: d::c_a_ms(),
            seed: d::seed(),
            eval: EvalSettings::default(),
        }
    }
}

fn int_range(field: &str, v: usize, lo: usize, hi: usize) -> Result<()> {
    if v < lo || v > hi {
        return Err(Error::schema(field, format!("{v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

fn real_range(field: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if !(v >= lo && v <= hi) {
        return Err(Error::schema(field, format!("{v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

fn positive(field: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::schema(field, format!("{v} must be positive")));
    }
    Ok(())
}

impl ParamConfig {
    /// Checks every bound and simplex constraint, naming the first
    /// offending field.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::schema(
                "version",
                format!("unsupported version {:?}, expected {CONFIG_VERSION:?}", self.version),
            ));
        }
        if !WINDOW_CHOICES.contains(&self.window) {
            return Err(Error::schema("window", format!("{} not in {WINDOW_CHOICES:?}", self.window)));
        }
        int_range("m", self.m, 3, 10)?;
        int_range("tau", self.tau, 1, 10)?;
        real_range("r_frac", self.r_frac, 0.10, 0.30)?;
        int_range("k_max", self.k_max, 5, 20)?;
        int_range("m_lle", self.m_lle, 3, 7)?;
        int_range("tau_lle", self.tau_lle, 1, 6)?;
        real_range("theta", self.theta, 0.50, 0.99)?;
        int_range("tau_max", self.tau_max, 2, 64)?;
        positive("gamma_nl", self.gamma_nl)?;
        positive("gamma_omega", self.gamma_omega)?;
        positive("half_band", self.half_band)?;
        positive("c_a_ms", self.c_a_ms)?;
        if self.quality.min_len == 0 {
            return Err(Error::schema("quality.min_len", "must be positive"));
        }
        positive("quality.min_sd", self.quality.min_sd)?;
        positive("quality.min_pp", self.quality.min_pp)?;
        check_simplex("cnl_weights", &self.cnl_weights.as_array())?;
        check_simplex("outer_weights", &self.outer_weights.as_array())?;
        check_simplex("sparse_alpha", &self.sparse_alpha)?;
        let ms = &self.multiscale;
        if ms.scales.is_empty() {
            return Err(Error::schema("multiscale.scales", "at least one scale required"));
        }
        if let Some(s) = ms.scales.iter().find(|s| !WINDOW_CHOICES.contains(s)) {
            return Err(Error::schema("multiscale.scales", format!("{s} not in {WINDOW_CHOICES:?}")));
        }
        let mut uniq = ms.scales.clone();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != ms.scales.len() {
            return Err(Error::schema("multiscale.scales", "duplicate scale"));
        }
        if ms.gamma.len() != ms.scales.len() {
            return Err(Error::schema(
                "multiscale.gamma",
                format!("{} weights for {} scales", ms.gamma.len(), ms.scales.len()),
            ));
        }
        check_simplex("multiscale.gamma", &ms.gamma)?;
        if self.eval.folds < 2 {
            return Err(Error::schema("eval.folds", "at least 2 folds required"));
        }
        if self.eval.bootstrap < 100 {
            return Err(Error::schema("eval.bootstrap", "at least 100 resamples required"));
        }
        if self.eval.stride == Some(0) {
            return Err(Error::schema("eval.stride", "must be positive"));
        }
        Ok(())
    }

    pub fn quality_thresholds(&self) -> QualityThresholds {
        QualityThresholds {
            min_len: self.quality.min_len,
            min_sd: self.quality.min_sd,
            min_pp: self.quality.min_pp,
            gate_theta: self.theta,
        }
    }

    pub fn weights(&self) -> CsiWeights {
        CsiWeights {
            cnl_sub: self.cnl_weights,
            outer: self.outer_weights,
            multiscale_gamma: self.multiscale.gamma.clone(),
            sparse_alpha: self.sparse_alpha,
        }
    }

    /// Same parameters scored at a different window length.
    pub fn at_window(&self, window: usize) -> ParamConfig {
        ParamConfig { window, ..self.clone() }
    }

    /// Window stride used for evaluation.
    pub fn stride(&self) -> usize {
        self.eval.stride.unwrap_or(self.window)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical (struct-ordered) JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Maps a serde failure to a schema error naming the field when serde
/// quotes one.
pub(crate) fn schema_from_serde(e: serde_json::Error) -> Error {
    let msg = e.to_string();
    let field = msg
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<document>".to_string());
    Error::Schema { field, message: msg }
}

/// Parses and validates a configuration document. Omitted fields take the
/// shipped defaults; unknown fields and a missing version are rejected.
pub fn load_config(bytes: &[u8]) -> Result<ParamConfig> {
    let cfg: ParamConfig = serde_json::from_slice(bytes).map_err(schema_from_serde)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn field_of(e: Error) -> String {
        match e {
            Error::Schema { field, .. } => field,
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = load_config(br#"{"version": "1"}"#).unwrap();
        assert_eq!(cfg, ParamConfig::default());
        assert_eq!((cfg.window, cfg.m, cfg.tau, cfg.k_max, cfg.m_lle, cfg.tau_lle), (128, 8, 7, 13, 7, 5));
        assert_eq!((cfg.r_frac, cfg.theta), (0.116, 0.976));
    }

    #[test]
    fn schema_errors_name_the_field() {
        let cases = [
            (json!({}), "version"),
            (json!({"version": "2"}), "version"),
            (json!({"version": "1", "r_frac": 0.05}), "r_frac"),
            (json!({"version": "1", "window": 200}), "window"),
            (json!({"version": "1", "thetaa": 0.9}), "thetaa"),
            (json!({"version": "1", "quality": {"min_sd": 0.1, "max_sd": 2}}), "max_sd"),
            (
                json!({"version": "1", "outer_weights": {"cnl": 0.16, "autonomic": 0.21, "homeostasis": 0.198,
                    "signal_quality": 0.267, "recovery": 0.048, "vascular": 0.017}}),
                "outer_weights",
            ),
            (json!({"version": "1", "multiscale": {"scales": [256, 512], "gamma": [1.0]}}), "multiscale.gamma"),
            (json!({"version": "1", "m": 11}), "m"),
            (json!({"version": "1", "theta": 0.995}), "theta"),
        ];
        for (doc, field) in cases {
            let e = load_config(doc.to_string().as_bytes()).unwrap_err();
            assert!(e.is_usage());
            assert_eq!(field_of(e), field, "{doc}");
        }
    }

    #[test]
    fn round_trip_is_semantic_identity() {
        let doc = json!({
            "version": "1", "window": 256, "tau_mode": "ami", "seed": 7,
            "eval": {"folds": 4, "bootstrap": 500, "permutations": 100, "stride": 64}
        });
        let cfg = load_config(doc.to_string().as_bytes()).unwrap();
        let text = cfg.to_json_pretty();
        let again = load_config(text.as_bytes()).unwrap();
        assert_eq!(cfg, again);
        let full: serde_json::Value = serde_json::from_str(&text).unwrap();
        let reserialized: serde_json::Value = serde_json::to_value(&again).unwrap();
        assert_eq!(full, reserialized);
        assert_eq!(cfg.hash(), again.hash());
        assert_ne!(cfg.hash(), ParamConfig::default().hash());
    }
}
