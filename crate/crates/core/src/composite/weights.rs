use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on simplex sums.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Checks that `w` is a point on the probability simplex.
pub fn check_simplex(field: &str, w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::schema(field, "weight group is empty"));
    }
    if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::schema(field, format!("weight {bad} is negative or non-finite")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::schema(field, format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Sub-weights of the nonlinear complexity module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnlWeights {
    pub sampen: f64,
    pub hfd: f64,
    pub lle: f64,
    pub energy: f64,
}

impl Default for CnlWeights {
    fn default() -> Self {
        CnlWeights { sampen: 0.431, hfd: 0.483, lle: 0.043, energy: 0.043 }
    }
}

impl CnlWeights {
    /// Order: SampEn, HFD, LLE, spectral energy.
    pub fn as_array(&self) -> [f64; 4] {
        [self.sampen, self.hfd, self.lle, self.energy]
    }

    pub fn from_array(w: [f64; 4]) -> Self {
        CnlWeights { sampen: w[0], hfd: w[1], lle: w[2], energy: w[3] }
    }

    /// SampEn and HFD weights renormalized to sum to 1, for the sparse score.
    pub fn sparse_pair(&self) -> (f64, f64) {
        let s = self.sampen + self.hfd;
        (self.sampen / s, self.hfd / s)
    }
}

/// Outer CSI weights over the six components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterWeights {
    pub cnl: f64,
    pub autonomic: f64,
    pub homeostasis: f64,
    pub signal_quality: f64,
    pub recovery: f64,
    pub vascular: f64,
}

impl Default for OuterWeights {
    fn default() -> Self {
        OuterWeights {
            cnl: 0.260,
            autonomic: 0.210,
            homeostasis: 0.198,
            signal_quality: 0.267,
            recovery: 0.048,
            vascular: 0.017,
        }
    }
}

impl OuterWeights {
    /// Order: C_NL, autonomic, homeostasis, signal quality, recovery,
    /// vascular.
    pub fn as_array(&self) -> [f64; 6] {
        [self.cnl, self.autonomic, self.homeostasis, self.signal_quality, self.recovery, self.vascular]
    }

    pub fn from_array(w: [f64; 6]) -> Self {
        OuterWeights {
            cnl: w[0],
            autonomic: w[1],
            homeostasis: w[2],
            signal_quality: w[3],
            recovery: w[4],
            vascular: w[5],
        }
    }

    /// (C_NL, autonomic, homeostasis) weights renormalized, used as the
    /// default sparse mixing weights.
    pub fn sparse_default(&self) -> [f64; 3] {
        let s = self.cnl + self.autonomic + self.homeostasis;
        [self.cnl / s, self.autonomic / s, self.homeostasis / s]
    }
}

/// All weight groups used to form window and multiscale scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiWeights {
    pub cnl_sub: CnlWeights,
    pub outer: OuterWeights,
    pub multiscale_gamma: Vec<f64>,
    pub sparse_alpha: [f64; 3],
}

impl CsiWeights {
    pub fn validate(&self) -> Result<()> {
        check_simplex("cnl_weights", &self.cnl_sub.as_array())?;
        check_simplex("outer_weights", &self.outer.as_array())?;
        check_simplex("multiscale.gamma", &self.multiscale_gamma)?;
        check_simplex("sparse_alpha", &self.sparse_alpha)
    }
}
