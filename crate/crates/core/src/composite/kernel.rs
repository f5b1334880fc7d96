use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::util::{mean, median, percentile_sorted, sorted_copy, std_dev};
use crate::{Error, Result};

/// Names of the four nonlinear features, in weight order.
pub const NL_FEATURES: [&str; 4] = ["sampen", "hfd", "lle", "energy"];

/// Fewest values a population statistic may be fitted on.
pub const MIN_FIT_VALUES: usize = 30;

const MAD_TO_SIGMA: f64 = 1.4826;

/// Gaussian bounded-optimality kernel for one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureKernel {
    pub mu: f64,
    pub sigma: f64,
    pub p1: f64,
    pub p99: f64,
}

impl FeatureKernel {
    /// Median centre, `1.4826 * MAD` scale (SD when the MAD is zero) and
    /// 1st/99th percentile clip bounds (min/max when those coincide).
    pub fn fit(name: &str, values: &[f64]) -> Result<Self> {
        if values.len() < MIN_FIT_VALUES {
            return Err(Error::Config(format!(
                "{name}: {} values, at least {MIN_FIT_VALUES} required to fit kernel statistics",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("{name}: non-finite value in fit set")));
        }
        let sorted = sorted_copy(values);
        let mu = percentile_sorted(&sorted, 50.0);
        let deviations: Vec<f64> = values.iter().map(|v| (v - mu).abs()).collect();
        let mut sigma = MAD_TO_SIGMA * median(&deviations);
        if !(sigma > 0.0) {
            sigma = std_dev(values);
        }
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("{name}: zero spread, kernel scale undefined")));
        }
        let (mut p1, mut p99) = (percentile_sorted(&sorted, 1.0), percentile_sorted(&sorted, 99.0));
        if !(p1 < p99) {
            p1 = sorted[0];
            p99 = sorted[sorted.len() - 1];
        }
        Ok(FeatureKernel { mu, sigma, p1, p99 })
    }

    /// `exp(-(f' - mu)^2 / (2 sigma^2))` with `f'` clipped to `[p1, p99]`.
    pub fn psi(&self, f: f64) -> f64 {
        let fc = f.clamp(self.p1, self.p99);
        let d = fc - self.mu;
        (-(d * d) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Free-function form of [`FeatureKernel::psi`].
pub fn kernel_psi(f: f64, stats: &FeatureKernel) -> f64 {
    stats.psi(f)
}

/// Kernel statistics for the four nonlinear features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelStats {
    pub features: [FeatureKernel; 4],
    /// Records whose windows were used to fit.
    pub provenance: BTreeSet<String>,
}

impl KernelStats {
    pub fn psis(&self, f: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|k| self.features[k].psi(f[k]))
    }
}

/// Fits kernel statistics from per-window nonlinear feature rows.
pub fn fit_kernel_stats<I, S>(rows: &[[f64; 4]], provenance: I) -> Result<KernelStats>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut features = [FeatureKernel { mu: 0.0, sigma: 1.0, p1: 0.0, p99: 0.0 }; 4];
    for (k, name) in NL_FEATURES.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        features[k] = FeatureKernel::fit(name, &col)?;
    }
    Ok(KernelStats { features, provenance: provenance.into_iter().map(Into::into).collect() })
}

/// Mean/SD standardization statistics for the nonlinear features, used by
/// the C_NL z-gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; 4],
    pub sd: [f64; 4],
    pub provenance: BTreeSet<String>,
}

impl NormStats {
    pub fn fit<I, S>(rows: &[[f64; 4]], provenance: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if rows.len() < MIN_FIT_VALUES {
            return Err(Error::Config(format!(
                "{} rows, at least {MIN_FIT_VALUES} required to fit normalization statistics",
                rows.len()
            )));
        }
        let mut m = [0.0; 4];
        let mut s = [0.0; 4];
        for k in 0..4 {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            m[k] = mean(&col);
            s[k] = std_dev(&col);
            if !(s[k] > 0.0) {
                return Err(Error::Config(format!("{}: zero variance in fit set", NL_FEATURES[k])));
            }
        }
        Ok(NormStats { mean: m, sd: s, provenance: provenance.into_iter().map(Into::into).collect() })
    }

    /// Mean absolute z-score of a feature row.
    pub fn mean_abs_z(&self, f: [f64; 4]) -> f64 {
        (0..4).map(|k| ((f[k] - self.mean[k]) / self.sd[k]).abs()).sum::<f64>() / 4.0
    }
}

/// Population statistics needed to score windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringStats {
    pub norm: NormStats,
    pub kernel: KernelStats,
}

impl ScoringStats {
    /// Fits both statistic sets on the same rows.
    pub fn fit<I, S>(rows: &[[f64; 4]], provenance: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let prov: Vec<String> = provenance.into_iter().map(Into::into).collect();
        Ok(ScoringStats {
            norm: NormStats::fit(rows, prov.iter().cloned())?,
            kernel: fit_kernel_stats(rows, prov)?,
        })
    }

    /// Records that contributed to either statistic set.
    pub fn provenance(&self) -> BTreeSet<String> {
        self.norm.provenance.union(&self.kernel.provenance).cloned().collect()
    }

    /// Fails if any record being evaluated contributed to the statistics.
    pub fn check_disjoint<'a>(&self, eval_ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let prov = self.provenance();
        let leaked: Vec<&str> = eval_ids.into_iter().filter(|id| prov.contains(*id)).collect();
        if leaked.is_empty() {
            Ok(())
        } else {
            Err(Error::Leakage(format!(
                "statistics were fitted on evaluation records {leaked:?}"
            )))
        }
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("stats serialize");
        hex::encode(Sha256::digest(bytes))
    }
}
