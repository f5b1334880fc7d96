use crate::signal::PpgWindow;
use crate::{Error, Result};

/// Relative drop below the lag-1 AMI a minimum must reach to count as
/// structure rather than estimator noise.
const AMI_MIN_DROP: f64 = 0.1;

/// Lag-1 AMI excess (nats) over the independent-sample histogram bias
/// below which the curve is considered flat.
pub const AMI_FLAT_NATS: f64 = 0.1;

/// Delay-coordinate embedding stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    m: usize,
    tau: usize,
    coords: Vec<f64>,
}

impl Embedding {
    /// Embeds `x` as points `(x_i, x_{i+tau}, ..., x_{i+(m-1)tau})`.
    pub fn new(x: &[f64], m: usize, tau: usize) -> Result<Self> {
        if m == 0 || tau == 0 {
            return Err(Error::InvalidInput(format!("m ({m}) and tau ({tau}) must be >= 1")));
        }
        let span = (m - 1) * tau;
        if x.len() <= span {
            return Err(Error::InvalidInput(format!(
                "{} samples leave no points for m={m}, tau={tau}",
                x.len()
            )));
        }
        let n_points = x.len() - span;
        let mut coords = Vec::with_capacity(n_points * m);
        for i in 0..n_points {
            coords.extend((0..m).map(|k| x[i + k * tau]));
        }
        Ok(Self { m, tau, coords })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.m..(i + 1) * self.m]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.m)
    }
}

/// Takens embedding of a window. Callers enforce the point-count floor.
pub fn takens_embed(w: &PpgWindow<'_>, m: usize, tau: usize) -> Result<Embedding> {
    Embedding::new(w.data, m, tau)
}

/// Histogram estimate of the mutual information (nats) between `x_i` and
/// `x_{i+lag}`, using `floor(sqrt(N - lag))` equal-width bins per axis
/// over the range of `x`.
pub fn average_mutual_information(x: &[f64], lag: usize) -> f64 {
    let n = x.len().saturating_sub(lag);
    if n < 2 {
        return 0.0;
    }
    let bins = ((n as f64).sqrt().floor() as usize).max(1);
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return 0.0;
    }
    let width = (hi - lo) / bins as f64;
    let bin = |v: f64| (((v - lo) / width) as usize).min(bins - 1);

    let mut joint = vec![0u32; bins * bins];
    let mut px = vec![0u32; bins];
    let mut py = vec![0u32; bins];
    for i in 0..n {
        let (a, b) = (bin(x[i]), bin(x[i + lag]));
        joint[a * bins + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c > 0 {
                let pxy = c as f64 / nf;
                mi += pxy * (pxy * nf * nf / (px[a] as f64 * py[b] as f64)).ln();
            }
        }
    }
    mi
}

/// AMI for lags `1..=tau_max`; element `k` holds lag `k + 1`.
pub fn ami_curve(x: &[f64], tau_max: usize) -> Vec<f64> {
    (1..=tau_max).map(|lag| average_mutual_information(x, lag)).collect()
}

/// Embedding delay from the first minimum of the AMI curve.
///
/// A lag qualifies as the first minimum when it is a local minimum whose
/// value sits at least 10% below the lag-1 AMI. Without one, the global
/// argmin is used if it reaches that drop. A curve whose lag-1 value is
/// within [`AMI_FLAT_NATS`] of the histogram bias expected for independent
/// samples is treated as flat (white noise) and gives lag 1.
pub fn ami_delay(w: &PpgWindow<'_>, tau_max: usize) -> Result<usize> {
    if tau_max < 2 {
        return Err(Error::InvalidInput(format!("tau_max must be >= 2, got {tau_max}")));
    }
    if w.len() <= tau_max + 1 {
        return Err(Error::InvalidInput(format!(
            "window of {} samples too short for tau_max={tau_max}",
            w.len()
        )));
    }
    let ami = ami_curve(w.data, tau_max);
    let n = (w.len() - 1) as f64;
    let bins = n.sqrt().floor();
    let independence_bias = (bins - 1.0).powi(2) / (2.0 * n);
    if ami[0] - independence_bias < AMI_FLAT_NATS {
        return Ok(1);
    }
    let floor = ami[0] * (1.0 - AMI_MIN_DROP);
    let first_local = (1..ami.len() - 1)
        .find(|&k| ami[k] < ami[k - 1] && ami[k] <= ami[k + 1] && ami[k] <= floor);
    if let Some(k) = first_local {
        return Ok(k + 1);
    }
    let (k_min, &v_min) = ami
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("tau_max >= 2");
    Ok(if v_min <= floor { k_min + 1 } else { 1 })
}
