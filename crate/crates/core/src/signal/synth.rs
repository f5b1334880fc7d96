//! Deterministic synthetic PPG generator used for tests, calibration and the
//! `synth` command.
//!
//! A pulse is a fundamental plus two harmonics, phase-locked to a jittered
//! beat sequence, amplitude-modulated at the respiratory rate and corrupted
//! by white Gaussian noise. The respiratory frequency wanders as an
//! Ornstein-Uhlenbeck process whose SD is `resp_irregularity`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{PpgRecord, SegmentLabel};
use crate::util::derive_rng;
use crate::{Error, Result};

const MIN_IBI_S: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSpec {
    pub fs: f64,
    pub duration_s: f64,
    pub heart_rate_hz: f64,
    /// SD of independent inter-beat interval perturbations, seconds.
    pub ibi_jitter_s: f64,
    pub resp_rate_hz: f64,
    /// Respiratory amplitude-modulation depth (fraction of amplitude).
    pub resp_depth: f64,
    /// Relative SD of the wandering respiratory frequency.
    pub resp_irregularity: f64,
    pub noise_sd: f64,
    pub amplitude: f64,
    /// Relative amplitudes of the second and third harmonics.
    pub harmonics: [f64; 2],
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            fs: 30.0,
            duration_s: 60.0,
            heart_rate_hz: 1.2,
            ibi_jitter_s: 0.0,
            resp_rate_hz: 0.25,
            resp_depth: 0.1,
            resp_irregularity: 0.0,
            noise_sd: 0.0,
            amplitude: 1.0,
            harmonics: [0.25, 0.1],
        }
    }
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be non-negative, got {v}")))
            }
        };
        positive("fs", self.fs)?;
        positive("duration_s", self.duration_s)?;
        positive("heart_rate_hz", self.heart_rate_hz)?;
        positive("amplitude", self.amplitude)?;
        non_negative("ibi_jitter_s", self.ibi_jitter_s)?;
        non_negative("resp_rate_hz", self.resp_rate_hz)?;
        non_negative("resp_depth", self.resp_depth)?;
        non_negative("resp_irregularity", self.resp_irregularity)?;
        non_negative("noise_sd", self.noise_sd)?;
        non_negative("harmonics[0]", self.harmonics[0])?;
        non_negative("harmonics[1]", self.harmonics[1])?;
        if (self.duration_s * self.fs).round() < 1.0 {
            return Err(Error::Config("duration shorter than one sample".into()));
        }
        Ok(())
    }

    fn n_samples(&self) -> usize {
        (self.duration_s * self.fs).round() as usize
    }

    /// Renders the waveform together with its ground-truth beat onsets.
    pub fn render(&self, seed: u64) -> Result<SynthTrace> {
        self.validate()?;
        let mut osc = Oscillator::new(derive_rng(seed, 0), self);
        let samples = (0..self.n_samples()).map(|_| osc.step(self)).collect();
        Ok(SynthTrace {
            samples,
            beat_onsets_s: osc.beat_onsets,
        })
    }
}

/// Generator output with ground truth.
#[derive(Debug, Clone)]
pub struct SynthTrace {
    pub samples: Vec<f64>,
    /// Beat onset times in seconds.
    pub beat_onsets_s: Vec<f64>,
}

impl SynthTrace {
    /// Inter-beat intervals between consecutive onsets, seconds.
    pub fn ibis_s(&self) -> Vec<f64> {
        self.beat_onsets_s.windows(2).map(|p| p[1] - p[0]).collect()
    }
}

/// Generates one unlabeled record. Identical seeds give bit-identical
/// samples.
pub fn synth_ppg(spec: &PulseSpec, record_id: &str, seed: u64) -> Result<PpgRecord> {
    let trace = spec.render(seed)?;
    PpgRecord::new(record_id, spec.fs, trace.samples, Vec::new())
}

struct Oscillator {
    rng: ChaCha8Rng,
    i: usize,
    beat_t: f64,
    ibi: f64,
    resp_phase: f64,
    resp_dev: f64,
    beat_onsets: Vec<f64>,
}

impl Oscillator {
    fn new(mut rng: ChaCha8Rng, spec: &PulseSpec) -> Self {
        let resp_phase = rng.random::<f64>() * 2.0 * PI;
        let ibi = draw_ibi(&mut rng, spec);
        let beat_t = -rng.random::<f64>() * ibi;
        Self {
            rng,
            i: 0,
            beat_t,
            ibi,
            resp_phase,
            resp_dev: 0.0,
            beat_onsets: Vec::new(),
        }
    }

    /// Advances one sample using `spec`, which may change between calls
    /// (episode switching) without breaking phase continuity.
    fn step(&mut self, spec: &PulseSpec) -> f64 {
        let t = self.i as f64 / spec.fs;
        self.i += 1;
        while t >= self.beat_t + self.ibi {
            self.beat_t += self.ibi;
            self.beat_onsets.push(self.beat_t);
            self.ibi = draw_ibi(&mut self.rng, spec);
        }
        let phi = 2.0 * PI * (t - self.beat_t) / self.ibi;
        let [h2, h3] = spec.harmonics;
        let shape = phi.sin() + h2 * (2.0 * phi + 0.6).sin() + h3 * (3.0 * phi + 1.2).sin();

        // Unit-time-constant OU process for the respiratory frequency.
        let dt = 1.0 / spec.fs;
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.resp_dev += -self.resp_dev * dt + spec.resp_irregularity * (2.0 * dt).sqrt() * z;
        self.resp_phase += 2.0 * PI * spec.resp_rate_hz * (1.0 + self.resp_dev) * dt;
        let envelope = spec.amplitude * (1.0 + spec.resp_depth * self.resp_phase.sin());

        let noise: f64 = StandardNormal.sample(&mut self.rng);
        envelope * shape + spec.noise_sd * noise
    }
}

fn draw_ibi(rng: &mut ChaCha8Rng, spec: &PulseSpec) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (1.0 / spec.heart_rate_hz + spec.ibi_jitter_s * z).max(MIN_IBI_S)
}

/// Additive parameter offsets applied on top of a [`PulseSpec`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassShift {
    pub noise_sd: f64,
    pub ibi_jitter_s: f64,
    pub resp_irregularity: f64,
    pub resp_depth: f64,
    pub resp_rate_hz: f64,
    pub heart_rate_hz: f64,
}

impl ClassShift {
    fn apply(&self, spec: &mut PulseSpec, scale: f64) {
        spec.noise_sd = (spec.noise_sd + scale * self.noise_sd).max(0.0);
        spec.ibi_jitter_s = (spec.ibi_jitter_s + scale * self.ibi_jitter_s).max(0.0);
        spec.resp_irregularity = (spec.resp_irregularity + scale * self.resp_irregularity).max(0.0);
        spec.resp_depth = (spec.resp_depth + scale * self.resp_depth).max(0.0);
        spec.resp_rate_hz = (spec.resp_rate_hz + scale * self.resp_rate_hz).max(0.0);
        spec.heart_rate_hz = (spec.heart_rate_hz + scale * self.heart_rate_hz).max(0.3);
    }
}

/// Two-class labeled corpus with a development/test split.
///
/// Each record is a run of labeled episodes. Positive episodes apply
/// `class1` on top of `base`. A `high_risk_fraction` of records draw their
/// prevalence from `high_risk_prevalence` instead of `prevalence`. Every
/// record carries a factor `z_r = h_r + record_spread * N(0, 1)`, with
/// `h_r = 1` for high-risk records and 0 otherwise, that scales
/// `record_shift`. Records therefore differ from each other, and with a
/// nonzero shift that difference tracks how often the record is positive.
/// Test records additionally receive `test_shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub seed: u64,
    pub n_records: usize,
    pub test_fraction: f64,
    /// Episode length in samples; labels switch only at episode starts.
    pub episode_len: usize,
    /// Per-record positive-episode fraction is drawn uniformly from this range.
    pub prevalence: [f64; 2],
    pub base: PulseSpec,
    pub class1: ClassShift,
    pub high_risk_fraction: f64,
    pub high_risk_prevalence: [f64; 2],
    pub record_shift: ClassShift,
    pub record_spread: f64,
    pub test_shift: ClassShift,
}

impl Default for CorpusSpec {
    /// The calibrated two-class corpus: positive episodes carry extra
    /// measurement noise and a more irregular respiratory rhythm.
    fn default() -> Self {
        Self {
            seed: 7,
            n_records: 40,
            test_fraction: 0.3,
            episode_len: 512,
            prevalence: [0.05, 0.3],
            base: PulseSpec {
                duration_s: 4096.0 / 30.0,
                noise_sd: 0.02,
                resp_depth: 0.03,
                resp_irregularity: 0.2,
                ..PulseSpec::default()
            },
            class1: ClassShift {
                noise_sd: 0.06,
                resp_irregularity: 0.3,
                ..ClassShift::default()
            },
            high_risk_fraction: 0.0,
            high_risk_prevalence: [0.3, 0.6],
            record_shift: ClassShift::default(),
            record_spread: 0.0,
            test_shift: ClassShift::default(),
        }
    }
}

impl CorpusSpec {
    /// Covariate-shifted corpus for the leakage-artifact comparison.
    ///
    /// Within-record separability is weaker than in the default corpus. A
    /// high-risk subgroup of records is mostly positive and runs at a
    /// higher heart rate, so record identity predicts the label. Test
    /// records are noisier than development records, so statistics fitted
    /// on development records alone are off-centre for them.
    pub fn covariate_shifted() -> Self {
        let base = CorpusSpec::default();
        Self {
            test_fraction: 0.5,
            prevalence: [0.02, 0.15],
            class1: ClassShift {
                noise_sd: 0.03,
                resp_irregularity: 0.3,
                ..ClassShift::default()
            },
            high_risk_fraction: 0.3,
            high_risk_prevalence: [0.6, 0.9],
            record_shift: ClassShift {
                heart_rate_hz: 0.4,
                ..ClassShift::default()
            },
            test_shift: ClassShift {
                noise_sd: 0.015,
                ..ClassShift::default()
            },
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.n_records < 2 {
            return Err(Error::Config("n_records must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config("test_fraction must lie in [0, 1)".into()));
        }
        if self.episode_len == 0 {
            return Err(Error::Config("episode_len must be positive".into()));
        }
        for (name, [lo, hi]) in [("prevalence", self.prevalence), ("high_risk_prevalence", self.high_risk_prevalence)] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::Config(format!("{name} must be an ordered range in [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.high_risk_fraction) {
            return Err(Error::Config("high_risk_fraction must lie in [0, 1]".into()));
        }
        if !(self.record_spread >= 0.0 && self.record_spread.is_finite()) {
            return Err(Error::Config("record_spread must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<PpgRecord>,
    /// Record ids assigned to the held-out split.
    pub test_ids: Vec<String>,
}

impl SynthCorpus {
    pub fn is_test(&self, record_id: &str) -> bool {
        self.test_ids.iter().any(|t| t == record_id)
    }
}

pub fn synth_corpus(spec: &CorpusSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut split_rng = derive_rng(spec.seed, u64::MAX);
    let mut order: Vec<usize> = (0..spec.n_records).collect();
    order.shuffle(&mut split_rng);
    let n_test = (spec.n_records as f64 * spec.test_fraction).round() as usize;
    let mut test_idx: Vec<usize> = order[..n_test].to_vec();
    test_idx.sort_unstable();
    order.shuffle(&mut split_rng);
    let n_high = (spec.n_records as f64 * spec.high_risk_fraction).round() as usize;
    let high_idx: Vec<usize> = order[..n_high].to_vec();

    let records = (0..spec.n_records)
        .map(|r| {
            let mut rng = derive_rng(spec.seed, r as u64 + 1);
            let id = format!("rec{r:03}");
            let high_risk = high_idx.contains(&r);
            let [p_lo, p_hi] = if high_risk { spec.high_risk_prevalence } else { spec.prevalence };
            let prevalence = p_lo + (p_hi - p_lo) * rng.random::<f64>();
            let spread: f64 = StandardNormal.sample(&mut rng);
            let factor = f64::from(u8::from(high_risk)) + spec.record_spread * spread;

            let mut record_base = spec.base.clone();
            spec.record_shift.apply(&mut record_base, factor);
            if test_idx.contains(&r) {
                spec.test_shift.apply(&mut record_base, 1.0);
            }
            let mut positive = record_base.clone();
            spec.class1.apply(&mut positive, 1.0);

            let n = spec.base.n_samples();
            let episode_len = spec.episode_len;
            let n_episodes = n.div_ceil(episode_len);
            let mut labels: Vec<bool> = (0..n_episodes).map(|_| rng.random::<f64>() < prevalence).collect();
            if n_episodes >= 2 && labels.iter().all(|&l| l == labels[0]) {
                let flip = rng.random_range(0..n_episodes);
                labels[flip] = !labels[flip];
            }

            let mut osc = Oscillator::new(rng, &record_base);
            let mut samples = Vec::with_capacity(n);
            for i in 0..n {
                let spec_i = if labels[i / episode_len] { &positive } else { &record_base };
                samples.push(osc.step(spec_i));
            }
            let seg_labels = labels
                .iter()
                .enumerate()
                .map(|(k, &label)| SegmentLabel {
                    start: k * episode_len,
                    label,
                })
                .collect();
            PpgRecord::new(id, spec.base.fs, samples, seg_labels)
        })
        .collect::<Result<Vec<_>>>()?;
    let test_ids = test_idx.iter().map(|&r| records[r].record_id.clone()).collect();
    Ok(SynthCorpus { records, test_ids })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = PulseSpec {
            noise_sd: 0.05,
            ibi_jitter_s: 0.03,
            resp_irregularity: 0.2,
            ..PulseSpec::default()
        };
        let a = synth_ppg(&spec, "a", 7).unwrap();
        let b = synth_ppg(&spec, "a", 7).unwrap();
        assert_eq!(a, b);
        let c = synth_ppg(&spec, "a", 8).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let bad_fs = PulseSpec { fs: 0.0, ..PulseSpec::default() };
        assert!(matches!(synth_ppg(&bad_fs, "x", 1), Err(Error::Config(_))));
        let bad_dur = PulseSpec { duration_s: -1.0, ..PulseSpec::default() };
        assert!(matches!(synth_ppg(&bad_dur, "x", 1), Err(Error::Config(_))));
    }

    #[test]
    fn beat_onsets_follow_heart_rate() {
        let spec = PulseSpec { duration_s: 100.0, ..PulseSpec::default() };
        let trace = spec.render(3).unwrap();
        let ibis = trace.ibis_s();
        assert!(ibis.iter().all(|&i| (i - 1.0 / 1.2).abs() < 1e-12));
        assert_eq!(trace.samples.len(), 3000);
    }

    #[test]
    fn corpus_is_deterministic_and_two_class() {
        let spec = CorpusSpec { n_records: 6, ..CorpusSpec::default() };
        let a = synth_corpus(&spec).unwrap();
        let b = synth_corpus(&spec).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.test_ids, b.test_ids);
        assert_eq!(a.test_ids.len(), 2);
        for r in &a.records {
            assert!(r.labels.iter().any(|l| l.label));
            assert!(r.labels.iter().any(|l| !l.label));
        }
    }
}
