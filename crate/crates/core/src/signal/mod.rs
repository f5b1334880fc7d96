//! Record ingestion types, windowing and per-window signal checks.

mod beats;
mod quality;
pub mod synth;

pub use beats::{detect_beats, BeatDetection};
pub use quality::{homeostasis, quality_score, QualityThresholds};
pub use synth::{synth_corpus, synth_ppg, ClassShift, CorpusSpec, PulseSpec, SynthCorpus};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Binary endpoint label attached to the segment starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLabel {
    pub start: usize,
    #[serde(with = "label_01")]
    pub label: bool,
}

/// One subject's sampled PPG trace. This is the unit of fold assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpgRecord {
    pub record_id: String,
    pub fs: f64,
    pub samples: Vec<f64>,
    #[serde(default)]
    pub labels: Vec<SegmentLabel>,
}

impl PpgRecord {
    /// Builds a record, checking the sampling rate, sample count and label
    /// positions. Labels are sorted by start index.
    pub fn new(
        record_id: impl Into<String>,
        fs: f64,
        samples: Vec<f64>,
        mut labels: Vec<SegmentLabel>,
    ) -> Result<Self> {
        let record_id = record_id.into();
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::ingestion(&record_id, format!("fs must be positive, got {fs}")));
        }
        if samples.is_empty() {
            return Err(Error::ingestion(&record_id, "no samples"));
        }
        if let Some(bad) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::ingestion(&record_id, format!("non-finite sample at index {bad}")));
        }
        if let Some(l) = labels.iter().find(|l| l.start >= samples.len()) {
            return Err(Error::ingestion(
                &record_id,
                format!("label start {} outside {} samples", l.start, samples.len()),
            ));
        }
        labels.sort_by_key(|l| l.start);
        Ok(Self {
            record_id,
            fs,
            samples,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Label of the segment containing `index`, i.e. the last label whose
    /// start is at or before it.
    pub fn label_at(&self, index: usize) -> Option<bool> {
        let pos = self.labels.partition_point(|l| l.start <= index);
        pos.checked_sub(1).map(|p| self.labels[p].label)
    }

    /// Windows of `window` samples at `stride` spacing.
    pub fn windows(&self, window: usize, stride: usize) -> Vec<PpgWindow<'_>> {
        segment(self, window, stride)
    }
}

/// A contiguous slice of one record.
#[derive(Debug, Clone, Copy)]
pub struct PpgWindow<'a> {
    pub source_record: &'a str,
    pub start: usize,
    pub data: &'a [f64],
    pub fs: f64,
}

impl<'a> PpgWindow<'a> {
    pub fn new(source_record: &'a str, start: usize, data: &'a [f64], fs: f64) -> Self {
        Self {
            source_record,
            start,
            data,
            fs,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Splits a record into `[i, i + window)` slices at `stride` spacing.
/// A trailing partial window is dropped, so a record shorter than
/// `window` yields nothing.
///
/// Panics if `window` or `stride` is zero.
pub fn segment(record: &PpgRecord, window: usize, stride: usize) -> Vec<PpgWindow<'_>> {
    assert!(window >= 1 && stride >= 1, "window and stride must be >= 1");
    let n = record.samples.len();
    if n < window {
        return Vec::new();
    }
    (0..=(n - window))
        .step_by(stride)
        .map(|start| {
            PpgWindow::new(
                &record.record_id,
                start,
                &record.samples[start..start + window],
                record.fs,
            )
        })
        .collect()
}

mod label_01 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Bool(bool),
        }
        match Raw::deserialize(d)? {
            Raw::Int(0) => Ok(false),
            Raw::Int(1) => Ok(true),
            Raw::Int(other) => Err(de::Error::custom(format!("label must be 0 or 1, got {other}"))),
            Raw::Bool(b) => Ok(b),
        }
    }
}
