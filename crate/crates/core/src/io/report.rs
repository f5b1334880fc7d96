use std::path::Path;

use serde::Serialize;

use crate::composite::{ObservableVector, WindowScore};
use crate::eval::{EvalMode, EvalReport};
use crate::io::dataset::write_atomic;
use crate::{Error, Result};

/// Serializes rows as CSV with a header taken from the row type.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, &csv_bytes(rows)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// One scored window: the nine observables, the six components and CSI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRow {
    pub record_id: String,
    pub start: usize,
    pub scale: usize,
    pub label: Option<u8>,
    pub q: f64,
    pub omega: f64,
    pub sampen: f64,
    pub hfd: f64,
    pub energy: f64,
    pub stability: f64,
    pub autonomic: f64,
    pub vascular: f64,
    pub recovery: f64,
    pub lle_lambda: f64,
    pub tau: usize,
    pub g_nl: f64,
    pub x_cnl: f64,
    pub x_autonomic: f64,
    pub x_homeostasis: f64,
    pub x_signal_quality: f64,
    pub x_recovery: f64,
    pub x_vascular: f64,
    pub csi: f64,
}

impl WindowRow {
    pub fn new(
        record_id: &str,
        start: usize,
        scale: usize,
        label: Option<bool>,
        o: &ObservableVector,
        s: &WindowScore,
    ) -> Self {
        let x = &s.components;
        WindowRow {
            record_id: record_id.to_string(),
            start,
            scale,
            label: label.map(u8::from),
            q: o.q,
            omega: o.omega,
            sampen: o.sampen,
            hfd: o.hfd,
            energy: o.energy,
            stability: o.stability,
            autonomic: o.autonomic,
            vascular: o.vascular,
            recovery: o.recovery,
            lle_lambda: o.lle_lambda,
            tau: o.tau,
            g_nl: s.g_nl,
            x_cnl: x.cnl,
            x_autonomic: x.autonomic,
            x_homeostasis: x.homeostasis,
            x_signal_quality: x.signal_quality,
            x_recovery: x.recovery,
            x_vascular: x.vascular,
            csi: s.csi,
        }
    }
}

/// A window the pipeline rejected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvalidRow {
    pub record_id: String,
    pub start: usize,
    pub scale: usize,
    pub reason: String,
    pub detail: String,
}

/// Validity rate at one scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityRow {
    pub scale: usize,
    pub windows: usize,
    pub valid: usize,
    pub validity_rate: f64,
}

/// Held-out AUC of one test record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerRecordRow {
    pub record_id: String,
    pub auc: f64,
}

pub fn per_record_rows(report: &EvalReport) -> Vec<PerRecordRow> {
    report
        .test
        .per_record_auc
        .iter()
        .flatten()
        .map(|(id, &auc)| PerRecordRow { record_id: id.clone(), auc })
        .collect()
}

/// Headline AUC of every mode at every seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeTable {
    pub seeds: Vec<u64>,
    /// One entry per mode, values in `seeds` order.
    pub rows: Vec<(EvalMode, Vec<f64>)>,
}

/// Bar-chart summary of one mode across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeBar {
    pub mode: String,
    pub mean_auc: f64,
    pub sd_auc: f64,
    pub min_auc: f64,
    pub max_auc: f64,
    /// Mean AUC minus the corrected-mode mean.
    pub inflation: f64,
}

impl CascadeTable {
    /// Wide CSV: one row per mode, one `seed_<s>` column per seed, then the mean.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["mode".to_string()];
        header.extend(self.seeds.iter().map(|s| format!("seed_{s}")));
        header.push("mean".into());
        w.write_record(&header)?;
        for (mode, vals) in &self.rows {
            let mut rec = vec![mode.name().to_string()];
            rec.extend(vals.iter().map(|v| format!("{v:.6}")));
            rec.push(format!("{:.6}", mean(vals)));
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn bars(&self) -> Vec<CascadeBar> {
        let base = self
            .rows
            .iter()
            .find(|(m, _)| *m == EvalMode::Corrected)
            .map(|(_, v)| mean(v))
            .unwrap_or(f64::NAN);
        self.rows
            .iter()
            .map(|(mode, v)| {
                let mu = mean(v);
                let sd = if v.len() > 1 {
                    (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
                } else {
                    0.0
                };
                CascadeBar {
                    mode: mode.name().to_string(),
                    mean_auc: mu,
                    sd_auc: sd,
                    min_auc: v.iter().copied().fold(f64::INFINITY, f64::min),
                    max_auc: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    inflation: mu - base,
                }
            })
            .collect()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cascade_csv_has_one_row_per_mode_and_one_column_per_seed() {
        let t = CascadeTable {
            seeds: vec![1, 2, 3],
            rows: EvalMode::ALL.iter().map(|&m| (m, vec![0.5, 0.6, 0.7])).collect(),
        };
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "mode,seed_1,seed_2,seed_3,mean");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("corrected,0.500000,"));
        let bars = t.bars();
        assert!((bars[0].mean_auc - 0.6).abs() < 1e-12);
        assert!((bars[0].sd_auc - 0.1).abs() < 1e-12);
        assert!(bars.iter().all(|b| b.inflation.abs() < 1e-12));
    }

    #[test]
    fn csv_header_follows_field_order() {
        let rows = [ValidityRow { scale: 128, windows: 10, valid: 9, validity_rate: 0.9 }];
        let text = String::from_utf8(csv_bytes(&rows).unwrap()).unwrap();
        assert_eq!(text, "scale,windows,valid,validity_rate\n128,10,9,0.9\n");
    }
}
