//! Command implementations. Each returns the paths it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use csikit_core::composite::{csi_multiscale, score_observables, ScoringStats};
use csikit_core::eval::{extract_windows, run_protocol, EvalMode, EvalReport, ExtractedSet, Split, TestSetGuard};
use csikit_core::io::{
    load_config, load_dataset, per_record_rows, write_atomic, write_csv, write_dataset, write_json, CascadeTable,
    Dataset, InvalidRow, ParamConfig, ValidityRow, WindowRow,
};
use csikit_core::optimize::{
    optimize as run_search, OptimizeSettings, PipelineObjective, SearchSpace, TpeSettings, Trial, TrialStatus,
};
use csikit_core::signal::{synth_corpus, CorpusSpec, PpgRecord};
use csikit_core::{Error, Result, TOOL_VERSION};
use serde::Serialize;

use crate::{AuditArgs, DataArgs, EvalArgs, ExtractArgs, OptimizeArgs, Preset, SynthArgs};

/// JSON output carrying the provenance every command embeds.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    command: &'static str,
    tool_version: &'static str,
    config_hash: Option<String>,
    manifest_hash: Option<String>,
    #[serde(flatten)]
    body: &'a T,
}

fn stamp<'a, T: Serialize>(
    command: &'static str,
    cfg: Option<&ParamConfig>,
    manifest_hash: Option<String>,
    body: &'a T,
) -> Stamped<'a, T> {
    Stamped { command, tool_version: TOOL_VERSION, config_hash: cfg.map(ParamConfig::hash), manifest_hash, body }
}

fn read_file(path: &Path, what: &str) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::InvalidInput(format!("cannot read {what} {}: {e}", path.display())))
}

fn read_config(path: Option<&Path>, stride: Option<usize>) -> Result<ParamConfig> {
    let mut cfg = match path {
        Some(p) => load_config(&read_file(p, "config")?)?,
        None => ParamConfig::default(),
    };
    if stride.is_some() {
        cfg.eval.stride = stride;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn read_inputs(a: &DataArgs) -> Result<(Dataset, ParamConfig)> {
    let cfg = read_config(a.config.as_deref(), a.stride)?;
    let ds = load_dataset(&a.manifest)?;
    Ok((ds, cfg))
}

fn spec_for(path: Option<&Path>, preset: Preset) -> Result<CorpusSpec> {
    let spec = match path {
        Some(p) => serde_json::from_slice(&read_file(p, "spec")?)
            .map_err(|e| Error::Schema { field: "spec".into(), message: e.to_string() })?,
        None => match preset {
            Preset::Default => CorpusSpec::default(),
            Preset::Shifted => CorpusSpec::covariate_shifted(),
        },
    };
    spec.validate()?;
    Ok(spec)
}

pub fn synth(a: &SynthArgs) -> Result<Vec<PathBuf>> {
    let mut spec = spec_for(a.spec.as_deref(), a.preset)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let corpus = synth_corpus(&spec)?;
    let manifest = write_dataset(&a.out, &corpus.records, &corpus.test_ids, spec.seed)?;
    let spec_path = a.out.join("spec.json");
    write_json(&spec_path, &spec)?;
    Ok(vec![manifest, spec_path])
}

#[derive(Serialize)]
struct ExtractSummary {
    scales: Vec<usize>,
    stride: Option<usize>,
    validity: Vec<ValidityRow>,
    valid_rows: usize,
    invalid_reasons: BTreeMap<String, usize>,
    stats_records: Vec<String>,
}

#[derive(Serialize)]
struct MultiscaleRow {
    record_id: String,
    start: usize,
    span: usize,
    scales_present: usize,
    csi_multi: f64,
}

pub fn extract(a: &ExtractArgs) -> Result<Vec<PathBuf>> {
    let (ds, cfg) = read_inputs(&a.data)?;
    let mut scales = a.scales.clone();
    if scales.is_empty() {
        scales.push(cfg.window);
        scales.extend(&cfg.multiscale.scales);
    }
    scales.sort_unstable();
    scales.dedup();

    let mut rows = Vec::new();
    let mut invalid = Vec::new();
    let mut validity = Vec::new();
    let mut reasons = BTreeMap::new();
    for &scale in &scales {
        let c = cfg.at_window(scale);
        c.validate()?;
        let set = extract_windows(&ds.records, &c);
        // Kernels and z-scores come from development windows only.
        let stats = fit_development_stats(&set, &ds.split)?;
        let mut valid = 0;
        for w in &set.windows {
            match &w.outcome {
                Ok(obs) => {
                    let s = score_observables(obs, &c, &stats);
                    rows.push(WindowRow::new(&w.record_id, w.start, scale, w.label, obs, &s));
                    valid += 1;
                }
                Err(inv) => {
                    *reasons.entry(inv.reason()).or_insert(0) += 1;
                    invalid.push(InvalidRow {
                        record_id: w.record_id.clone(),
                        start: w.start,
                        scale,
                        reason: inv.reason(),
                        detail: inv.detail.clone(),
                    });
                }
            }
        }
        let n = set.windows.len();
        let rate = if n == 0 { 0.0 } else { valid as f64 / n as f64 };
        validity.push(ValidityRow { scale, windows: n, valid, validity_rate: rate });
    }

    let out = &a.out;
    let mut written = Vec::new();
    let windows_path = out.join("windows.csv");
    write_csv(&windows_path, &rows)?;
    written.push(windows_path);
    let invalid_path = out.join("invalid.csv");
    write_csv(&invalid_path, &invalid)?;
    written.push(invalid_path);
    let validity_path = out.join("validity.csv");
    write_csv(&validity_path, &validity)?;
    written.push(validity_path);
    if scales.len() > 1 {
        let gamma = if scales == cfg.multiscale.scales { cfg.multiscale.gamma.clone() } else { vec![1.0; scales.len()] };
        let fused = multiscale_rows(&ds.records, &rows, &scales, &gamma, &cfg);
        let path = out.join("multiscale.csv");
        write_csv(&path, &fused)?;
        written.push(path);
    }
    let summary = ExtractSummary {
        scales,
        stride: cfg.eval.stride,
        valid_rows: rows.len(),
        validity,
        invalid_reasons: reasons,
        stats_records: ds.split.development.iter().cloned().collect(),
    };
    let summary_path = out.join("extract.json");
    write_json(&summary_path, &stamp("extract", Some(&cfg), Some(ds.manifest.hash()), &summary))?;
    written.push(summary_path);
    Ok(written)
}

fn fit_development_stats(set: &ExtractedSet, split: &Split) -> Result<ScoringStats> {
    let dev: Vec<_> = set
        .windows
        .iter()
        .filter(|w| split.development.contains(&w.record_id))
        .filter_map(|w| w.outcome.as_ref().ok().map(|o| (w.record_id.as_str(), o.nonlinear())))
        .collect();
    let rows: Vec<[f64; 4]> = dev.iter().map(|(_, r)| *r).collect();
    ScoringStats::fit(&rows, dev.iter().map(|(id, _)| id.to_string()))
}

/// Fuses the scales over blocks of the largest window. Each scale
/// contributes the mean CSI of its valid windows inside the block.
fn multiscale_rows(
    records: &[PpgRecord],
    rows: &[WindowRow],
    scales: &[usize],
    gamma: &[f64],
    cfg: &ParamConfig,
) -> Vec<MultiscaleRow> {
    let span = *scales.last().expect("at least one scale");
    let stride = cfg.eval.stride.unwrap_or(span);
    let mut by_record: BTreeMap<&str, Vec<&WindowRow>> = BTreeMap::new();
    for r in rows {
        by_record.entry(r.record_id.as_str()).or_default().push(r);
    }
    let mut out = Vec::new();
    for rec in records {
        let Some(rs) = by_record.get(rec.record_id.as_str()) else { continue };
        let mut start = 0;
        while start + span <= rec.len() {
            let per_scale: Vec<Option<f64>> = scales
                .iter()
                .map(|&s| {
                    let v: Vec<f64> = rs
                        .iter()
                        .filter(|r| r.scale == s && r.start >= start && r.start + s <= start + span)
                        .map(|r| r.csi)
                        .collect();
                    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect();
            if let Some(c) = csi_multiscale(&per_scale, gamma) {
                out.push(MultiscaleRow {
                    record_id: rec.record_id.clone(),
                    start,
                    span,
                    scales_present: per_scale.iter().flatten().count(),
                    csi_multi: c,
                });
            }
            start += stride;
        }
    }
    out
}

pub fn eval(a: &EvalArgs) -> Result<Vec<PathBuf>> {
    let (ds, cfg) = read_inputs(&a.data)?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let set = extract_windows(&ds.records, &cfg);
    let guard = TestSetGuard::new();
    let report = run_protocol(&set, &ds.split, &cfg, a.mode, seed, &guard)?;
    if a.reaccess_test {
        run_protocol(&set, &ds.split, &cfg, a.mode, seed, &guard)?;
    }
    let report_path = a.out.join("report.json");
    write_json(&report_path, &stamp("eval", Some(&cfg), Some(ds.manifest.hash()), &report))?;
    let per_record_path = a.out.join("per_record.csv");
    write_csv(&per_record_path, &per_record_rows(&report))?;
    Ok(vec![report_path, per_record_path])
}

#[derive(Serialize)]
struct AuditRun {
    seed: u64,
    mode: EvalMode,
    headline_auc: f64,
    cv_mean_auc: f64,
    pooled_test_auc: f64,
    per_record_mean: Option<f64>,
    stats_disjoint: bool,
    split_hash: String,
}

#[derive(Serialize)]
struct AuditSummary {
    seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<CorpusSpec>,
    runs: Vec<AuditRun>,
}

pub fn audit(a: &AuditArgs) -> Result<Vec<PathBuf>> {
    let cfg = read_config(a.config.as_deref(), a.stride)?;
    let fixed = a.manifest.as_deref().map(load_dataset).transpose()?;
    let spec = match &fixed {
        Some(_) => None,
        None => Some(spec_for(a.spec.as_deref(), a.preset.unwrap_or(Preset::Shifted))?),
    };
    let mut runs = Vec::new();
    let mut table: Vec<(EvalMode, Vec<f64>)> = EvalMode::ALL.iter().map(|&m| (m, Vec::new())).collect();
    for &seed in &a.seed {
        let (records, split) = match (&fixed, &spec) {
            (Some(ds), _) => (ds.records.clone(), ds.split.clone()),
            (None, Some(spec)) => {
                let corpus = synth_corpus(&CorpusSpec { seed, ..spec.clone() })?;
                let dev = corpus.records.iter().map(|r| r.record_id.clone()).filter(|id| !corpus.is_test(id));
                let split = Split::new(dev, corpus.test_ids.iter().cloned())?;
                (corpus.records, split)
            }
            (None, None) => unreachable!("either a manifest or a spec"),
        };
        let set = extract_windows(&records, &cfg);
        for (mode, values) in &mut table {
            let report: EvalReport = run_protocol(&set, &split, &cfg, *mode, seed, &TestSetGuard::new())?;
            values.push(report.headline_auc);
            runs.push(AuditRun {
                seed,
                mode: *mode,
                headline_auc: report.headline_auc,
                cv_mean_auc: report.cv.mean_auc,
                pooled_test_auc: report.test.pooled_auc,
                per_record_mean: report.test.per_record_mean,
                stats_disjoint: report.provenance.stats_disjoint,
                split_hash: report.provenance.split_hash,
            });
        }
    }
    let table = CascadeTable { seeds: a.seed.clone(), rows: table };
    let cascade_path = a.out.join("cascade.csv");
    write_atomic(&cascade_path, &table.to_csv()?)?;
    let bars_path = a.out.join("cascade_bars.csv");
    write_csv(&bars_path, &table.bars())?;
    let summary = AuditSummary { seeds: a.seed.clone(), spec, runs };
    let summary_path = a.out.join("audit.json");
    let manifest_hash = fixed.as_ref().map(|d| d.manifest.hash());
    write_json(&summary_path, &stamp("audit", Some(&cfg), manifest_hash, &summary))?;
    Ok(vec![cascade_path, bars_path, summary_path])
}

#[derive(Serialize)]
struct OptimizeSummary {
    settings: OptimizeSettings,
    trials: usize,
    resumed: usize,
    complete: usize,
    pruned: usize,
    failed: usize,
    best: Trial,
}

fn read_trace(path: &Path) -> Result<Vec<Trial>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Schema { field: format!("trace line {}", i + 1), message: e.to_string() })
        })
        .collect()
}

pub fn optimize(a: &OptimizeArgs) -> Result<Vec<PathBuf>> {
    let (ds, cfg) = read_inputs(&a.data)?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let space = SearchSpace::pipeline();
    let objective = PipelineObjective::new(&space, cfg.clone(), &ds.records, &ds.split.development, seed)?;
    let settings = OptimizeSettings {
        n_trials: a.trials,
        seed,
        tpe: TpeSettings { n_startup: a.startup.min(a.trials), ..TpeSettings::default() },
        workers: a.workers.max(1),
    };

    let trace_path = a.out.join("trace.jsonl");
    let resume = read_trace(&trace_path)?;
    let resumed = resume.len();
    let mut lines: Vec<String> = resume.iter().map(serde_json::to_string).collect::<serde_json::Result<_>>()?;
    let result = run_search(&space, &objective, &settings, resume, &mut |t| {
        lines.push(serde_json::to_string(t)?);
        let mut text = lines.join("\n");
        text.push('\n');
        write_atomic(&trace_path, text.as_bytes())
    })?;

    let best_cfg = result
        .best
        .config
        .clone()
        .ok_or_else(|| Error::Optimization("best trial carries no configuration".into()))?;
    let best_path = a.out.join("best_config.json");
    write_atomic(&best_path, (best_cfg.to_json_pretty() + "\n").as_bytes())?;

    let count = |s: TrialStatus| result.trials.iter().filter(|t| t.status == s).count();
    let summary = OptimizeSummary {
        settings,
        trials: result.trials.len(),
        resumed,
        complete: count(TrialStatus::Complete),
        pruned: count(TrialStatus::Pruned),
        failed: count(TrialStatus::Failed),
        best: result.best.clone(),
    };
    let summary_path = a.out.join("optimize.json");
    write_json(&summary_path, &stamp("optimize", Some(&cfg), Some(ds.manifest.hash()), &summary))?;
    Ok(vec![trace_path, best_path, summary_path])
}
