use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::{Point, SearchSpace};
use super::tpe::{sample_point, Observation, Phase, TpeSettings};
use crate::eval::{cv_phase, extract_windows, EvalMode, Split};
use crate::io::ParamConfig;
use crate::signal::PpgRecord;
use crate::util::{derive_rng, median};
use crate::{Error, Result};

/// Minimum completed trials before median pruning is active.
pub const PRUNE_MIN_COMPLETE: usize = 5;

/// Fraction of windows that must be scored for a trial to count.
pub const MIN_VALIDITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Complete,
    Pruned,
    Failed,
}

/// One optimizer trial, as written to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_id: usize,
    pub phase: Phase,
    pub point: Point,
    /// Concrete configuration, for pipeline objectives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ParamConfig>,
    /// Mean CV AUC for complete trials.
    pub objective: Option<f64>,
    /// AUC of the first fold, used for pruning.
    pub first_fold: Option<f64>,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Number of earlier trials visible to the sampler when this point was
    /// proposed. Smaller than `trial_id` under parallel batches.
    pub history_len: usize,
    pub duration_s: f64,
}

/// Result of evaluating one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialOutcome {
    Complete { value: f64, first_fold: Option<f64> },
    Pruned { first_fold: f64 },
}

/// Median pruning rule handed to objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pruner {
    threshold: Option<f64>,
}

impl Pruner {
    pub const NEVER: Pruner = Pruner { threshold: None };

    /// Median first-fold AUC of the complete trials, once at least
    /// [`PRUNE_MIN_COMPLETE`] exist.
    pub fn from_history(trials: &[Trial]) -> Self {
        let firsts: Vec<f64> = trials
            .iter()
            .filter(|t| t.status == TrialStatus::Complete)
            .filter_map(|t| t.first_fold)
            .collect();
        if firsts.len() < PRUNE_MIN_COMPLETE {
            return Pruner::NEVER;
        }
        Pruner { threshold: Some(median(&firsts)) }
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    /// True when a trial should stop after `fold` with the given AUC.
    pub fn should_prune(&self, fold: usize, auc: f64) -> bool {
        fold == 0 && self.threshold.is_some_and(|t| auc < t)
    }
}

/// Something the optimizer maximizes.
pub trait Objective: Sync {
    fn evaluate(&self, point: &Point, pruner: &Pruner) -> Result<TrialOutcome>;

    /// Closed range a complete trial's value must fall in, if any.
    fn value_range(&self) -> Option<(f64, f64)> {
        None
    }

    /// Concrete configuration for a point, recorded in the trace.
    fn config_of(&self, _point: &Point) -> Option<ParamConfig> {
        None
    }
}

impl<F> Objective for F
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    fn evaluate(&self, point: &Point, _pruner: &Pruner) -> Result<TrialOutcome> {
        Ok(TrialOutcome::Complete { value: self(point)?, first_fold: None })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSettings {
    pub n_trials: usize,
    pub seed: u64,
    pub tpe: TpeSettings,
    /// Trials proposed from one history snapshot and evaluated together.
    pub workers: usize,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        OptimizeSettings { n_trials: 300, seed: 42, tpe: TpeSettings::default(), workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub best: Trial,
    pub trials: Vec<Trial>,
}

/// Runs trials until `settings.n_trials` exist, continuing after any
/// `resume` trials. Trial `i` draws from its own random stream and sees the
/// trials that finished before its batch, so a resumed run reproduces an
/// uninterrupted one whenever batches line up (always with one worker).
/// `on_trial` observes each trial in order, for streaming traces.
pub fn optimize(
    space: &SearchSpace,
    objective: &dyn Objective,
    settings: &OptimizeSettings,
    resume: Vec<Trial>,
    on_trial: &mut dyn FnMut(&Trial) -> Result<()>,
) -> Result<OptimizeResult> {
    if settings.n_trials < settings.tpe.n_startup {
        return Err(Error::Config(format!(
            "n_trials {} is below the {} startup trials",
            settings.n_trials, settings.tpe.n_startup
        )));
    }
    for (i, t) in resume.iter().enumerate() {
        if t.trial_id != i || !space.contains(&t.point) {
            return Err(Error::Config(format!("resumed trace is inconsistent at line {}", i + 1)));
        }
    }
    let workers = settings.workers.max(1);
    let mut trials = resume;
    while trials.len() < settings.n_trials {
        let start = trials.len();
        let batch = workers.min(settings.n_trials - start);
        let history: Vec<Observation> = trials
            .iter()
            .filter_map(|t| match (t.status, t.objective, t.first_fold) {
                (TrialStatus::Complete, Some(v), _) => Some(Observation { point: &t.point, value: v, good_eligible: true }),
                (TrialStatus::Pruned, _, Some(f)) => Some(Observation { point: &t.point, value: f, good_eligible: false }),
                _ => None,
            })
            .collect();
        let proposals: Vec<(Point, Phase)> = (start..start + batch)
            .map(|i| {
                let mut rng = derive_rng(settings.seed, 0x0070_0000 + i as u64);
                sample_point(space, &history, i, &settings.tpe, &mut rng)
            })
            .collect();
        drop(history);
        let pruner = Pruner::from_history(&trials);
        let run = |(k, (point, phase)): (usize, (Point, Phase))| {
            let t0 = Instant::now();
            let outcome = objective.evaluate(&point, &pruner);
            let mut trial = Trial {
                trial_id: start + k,
                phase,
                config: objective.config_of(&point),
                point,
                objective: None,
                first_fold: None,
                status: TrialStatus::Failed,
                message: None,
                history_len: start,
                duration_s: 0.0,
            };
            match outcome {
                Ok(TrialOutcome::Complete { value, first_fold })
                    if value.is_finite() && objective.value_range().is_none_or(|(lo, hi)| (lo..=hi).contains(&value)) =>
                {
                    trial.objective = Some(value);
                    trial.first_fold = first_fold;
                    trial.status = TrialStatus::Complete;
                }
                Ok(TrialOutcome::Complete { value, .. }) => {
                    trial.message = Some(format!("objective {value} outside its range"));
                }
                Ok(TrialOutcome::Pruned { first_fold }) => {
                    trial.first_fold = Some(first_fold);
                    trial.status = TrialStatus::Pruned;
                }
                Err(e) => trial.message = Some(e.to_string()),
            }
            trial.duration_s = t0.elapsed().as_secs_f64();
            trial
        };
        let batch_trials: Vec<Trial> = if batch > 1 {
            proposals.into_par_iter().enumerate().map(run).collect()
        } else {
            proposals.into_iter().enumerate().map(run).collect()
        };
        for t in batch_trials {
            on_trial(&t)?;
            trials.push(t);
        }
    }
    let best = best_trial(&trials).cloned().ok_or_else(|| Error::Optimization("every trial failed or was pruned".into()))?;
    Ok(OptimizeResult { best, trials })
}

/// Highest-objective complete trial; ties go to the earliest.
pub fn best_trial(trials: &[Trial]) -> Option<&Trial> {
    trials
        .iter()
        .filter(|t| t.status == TrialStatus::Complete)
        .fold(None, |best: Option<&Trial>, t| match best {
            Some(b) if b.objective >= t.objective => Some(b),
            _ => Some(t),
        })
}

/// Mean record-level CV AUC of a configuration on development records.
///
/// Only development records are extracted, so the held-out records are
/// never read. Trials whose configuration scores fewer than
/// [`MIN_VALIDITY`] of the windows fail.
pub struct PipelineObjective<'a> {
    space: &'a SearchSpace,
    base: ParamConfig,
    records: Vec<PpgRecord>,
    split: Split,
    seed: u64,
}

impl<'a> PipelineObjective<'a> {
    pub fn new(
        space: &'a SearchSpace,
        base: ParamConfig,
        records: &[PpgRecord],
        dev_ids: &BTreeSet<String>,
        seed: u64,
    ) -> Result<Self> {
        let records: Vec<PpgRecord> = records.iter().filter(|r| dev_ids.contains(&r.record_id)).cloned().collect();
        if records.len() != dev_ids.len() {
            return Err(Error::Config("development ids missing from the record set".into()));
        }
        let split = Split::new(dev_ids.iter().cloned(), Vec::<String>::new())?;
        Ok(PipelineObjective { space, base, records, split, seed })
    }
}

impl Objective for PipelineObjective<'_> {
    fn evaluate(&self, point: &Point, pruner: &Pruner) -> Result<TrialOutcome> {
        let cfg = self.space.apply(point, &self.base)?;
        let set = extract_windows(&self.records, &cfg);
        let validity = set.validity_rate();
        if validity < MIN_VALIDITY {
            return Err(Error::Optimization(format!("only {:.1}% of windows valid", validity * 100.0)));
        }
        let mut first = None;
        let mut hook = |fold: usize, auc: f64| {
            if fold == 0 {
                first = Some(auc);
            }
            pruner.should_prune(fold, auc)
        };
        let cv = cv_phase(&set, &self.split, &cfg, EvalMode::Corrected, self.seed, None, Some(&mut hook))?;
        if cv.stopped_early {
            return Ok(TrialOutcome::Pruned { first_fold: first.expect("hook saw the first fold") });
        }
        Ok(TrialOutcome::Complete { value: cv.summary.mean_auc, first_fold: cv.summary.fold_auc.first().copied().flatten() })
    }

    fn value_range(&self) -> Option<(f64, f64)> {
        Some((0.0, 1.0))
    }

    fn config_of(&self, point: &Point) -> Option<ParamConfig> {
        self.space.apply(point, &self.base).ok()
    }
}
