//! Parameter search: uniform startup trials, then a tree-structured Parzen
//! sampler with joint simplex resampling, first-fold median pruning and the
//! record-level CV objective.

mod run;
mod space;
mod tpe;

pub use run::{
    best_trial, optimize, Objective, OptimizeResult, OptimizeSettings, PipelineObjective, Pruner, Trial,
    TrialOutcome, TrialStatus, MIN_VALIDITY, PRUNE_MIN_COMPLETE,
};
pub use space::{Dim, Point, SearchSpace, Value};
pub use tpe::{sample_point, Observation, Phase, TpeSettings};
