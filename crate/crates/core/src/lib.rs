//! Nonlinear cardiovascular stability index (CSI) for photoplethysmography.
//!
//! The crate is organised as a pipeline:
//!
//! - [`signal`]: record ingestion types, windowing, quality scoring, beat
//!   detection and a deterministic synthetic PPG generator.
//! - [`features`]: delay embedding plus the four nonlinear estimators
//!   (sample entropy, Higuchi dimension, Welch band energy, stabilized
//!   Rosenstein exponent).
//! - [`composite`]: bounded-optimality kernels, the nonlinear complexity
//!   module and the gated window score.
//! - [`eval`]: record-level cross-validation, the held-out protocol and the
//!   statistics used to report it, including the leakage artifact modes.
//! - [`optimize`]: parameter search with a TPE-style sampler.
//! - [`io`]: versioned configuration, dataset manifests and report output.

pub mod composite;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod optimize;
pub mod signal;
pub(crate) mod util;

pub use error::{Error, Result};

/// Tool version embedded in every report.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
