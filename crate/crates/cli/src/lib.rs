//! Cohort evaluation harness on top of [`voxmetric_core`].
//!
//! The pieces, in pipeline order: a TOML [`manifest`](crate::manifest)
//! describes patients, models, and file locations; [`folds`](crate::folds)
//! assigns cross-validation folds; [`evaluate`](crate::evaluate) scores every
//! prediction against its ground truth and aggregates per-model statistics;
//! [`report`](crate::report) persists the result as JSON or CSV. The
//! `voxmetric` binary wires these into subcommands.

pub mod error;
pub mod evaluate;
pub mod folds;
pub mod manifest;
pub mod report;

pub use error::{HarnessError, Result};
pub use evaluate::{
    run_evaluation, CaseFailure, EvalOptions, EvaluationReport, MetricComparison,
    ModelPairComparison, ModelSummary, MAX_WORKERS_ENV,
};
pub use folds::{fold_sizes, make_folds};
pub use manifest::{load_manifest, CohortManifest, ModelEntry, PatientEntry};
pub use report::{load_report, render, write_report, ReportFormat};
