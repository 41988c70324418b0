//! Batch evaluation of a cohort: every model against every patient, with
//! per-model summaries and rank-based model comparisons.
//!
//! Patients are processed independently, optionally in parallel. The merge
//! is an ordered collect over patient index, and every downstream structure
//! is a vector in manifest order, so the report is a pure function of the
//! manifest contents and options; worker count never changes a byte.
//!
//! One broken file fails its own cases, with the reason recorded in the
//! report, and the rest of the cohort proceeds. Only a cohort with no usable
//! records at all is an error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use voxmetric_core::stats::{self, Summary, TestResult};
use voxmetric_core::{evaluate_pair, load_nifti, threshold_to_mask, BinaryMask, MetricRecord};

use crate::error::{HarnessError, Result};
use crate::manifest::{CohortManifest, ModelEntry, PatientEntry};

/// Environment variable capping the effective worker count.
pub const MAX_WORKERS_ENV: &str = "VOXMETRIC_MAX_WORKERS";

#[derive(Clone, Debug)]
pub struct EvalOptions {
    /// Also score overlap with bone voxels removed from both masks, for
    /// patients that have a bone mask.
    pub with_bone_subtraction: bool,
    /// Worker threads for patient-level parallelism; capped by
    /// [`MAX_WORKERS_ENV`].
    pub parallelism: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            with_bone_subtraction: false,
            parallelism: 1,
        }
    }
}

/// A case that produced no record, and why.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub patient_id: String,
    pub model_id: String,
    pub reason: String,
}

/// Five-number summaries of one model's metric distributions. A field is
/// `None` when no case produced a defined value for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub dsc: Option<Summary>,
    pub hd_mm: Option<Summary>,
    pub hd95_mm: Option<Summary>,
    pub dsc_bones_excluded: Option<Summary>,
}

/// One Dunn pairwise comparison, labelled with model ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPairComparison {
    pub model_a: String,
    pub model_b: String,
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
}

/// Kruskal-Wallis plus post-hoc comparisons across models for one metric.
/// `note` explains a missing test (degenerate data, too few groups).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub kruskal_wallis: Option<TestResult>,
    pub pairwise: Vec<ModelPairComparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mask_threshold: f64,
    pub with_bone_subtraction: bool,
    /// One record per evaluated (patient, model) pair, patients in manifest
    /// order, models in manifest order within a patient.
    pub records: Vec<MetricRecord>,
    pub failures: Vec<CaseFailure>,
    pub summaries: Vec<ModelSummary>,
    pub tests: Vec<MetricComparison>,
}

/// Evaluates every model against every patient and aggregates the cohort.
pub fn run_evaluation(manifest: &CohortManifest, options: &EvalOptions) -> Result<EvaluationReport> {
    let workers = effective_parallelism(options.parallelism);
    let per_patient: Vec<(Vec<MetricRecord>, Vec<CaseFailure>)> = if workers <= 1 {
        manifest
            .patients
            .iter()
            .map(|p| evaluate_patient(p, &manifest.models, manifest.mask_threshold, options))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| HarnessError::Internal(format!("could not start workers: {e}")))?;
        pool.install(|| {
            manifest
                .patients
                .par_iter()
                .map(|p| evaluate_patient(p, &manifest.models, manifest.mask_threshold, options))
                .collect()
        })
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (mut recs, mut fails) in per_patient {
        records.append(&mut recs);
        failures.append(&mut fails);
    }
    if records.is_empty() {
        return Err(HarnessError::EvaluationFailed);
    }

    let summaries = summarize_models(&manifest.models, &records);
    let tests = compare_models(&manifest.models, &records, options.with_bone_subtraction);

    Ok(EvaluationReport {
        mask_threshold: manifest.mask_threshold,
        with_bone_subtraction: options.with_bone_subtraction,
        records,
        failures,
        summaries,
        tests,
    })
}

/// Requested worker count clamped to at least one, then capped by the
/// environment variable when it holds a positive integer (anything else is
/// ignored).
pub fn effective_parallelism(requested: usize) -> usize {
    let requested = requested.max(1);
    match std::env::var(MAX_WORKERS_ENV) {
        Ok(value) => match value.trim().parse::<usize>() {
            Ok(cap) if cap >= 1 => requested.min(cap),
            _ => requested,
        },
        Err(_) => requested,
    }
}

fn evaluate_patient(
    patient: &PatientEntry,
    models: &[ModelEntry],
    threshold: f64,
    options: &EvalOptions,
) -> (Vec<MetricRecord>, Vec<CaseFailure>) {
    let fail_all = |reason: String| {
        let failures = models
            .iter()
            .map(|m| CaseFailure {
                patient_id: patient.patient_id.clone(),
                model_id: m.model_id.clone(),
                reason: reason.clone(),
            })
            .collect();
        (Vec::new(), failures)
    };

    let gt = match load_mask(&patient.gt_mask_path, threshold) {
        Ok(mask) => mask,
        Err(reason) => return fail_all(format!("ground truth: {reason}")),
    };
    let bones = if options.with_bone_subtraction {
        match &patient.bone_mask_path {
            Some(path) => match load_mask(path, threshold) {
                Ok(mask) => Some(mask),
                Err(reason) => return fail_all(format!("bone mask: {reason}")),
            },
            None => None,
        }
    } else {
        None
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for model in models {
        let path = &model.predictions[&patient.patient_id];
        let result = load_mask(path, threshold)
            .and_then(|pred| evaluate_pair(&gt, &pred, bones.as_ref()).map_err(|e| e.to_string()));
        match result {
            Ok(pair) => records.push(MetricRecord::new(
                patient.patient_id.clone(),
                model.model_id.clone(),
                pair,
            )),
            Err(reason) => failures.push(CaseFailure {
                patient_id: patient.patient_id.clone(),
                model_id: model.model_id.clone(),
                reason: format!("prediction: {reason}"),
            }),
        }
    }
    (records, failures)
}

fn load_mask(path: &std::path::Path, threshold: f64) -> std::result::Result<BinaryMask, String> {
    let volume = load_nifti(path).map_err(|e| e.to_string())?;
    Ok(threshold_to_mask(&volume, threshold))
}

fn summarize_models(models: &[ModelEntry], records: &[MetricRecord]) -> Vec<ModelSummary> {
    models
        .iter()
        .map(|model| {
            let of_model: Vec<&MetricRecord> = records
                .iter()
                .filter(|r| r.model_id == model.model_id)
                .collect();
            ModelSummary {
                model_id: model.model_id.clone(),
                dsc: summarize(of_model.iter().map(|r| Some(r.dsc))),
                hd_mm: summarize(of_model.iter().map(|r| r.hd_mm)),
                hd95_mm: summarize(of_model.iter().map(|r| r.hd95_mm)),
                dsc_bones_excluded: summarize(of_model.iter().map(|r| r.dsc_bones_excluded)),
            }
        })
        .collect()
}

fn summarize(values: impl Iterator<Item = Option<f64>>) -> Option<Summary> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(stats::summarize(&defined).expect("metric values are finite"))
    }
}

fn compare_models(
    models: &[ModelEntry],
    records: &[MetricRecord],
    with_bone_subtraction: bool,
) -> Vec<MetricComparison> {
    let mut picks: Vec<(&str, fn(&MetricRecord) -> Option<f64>)> = vec![
        ("dsc", |r| Some(r.dsc)),
        ("hd_mm", |r| r.hd_mm),
        ("hd95_mm", |r| r.hd95_mm),
    ];
    if with_bone_subtraction {
        picks.push(("dsc_bones_excluded", |r| r.dsc_bones_excluded));
    }

    picks
        .into_iter()
        .map(|(metric, pick)| {
            let groups: Vec<(String, Vec<f64>)> = models
                .iter()
                .map(|model| {
                    let values: Vec<f64> = records
                        .iter()
                        .filter(|r| r.model_id == model.model_id)
                        .filter_map(pick)
                        .collect();
                    (model.model_id.clone(), values)
                })
                .filter(|(_, values)| !values.is_empty())
                .collect();
            compare_metric(metric, groups)
        })
        .collect()
}

fn compare_metric(metric: &str, groups: Vec<(String, Vec<f64>)>) -> MetricComparison {
    if groups.len() < 2 {
        return MetricComparison {
            metric: metric.to_string(),
            kruskal_wallis: None,
            pairwise: Vec::new(),
            note: Some("fewer than two models produced values".into()),
        };
    }
    let values: Vec<Vec<f64>> = groups.iter().map(|(_, v)| v.clone()).collect();
    match stats::kruskal_wallis(&values) {
        Ok(kw) => {
            let (pairwise, note) = match stats::dunn_posthoc(&values) {
                Ok(pairs) => (
                    pairs
                        .into_iter()
                        .map(|p| ModelPairComparison {
                            model_a: groups[p.group_a].0.clone(),
                            model_b: groups[p.group_b].0.clone(),
                            z: p.z,
                            p_raw: p.p_raw,
                            p_adjusted: p.p_adjusted,
                        })
                        .collect(),
                    None,
                ),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            MetricComparison {
                metric: metric.to_string(),
                kruskal_wallis: Some(kw),
                pairwise,
                note,
            }
        }
        Err(e) => MetricComparison {
            metric: metric.to_string(),
            kruskal_wallis: None,
            pairwise: Vec::new(),
            note: Some(e.to_string()),
        },
    }
}
