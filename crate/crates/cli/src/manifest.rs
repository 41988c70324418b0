//! Cohort manifests: which patients exist, where their volumes live, and
//! which model predictions to score against them.
//!
//! A manifest is a TOML document. Paths are resolved relative to the
//! manifest file's directory, and every referenced file is checked for
//! existence up front, so a 94-patient run cannot die halfway through on a
//! typo.
//!
//! ```toml
//! mask_threshold = 0.5            # optional, voxels > threshold are mask
//!
//! [[patients]]
//! patient_id = "p001"
//! gt_mask_path = "p001/gt.nii"
//! ct_path = "p001/ct.nii"         # optional
//! bone_mask_path = "p001/bones.nii"  # optional
//! acquisition_date = "2021-03-04" # optional, ISO-8601 date
//! fold = 0                        # optional, defaults to 0
//!
//! [[models]]
//! model_id = "baseline"
//! [models.predictions]
//! p001 = "p001/pred_baseline.nii"
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const DEFAULT_MASK_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientEntry {
    pub patient_id: String,
    pub gt_mask_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ct_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bone_mask_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquisition_date: Option<String>,
    #[serde(default)]
    pub fold: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub model_id: String,
    /// Prediction mask path per patient id. Every patient in the manifest
    /// must have an entry.
    pub predictions: BTreeMap<String, PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    #[serde(default = "default_threshold")]
    pub mask_threshold: f64,
    pub patients: Vec<PatientEntry>,
    pub models: Vec<ModelEntry>,
}

fn default_threshold() -> f64 {
    DEFAULT_MASK_THRESHOLD
}

/// Parses and validates a manifest file. Paths come back resolved against
/// the manifest's directory and verified to exist.
pub fn load_manifest(path: &Path) -> Result<CohortManifest> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut manifest: CohortManifest =
        toml::from_str(&text).map_err(|e| HarnessError::Manifest(e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve_and_validate(&mut manifest, base)?;
    Ok(manifest)
}

fn resolve_and_validate(manifest: &mut CohortManifest, base: &Path) -> Result<()> {
    if !manifest.mask_threshold.is_finite() {
        return Err(HarnessError::Manifest(format!(
            "mask_threshold must be finite, got {}",
            manifest.mask_threshold
        )));
    }
    if manifest.patients.is_empty() {
        return Err(HarnessError::Manifest(
            "patients: at least one patient is required".into(),
        ));
    }
    if manifest.models.is_empty() {
        return Err(HarnessError::Manifest(
            "models: at least one model is required".into(),
        ));
    }

    let mut patient_ids = HashSet::new();
    for (i, patient) in manifest.patients.iter_mut().enumerate() {
        if patient.patient_id.is_empty() {
            return Err(HarnessError::Manifest(format!(
                "patients[{i}].patient_id: must not be empty"
            )));
        }
        if !patient_ids.insert(patient.patient_id.clone()) {
            return Err(HarnessError::Manifest(format!(
                "patients[{i}].patient_id: duplicate id {:?}",
                patient.patient_id
            )));
        }
        patient.gt_mask_path = resolve_existing(
            base,
            &patient.gt_mask_path,
            &format!("ground truth of patient {:?}", patient.patient_id),
        )?;
        if let Some(ct) = &patient.ct_path {
            patient.ct_path = Some(resolve_existing(
                base,
                ct,
                &format!("CT of patient {:?}", patient.patient_id),
            )?);
        }
        if let Some(bones) = &patient.bone_mask_path {
            patient.bone_mask_path = Some(resolve_existing(
                base,
                bones,
                &format!("bone mask of patient {:?}", patient.patient_id),
            )?);
        }
    }

    let mut model_ids = HashSet::new();
    for (i, model) in manifest.models.iter_mut().enumerate() {
        if model.model_id.is_empty() {
            return Err(HarnessError::Manifest(format!(
                "models[{i}].model_id: must not be empty"
            )));
        }
        if !model_ids.insert(model.model_id.clone()) {
            return Err(HarnessError::Manifest(format!(
                "models[{i}].model_id: duplicate id {:?}",
                model.model_id
            )));
        }
        for covered in model.predictions.keys() {
            if !patient_ids.contains(covered) {
                return Err(HarnessError::Manifest(format!(
                    "models[{i}].predictions: unknown patient {covered:?}"
                )));
            }
        }
        let mut resolved = BTreeMap::new();
        for patient in &manifest.patients {
            let Some(path) = model.predictions.get(&patient.patient_id) else {
                return Err(HarnessError::Manifest(format!(
                    "models[{i}].predictions: model {:?} has no prediction for patient {:?}",
                    model.model_id, patient.patient_id
                )));
            };
            let role = format!(
                "prediction of model {:?} for patient {:?}",
                model.model_id, patient.patient_id
            );
            resolved.insert(patient.patient_id.clone(), resolve_existing(base, path, &role)?);
        }
        model.predictions = resolved;
    }
    Ok(())
}

fn resolve_existing(base: &Path, path: &Path, role: &str) -> Result<PathBuf> {
    let full = if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    };
    if !full.is_file() {
        return Err(HarnessError::MissingArtifact {
            role: role.to_string(),
            path: full,
        });
    }
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn touch(dir: &Path, name: &str) {
        fs::write(dir.join(name), b"x").unwrap();
    }

    fn write_manifest(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("manifest.toml");
        fs::write(&path, body).unwrap();
        path
    }

    const MINIMAL: &str = r#"
        [[patients]]
        patient_id = "p1"
        gt_mask_path = "gt.nii"

        [[models]]
        model_id = "m1"
        [models.predictions]
        p1 = "pred.nii"
    "#;

    #[test]
    fn minimal_manifest_parses_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "gt.nii");
        touch(dir.path(), "pred.nii");
        let m = load_manifest(&write_manifest(dir.path(), MINIMAL)).unwrap();
        assert_eq!(m.mask_threshold, 0.5);
        assert_eq!(m.patients[0].fold, 0);
        assert!(m.patients[0].gt_mask_path.is_absolute() || m.patients[0].gt_mask_path.exists());
        assert_eq!(m.models[0].predictions.len(), 1);
    }

    #[test]
    fn duplicate_patient_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "gt.nii");
        touch(dir.path(), "pred.nii");
        let body = r#"
            [[patients]]
            patient_id = "p1"
            gt_mask_path = "gt.nii"

            [[patients]]
            patient_id = "p1"
            gt_mask_path = "gt.nii"

            [[models]]
            model_id = "m1"
            [models.predictions]
            p1 = "pred.nii"
        "#;
        let err = load_manifest(&write_manifest(dir.path(), body)).unwrap_err();
        match err {
            HarnessError::Manifest(msg) => assert!(msg.contains("duplicate id")),
            other => panic!("expected manifest error, got {other:?}"),
        }
    }

    #[test]
    fn missing_prediction_names_patient_and_model() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "gt.nii");
        touch(dir.path(), "pred.nii");
        let body = r#"
            [[patients]]
            patient_id = "p1"
            gt_mask_path = "gt.nii"

            [[patients]]
            patient_id = "p2"
            gt_mask_path = "gt.nii"

            [[models]]
            model_id = "m1"
            [models.predictions]
            p1 = "pred.nii"
        "#;
        let err = load_manifest(&write_manifest(dir.path(), body)).unwrap_err();
        match err {
            HarnessError::Manifest(msg) => {
                assert!(msg.contains("m1"), "{msg}");
                assert!(msg.contains("p2"), "{msg}");
            }
            other => panic!("expected manifest error, got {other:?}"),
        }
    }

    #[test]
    fn files_are_existence_checked_eagerly() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "gt.nii");
        let err = load_manifest(&write_manifest(dir.path(), MINIMAL)).unwrap_err();
        match err {
            HarnessError::MissingArtifact { role, path } => {
                assert!(role.contains("m1"));
                assert!(path.ends_with("pred.nii"));
            }
            other => panic!("expected missing artifact, got {other:?}"),
        }
    }

    #[test]
    fn unknown_prediction_target_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "gt.nii");
        touch(dir.path(), "pred.nii");
        let body = r#"
            [[patients]]
            patient_id = "p1"
            gt_mask_path = "gt.nii"

            [[models]]
            model_id = "m1"
            [models.predictions]
            p1 = "pred.nii"
            ghost = "pred.nii"
        "#;
        let err = load_manifest(&write_manifest(dir.path(), body)).unwrap_err();
        match err {
            HarnessError::Manifest(msg) => assert!(msg.contains("ghost")),
            other => panic!("expected manifest error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_surface_as_manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest(dir.path(), "patients = not toml");
        assert!(matches!(
            load_manifest(&path),
            Err(HarnessError::Manifest(_))
        ));
        assert!(matches!(
            load_manifest(&dir.path().join("nonexistent.toml")),
            Err(HarnessError::Read { .. })
        ));
    }
}
