//! Machine-readable run documents and the ROC CSV.
//!
//! Documents are pretty-printed JSON. Key names are part of the interface:
//!
//! * evaluation: `format`, `version`, `modality_set`, `threshold`,
//!   `dataset {digest, sample_count, uav_count, files [{file, sha256}]}`,
//!   `models [{model, parameter_digest, parameter_count, confusion {tp, fp,
//!   fn, tn}, uav, false_alarm, weighted {precision, recall, f1, support},
//!   accuracy, auc, roc_csv}]`, `per_seed_f1`, `mean_f1`.
//! * training: `format`, `version`, `modality_set`, `seed`, `train_size`,
//!   `val_size`, `stopped_epoch`, `best_epoch`, `best_val_loss`,
//!   `early_stopped`, `parameter_digest`, `validation {accuracy, f1}`,
//!   `epochs [{epoch, train_loss, train_accuracy, val_loss, val_accuracy}]`.
//!
//! F1 values at the top level are support-weighted.

use serde::{Deserialize, Serialize};
use uavfusion_core::metrics::{ClassMetrics, RocCurve};
use uavfusion_core::train::EpochRecord;
use uavfusion_core::{ClassificationReport, ConfusionMatrix, TrainReport};

pub const EVALUATION_FORMAT: &str = "uavfusion-evaluation";
pub const TRAINING_FORMAT: &str = "uavfusion-training";
pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionDoc {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl From<&ConfusionMatrix> for ConfusionDoc {
    fn from(c: &ConfusionMatrix) -> Self {
        ConfusionDoc {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            tn: c.tn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDoc {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

impl From<&ClassMetrics> for ClassDoc {
    fn from(m: &ClassMetrics) -> Self {
        ClassDoc {
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            support: m.support,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDoc {
    pub digest: String,
    pub sample_count: usize,
    pub uav_count: usize,
    pub files: Vec<FileDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    /// File name of the weights file.
    pub model: String,
    pub parameter_digest: String,
    pub parameter_count: usize,
    pub confusion: ConfusionDoc,
    pub uav: ClassDoc,
    pub false_alarm: ClassDoc,
    pub weighted: ClassDoc,
    pub accuracy: f64,
    pub auc: f64,
    pub roc_csv: String,
}

impl ModelEvaluation {
    pub fn new(
        model: String,
        parameter_digest: String,
        parameter_count: usize,
        report: &ClassificationReport,
        auc: f64,
        roc_csv: String,
    ) -> Self {
        ModelEvaluation {
            model,
            parameter_digest,
            parameter_count,
            confusion: (&report.confusion).into(),
            uav: (&report.uav).into(),
            false_alarm: (&report.false_alarm).into(),
            weighted: (&report.weighted).into(),
            accuracy: report.accuracy,
            auc,
            roc_csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDocument {
    pub format: String,
    pub version: u32,
    pub modality_set: String,
    pub threshold: f64,
    pub dataset: DatasetDoc,
    pub models: Vec<ModelEvaluation>,
    pub per_seed_f1: Vec<f64>,
    pub mean_f1: f64,
}

impl EvaluationDocument {
    pub fn new(
        modality_set: &str,
        threshold: f64,
        dataset: DatasetDoc,
        models: Vec<ModelEvaluation>,
    ) -> Self {
        let per_seed_f1: Vec<f64> = models.iter().map(|m| m.weighted.f1).collect();
        let mean_f1 = mean(&per_seed_f1);
        EvaluationDocument {
            format: EVALUATION_FORMAT.into(),
            version: DOCUMENT_VERSION,
            modality_set: modality_set.into(),
            threshold,
            dataset,
            models,
            per_seed_f1,
            mean_f1,
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochDoc {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

impl From<&EpochRecord> for EpochDoc {
    fn from(e: &EpochRecord) -> Self {
        EpochDoc {
            epoch: e.epoch,
            train_loss: e.train_loss,
            train_accuracy: e.train_accuracy,
            val_loss: e.val_loss,
            val_accuracy: e.val_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationDoc {
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDocument {
    pub format: String,
    pub version: u32,
    pub modality_set: String,
    pub seed: u64,
    pub train_size: usize,
    pub val_size: usize,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub early_stopped: bool,
    pub parameter_digest: String,
    pub validation: ValidationDoc,
    pub epochs: Vec<EpochDoc>,
}

impl TrainingDocument {
    pub fn new(
        modality_set: &str,
        seed: u64,
        report: &TrainReport,
        validation: ValidationDoc,
    ) -> Self {
        TrainingDocument {
            format: TRAINING_FORMAT.into(),
            version: DOCUMENT_VERSION,
            modality_set: modality_set.into(),
            seed,
            train_size: report.train_size,
            val_size: report.val_size,
            stopped_epoch: report.stopped_epoch,
            best_epoch: report.best_epoch,
            best_val_loss: report.best_val_loss,
            early_stopped: report.early_stopped,
            parameter_digest: report.parameter_digest.clone(),
            validation,
            epochs: report.epochs.iter().map(EpochDoc::from).collect(),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s =
        serde_json::to_string_pretty(doc).expect("documents hold only finite numbers and strings");
    s.push('\n');
    s
}

/// `x` rounded to 9 significant digits, printed without an exponent.
pub fn sig9(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// Header `fpr,tpr`, then one point per line.
pub fn roc_csv(roc: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr\n");
    for &(fpr, tpr) in &roc.points {
        out.push_str(&sig9(fpr));
        out.push(',');
        out.push_str(&sig9(tpr));
        out.push('\n');
    }
    out
}
