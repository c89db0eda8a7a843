//! End-to-end steps: window extraction and splitting, training, baseline
//! tuning and the side-by-side detector comparison.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::detect::{Baseline, BaselineConfig, BaselineKind, CnnDetector, Detector, DetectorOutput, tune_baseline};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::frontend::{labeled_windows, LabeledWindow};
use crate::model::{split_by_group, split_dataset, DatasetSplit, GazeSequence, LabelClass, SplitMode};
use crate::net::{train, NetworkParams, TrainHistory};

/// Labelled windows of a corpus, split as configured. The split only
/// depends on the corpus, the frontend settings and the training seed.
pub fn split_windows(seqs: &[GazeSequence], run: &RunConfig) -> Result<DatasetSplit<LabeledWindow>> {
    let windows = labeled_windows(seqs, &run.frontend)?;
    if windows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (ratios, seed) = (run.training.split, run.training.seed);
    match run.training.split_mode {
        SplitMode::Window => split_dataset(windows, ratios, seed),
        SplitMode::Sequence => split_by_group(windows, |w| w.seq_idx, ratios, seed),
    }
}

/// Window centers per sequence, sorted.
pub fn positions_by_sequence(windows: &[LabeledWindow], n_sequences: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n_sequences];
    for w in windows {
        out[w.seq_idx].push(w.center_idx);
    }
    out.iter_mut().for_each(|p| p.sort_unstable());
    out
}

pub struct Trained {
    pub model: NetworkParams,
    pub history: TrainHistory,
    pub split: DatasetSplit<LabeledWindow>,
}

pub fn train_on_corpus(seqs: &[GazeSequence], run: &RunConfig) -> Result<Trained> {
    run.validate()?;
    for s in seqs {
        s.require_labels()?;
    }
    let split = split_windows(seqs, run)?;
    let (model, history) = train(&split, &run.train_config())?;
    Ok(Trained { model, history, split })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub detector: String,
    /// Tuned thresholds for baselines.
    pub thresholds: Option<BaselineConfig>,
    /// Macro F1 reached on the validation split while tuning.
    pub validation_macro_f1: Option<f64>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Sorted by mean one-vs-all AUC, best first.
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, detector: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.detector == detector)
    }
}

/// Tunes every baseline on the validation windows, then evaluates the CNN
/// and the four baselines on the test windows of the same split.
pub fn compare(seqs: &[GazeSequence], model: &NetworkParams, run: &RunConfig) -> Result<Comparison> {
    run.validate()?;
    let truths: Vec<&[LabelClass]> = seqs.iter().map(|s| s.require_labels()).collect::<Result<_>>()?;
    let split = split_windows(seqs, run)?;
    if split.validation.is_empty() || split.test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let validation = positions_by_sequence(&split.validation, seqs.len());
    let test = positions_by_sequence(&split.test, seqs.len());

    let run_all = |d: &dyn Detector| -> Result<Vec<DetectorOutput>> { seqs.iter().map(|s| d.detect(s)).collect() };

    let mut rows = Vec::with_capacity(5);
    let cnn = CnnDetector::new(model.clone(), run.frontend)?;
    rows.push(ComparisonRow {
        detector: cnn.name().into(),
        thresholds: None,
        validation_macro_f1: None,
        report: evaluate(&run_all(&cnn)?, &truths, Some(&test), &run.evaluation)?,
    });
    for kind in BaselineKind::ALL {
        let tuned = tune_baseline(kind, seqs, &validation, &run.baselines.config(), &run.baselines.grid)?;
        let detector = Baseline::new(kind, tuned.config)?;
        rows.push(ComparisonRow {
            detector: kind.name().into(),
            thresholds: Some(tuned.config),
            validation_macro_f1: Some(tuned.macro_f1),
            report: evaluate(&run_all(&detector)?, &truths, Some(&test), &run.evaluation)?,
        });
    }
    rows.sort_by(|a, b| b.report.one_vs_all.mean_auc.total_cmp(&a.report.one_vs_all.mean_auc));
    Ok(Comparison { rows })
}
