//! Frame-wise and event-wise evaluation of detector outputs.
//!
//! Only covered samples enter frame-wise metrics. Rows of every 3×3 table
//! are ground truth, columns are predictions.

use serde::{Deserialize, Serialize};

use crate::detect::DetectorOutput;
use crate::error::{Error, Result};
use crate::model::{Event, LabelClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 3]; 3]) -> Self {
        Self { counts }
    }

    pub fn add(&mut self, truth: LabelClass, pred: LabelClass) {
        self.counts[truth.index()][pred.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for i in 0..3 {
            for j in 0..3 {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, truth: LabelClass) -> u64 {
        self.counts[truth.index()].iter().sum()
    }

    pub fn col_total(&self, pred: LabelClass) -> u64 {
        self.counts.iter().map(|r| r[pred.index()]).sum()
    }

    /// Each row divided by its support (recall orientation). Empty rows stay 0.
    pub fn row_normalized(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in self.counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total > 0 {
                for j in 0..3 {
                    out[i][j] = row[j] as f64 / total as f64;
                }
            }
        }
        out
    }

    /// Each column divided by its total (precision orientation).
    pub fn col_normalized(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for j in 0..3 {
            let total: u64 = (0..3).map(|i| self.counts[i][j]).sum();
            if total > 0 {
                for i in 0..3 {
                    out[i][j] = self.counts[i][j] as f64 / total as f64;
                }
            }
        }
        out
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (0..3).map(|i| self.counts[i][i]).sum::<u64>() as f64 / total as f64
    }

    pub fn prf(&self) -> PrfReport {
        let total = self.total() as f64;
        let per_class = LabelClass::ALL.map(|c| {
            let k = c.index();
            let tp = self.counts[k][k] as f64;
            let fn_ = self.row_total(c) as f64 - tp;
            let fp = self.col_total(c) as f64 - tp;
            let tn = total - tp - fn_ - fp;
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            ClassMetrics {
                accuracy: ratio(tp + tn, total),
                precision,
                recall,
                f1: f1(precision, recall),
            }
        });
        PrfReport::from_class_metrics(per_class)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// One-vs-rest metrics for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfReport {
    /// Indexed by class code.
    pub per_class: [ClassMetrics; 3],
    /// Unweighted means of the per-class rows.
    pub macro_avg: ClassMetrics,
    pub macro_f1: f64,
}

impl PrfReport {
    pub fn from_class_metrics(per_class: [ClassMetrics; 3]) -> Self {
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 3.0;
        let macro_avg = ClassMetrics {
            accuracy: mean(|m| m.accuracy),
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
        };
        Self { per_class, macro_avg, macro_f1: macro_avg.f1 }
    }
}

/// Covered (scores, prediction, truth) triples, possibly pooled across sequences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameSet {
    pub scores: Vec<[f64; 3]>,
    pub pred: Vec<LabelClass>,
    pub truth: Vec<LabelClass>,
}

impl FrameSet {
    pub fn from_output(preds: &DetectorOutput, truth: &[LabelClass]) -> Result<Self> {
        let mut set = Self::default();
        set.extend(preds, truth, None)?;
        Ok(set)
    }

    /// Appends the covered frames of one sequence, optionally restricted to
    /// the given sample positions.
    pub fn extend(&mut self, preds: &DetectorOutput, truth: &[LabelClass], only: Option<&[usize]>) -> Result<()> {
        check_aligned(preds, truth)?;
        let mut push = |i: usize| {
            if let Some(e) = preds.get(i) {
                self.scores.push(e.scores);
                self.pred.push(e.label);
                self.truth.push(truth[i]);
            }
        };
        match only {
            Some(positions) => {
                if let Some(&bad) = positions.iter().find(|&&i| i >= truth.len()) {
                    return Err(Error::Misaligned(format!("position {bad} beyond sequence of {}", truth.len())));
                }
                positions.iter().for_each(|&i| push(i));
            }
            None => (0..truth.len()).for_each(push),
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn confusion(&self) -> Result<ConfusionMatrix> {
        if self.is_empty() {
            return Err(Error::NoCoverage);
        }
        let mut m = ConfusionMatrix::default();
        for (&t, &p) in self.truth.iter().zip(&self.pred) {
            m.add(t, p);
        }
        Ok(m)
    }

    pub fn prf(&self) -> Result<PrfReport> {
        Ok(self.confusion()?.prf())
    }

    pub fn one_vs_all_auc(&self) -> Result<OneVsAll> {
        if self.is_empty() {
            return Err(Error::NoCoverage);
        }
        let mut curves = Vec::with_capacity(3);
        for c in LabelClass::ALL {
            if !self.truth.contains(&c) {
                return Err(Error::MissingClass(c));
            }
            let scores: Vec<f64> = self.scores.iter().map(|s| s[c.index()]).collect();
            let positive: Vec<bool> = self.truth.iter().map(|&t| t == c).collect();
            curves.push(roc_auc(&scores, &positive)?);
        }
        let curves: [RocCurve; 3] = curves.try_into().expect("three classes");
        let aucs = [curves[0].auc, curves[1].auc, curves[2].auc];
        Ok(OneVsAll { mean_auc: aucs.iter().sum::<f64>() / 3.0, aucs, curves })
    }

    pub fn confidence_accuracy(&self, thresholds: &[f64]) -> Result<Vec<ConfidencePoint>> {
        if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidInput(format!("confidence threshold {t} outside [0, 1]")));
        }
        let mut out = Vec::with_capacity(3 * thresholds.len());
        for c in LabelClass::ALL {
            for &x in thresholds {
                let (mut support, mut correct) = (0u64, 0u64);
                for ((s, &p), &t) in self.scores.iter().zip(&self.pred).zip(&self.truth) {
                    if p == c && s[c.index()] >= x {
                        support += 1;
                        correct += u64::from(t == c);
                    }
                }
                let accuracy = (support > 0).then(|| correct as f64 / support as f64);
                out.push(ConfidencePoint { class: c, min_probability: x, accuracy, support });
            }
        }
        Ok(out)
    }
}

fn check_aligned(preds: &DetectorOutput, truth: &[LabelClass]) -> Result<()> {
    if preds.len() != truth.len() {
        return Err(Error::Misaligned(format!("{} predictions, {} truth labels", preds.len(), truth.len())));
    }
    Ok(())
}

pub fn confusion(preds: &DetectorOutput, truth: &[LabelClass]) -> Result<ConfusionMatrix> {
    FrameSet::from_output(preds, truth)?.confusion()
}

pub fn prf(preds: &DetectorOutput, truth: &[LabelClass]) -> Result<PrfReport> {
    FrameSet::from_output(preds, truth)?.prf()
}

pub fn one_vs_all_auc(preds: &DetectorOutput, truth: &[LabelClass]) -> Result<OneVsAll> {
    FrameSet::from_output(preds, truth)?.one_vs_all_auc()
}

pub fn confidence_accuracy(
    preds: &DetectorOutput,
    truth: &[LabelClass],
    thresholds: &[f64],
) -> Result<Vec<ConfidencePoint>> {
    FrameSet::from_output(preds, truth)?.confidence_accuracy(thresholds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from the highest
    /// threshold down, starting at (0, 0) and ending at (1, 1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve over all distinct score thresholds. Tied scores move the curve
/// diagonally, so the trapezoidal area equals the Mann–Whitney statistic.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<RocCurve> {
    if scores.len() != positive.len() {
        return Err(Error::Misaligned(format!("{} scores, {} labels", scores.len(), positive.len())));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput("ROC needs at least one positive and one negative sample".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && scores[order[k]] == s {
            if positive[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(RocCurve { points, auc: area / (n_pos as f64 * n_neg as f64) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsAll {
    pub curves: [RocCurve; 3],
    pub aucs: [f64; 3],
    pub mean_auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EventMajorityTable {
    /// Number of ground-truth events per class that were evaluated.
    pub events: [u64; 3],
    /// `winners[i][j]`: events of class i whose frames were labelled j more than half the time.
    pub winners: [[u64; 3]; 3],
    pub no_majority: [u64; 3],
}

impl EventMajorityTable {
    /// Adds one sequence. When `only` is given, each event is restricted to
    /// its frames in that set and events with no such frame are skipped.
    pub fn accumulate(&mut self, preds: &DetectorOutput, events: &[Event], only: Option<&[bool]>) -> Result<()> {
        for ev in events {
            if ev.end_idx < ev.start_idx || ev.end_idx >= preds.len() {
                return Err(Error::Misaligned(format!(
                    "event {}..={} outside {} predictions",
                    ev.start_idx,
                    ev.end_idx,
                    preds.len()
                )));
            }
            let mut votes = [0u64; 3];
            let mut frames = 0u64;
            for i in ev.start_idx..=ev.end_idx {
                if only.is_some_and(|m| !m[i]) {
                    continue;
                }
                frames += 1;
                if let Some(e) = preds.get(i) {
                    votes[e.label.index()] += 1;
                }
            }
            if frames == 0 {
                continue;
            }
            let row = ev.class.index();
            self.events[row] += 1;
            match (0..3).find(|&j| 2 * votes[j] > frames) {
                Some(j) => self.winners[row][j] += 1,
                None => self.no_majority[row] += 1,
            }
        }
        Ok(())
    }

    /// Rows as fractions: `(class fractions, no-majority fraction)`.
    pub fn fractions(&self) -> [([f64; 3], f64); 3] {
        std::array::from_fn(|i| {
            let n = self.events[i];
            if n == 0 {
                return ([0.0; 3], 0.0);
            }
            let n = n as f64;
            (self.winners[i].map(|w| w as f64 / n), self.no_majority[i] as f64 / n)
        })
    }

    pub fn total_events(&self) -> u64 {
        self.events.iter().sum()
    }
}

pub fn event_majority(preds: &DetectorOutput, truth_events: &[Event]) -> Result<EventMajorityTable> {
    if truth_events.is_empty() {
        return Err(Error::InvalidInput("no ground-truth events".into()));
    }
    let mut table = EventMajorityTable::default();
    table.accumulate(preds, truth_events, None)?;
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidencePoint {
    pub class: LabelClass,
    pub min_probability: f64,
    /// `None` when no prediction reaches the threshold.
    pub accuracy: Option<f64>,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub confidence_thresholds: Vec<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { confidence_thresholds: (0..=20).map(|i| i as f64 / 20.0).collect() }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.confidence_thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("confidence thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Everything the evaluation protocol reports for one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: u64,
    pub confusion: ConfusionMatrix,
    pub prf: PrfReport,
    pub one_vs_all: OneVsAll,
    pub event_majority: EventMajorityTable,
    pub confidence: Vec<ConfidencePoint>,
}

/// Evaluates one detector over several sequences. `only[k]`, when given,
/// restricts sequence k to those sample positions.
pub fn evaluate(
    outputs: &[DetectorOutput],
    truths: &[&[LabelClass]],
    only: Option<&[Vec<usize>]>,
    config: &EvaluationConfig,
) -> Result<EvalReport> {
    if outputs.len() != truths.len() || only.is_some_and(|o| o.len() != outputs.len()) {
        return Err(Error::Misaligned("sequence counts differ between predictions and truth".into()));
    }
    let mut frames = FrameSet::default();
    let mut table = EventMajorityTable::default();
    for (k, (out, truth)) in outputs.iter().zip(truths).enumerate() {
        let positions = only.map(|o| o[k].as_slice());
        frames.extend(out, truth, positions)?;
        let mask = positions.map(|p| {
            let mut m = vec![false; truth.len()];
            p.iter().for_each(|&i| m[i] = true);
            m
        });
        table.accumulate(out, &crate::model::events_from_labels(truth), mask.as_deref())?;
    }
    let confusion = frames.confusion()?;
    Ok(EvalReport {
        frames: frames.len() as u64,
        prf: confusion.prf(),
        confusion,
        one_vs_all: frames.one_vs_all_auc()?,
        event_majority: table,
        confidence: frames.confidence_accuracy(&config.confidence_thresholds)?,
    })
}
