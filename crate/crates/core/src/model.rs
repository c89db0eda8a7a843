//! Gaze samples, movement classes, events and dataset splitting.
//!
//! Everything else in the crate is built on these types. They are plain
//! values: immutable once validated and cheap to share between threads.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eye movement class. The discriminants are the canonical integer codes
/// used in every file format and as matrix axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelClass {
    Fixation = 0,
    Saccade = 1,
    Pursuit = 2,
}

impl LabelClass {
    pub const ALL: [LabelClass; 3] = [LabelClass::Fixation, LabelClass::Saccade, LabelClass::Pursuit];
    pub const COUNT: usize = 3;

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(LabelClass::Fixation),
            1 => Some(LabelClass::Saccade),
            2 => Some(LabelClass::Pursuit),
            _ => None,
        }
    }

    pub fn from_index(index: usize) -> Self {
        Self::ALL[index]
    }

    pub fn name(self) -> &'static str {
        match self {
            LabelClass::Fixation => "fixation",
            LabelClass::Saccade => "saccade",
            LabelClass::Pursuit => "pursuit",
        }
    }
}

impl fmt::Display for LabelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Index of the largest score, ties resolved toward the lowest class code.
pub fn argmax_class(scores: &[f64; 3]) -> LabelClass {
    let mut best = 0;
    for c in 1..3 {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    LabelClass::from_index(best)
}

/// One gaze point in degrees of visual angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t_ms: f64,
    pub x_deg: f64,
    pub y_deg: f64,
    /// False when the tracker lost the eye; coordinates are then meaningless.
    pub valid: bool,
}

impl GazeSample {
    pub fn new(t_ms: f64, x_deg: f64, y_deg: f64) -> Self {
        Self { t_ms, x_deg, y_deg, valid: true }
    }

    pub fn invalid(t_ms: f64) -> Self {
        Self { t_ms, x_deg: f64::NAN, y_deg: f64::NAN, valid: false }
    }
}

/// An ordered gaze recording with optional per-sample ground truth.
///
/// Invalid samples stay in place so indices keep lining up with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSequence {
    samples: Vec<GazeSample>,
    labels: Option<Vec<LabelClass>>,
    source_id: String,
}

impl GazeSequence {
    pub fn new(
        samples: Vec<GazeSample>,
        labels: Option<Vec<LabelClass>>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != samples.len() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    samples.len()
                )));
            }
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.t_ms.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            if s.valid && !(s.x_deg.is_finite() && s.y_deg.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].t_ms <= w[0].t_ms) {
            return Err(Error::InvalidInput(format!(
                "timestamps not strictly increasing at sample {}",
                i + 1
            )));
        }
        Ok(Self { samples, labels, source_id: source_id.into() })
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[LabelClass]> {
        self.labels.as_deref()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Ground-truth labels, or an error for unlabeled recordings.
    pub fn require_labels(&self) -> Result<&[LabelClass]> {
        self.labels().ok_or_else(|| {
            Error::InvalidInput(format!("sequence '{}' has no labels", self.source_id))
        })
    }
}

/// A maximal run of one class, with inclusive sample bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub class: LabelClass,
    pub start_idx: usize,
    pub end_idx: usize,
}

impl Event {
    pub fn sample_count(&self) -> usize {
        self.end_idx - self.start_idx + 1
    }
}

/// Per-class probabilities that form a proper distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    probs: [f64; 3],
}

impl Prediction {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(probs: [f64; 3]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::InvalidInput(format!("probabilities out of range: {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform() -> Self {
        Self { probs: [1.0 / 3.0; 3] }
    }

    pub fn probs(&self) -> &[f64; 3] {
        &self.probs
    }

    pub fn get(&self, class: LabelClass) -> f64 {
        self.probs[class.index()]
    }

    pub fn label(&self) -> LabelClass {
        argmax_class(&self.probs)
    }
}

/// Run-length encode a label sequence.
pub fn events_from_labels(labels: &[LabelClass]) -> Vec<Event> {
    let mut events: Vec<Event> = Vec::new();
    for (i, &class) in labels.iter().enumerate() {
        match events.last_mut() {
            Some(last) if last.class == class => last.end_idx = i,
            _ => events.push(Event { class, start_idx: i, end_idx: i }),
        }
    }
    events
}

/// Expand events back into per-sample labels. The events must tile
/// `0..length` exactly, in order.
pub fn labels_from_events(events: &[Event], length: usize) -> Result<Vec<LabelClass>> {
    let mut labels = Vec::with_capacity(length);
    for ev in events {
        if ev.start_idx > ev.end_idx {
            return Err(Error::InvalidInput(format!(
                "event starts at {} after its end {}",
                ev.start_idx, ev.end_idx
            )));
        }
        let next = labels.len();
        if ev.start_idx > next {
            return Err(Error::EventGap { index: next });
        }
        if ev.start_idx < next {
            return Err(Error::EventOverlap { index: ev.start_idx });
        }
        if ev.end_idx >= length {
            return Err(Error::InvalidInput(format!(
                "event ends at {} beyond length {}",
                ev.end_idx, length
            )));
        }
        labels.extend(std::iter::repeat_n(ev.class, ev.sample_count()));
    }
    if labels.len() < length {
        return Err(Error::EventGap { index: labels.len() });
    }
    Ok(labels)
}

/// Train / validation / test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.75, validation: 0.125, test: 0.125 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config(format!("split ratios must be positive: {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1: {parts:?}")));
        }
        Ok(())
    }

    /// Part sizes for `n` items: floors for validation and test, the
    /// remainder to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let part = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let validation = part(self.validation);
        let test = part(self.test);
        (n - validation - test, validation, test)
    }
}

/// Whether windows are split individually or whole recordings at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    #[default]
    Window,
    Sequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
    pub ratios: SplitRatios,
}

/// Shuffle `items` with `seed` and cut them into train / validation / test.
pub fn split_dataset<T>(items: Vec<T>, ratios: SplitRatios, seed: u64) -> Result<DatasetSplit<T>> {
    ratios.validate()?;
    if items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (n_train, n_val, _) = ratios.sizes(items.len());
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut part = vec![2u8; items.len()];
    for &i in &order[..n_train] {
        part[i] = 0;
    }
    for &i in &order[n_train..n_train + n_val] {
        part[i] = 1;
    }
    Ok(distribute(items, &part, ratios))
}

/// Like [`split_dataset`] but keeps every group (recording) whole: the
/// groups are shuffled and partitioned, then items follow their group.
pub fn split_by_group<T>(
    items: Vec<T>,
    group_of: impl Fn(&T) -> usize,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetSplit<T>> {
    ratios.validate()?;
    if items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut groups: Vec<usize> = items.iter().map(&group_of).collect();
    groups.sort_unstable();
    groups.dedup();
    let (n_train, n_val, _) = ratios.sizes(groups.len());
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let part_of = |g: usize| -> u8 {
        let rank = groups.iter().position(|&x| x == g).expect("known group");
        if rank < n_train {
            0
        } else if rank < n_train + n_val {
            1
        } else {
            2
        }
    };
    let part: Vec<u8> = items.iter().map(|it| part_of(group_of(it))).collect();
    Ok(distribute(items, &part, ratios))
}

fn distribute<T>(items: Vec<T>, part: &[u8], ratios: SplitRatios) -> DatasetSplit<T> {
    let mut split = DatasetSplit { train: Vec::new(), validation: Vec::new(), test: Vec::new(), ratios };
    for (item, &p) in items.into_iter().zip(part) {
        match p {
            0 => split.train.push(item),
            1 => split.validation.push(item),
            _ => split.test.push(item),
        }
    }
    split
}
