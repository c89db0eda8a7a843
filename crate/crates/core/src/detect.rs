//! Per-sample detectors sharing one output type.
//!
//! The CNN scores each window center with its softmax output. The four
//! baselines are velocity cascades: a central-difference velocity threshold
//! marks saccades, and on the remaining spans a windowed feature separates
//! fixations from pursuits (dispersion, mean turning angle, or PCA variance
//! ratio). Baselines emit continuous scores, so they can be swept in ROC
//! analysis like the network's probabilities.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;
use crate::frontend::{Featurizer, FrontendConfig};
use crate::model::{argmax_class, GazeSequence, LabelClass};
use crate::net::NetworkParams;

/// Scores and arg-max label for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub sample_idx: usize,
    pub scores: [f64; 3],
    pub label: LabelClass,
}

/// Per-sample detector result. Samples without a prediction (window
/// boundaries, tracking loss) are uncovered and carry no scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    slots: Vec<Option<([f64; 3], LabelClass)>>,
}

impl DetectorOutput {
    /// Labels are derived as the arg-max of each score triple.
    pub fn from_scores(scores: Vec<Option<[f64; 3]>>) -> Self {
        Self { slots: scores.into_iter().map(|s| s.map(|s| (s, argmax_class(&s)))).collect() }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<ScoredSample> {
        self.slots
            .get(idx)
            .copied()
            .flatten()
            .map(|(scores, label)| ScoredSample { sample_idx: idx, scores, label })
    }

    pub fn is_covered(&self, idx: usize) -> bool {
        matches!(self.slots.get(idx), Some(Some(_)))
    }

    pub fn covered_mask(&self) -> Vec<bool> {
        self.slots.iter().map(Option::is_some).collect()
    }

    pub fn covered_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Covered samples in increasing index order.
    pub fn entries(&self) -> impl Iterator<Item = ScoredSample> + '_ {
        (0..self.slots.len()).filter_map(move |i| self.get(i))
    }

    /// Per-sample label, `None` where uncovered.
    pub fn labels(&self) -> Vec<Option<LabelClass>> {
        self.slots.iter().map(|s| s.map(|(_, l)| l)).collect()
    }
}

pub trait Detector {
    fn name(&self) -> &str;
    fn detect(&self, seq: &GazeSequence) -> Result<DetectorOutput>;
}

/// The trained network applied window by window.
#[derive(Debug, Clone)]
pub struct CnnDetector {
    model: NetworkParams,
    featurizer: Featurizer,
}

impl CnnDetector {
    pub fn new(model: NetworkParams, frontend: FrontendConfig) -> Result<Self> {
        if frontend.window_len != model.shape().input_len {
            return Err(Error::Shape(format!(
                "frontend windows of {} samples, model expects {}",
                frontend.window_len,
                model.shape().input_len
            )));
        }
        Ok(Self { model, featurizer: Featurizer::new(frontend)? })
    }
}

impl Detector for CnnDetector {
    fn name(&self) -> &str {
        "cnn"
    }

    fn detect(&self, seq: &GazeSequence) -> Result<DetectorOutput> {
        let mut scores = vec![None; seq.len()];
        for w in self.featurizer.windows(seq)? {
            scores[w.center_idx] = Some(*self.model.predict(&w.feature)?.probs());
        }
        Ok(DetectorOutput::from_scores(scores))
    }
}

pub fn cnn_detect(model: &NetworkParams, seq: &GazeSequence, frontend: &FrontendConfig) -> Result<DetectorOutput> {
    CnnDetector::new(model.clone(), *frontend)?.detect(seq)
}

/// Central-difference speed at sample `i` in degrees per second.
pub fn velocity(seq: &GazeSequence, i: usize) -> Result<f64> {
    let n = seq.len();
    if i == 0 || i + 1 >= n {
        return Err(Error::InvalidInput(format!("velocity undefined at boundary index {i} of {n}")));
    }
    central_velocity(seq, i)
        .ok_or_else(|| Error::InvalidInput(format!("velocity at {i} needs valid neighbours")))
}

fn central_velocity(seq: &GazeSequence, i: usize) -> Option<f64> {
    let s = seq.samples();
    let (a, b, c) = (&s[i - 1], &s[i], &s[i + 1]);
    if !(a.valid && b.valid && c.valid) {
        return None;
    }
    let dt_s = (c.t_ms - a.t_ms) / 1000.0;
    Some((c.x_deg - a.x_deg).hypot(c.y_deg - a.y_deg) / dt_s)
}

/// Velocity for every sample; `None` at the two ends and next to invalid data.
pub fn velocities(seq: &GazeSequence) -> Vec<Option<f64>> {
    let n = seq.len();
    (0..n).map(|i| if i == 0 || i + 1 >= n { None } else { central_velocity(seq, i) }).collect()
}

/// `(x range) + (y range)` of the points.
pub fn dispersion(points: &[(f64, f64)]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    (x1 - x0) + (y1 - y0)
}

/// Mean absolute turning angle between consecutive displacement vectors,
/// in `[0, π]`. Pairs involving a zero-length displacement are skipped;
/// `None` when no pair is left.
pub fn mean_turning_angle(points: &[(f64, f64)]) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for w in points.windows(3) {
        let d1 = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        let d2 = (w[2].0 - w[1].0, w[2].1 - w[1].1);
        if (d1.0 == 0.0 && d1.1 == 0.0) || (d2.0 == 0.0 && d2.1 == 0.0) {
            continue;
        }
        let cross = d1.0 * d2.1 - d1.1 * d2.0;
        let dot = d1.0 * d2.0 + d1.1 * d2.1;
        sum += cross.abs().atan2(dot);
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Variance floor for the PCA ratio.
pub const PCA_VARIANCE_FLOOR: f64 = 1e-12;

/// Eigenvalues `(λ₁, λ₂)`, `λ₁ ≥ λ₂ ≥ 0`, of the population covariance of
/// the points, in closed form.
pub fn covariance_eigenvalues(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.is_empty() {
        return (0.0, 0.0);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    let (a, d, b) = (sxx / n, syy / n, sxy / n);
    let half_trace = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    ((half_trace + disc).max(0.0), (half_trace - disc).max(0.0))
}

/// `max(λ₁, ε) / max(λ₂, ε)`; 1 for a degenerate (single-point) window.
pub fn pca_ratio(points: &[(f64, f64)]) -> f64 {
    let (l1, l2) = covariance_eigenvalues(points);
    l1.max(PCA_VARIANCE_FLOOR) / l2.max(PCA_VARIANCE_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Velocity threshold only: saccade versus everything else.
    Ivt,
    /// Velocity, then dispersion.
    IvtIdt,
    /// Velocity, then mean turning angle.
    Ivmp,
    /// Velocity, then PCA variance ratio.
    Pca,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [BaselineKind::Ivt, BaselineKind::IvtIdt, BaselineKind::Ivmp, BaselineKind::Pca];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Ivt => "ivt",
            BaselineKind::IvtIdt => "ivt-idt",
            BaselineKind::Ivmp => "ivmp",
            BaselineKind::Pca => "pca",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline '{s}' (expected ivt, ivt-idt, ivmp or pca)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub velocity_threshold_deg_s: f64,
    pub dispersion_threshold_deg: f64,
    /// Mean turning angle below which a span counts as pursuit.
    pub angle_threshold_rad: f64,
    pub pca_ratio_threshold: f64,
    /// Analysis window for the second stage, centered like the CNN window.
    pub window_len: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            velocity_threshold_deg_s: 50.0,
            dispersion_threshold_deg: 1.0,
            angle_threshold_rad: 0.5 * PI,
            pca_ratio_threshold: 5.0,
            window_len: 30,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.velocity_threshold_deg_s,
            self.dispersion_threshold_deg,
            self.angle_threshold_rad,
            self.pca_ratio_threshold,
        ];
        if positive.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Config(format!("baseline thresholds must be positive: {positive:?}")));
        }
        if self.angle_threshold_rad >= PI {
            return Err(Error::Config("angle threshold must be below π".into()));
        }
        if self.window_len < 2 {
            return Err(Error::Config("baseline window_len must be at least 2".into()));
        }
        Ok(())
    }

    /// Stage-two feature threshold, expressed so that `feature > threshold`
    /// means pursuit.
    fn stage2_threshold(&self, kind: BaselineKind) -> f64 {
        match kind {
            BaselineKind::Ivt => f64::INFINITY,
            BaselineKind::IvtIdt => self.dispersion_threshold_deg,
            BaselineKind::Ivmp => PI - self.angle_threshold_rad,
            BaselineKind::Pca => self.pca_ratio_threshold,
        }
    }
}

/// Maps a non-negative feature onto `[0, 1]`, monotonically: `[0, threshold]`
/// lands in `[0, pivot]` and everything above lands in `(pivot, 1]`. The
/// decision is passed in so the score side always agrees with it.
fn split_score(feature: f64, threshold: f64, pivot: f64, above: bool) -> f64 {
    let raw = if feature <= threshold {
        pivot * feature / threshold
    } else {
        1.0 - (1.0 - pivot) * threshold / feature
    };
    if above {
        raw.max(f64::from_bits(pivot.to_bits() + 1))
    } else {
        raw.min(pivot)
    }
}

/// Saccade probability pivot for three-class cascades: a non-saccade sample
/// keeps its saccade score at or below 1/3, so the larger of the two
/// remaining shares always wins.
const CASCADE_PIVOT: f64 = 1.0 / 3.0;

/// A threshold cascade. See the module docs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub kind: BaselineKind,
    pub config: BaselineConfig,
}

impl Baseline {
    pub fn new(kind: BaselineKind, config: BaselineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { kind, config })
    }

    fn min_len(&self) -> usize {
        match self.kind {
            BaselineKind::Ivt => 3,
            _ => self.config.window_len,
        }
    }

    /// Stage-two feature at every requested sample that is covered and not
    /// a saccade.
    fn stage2_features(&self, seq: &GazeSequence, saccade: &[Option<bool>], at: &[usize]) -> Vec<Option<f64>> {
        let samples = seq.samples();
        let n = samples.len();
        let free = |i: usize| saccade[i] == Some(false);
        let half = self.config.window_len / 2;
        let mut pts = Vec::with_capacity(self.config.window_len);
        at.iter()
            .map(|&i| {
                if !free(i) {
                    return None;
                }
                let lo = i.saturating_sub(half);
                let hi = (lo + self.config.window_len).min(n);
                let mut start = i;
                while start > lo && free(start - 1) {
                    start -= 1;
                }
                let mut end = i + 1;
                while end < hi && free(end) {
                    end += 1;
                }
                pts.clear();
                pts.extend(samples[start..end].iter().map(|s| (s.x_deg, s.y_deg)));
                Some(stage2_feature(self.kind, &pts))
            })
            .collect()
    }

    fn scores(&self, velocity: f64, is_saccade: bool, feature: Option<f64>) -> [f64; 3] {
        let v_thr = self.config.velocity_threshold_deg_s;
        if self.kind == BaselineKind::Ivt {
            let s = split_score(velocity, v_thr, 0.5, is_saccade);
            return [1.0 - s, s, 0.0];
        }
        let s = split_score(velocity, v_thr, CASCADE_PIVOT, is_saccade);
        let rest = 1.0 - s;
        match feature {
            Some(f) if !is_saccade => {
                let thr = self.config.stage2_threshold(self.kind);
                let g = split_score(f, thr, 0.5, f > thr);
                [rest * (1.0 - g), s, rest * g]
            }
            _ => [0.5 * rest, s, 0.5 * rest],
        }
    }
}

/// Pursuit-propensity feature of a window (larger means more pursuit-like).
fn stage2_feature(kind: BaselineKind, pts: &[(f64, f64)]) -> f64 {
    match kind {
        BaselineKind::Ivt => 0.0,
        BaselineKind::IvtIdt => dispersion(pts),
        BaselineKind::Ivmp => mean_turning_angle(pts).map_or(0.0, |a| PI - a),
        BaselineKind::Pca => pca_ratio(pts),
    }
}

impl Detector for Baseline {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn detect(&self, seq: &GazeSequence) -> Result<DetectorOutput> {
        if seq.len() < self.min_len() {
            return Err(Error::SequenceTooShort { len: seq.len(), required: self.min_len() });
        }
        let vel = velocities(seq);
        let thr = self.config.velocity_threshold_deg_s;
        let saccade: Vec<Option<bool>> = vel.iter().map(|v| v.map(|v| v > thr)).collect();
        let all: Vec<usize> = (0..seq.len()).collect();
        let features = if self.kind == BaselineKind::Ivt {
            vec![None; seq.len()]
        } else {
            self.stage2_features(seq, &saccade, &all)
        };
        let scores = vel
            .iter()
            .zip(&saccade)
            .zip(features)
            .map(|((v, sac), f)| Some(self.scores((*v)?, (*sac)?, f)))
            .collect();
        Ok(DetectorOutput::from_scores(scores))
    }
}

pub fn ivt_detect(seq: &GazeSequence, config: &BaselineConfig) -> Result<DetectorOutput> {
    Baseline::new(BaselineKind::Ivt, *config)?.detect(seq)
}

pub fn ivt_idt_detect(seq: &GazeSequence, config: &BaselineConfig) -> Result<DetectorOutput> {
    Baseline::new(BaselineKind::IvtIdt, *config)?.detect(seq)
}

pub fn ivmp_detect(seq: &GazeSequence, config: &BaselineConfig) -> Result<DetectorOutput> {
    Baseline::new(BaselineKind::Ivmp, *config)?.detect(seq)
}

pub fn pca_ratio_detect(seq: &GazeSequence, config: &BaselineConfig) -> Result<DetectorOutput> {
    Baseline::new(BaselineKind::Pca, *config)?.detect(seq)
}

/// Candidate thresholds for grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdGrid {
    pub velocity_deg_s: Vec<f64>,
    pub dispersion_deg: Vec<f64>,
    pub angle_rad: Vec<f64>,
    pub pca_ratio: Vec<f64>,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        Self {
            velocity_deg_s: log_space(10.0, 300.0, 20),
            dispersion_deg: log_space(0.2, 3.0, 20),
            angle_rad: lin_space(0.1 * PI, 0.9 * PI, 20),
            pca_ratio: log_space(1.5, 50.0, 20),
        }
    }
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Result of a threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuned {
    pub config: BaselineConfig,
    pub macro_f1: f64,
}

/// Grid search maximizing macro F1 over the given sample positions
/// (`positions[k]` indexes into `seqs[k]`). Ties keep the earliest grid
/// point. Only the thresholds relevant to `kind` are searched; the others
/// are copied from `base`.
pub fn tune_baseline(
    kind: BaselineKind,
    seqs: &[GazeSequence],
    positions: &[Vec<usize>],
    base: &BaselineConfig,
    grid: &ThresholdGrid,
) -> Result<Tuned> {
    if seqs.len() != positions.len() {
        return Err(Error::Misaligned(format!("{} sequences, {} position lists", seqs.len(), positions.len())));
    }
    if grid.velocity_deg_s.is_empty() {
        return Err(Error::Config("empty velocity grid".into()));
    }
    let truth: Vec<&[LabelClass]> = seqs.iter().map(|s| s.require_labels()).collect::<Result<_>>()?;
    let vels: Vec<Vec<Option<f64>>> = seqs.iter().map(velocities).collect();

    let second: Vec<f64> = match kind {
        BaselineKind::Ivt => vec![f64::NAN],
        BaselineKind::IvtIdt => grid.dispersion_deg.clone(),
        BaselineKind::Ivmp => grid.angle_rad.clone(),
        BaselineKind::Pca => grid.pca_ratio.clone(),
    };
    if second.is_empty() {
        return Err(Error::Config(format!("empty threshold grid for {kind}")));
    }

    let mut best: Option<Tuned> = None;
    for &v_thr in &grid.velocity_deg_s {
        let probe = Baseline::new(kind, BaselineConfig { velocity_threshold_deg_s: v_thr, ..*base })?;
        let mut per_seq = Vec::with_capacity(seqs.len());
        for (k, seq) in seqs.iter().enumerate() {
            let saccade: Vec<Option<bool>> = vels[k].iter().map(|v| v.map(|v| v > v_thr)).collect();
            let features = if kind == BaselineKind::Ivt {
                vec![None; positions[k].len()]
            } else {
                probe.stage2_features(seq, &saccade, &positions[k])
            };
            per_seq.push((saccade, features));
        }
        for &t2 in &second {
            let config = match kind {
                BaselineKind::Ivt => probe.config,
                BaselineKind::IvtIdt => BaselineConfig { dispersion_threshold_deg: t2, ..probe.config },
                BaselineKind::Ivmp => BaselineConfig { angle_threshold_rad: t2, ..probe.config },
                BaselineKind::Pca => BaselineConfig { pca_ratio_threshold: t2, ..probe.config },
            };
            let thr = config.stage2_threshold(kind);
            let mut counts = [[0u64; 3]; 3];
            for (k, (saccade, features)) in per_seq.iter().enumerate() {
                for (j, &i) in positions[k].iter().enumerate() {
                    let Some(is_sac) = saccade[i] else { continue };
                    let pred = if is_sac {
                        LabelClass::Saccade
                    } else {
                        match features[j] {
                            Some(f) if f > thr => LabelClass::Pursuit,
                            _ => LabelClass::Fixation,
                        }
                    };
                    counts[truth[k][i].index()][pred.index()] += 1;
                }
            }
            let macro_f1 = ConfusionMatrix::from_counts(counts).prf().macro_f1;
            if best.is_none_or(|b| macro_f1 > b.macro_f1) {
                best = Some(Tuned { config, macro_f1 });
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}
