//! Sliding-window frequency features.
//!
//! Each window of `window_len` consecutive samples is turned into a
//! `window_len × 2` matrix of unnormalized DFT magnitudes, one column per
//! gaze axis. The window's label belongs to the sample at `center_offset`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GazeSequence, LabelClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    pub window_len: usize,
    pub stride: usize,
    /// Zero-based position inside the window of the sample that receives
    /// the window's prediction.
    pub center_offset: usize,
    /// Longest run of invalid samples repaired by linear interpolation.
    pub interp_max_gap: usize,
    /// Subtract each channel's window mean before the transform.
    pub demean: bool,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self { window_len: 30, stride: 1, center_offset: 15, interp_max_gap: 3, demean: true }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::Config(format!("window_len {} < 2", self.window_len)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if self.center_offset >= self.window_len {
            return Err(Error::Config(format!(
                "center_offset {} outside window of {}",
                self.center_offset, self.window_len
            )));
        }
        Ok(())
    }
}

/// Raw gaze coordinates of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWindow {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub center_idx: usize,
}

/// `rows × 2` non-negative spectral magnitudes, stored row-major
/// (`values[2 * bin + channel]`). Channel 0 is horizontal, 1 vertical.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub const CHANNELS: usize = 2;

    pub fn from_columns(horizontal: &[f64], vertical: &[f64]) -> Result<Self> {
        if horizontal.len() != vertical.len() {
            return Err(Error::Shape(format!(
                "channel lengths differ: {} vs {}",
                horizontal.len(),
                vertical.len()
            )));
        }
        let values = horizontal.iter().zip(vertical).flat_map(|(&h, &v)| [h, v]).collect();
        Self::from_row_major(values)
    }

    pub fn from_row_major(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() % Self::CHANNELS != 0 {
            return Err(Error::Shape(format!("{} values do not form a ×2 matrix", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(Self { values })
    }

    pub fn zeros(rows: usize) -> Self {
        Self { values: vec![0.0; rows * Self::CHANNELS] }
    }

    pub fn rows(&self) -> usize {
        self.values.len() / Self::CHANNELS
    }

    pub fn get(&self, row: usize, channel: usize) -> f64 {
        self.values[row * Self::CHANNELS + channel]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, channel: usize) -> Vec<f64> {
        self.values.iter().skip(channel).step_by(Self::CHANNELS).copied().collect()
    }
}

/// Planned forward DFT of a fixed length, returning bin magnitudes.
#[derive(Clone)]
pub struct Spectrum {
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectrum").field("len", &self.fft.len()).finish()
    }
}

impl Spectrum {
    pub fn new(len: usize) -> Self {
        Self { fft: FftPlanner::new().plan_fft_forward(len) }
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fft.len() == 0
    }

    /// `|Σ_n signal[n]·e^{−2πikn/N}|` for every bin `k`, without 1/N scaling.
    pub fn magnitude(&self, signal: &[f64]) -> Result<Vec<f64>> {
        if signal.len() != self.len() {
            return Err(Error::Shape(format!(
                "signal of {} samples for a {}-point transform",
                signal.len(),
                self.len()
            )));
        }
        if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        Ok(buf.iter().map(|c| c.norm()).collect())
    }
}

/// One-off magnitude spectrum; prefer a reused [`Spectrum`] in loops.
pub fn fft_magnitude(signal: &[f64]) -> Result<Vec<f64>> {
    Spectrum::new(signal.len()).magnitude(signal)
}

/// Turns raw windows into feature matrices.
#[derive(Debug, Clone)]
pub struct Featurizer {
    config: FrontendConfig,
    spectrum: Spectrum,
}

impl Featurizer {
    pub fn new(config: FrontendConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, spectrum: Spectrum::new(config.window_len) })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.config
    }

    pub fn featurize(&self, window: &RawWindow) -> Result<FeatureMatrix> {
        let n = self.config.window_len;
        if window.xs.len() != n || window.ys.len() != n {
            return Err(Error::Shape(format!(
                "window of {}×{} samples, expected {n}",
                window.xs.len(),
                window.ys.len()
            )));
        }
        let prepare = |channel: &[f64]| -> Vec<f64> {
            if self.config.demean {
                let mean = channel.iter().sum::<f64>() / n as f64;
                channel.iter().map(|v| v - mean).collect()
            } else {
                channel.to_vec()
            }
        };
        let h = self.spectrum.magnitude(&prepare(&window.xs))?;
        let v = self.spectrum.magnitude(&prepare(&window.ys))?;
        FeatureMatrix::from_columns(&h, &v)
    }

    /// Every window position of `seq`, with invalid samples repaired where
    /// possible. Windows touching an irreparable gap are left out, so the
    /// returned centers may skip indices. Centers are strictly increasing.
    pub fn raw_windows(&self, seq: &GazeSequence) -> Result<Vec<RawWindow>> {
        let cfg = &self.config;
        if seq.len() < cfg.window_len {
            return Err(Error::SequenceTooShort { len: seq.len(), required: cfg.window_len });
        }
        let (xs, ys, usable) = repair_gaps(seq, cfg.interp_max_gap);

        // usable_prefix[i] = number of usable samples before i
        let mut usable_prefix = vec![0usize; usable.len() + 1];
        for (i, &u) in usable.iter().enumerate() {
            usable_prefix[i + 1] = usable_prefix[i] + usize::from(u);
        }

        let mut windows = Vec::new();
        let last_start = seq.len() - cfg.window_len;
        for start in (0..=last_start).step_by(cfg.stride) {
            let end = start + cfg.window_len;
            if usable_prefix[end] - usable_prefix[start] != cfg.window_len {
                continue;
            }
            windows.push(RawWindow {
                xs: xs[start..end].to_vec(),
                ys: ys[start..end].to_vec(),
                center_idx: start + cfg.center_offset,
            });
        }
        Ok(windows)
    }

    pub fn windows(&self, seq: &GazeSequence) -> Result<Vec<WindowFeature>> {
        self.raw_windows(seq)?
            .into_iter()
            .map(|w| Ok(WindowFeature { center_idx: w.center_idx, feature: self.featurize(&w)? }))
            .collect()
    }
}

/// Feature matrix for a single window (see [`Featurizer::featurize`]).
pub fn make_feature(window: &RawWindow, config: &FrontendConfig) -> Result<FeatureMatrix> {
    Featurizer::new(*config)?.featurize(window)
}

/// Feature matrices for every usable window of `seq`.
pub fn extract_windows(seq: &GazeSequence, config: &FrontendConfig) -> Result<Vec<WindowFeature>> {
    Featurizer::new(*config)?.windows(seq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowFeature {
    pub center_idx: usize,
    pub feature: FeatureMatrix,
}

/// A window feature with its ground truth and provenance, ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub seq_idx: usize,
    pub center_idx: usize,
    pub feature: FeatureMatrix,
    pub label: LabelClass,
}

/// Labeled windows for a whole corpus, in (sequence, center) order.
pub fn labeled_windows(seqs: &[GazeSequence], config: &FrontendConfig) -> Result<Vec<LabeledWindow>> {
    let featurizer = Featurizer::new(*config)?;
    let mut out = Vec::new();
    for (seq_idx, seq) in seqs.iter().enumerate() {
        let labels = seq.require_labels()?;
        for w in featurizer.windows(seq)? {
            out.push(LabeledWindow {
                seq_idx,
                center_idx: w.center_idx,
                feature: w.feature,
                label: labels[w.center_idx],
            });
        }
    }
    Ok(out)
}

/// Linearly interpolate invalid runs no longer than `max_gap`. Runs touching
/// either end of the recording are filled with the nearest valid value.
/// Returns the repaired coordinates and which samples are usable.
fn repair_gaps(seq: &GazeSequence, max_gap: usize) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let samples = seq.samples();
    let n = samples.len();
    let mut xs: Vec<f64> = samples.iter().map(|s| s.x_deg).collect();
    let mut ys: Vec<f64> = samples.iter().map(|s| s.y_deg).collect();
    let mut usable: Vec<bool> = samples.iter().map(|s| s.valid).collect();

    let mut i = 0;
    while i < n {
        if samples[i].valid {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !samples[i].valid {
            i += 1;
        }
        let end = i; // exclusive
        if end - start > max_gap {
            continue;
        }
        let before = start.checked_sub(1);
        let after = (end < n).then_some(end);
        match (before, after) {
            (Some(b), Some(a)) => {
                let span = (a - b) as f64;
                for k in start..end {
                    let f = (k - b) as f64 / span;
                    xs[k] = xs[b] + f * (xs[a] - xs[b]);
                    ys[k] = ys[b] + f * (ys[a] - ys[b]);
                    usable[k] = true;
                }
            }
            (Some(src), None) | (None, Some(src)) => {
                for k in start..end {
                    xs[k] = xs[src];
                    ys[k] = ys[src];
                    usable[k] = true;
                }
            }
            (None, None) => {}
        }
    }
    (xs, ys, usable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GazeSample;
    use std::f64::consts::PI;

    fn naive_dft(signal: &[f64]) -> Vec<f64> {
        let n = signal.len();
        (0..n)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, &s) in signal.iter().enumerate() {
                    let a = -2.0 * PI * (k * j) as f64 / n as f64;
                    re += s * a.cos();
                    im += s * a.sin();
                }
                re.hypot(im)
            })
            .collect()
    }

    fn seq_from(xs: &[f64], ys: &[f64]) -> GazeSequence {
        let samples = xs
            .iter()
            .zip(ys)
            .enumerate()
            .map(|(i, (&x, &y))| GazeSample::new(i as f64 * 10.0 / 3.0, x, y))
            .collect();
        GazeSequence::new(samples, None, "t").unwrap()
    }

    #[test]
    fn constant_signal_is_pure_dc() {
        let out = fft_magnitude(&[-0.7; 30]).unwrap();
        assert!((out[0] - 21.0).abs() < 1e-12);
        assert!(out[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn single_tone_lands_in_two_bins() {
        let s: Vec<f64> = (0..30).map(|n| (2.0 * PI * n as f64 * 3.0 / 30.0).cos()).collect();
        let out = fft_magnitude(&s).unwrap();
        for (k, v) in out.iter().enumerate() {
            let expected = if k == 3 || k == 27 { 15.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-9, "bin {k}: {v}");
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut s = [0.0; 30];
        s[4] = f64::NAN;
        assert!(matches!(fft_magnitude(&s), Err(Error::NonFinite { index: 4 })));
    }

    #[test]
    fn stationary_window_has_zero_features() {
        let w = RawWindow { xs: vec![3.0; 30], ys: vec![-2.0; 30], center_idx: 15 };
        let f = make_feature(&w, &FrontendConfig::default()).unwrap();
        assert!(f.as_slice().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn ramp_energy_sits_in_low_bins() {
        let xs: Vec<f64> = (0..30).map(|n| 0.1 * n as f64).collect();
        let w = RawWindow { xs: xs.clone(), ys: vec![0.0; 30], center_idx: 15 };
        let f = make_feature(&w, &FrontendConfig::default()).unwrap();
        let mean = xs.iter().sum::<f64>() / 30.0;
        let oracle = naive_dft(&xs.iter().map(|v| v - mean).collect::<Vec<_>>());
        for k in 0..30 {
            assert!((f.get(k, 0) - oracle[k]).abs() < 1e-9);
        }
        assert!(f.get(1, 0) > f.get(14, 0));
    }

    #[test]
    fn alternating_jitter_is_nyquist() {
        let xs: Vec<f64> = (0..30).map(|n| if n % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let w = RawWindow { xs, ys: vec![0.0; 30], center_idx: 15 };
        let f = make_feature(&w, &FrontendConfig::default()).unwrap();
        assert!((f.get(15, 0) - 3.0).abs() < 1e-12);
        for k in (0..30).filter(|&k| k != 15) {
            assert!(f.get(k, 0) < 1e-9);
        }
    }

    #[test]
    fn window_counts_and_centers() {
        let cfg = FrontendConfig::default();
        let one = extract_windows(&seq_from(&[0.0; 30], &[0.0; 30]), &cfg).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].center_idx, 15);

        let many = extract_windows(&seq_from(&[0.0; 100], &[0.0; 100]), &cfg).unwrap();
        assert_eq!(many.len(), 71);
        assert_eq!(many.first().unwrap().center_idx, 15);
        assert_eq!(many.last().unwrap().center_idx, 85);
    }

    #[test]
    fn short_sequence_is_an_error() {
        let r = extract_windows(&seq_from(&[0.0; 29], &[0.0; 29]), &FrontendConfig::default());
        assert!(matches!(r, Err(Error::SequenceTooShort { len: 29, required: 30 })));
    }

    #[test]
    fn long_gap_skips_every_overlapping_window() {
        let mut samples: Vec<GazeSample> =
            (0..100).map(|i| GazeSample::new(i as f64 * 10.0 / 3.0, 0.01 * i as f64, 0.0)).collect();
        for s in &mut samples[40..=50] {
            *s = GazeSample::invalid(s.t_ms);
        }
        let seq = GazeSequence::new(samples, None, "gap").unwrap();
        let windows = extract_windows(&seq, &FrontendConfig::default()).unwrap();

        // enumerate window starts and keep those not touching 40..=50
        let expected: Vec<usize> =
            (0..=70).filter(|&s| s + 29 < 40 || s > 50).map(|s| s + 15).collect();
        let got: Vec<usize> = windows.iter().map(|w| w.center_idx).collect();
        assert_eq!(got, expected);
        assert_eq!(got.len(), 31);
    }

    #[test]
    fn short_gap_is_interpolated() {
        let mut samples: Vec<GazeSample> =
            (0..40).map(|i| GazeSample::new(i as f64 * 10.0 / 3.0, 0.5 * i as f64, 1.0)).collect();
        for s in &mut samples[10..13] {
            *s = GazeSample::invalid(s.t_ms);
        }
        let seq = GazeSequence::new(samples, None, "gap").unwrap();
        let f = Featurizer::new(FrontendConfig::default()).unwrap();
        let windows = f.raw_windows(&seq).unwrap();
        assert_eq!(windows.len(), 11);
        for (k, x) in windows[0].xs.iter().enumerate() {
            assert!((x - 0.5 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn stride_thins_windows() {
        let cfg = FrontendConfig { stride: 10, ..FrontendConfig::default() };
        let w = extract_windows(&seq_from(&[0.0; 100], &[0.0; 100]), &cfg).unwrap();
        let centers: Vec<usize> = w.iter().map(|w| w.center_idx).collect();
        assert_eq!(centers, vec![15, 25, 35, 45, 55, 65, 75, 85]);
    }
}
