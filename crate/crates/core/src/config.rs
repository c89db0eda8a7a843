//! TOML run configuration. Every section is optional and every key falls
//! back to its default; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::{BaselineConfig, ThresholdGrid};
use crate::error::{Error, Result};
use crate::eval::EvaluationConfig;
use crate::frontend::FrontendConfig;
use crate::model::{SplitMode, SplitRatios};
use crate::net::{NetworkShape, PhaseConfig, TrainConfig};
use crate::synth::StimulusConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub kernel_len: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { kernel_len: NetworkShape::default().kernel_len }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub phase1: PhaseConfig,
    pub phase2: PhaseConfig,
    pub batch_size: usize,
    pub shuffle: bool,
    /// Seeds the split, the weight init and the batch order.
    pub seed: u64,
    pub split: SplitRatios,
    pub split_mode: SplitMode,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            phase1: t.phase1,
            phase2: t.phase2,
            batch_size: t.batch_size,
            shuffle: t.shuffle,
            seed: t.seed,
            split: SplitRatios::default(),
            split_mode: SplitMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselinesSection {
    /// Thresholds used when no tuning is done.
    pub velocity_threshold_deg_s: f64,
    pub dispersion_threshold_deg: f64,
    pub angle_threshold_rad: f64,
    pub pca_ratio_threshold: f64,
    pub window_len: usize,
    pub grid: ThresholdGrid,
}

impl Default for BaselinesSection {
    fn default() -> Self {
        let b = BaselineConfig::default();
        Self {
            velocity_threshold_deg_s: b.velocity_threshold_deg_s,
            dispersion_threshold_deg: b.dispersion_threshold_deg,
            angle_threshold_rad: b.angle_threshold_rad,
            pca_ratio_threshold: b.pca_ratio_threshold,
            window_len: b.window_len,
            grid: ThresholdGrid::default(),
        }
    }
}

impl BaselinesSection {
    pub fn config(&self) -> BaselineConfig {
        BaselineConfig {
            velocity_threshold_deg_s: self.velocity_threshold_deg_s,
            dispersion_threshold_deg: self.dispersion_threshold_deg,
            angle_threshold_rad: self.angle_threshold_rad,
            pca_ratio_threshold: self.pca_ratio_threshold,
            window_len: self.window_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub frontend: FrontendConfig,
    pub network: NetworkConfig,
    pub training: TrainingSection,
    pub baselines: BaselinesSection,
    pub stimulus: StimulusConfig,
    pub evaluation: EvaluationConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            phase1: self.training.phase1,
            phase2: self.training.phase2,
            batch_size: self.training.batch_size,
            seed: self.training.seed,
            shuffle: self.training.shuffle,
            kernel_len: self.network.kernel_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.frontend.validate()?;
        self.train_config().validate()?;
        NetworkShape { input_len: self.frontend.window_len, ..NetworkShape::with_kernel_len(self.network.kernel_len) }
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.training.split.validate()?;
        self.baselines.config().validate()?;
        let g = &self.baselines.grid;
        for (name, values) in
            [("velocity", &g.velocity_deg_s), ("dispersion", &g.dispersion_deg), ("angle", &g.angle_rad), ("pca", &g.pca_ratio)]
        {
            if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Config(format!("baseline {name} grid must be non-empty and positive")));
            }
        }
        self.stimulus.validate()?;
        self.evaluation.validate()
    }
}

/// Annotated example with every key at its default.
pub const EXAMPLE_CONFIG: &str = r#"# Every key is optional. Values shown are the defaults.

[frontend]
window_len = 30        # samples per window
stride = 1             # samples between window starts
center_offset = 15     # window position that receives the prediction
interp_max_gap = 3     # longest invalid run repaired by interpolation
demean = true          # subtract the window mean before the FFT

[network]
kernel_len = 10        # convolution taps; 10 filters, pooling factor 5

[training]
batch_size = 64
shuffle = true
seed = 0               # split, weight init and batch order
split_mode = "window"  # or "sequence" to keep recordings whole
split = { train = 0.75, validation = 0.125, test = 0.125 }
phase1 = { epochs = 100, alpha = 0.001, beta1 = 0.9, beta2 = 0.99, epsilon = 1e-8 }
phase2 = { epochs = 200, alpha = 0.002, beta1 = 0.85, beta2 = 0.1, epsilon = 1e-8 }

[baselines]
velocity_threshold_deg_s = 50.0
dispersion_threshold_deg = 1.0
angle_threshold_rad = 1.5707963267948966
pca_ratio_threshold = 5.0
window_len = 30

[baselines.grid]       # searched on the validation split by `compare`
velocity_deg_s = [10.0, 300.0]   # any list of candidates
dispersion_deg = [0.2, 3.0]
angle_rad = [0.3141592653589793, 2.827433388230814]
pca_ratio = [1.5, 50.0]

[stimulus]
rate_hz = 300.0
screen_half_extent_deg = 11.0
n_star_positions = 88
fixation_dur_ms = [100.0, 400.0]
pursuit_speed_deg_s = [5.0, 35.0]
saccade_dur_ms = [10.0, 100.0]
pursuit_dur_ms = [2000.0, 10000.0]  # bouncing and accelerating pursuits
noise_sigma_deg = 0.05
tremor_sigma_deg = 0.02
sequence_dur_ms = 20000.0
target_event_counts = [1626, 2647, 1089]  # fixation, saccade, pursuit
seed = 0
mix = { to_target = 1.0, bouncing = 1.0, accelerating = 1.0 }

[evaluation]
confidence_thresholds = [0.0, 0.5, 0.9]
"#;
