//! Eye movement classification from raw gaze streams.
//!
//! Sliding windows of gaze samples are turned into FFT magnitude features
//! and scored by a small 1-D convolutional network trained with Adam. The
//! crate also carries threshold baselines (I-VT, I-VT/I-DT, IVMP, PCA
//! ratio), a scripted synthetic stimulus generator, and the evaluation
//! protocol used to compare them.

pub mod config;
pub mod detect;
pub mod error;
pub mod eval;
pub mod frontend;
pub mod io;
pub mod model;
pub mod net;
pub mod pipeline;
pub mod synth;

pub use config::RunConfig;
pub use detect::{Baseline, BaselineConfig, BaselineKind, CnnDetector, Detector, DetectorOutput};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, EvalReport, PrfReport, RocCurve};
pub use frontend::{FeatureMatrix, FrontendConfig};
pub use io::ModelFile;
pub use model::{Event, GazeSample, GazeSequence, LabelClass, Prediction};
pub use net::{NetworkParams, NetworkShape, TrainConfig};
pub use synth::StimulusConfig;
