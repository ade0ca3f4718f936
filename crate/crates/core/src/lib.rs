//! Heart-rate estimation from wrist PPG under motion, by joint harmonic-sum
//! modelling of the artifact and the heartbeat.

pub mod error;
pub mod harmonic;
pub mod io;
pub mod joint;
pub mod lstsq;
pub mod metrics;
pub mod pipeline;
pub mod signal;
pub mod stft;

pub use error::{Error, Result};
pub use harmonic::{
    fit_fundamental, fit_multiaxis, CombineMode, GridSpec, HarmonicFitter, HsumFit, MotionSource,
};
pub use joint::{fit_heart_fundamental, JointConfig, JointFit, JointFitter};
pub use metrics::{evaluate, evaluate_series, BlandAltman, EvalReport};
pub use pipeline::{estimate_hr, Estimator, HrSeries, HrWindow, MedianFilter, PipelineConfig};
pub use signal::{MultiAxisSignal, SampledSignal, WindowPlan};
pub use stft::{spectrogram, stft_peak_bpm, Spectrogram, StftConfig};
