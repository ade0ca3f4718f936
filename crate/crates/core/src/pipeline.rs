//! Per-recording heart-rate estimation.
//!
//! For every window: fit the accelerometer to get the motion fundamental,
//! fit the joint model to the PPG window with that fundamental fixed, and
//! report `60 * f_oh`. An optional 3-point median runs over the window
//! sequence afterwards.

use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{fit_multiaxis, CombineMode, GridSpec, HarmonicFitter, MultiAxisFit};
use crate::joint::{JointConfig, JointFit, JointFitter};
use crate::signal::{segment, subtract_mean, MultiAxisSignal, SampledSignal, WindowPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MedianFilter {
    #[default]
    Off,
    ThreePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub window: WindowPlan,
    pub motion_grid: GridSpec,
    pub heart_grid: GridSpec,
    pub motion_order: usize,
    pub heart_order: usize,
    pub combine: CombineMode,
    pub median: MedianFilter,
    /// 1-based PPG channel used by recording-level entry points.
    pub ppg_channel: usize,
    pub mean_remove: bool,
    pub collision_tol_hz: f64,
    pub cap_heart_order: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: WindowPlan::default(),
            motion_grid: GridSpec::motion_default(),
            heart_grid: GridSpec::heart_default(),
            motion_order: 17,
            heart_order: 7,
            combine: CombineMode::BestAxis,
            median: MedianFilter::Off,
            ppg_channel: 2,
            mean_remove: false,
            collision_tol_hz: 0.02,
            cap_heart_order: false,
        }
    }
}

impl PipelineConfig {
    /// Causal configuration: no median filter, so no look-ahead window.
    pub fn online() -> Self {
        Self {
            median: MedianFilter::Off,
            ..Self::default()
        }
    }

    pub fn joint_config(&self) -> JointConfig {
        JointConfig {
            heart_grid: self.heart_grid,
            motion_order: self.motion_order,
            heart_order: self.heart_order,
            collision_tol_hz: self.collision_tol_hz,
            cap_heart_order: self.cap_heart_order,
        }
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        self.window
            .check_overdetermined(sample_rate_hz, self.motion_order + self.heart_order)?;
        self.motion_grid.validate()?;
        self.heart_grid.validate()?;
        self.combine.validate()?;
        if !(1..=2).contains(&self.ppg_channel) {
            return Err(Error::InvalidParameter(format!(
                "PPG channel must be 1 or 2, got {}",
                self.ppg_channel
            )));
        }
        Ok(())
    }
}

/// Estimate and diagnostics for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrWindow {
    pub index: usize,
    pub start_time_s: f64,
    pub hr_bpm: f64,
    pub f_oa_hz: f64,
    pub se_p: f64,
    /// `se_p` over the energy of the accelerometer window the motion fit
    /// used; NaN when that window is all zeros.
    pub relative_error_energy: f64,
    pub collision_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HrSeries {
    pub windows: Vec<HrWindow>,
}

impl HrSeries {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn hr_bpm(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.hr_bpm).collect()
    }
}

/// Full per-window result.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFit {
    pub index: usize,
    pub start: usize,
    pub motion: MultiAxisFit,
    pub joint: JointFit,
}

/// Reusable estimator: grid factorisations are built once per sample rate.
#[derive(Debug, Clone)]
pub struct Estimator {
    config: PipelineConfig,
    sample_rate_hz: f64,
    motion: HarmonicFitter,
    joint: JointFitter,
}

impl Estimator {
    pub fn new(config: PipelineConfig, sample_rate_hz: f64) -> Result<Self> {
        config.validate(sample_rate_hz)?;
        let n = config.window.window_len_samples(sample_rate_hz);
        let motion = HarmonicFitter::new(
            &config.motion_grid,
            config.motion_order,
            n,
            sample_rate_hz,
            true,
        )?;
        let joint = JointFitter::new(config.joint_config(), n, sample_rate_hz)?;
        Ok(Self {
            config,
            sample_rate_hz,
            motion,
            joint,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn check_inputs(&self, ppg: &SampledSignal, acc: &MultiAxisSignal) -> Result<()> {
        if ppg.len() != acc.len() {
            return Err(Error::LengthMismatch {
                what: "PPG vs accelerometer samples",
                left: ppg.len(),
                right: acc.len(),
            });
        }
        if ppg.sample_rate_hz() != self.sample_rate_hz || acc.sample_rate_hz() != self.sample_rate_hz
        {
            return Err(Error::InvalidParameter(format!(
                "signals must be sampled at {} Hz",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }

    /// Motion and joint fits for every window, in window order.
    pub fn fit_windows(&self, ppg: &SampledSignal, acc: &MultiAxisSignal) -> Result<Vec<WindowFit>> {
        self.check_inputs(ppg, acc)?;
        let ppg_windows = segment(ppg, &self.config.window)?;
        let axis_windows = [
            segment(acc.axis(0), &self.config.window)?,
            segment(acc.axis(1), &self.config.window)?,
            segment(acc.axis(2), &self.config.window)?,
        ];
        let prep = |s: &Cow<'_, [f64]>| -> Vec<f64> {
            let mut v = s.to_vec();
            if self.config.mean_remove {
                subtract_mean(&mut v);
            }
            v
        };
        ppg_windows
            .par_iter()
            .enumerate()
            .map(|(i, pw)| {
                let axes = [
                    prep(&axis_windows[0][i].samples),
                    prep(&axis_windows[1][i].samples),
                    prep(&axis_windows[2][i].samples),
                ];
                let x = prep(&pw.samples);
                let motion = fit_multiaxis(
                    [&axes[0], &axes[1], &axes[2]],
                    &self.motion,
                    self.config.combine,
                )?;
                let f_oa = motion.fit.f0_hz;
                let cached = self.motion.index_of(f_oa).map(|k| self.motion.factor(k));
                let joint = self.joint.fit(&x, f_oa, cached)?;
                Ok(WindowFit {
                    index: pw.index,
                    start: pw.start,
                    motion,
                    joint,
                })
            })
            .collect()
    }

    pub fn run(&self, ppg: &SampledSignal, acc: &MultiAxisSignal) -> Result<HrSeries> {
        let fits = self.fit_windows(ppg, acc)?;
        let series = HrSeries {
            windows: fits
                .iter()
                .map(|w| HrWindow {
                    index: w.index,
                    start_time_s: w.start as f64 / self.sample_rate_hz,
                    hr_bpm: w.joint.hr_bpm,
                    f_oa_hz: w.joint.f_oa_hz,
                    se_p: w.joint.se_p,
                    relative_error_energy: if w.motion.energy > 0.0 {
                        w.joint.se_p / w.motion.energy
                    } else {
                        f64::NAN
                    },
                    collision_flag: w.joint.collision_flag,
                })
                .collect(),
        };
        Ok(match self.config.median {
            MedianFilter::Off => series,
            MedianFilter::ThreePoint => median3(&series),
        })
    }
}

/// Estimates heart rate for every window of a recording.
pub fn estimate_hr(
    ppg: &SampledSignal,
    acc: &MultiAxisSignal,
    config: &PipelineConfig,
) -> Result<HrSeries> {
    Estimator::new(*config, ppg.sample_rate_hz())?.run(ppg, acc)
}

fn median_of3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(a.min(b).max(c))
}

/// 3-point running median of `hr_bpm`; the first and last window pass
/// through and all diagnostics are left untouched.
pub fn median3(series: &HrSeries) -> HrSeries {
    let hr = series.hr_bpm();
    let mut out = series.clone();
    for i in 1..hr.len().saturating_sub(1) {
        out.windows[i].hr_bpm = median_of3(hr[i - 1], hr[i], hr[i + 1]);
    }
    out
}
