//! Sampled signals, sliding-window segmentation and synthetic harmonic sources.

use std::borrow::Cow;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled real-valued time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Three-axis accelerometer recording. All axes share length and rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAxisSignal {
    axes: [SampledSignal; 3],
}

impl MultiAxisSignal {
    pub fn new(x: SampledSignal, y: SampledSignal, z: SampledSignal) -> Result<Self> {
        for other in [&y, &z] {
            if other.len() != x.len() {
                return Err(Error::LengthMismatch {
                    what: "accelerometer axes",
                    left: x.len(),
                    right: other.len(),
                });
            }
            if other.sample_rate_hz() != x.sample_rate_hz() {
                return Err(Error::InvalidParameter(
                    "accelerometer axes have different sample rates".into(),
                ));
            }
        }
        Ok(Self { axes: [x, y, z] })
    }

    pub fn axis(&self, i: usize) -> &SampledSignal {
        &self.axes[i]
    }

    pub fn axes(&self) -> &[SampledSignal; 3] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes[0].is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.axes[0].sample_rate_hz()
    }

    /// Per-sample Euclidean magnitude of the three axes.
    pub fn magnitude(&self) -> SampledSignal {
        let [x, y, z] = &self.axes;
        let samples = x
            .samples()
            .iter()
            .zip(y.samples())
            .zip(z.samples())
            .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
            .collect();
        SampledSignal {
            samples,
            sample_rate_hz: self.sample_rate_hz(),
        }
    }
}

/// Sliding-window layout in seconds. Converted to samples with
/// `round(seconds * rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window_len_s: f64,
    pub hop_s: f64,
}

impl Default for WindowPlan {
    fn default() -> Self {
        Self {
            window_len_s: 8.0,
            hop_s: 2.0,
        }
    }
}

impl WindowPlan {
    pub fn new(window_len_s: f64, hop_s: f64) -> Result<Self> {
        let plan = Self {
            window_len_s,
            hop_s,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_len_s.is_finite() && self.hop_s.is_finite())
            || self.hop_s <= 0.0
            || self.hop_s > self.window_len_s
        {
            return Err(Error::InvalidParameter(format!(
                "window plan needs 0 < hop <= window, got window {} s, hop {} s",
                self.window_len_s, self.hop_s
            )));
        }
        Ok(())
    }

    pub fn window_len_samples(&self, sample_rate_hz: f64) -> usize {
        (self.window_len_s * sample_rate_hz).round() as usize
    }

    pub fn hop_samples(&self, sample_rate_hz: f64) -> usize {
        (self.hop_s * sample_rate_hz).round() as usize
    }

    /// Checks that every window is long enough for an overdetermined fit with
    /// `max_model_order` harmonics plus DC.
    pub fn check_overdetermined(&self, sample_rate_hz: f64, max_model_order: usize) -> Result<()> {
        self.validate()?;
        let len = self.window_len_samples(sample_rate_hz);
        let needed = 2 * (2 * max_model_order + 1);
        if len < needed {
            return Err(Error::InvalidParameter(format!(
                "window of {len} samples is too short for order {max_model_order} (need {needed})"
            )));
        }
        if self.hop_samples(sample_rate_hz) == 0 {
            return Err(Error::InvalidParameter("hop rounds to zero samples".into()));
        }
        Ok(())
    }

    /// Number of complete windows that fit into `len` samples.
    pub fn window_count(&self, len: usize, sample_rate_hz: f64) -> usize {
        let w = self.window_len_samples(sample_rate_hz);
        let h = self.hop_samples(sample_rate_hz).max(1);
        if len < w || w == 0 {
            0
        } else {
            (len - w) / h + 1
        }
    }
}

/// One analysis window. `start` is the index of its first sample in the
/// parent signal.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowView<'a> {
    pub index: usize,
    pub start: usize,
    pub samples: Cow<'a, [f64]>,
}

impl WindowView<'_> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        energy(&self.samples)
    }
}

/// Splits `signal` into complete windows starting at multiples of the hop.
/// Trailing samples that cannot fill a window are dropped.
pub fn segment<'a>(signal: &'a SampledSignal, plan: &WindowPlan) -> Result<Vec<WindowView<'a>>> {
    plan.validate()?;
    let fs = signal.sample_rate_hz();
    let w = plan.window_len_samples(fs);
    let h = plan.hop_samples(fs);
    if w == 0 || h == 0 {
        return Err(Error::InvalidParameter(
            "window or hop rounds to zero samples".into(),
        ));
    }
    if signal.len() < w {
        return Err(Error::TooShort {
            len: signal.len(),
            needed: w,
        });
    }
    let count = (signal.len() - w) / h + 1;
    Ok((0..count)
        .map(|index| {
            let start = index * h;
            WindowView {
                index,
                start,
                samples: Cow::Borrowed(&signal.samples()[start..start + w]),
            }
        })
        .collect())
}

/// Subtracts the arithmetic mean. A second correction pass removes the
/// rounding left over by the first.
pub fn mean_remove(window: WindowView<'_>) -> WindowView<'_> {
    let mut samples = window.samples.into_owned();
    subtract_mean(&mut samples);
    WindowView {
        index: window.index,
        start: window.start,
        samples: Cow::Owned(samples),
    }
}

pub(crate) fn subtract_mean(samples: &mut [f64]) {
    if samples.is_empty() {
        return;
    }
    for _ in 0..2 {
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        if mean == 0.0 {
            break;
        }
        samples.iter_mut().for_each(|v| *v -= mean);
    }
}

pub fn energy(samples: &[f64]) -> f64 {
    samples.iter().map(|v| v * v).sum()
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        0.0
    } else {
        (energy(samples) / samples.len() as f64).sqrt()
    }
}

/// A truncated harmonic series: `dc + sum_k cos[k-1] cos(2 pi k f0 t) + sin[k-1] sin(2 pi k f0 t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HarmonicSeries {
    pub f0_hz: f64,
    pub dc: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl HarmonicSeries {
    pub fn new(f0_hz: f64, dc: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self {
            f0_hz,
            dc,
            cos,
            sin,
        }
    }

    /// Parses `f0,a1,..,aM,b1,..,bM`.
    pub fn from_coefficients(values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "expected f0 followed by M cosine and M sine coefficients, got {} values",
                values.len()
            )));
        }
        let m = (values.len() - 1) / 2;
        Ok(Self {
            f0_hz: values[0],
            dc: 0.0,
            cos: values[1..1 + m].to_vec(),
            sin: values[1 + m..].to_vec(),
        })
    }

    pub fn order(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    pub fn synthesize(&self, n_samples: usize, sample_rate_hz: f64) -> Result<SampledSignal> {
        synth_harmonic(
            self.f0_hz,
            &self.cos,
            &self.sin,
            self.dc,
            n_samples,
            sample_rate_hz,
        )
    }
}

pub(crate) fn check_nyquist(f0_hz: f64, order: usize, sample_rate_hz: f64) -> Result<()> {
    let nyquist_hz = sample_rate_hz / 2.0;
    if order > 0 && order as f64 * f0_hz >= nyquist_hz {
        return Err(Error::Nyquist {
            harmonic: order,
            freq_hz: order as f64 * f0_hz,
            nyquist_hz,
        });
    }
    Ok(())
}

/// Generates `dc + sum_k a_k cos(2 pi k n f0/fs) + b_k sin(2 pi k n f0/fs)`.
pub fn synth_harmonic(
    f0_hz: f64,
    cos: &[f64],
    sin: &[f64],
    dc: f64,
    n_samples: usize,
    sample_rate_hz: f64,
) -> Result<SampledSignal> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    if !(f0_hz.is_finite() && f0_hz >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fundamental must be non-negative, got {f0_hz}"
        )));
    }
    let order = cos.len().max(sin.len());
    check_nyquist(f0_hz, order, sample_rate_hz)?;
    let samples = harmonic_sum(f0_hz, cos, sin, dc, n_samples, sample_rate_hz);
    SampledSignal::new(samples, sample_rate_hz)
}

/// Evaluates a harmonic series without validation.
pub(crate) fn harmonic_sum(
    f0_hz: f64,
    cos: &[f64],
    sin: &[f64],
    dc: f64,
    n_samples: usize,
    sample_rate_hz: f64,
) -> Vec<f64> {
    let order = cos.len().max(sin.len());
    let coef = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    (0..n_samples)
        .map(|n| {
            let base = 2.0 * PI * n as f64 * f0_hz / sample_rate_hz;
            dc + (0..order)
                .map(|k| {
                    let phase = (k + 1) as f64 * base;
                    coef(cos, k) * phase.cos() + coef(sin, k) * phase.sin()
                })
                .sum::<f64>()
        })
        .collect()
}

/// Gaussian white noise with the given RMS, reproducible from `seed`.
pub fn white_noise(n_samples: usize, rms: f64, seed: u64) -> Vec<f64> {
    if rms == 0.0 {
        return vec![0.0; n_samples];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, rms).expect("rms is finite and positive");
    (0..n_samples).map(|_| normal.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(n: usize) -> SampledSignal {
        SampledSignal::new((0..n).map(|i| i as f64).collect(), 125.0).unwrap()
    }

    #[test]
    fn segment_window_count() {
        let s = sig(37_500);
        let plan = WindowPlan::default();
        let windows = segment(&s, &plan).unwrap();
        assert_eq!(windows.len(), (37_500 - 1000) / 250 + 1);
        assert_eq!(windows.len(), 147);
        for (i, w) in windows.iter().enumerate() {
            assert_eq!(w.start, i * 250);
            assert_eq!(w.len(), 1000);
        }
        assert_eq!(plan.window_count(37_500, 125.0), 147);
    }

    #[test]
    fn segment_exact_one_window() {
        let s = sig(1000);
        let windows = segment(&s, &WindowPlan::default()).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].start, 0);
    }

    #[test]
    fn segment_too_short() {
        let s = sig(999);
        assert!(matches!(
            segment(&s, &WindowPlan::default()),
            Err(Error::TooShort { len: 999, needed: 1000 })
        ));
    }

    #[test]
    fn window_plan_rejects_bad_hop() {
        assert!(WindowPlan::new(8.0, 0.0).is_err());
        assert!(WindowPlan::new(8.0, 9.0).is_err());
        assert!(WindowPlan::new(8.0, 8.0).is_ok());
        let plan = WindowPlan::default();
        assert_eq!(plan.window_len_samples(125.0), 1000);
        assert_eq!(plan.hop_samples(125.0), 250);
        assert!(plan.check_overdetermined(125.0, 17).is_ok());
        assert!(WindowPlan::new(0.2, 0.1)
            .unwrap()
            .check_overdetermined(125.0, 17)
            .is_err());
    }

    #[test]
    fn signal_rejects_nan_and_bad_rate() {
        assert!(matches!(
            SampledSignal::new(vec![1.0, f64::NAN], 125.0),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(SampledSignal::new(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn synth_dc_only() {
        let s = synth_harmonic(0.0, &[0.0], &[0.0], 1.0, 16, 125.0).unwrap();
        assert!(s.samples().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn synth_pure_cosine() {
        let s = synth_harmonic(1.5, &[1.0], &[], 0.0, 1000, 125.0).unwrap();
        for (n, v) in s.samples().iter().enumerate() {
            let expect = (2.0 * PI * 1.5 * n as f64 / 125.0).cos();
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn synth_rejects_above_nyquist() {
        assert!(matches!(
            synth_harmonic(10.0, &[0.0; 7], &[], 0.0, 100, 125.0),
            Err(Error::Nyquist { .. })
        ));
    }

    #[test]
    fn harmonic_series_parsing() {
        let s = HarmonicSeries::from_coefficients(&[1.2, 1.0, 0.5, 0.0, 0.25]).unwrap();
        assert_eq!(s.f0_hz, 1.2);
        assert_eq!(s.cos, vec![1.0, 0.5]);
        assert_eq!(s.sin, vec![0.0, 0.25]);
        assert!(HarmonicSeries::from_coefficients(&[1.2, 1.0]).is_err());
    }

    fn view(samples: Vec<f64>) -> WindowView<'static> {
        WindowView {
            index: 0,
            start: 0,
            samples: Cow::Owned(samples),
        }
    }

    #[test]
    fn mean_remove_cases() {
        assert!(mean_remove(view(vec![5.0; 10]))
            .samples
            .iter()
            .all(|&v| v == 0.0));
        assert!(mean_remove(view(vec![0.0; 10]))
            .samples
            .iter()
            .all(|&v| v == 0.0));
        assert_eq!(&*mean_remove(view(vec![1.0, 2.0, 3.0])).samples, &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn mean_remove_idempotent() {
        let x: Vec<f64> = white_noise(500, 2.0, 7).iter().map(|v| v + 3.0).collect();
        let once = mean_remove(view(x));
        let r = rms(&once.samples);
        let mean = once.samples.iter().sum::<f64>() / once.len() as f64;
        assert!(mean.abs() <= 1e-12 * r);
        let twice = mean_remove(once.clone());
        for (a, b) in once.samples.iter().zip(twice.samples.iter()) {
            assert!((a - b).abs() <= 1e-12 * r);
        }
    }

    #[test]
    fn noise_is_reproducible() {
        assert_eq!(white_noise(32, 1.0, 3), white_noise(32, 1.0, 3));
        assert_ne!(white_noise(32, 1.0, 3), white_noise(32, 1.0, 4));
        assert!(white_noise(8, 0.0, 1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn magnitude_of_axes() {
        let a = SampledSignal::new(vec![3.0, 0.0], 10.0).unwrap();
        let b = SampledSignal::new(vec![4.0, 0.0], 10.0).unwrap();
        let c = SampledSignal::new(vec![0.0, 2.0], 10.0).unwrap();
        let m = MultiAxisSignal::new(a, b, c).unwrap().magnitude();
        assert_eq!(m.samples(), &[5.0, 2.0]);
    }
}
