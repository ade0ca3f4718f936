//! Short-time spectrum baseline: Hann-windowed, zero-padded FFT per window,
//! heart rate read off the magnitude peak.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{HrSeries, HrWindow};
use crate::signal::{segment, SampledSignal, WindowPlan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub fft_len: usize,
    pub window: WindowPlan,
    /// Peak search band in Hz; `None` searches every bin.
    pub band_hz: Option<(f64, f64)>,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_len: 2048,
            window: WindowPlan::default(),
            band_hz: Some((0.5, 3.0)),
        }
    }
}

impl StftConfig {
    pub fn full_band(self) -> Self {
        Self {
            band_hz: None,
            ..self
        }
    }

    fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        self.window.validate()?;
        let w = self.window.window_len_samples(sample_rate_hz);
        if self.fft_len < w || self.fft_len < 2 {
            return Err(Error::InvalidParameter(format!(
                "FFT length {} is shorter than the {w}-sample window",
                self.fft_len
            )));
        }
        if let Some((lo, hi)) = self.band_hz {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "bad search band [{lo}, {hi}] Hz"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric Hann window `0.5 - 0.5 cos(2 pi n / (N - 1))`.
pub fn hann(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
            .collect(),
    }
}

/// One-sided magnitude spectrogram, bins `0..=fft_len/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub bin_hz: Vec<f64>,
    pub window_start_s: Vec<f64>,
    /// `magnitudes[window][bin]`.
    pub magnitudes: Vec<Vec<f64>>,
}

struct Transformer {
    fft: Arc<dyn Fft<f64>>,
    taper: Vec<f64>,
    buf: Vec<Complex<f64>>,
}

impl Transformer {
    fn new(fft_len: usize, window_len: usize) -> Self {
        Self {
            fft: FftPlanner::new().plan_fft_forward(fft_len),
            taper: hann(window_len),
            buf: vec![Complex::new(0.0, 0.0); fft_len],
        }
    }

    fn magnitudes(&mut self, samples: &[f64]) -> Vec<f64> {
        self.buf.fill(Complex::new(0.0, 0.0));
        for ((b, &x), &w) in self.buf.iter_mut().zip(samples).zip(&self.taper) {
            b.re = x * w;
        }
        self.fft.process(&mut self.buf);
        self.buf[..=self.buf.len() / 2].iter().map(|c| c.norm()).collect()
    }
}

pub fn spectrogram(signal: &SampledSignal, config: &StftConfig) -> Result<Spectrogram> {
    let fs = signal.sample_rate_hz();
    config.validate(fs)?;
    let windows = segment(signal, &config.window)?;
    let w = config.window.window_len_samples(fs);
    let mut tf = Transformer::new(config.fft_len, w);
    Ok(Spectrogram {
        bin_hz: (0..=config.fft_len / 2)
            .map(|k| k as f64 * fs / config.fft_len as f64)
            .collect(),
        window_start_s: windows.iter().map(|v| v.start as f64 / fs).collect(),
        magnitudes: windows.iter().map(|v| tf.magnitudes(&v.samples)).collect(),
    })
}

/// Per-window heart rate as `60 *` the frequency of the largest bin within
/// the search band. Motion diagnostics in the returned series are zero.
pub fn stft_peak_bpm(signal: &SampledSignal, config: &StftConfig) -> Result<HrSeries> {
    let spec = spectrogram(signal, config)?;
    let in_band: Vec<usize> = spec
        .bin_hz
        .iter()
        .enumerate()
        .filter(|(_, &f)| config.band_hz.map_or(true, |(lo, hi)| f >= lo && f <= hi))
        .map(|(k, _)| k)
        .collect();
    let windows = spec
        .magnitudes
        .iter()
        .enumerate()
        .map(|(index, mags)| {
            let mut best: Option<usize> = None;
            for &k in &in_band {
                if best.map_or(true, |b| mags[k] > mags[b]) {
                    best = Some(k);
                }
            }
            match best {
                Some(k) if mags[k] > 0.0 => Ok(HrWindow {
                    index,
                    start_time_s: spec.window_start_s[index],
                    hr_bpm: 60.0 * spec.bin_hz[k],
                    f_oa_hz: 0.0,
                    se_p: 0.0,
                    relative_error_energy: 0.0,
                    collision_flag: false,
                }),
                _ => Err(Error::NoSpectralPeak { window: index }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HrSeries { windows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::synth_harmonic;

    const FS: f64 = 125.0;

    /// Direct O(N^2) DFT magnitude.
    fn dft_magnitudes(x: &[f64], len: usize) -> Vec<f64> {
        (0..=len / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &v) in x.iter().enumerate() {
                    let a = -2.0 * std::f64::consts::PI * (k * n) as f64 / len as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn hann_is_symmetric_and_zero_at_ends() {
        let w = hann(1000);
        assert_eq!(w[0], 0.0);
        assert!(w[999].abs() < 1e-15);
        for i in 0..500 {
            assert!((w[i] - w[999 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct_dft() {
        let x = synth_harmonic(1.5, &[1.0, 0.3], &[0.2], 0.1, 1000, FS).unwrap();
        let spec = spectrogram(&x, &StftConfig::default()).unwrap();
        let tapered: Vec<f64> = x.samples().iter().zip(hann(1000)).map(|(a, b)| a * b).collect();
        let oracle = dft_magnitudes(&tapered, 2048);
        for (a, b) in spec.magnitudes[0].iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b));
        }
    }

    #[test]
    fn pure_tone_peaks_at_bin_25() {
        let x = synth_harmonic(1.5, &[1.0], &[], 0.0, 1500, FS).unwrap();
        let hr = stft_peak_bpm(&x, &StftConfig::default()).unwrap();
        assert_eq!(hr.len(), 3);
        let bin = FS / 2048.0;
        for w in &hr.windows {
            assert!((w.hr_bpm - 25.0 * bin * 60.0).abs() < 1e-9);
            assert!((w.hr_bpm - 90.0).abs() <= 60.0 * bin);
        }
    }

    #[test]
    fn dc_signal_concentrates_in_bin_zero() {
        let x = SampledSignal::new(vec![2.0; 1000], FS).unwrap();
        let spec = spectrogram(&x, &StftConfig::default()).unwrap();
        let mags = &spec.magnitudes[0];
        let (argmax, _) = mags
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        assert_eq!(argmax, 0);
        // Hann sidelobes sit at least 31 dB below the peak.
        assert!(mags[5..].iter().all(|&m| m < 0.03 * mags[0]));
    }

    #[test]
    fn zero_signal_has_no_peak() {
        let x = SampledSignal::new(vec![0.0; 1000], FS).unwrap();
        assert!(matches!(
            stft_peak_bpm(&x, &StftConfig::default()),
            Err(Error::NoSpectralPeak { window: 0 })
        ));
    }

    #[test]
    fn too_short_and_bad_fft_len() {
        let x = SampledSignal::new(vec![1.0; 999], FS).unwrap();
        assert!(matches!(
            spectrogram(&x, &StftConfig::default()),
            Err(Error::TooShort { .. })
        ));
        let cfg = StftConfig {
            fft_len: 512,
            ..StftConfig::default()
        };
        let x = SampledSignal::new(vec![1.0; 1000], FS).unwrap();
        assert!(spectrogram(&x, &cfg).is_err());
    }

    #[test]
    fn full_band_sees_dc() {
        let x = synth_harmonic(1.5, &[0.5], &[], 5.0, 1000, FS).unwrap();
        let full = stft_peak_bpm(&x, &StftConfig::default().full_band()).unwrap();
        assert_eq!(full.windows[0].hr_bpm, 0.0);
        let band = stft_peak_bpm(&x, &StftConfig::default()).unwrap();
        assert!((band.windows[0].hr_bpm - 90.0).abs() < 60.0 * FS / 2048.0);
    }
}
