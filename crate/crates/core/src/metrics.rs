//! Accuracy statistics against ECG-derived ground truth, and reference
//! reference numbers for comparison tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::HrSeries;

/// Heart rate from `beats` cardiac cycles counted over `duration_s` seconds.
pub fn ground_truth_hr(beats: f64, duration_s: f64) -> Result<f64> {
    if !(duration_s.is_finite() && duration_s > 0.0) || !(beats.is_finite() && beats >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need beats >= 0 and duration > 0, got {beats} beats over {duration_s} s"
        )));
    }
    Ok(60.0 * beats / duration_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    /// Fraction of differences inside `[loa_low, loa_high]`. Reported only;
    /// 1.96 sd is a population statement.
    pub fraction_within_loa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub mae_bpm: f64,
    /// Sample standard deviation of the absolute errors.
    pub std_abs_err_bpm: f64,
    /// Sample standard deviation of the signed errors.
    pub std_signed_err_bpm: f64,
    pub bland_altman: BlandAltman,
    /// `None` when either series is constant.
    pub pearson_r: Option<f64>,
    pub spearman_rho: Option<f64>,
    /// `estimate - truth` per window.
    pub per_window_errors: Vec<f64>,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties get the average of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// `(mean of the pair, estimate - truth)` for Bland-Altman plots.
pub fn bland_altman_pairs(estimates: &[f64], truth: &[f64]) -> Vec<(f64, f64)> {
    estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| ((e + t) / 2.0, e - t))
        .collect()
}

pub fn evaluate(estimates: &[f64], truth: &[f64]) -> Result<EvalReport> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch {
            what: "estimates vs ground truth windows",
            left: estimates.len(),
            right: truth.len(),
        });
    }
    let n = estimates.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let diffs: Vec<f64> = estimates.iter().zip(truth).map(|(e, t)| e - t).collect();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let mean_diff = mean(estimates) - mean(truth);
    let sd_diff = sample_std(&diffs);
    let loa_low = mean_diff - 1.96 * sd_diff;
    let loa_high = mean_diff + 1.96 * sd_diff;
    let within = diffs
        .iter()
        .filter(|&&d| d >= loa_low && d <= loa_high)
        .count();
    Ok(EvalReport {
        n,
        mae_bpm: mean(&abs),
        std_abs_err_bpm: sample_std(&abs),
        std_signed_err_bpm: sd_diff,
        bland_altman: BlandAltman {
            mean_diff,
            sd_diff,
            loa_low,
            loa_high,
            fraction_within_loa: within as f64 / n as f64,
        },
        pearson_r: pearson(estimates, truth),
        spearman_rho: spearman(estimates, truth),
        per_window_errors: diffs,
    })
}

pub fn evaluate_series(estimates: &HrSeries, truth: &[f64]) -> Result<EvalReport> {
    evaluate(&estimates.hr_bpm(), truth)
}

/// Rows of the reference per-subject comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReferenceMethod {
    HsumMedian,
    SpaMA,
    Wfpv,
    Joss,
    Troika,
    Hsum,
    StftMedian,
    Stft,
}

impl ReferenceMethod {
    pub const ALL: [ReferenceMethod; 8] = [
        ReferenceMethod::HsumMedian,
        ReferenceMethod::SpaMA,
        ReferenceMethod::Wfpv,
        ReferenceMethod::Joss,
        ReferenceMethod::Troika,
        ReferenceMethod::Hsum,
        ReferenceMethod::StftMedian,
        ReferenceMethod::Stft,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ReferenceMethod::HsumMedian => "HSUM median",
            ReferenceMethod::SpaMA => "SpaMA",
            ReferenceMethod::Wfpv => "WFPV",
            ReferenceMethod::Joss => "JOSS",
            ReferenceMethod::Troika => "TROIKA",
            ReferenceMethod::Hsum => "HSUM",
            ReferenceMethod::StftMedian => "STFT median",
            ReferenceMethod::Stft => "STFT",
        }
    }
}

/// Reference mean absolute error (BPM) per subject S1..S12.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub method: ReferenceMethod,
    pub mae_bpm: [f64; 12],
}

const REFERENCE_MAE: [ReferenceRow; 8] = [
    ReferenceRow {
        method: ReferenceMethod::HsumMedian,
        mae_bpm: [0.614, 0.762, 0.649, 0.592, 0.534, 0.522, 0.592, 0.512, 0.412, 0.583, 1.484, 1.576],
    },
    ReferenceRow {
        method: ReferenceMethod::SpaMA,
        mae_bpm: [1.23, 1.59, 0.57, 0.44, 0.47, 0.61, 0.54, 0.40, 0.40, 2.63, 0.64, 1.20],
    },
    ReferenceRow {
        method: ReferenceMethod::Wfpv,
        mae_bpm: [1.23, 1.26, 0.72, 0.98, 0.75, 0.91, 0.67, 0.91, 0.54, 2.61, 0.94, 0.98],
    },
    ReferenceRow {
        method: ReferenceMethod::Joss,
        mae_bpm: [1.33, 1.75, 1.47, 1.48, 0.69, 1.32, 0.71, 0.56, 0.49, 3.81, 0.78, 1.04],
    },
    ReferenceRow {
        method: ReferenceMethod::Troika,
        mae_bpm: [2.87, 2.75, 1.91, 2.25, 1.69, 3.16, 1.72, 1.83, 1.58, 4.00, 1.96, 3.33],
    },
    ReferenceRow {
        method: ReferenceMethod::Hsum,
        mae_bpm: [0.756, 0.917, 0.948, 1.185, 0.697, 0.609, 0.873, 0.594, 0.525, 0.754, 1.495, 2.469],
    },
    ReferenceRow {
        method: ReferenceMethod::StftMedian,
        mae_bpm: [
            49.158, 42.563, 41.419, 28.521, 10.559, 15.972, 8.327, 18.748, 7.534, 53.276, 14.608,
            22.381,
        ],
    },
    ReferenceRow {
        method: ReferenceMethod::Stft,
        mae_bpm: [
            49.154, 43.730, 42.664, 30.762, 12.106, 17.100, 10.100, 19.487, 7.927, 55.569, 15.690,
            25.892,
        ],
    },
];

/// Reference standard deviation of the error (BPM) per subject, for the
/// methods that report it.
const REFERENCE_STD: [ReferenceRow; 4] = [
    ReferenceRow {
        method: ReferenceMethod::HsumMedian,
        mae_bpm: [0.500, 0.966, 0.710, 0.636, 0.777, 0.979, 0.796, 0.470, 0.372, 0.401, 1.865, 1.522],
    },
    ReferenceRow {
        method: ReferenceMethod::Hsum,
        mae_bpm: [0.604, 1.201, 1.326, 1.735, 1.274, 1.133, 1.307, 0.623, 0.671, 0.522, 1.840, 1.767],
    },
    ReferenceRow {
        method: ReferenceMethod::StftMedian,
        mae_bpm: [
            45.121, 29.640, 32.538, 39.154, 15.528, 24.145, 7.550, 22.518, 2.172, 46.245, 16.417,
            15.378,
        ],
    },
    ReferenceRow {
        method: ReferenceMethod::Stft,
        mae_bpm: [
            44.469, 30.404, 32.654, 41.3033, 20.292, 25.484, 14.167, 22.601, 4.404, 48.669, 19.183,
            23.484,
        ],
    },
];

pub fn reference_table() -> &'static [ReferenceRow] {
    &REFERENCE_MAE
}

pub fn reference_std_table() -> &'static [ReferenceRow] {
    &REFERENCE_STD
}

/// Reference MAE for `subject` in 1..=12.
pub fn reference_mae(method: ReferenceMethod, subject: usize) -> Option<f64> {
    if !(1..=12).contains(&subject) {
        return None;
    }
    REFERENCE_MAE
        .iter()
        .find(|r| r.method == method)
        .map(|r| r.mae_bpm[subject - 1])
}

/// Whole-corpus reference figures.
pub mod reference {
    pub const HSUM_MEDIAN_MAE_BPM: f64 = 0.7359;
    pub const HSUM_MEDIAN_STD_BPM: f64 = 0.8328;
    pub const HSUM_MAE_BPM: f64 = 0.9852;
    pub const HSUM_STD_BPM: f64 = 1.1670;
    pub const STFT_MAE_BPM: f64 = 27.5152;
    pub const STFT_STD_BPM: f64 = 27.2596;
    pub const STFT_MEDIAN_MAE_BPM: f64 = 26.0886;
    pub const STFT_MEDIAN_STD_BPM: f64 = 24.7005;
    pub const LOA_HALF_WIDTH_BPM: f64 = 6.7086;
    pub const PEARSON_R: f64 = 0.9974;
    pub const SPEARMAN_RHO: f64 = 0.9978;
    /// Single recording DATA05TYPE02, no median filter.
    pub const DATA05_TYPE02_MAE_BPM: f64 = 0.6970;
}
