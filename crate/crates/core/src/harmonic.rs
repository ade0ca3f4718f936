//! Single harmonic-sum fits and fundamental-frequency grid search.
//!
//! A window `x[0..N]` is modelled as
//!
//! ```text
//! x[n] ~ a0 + sum_{k=1..M} a_k cos(2 pi k n f / fs) + b_k sin(2 pi k n f / fs)
//! ```
//!
//! For fixed `f` the amplitudes are a linear least-squares problem; the
//! fundamental is the grid frequency with the smallest residual energy.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstsq::{self, ColMatrix, QrFactor};
use crate::signal::{check_nyquist, energy};

/// One harmonic series inside a design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicBlock {
    pub f0_hz: f64,
    pub order: usize,
    pub include_dc: bool,
}

impl HarmonicBlock {
    pub fn n_cols(&self) -> usize {
        2 * self.order + usize::from(self.include_dc)
    }
}

/// Trigonometric design matrix. Each block contributes an optional all-ones
/// DC column, then `order` cosine columns, then `order` sine columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    matrix: ColMatrix,
    blocks: Vec<HarmonicBlock>,
}

impl DesignMatrix {
    pub(crate) fn from_parts(matrix: ColMatrix, blocks: Vec<HarmonicBlock>) -> Self {
        Self { matrix, blocks }
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix.get(row, col)
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.matrix.row(row)
    }

    pub fn column(&self, col: usize) -> &[f64] {
        self.matrix.col(col)
    }

    pub fn blocks(&self) -> &[HarmonicBlock] {
        &self.blocks
    }

    pub fn matrix(&self) -> &ColMatrix {
        &self.matrix
    }

    /// `W * amplitudes`.
    pub fn evaluate(&self, amplitudes: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(amplitudes)
    }
}

/// Fills sampled basis columns with the angle recurrence in `k`.
pub(crate) fn harmonic_columns(
    f0_hz: f64,
    order: usize,
    n_samples: usize,
    sample_rate_hz: f64,
    include_dc: bool,
) -> ColMatrix {
    let offset = usize::from(include_dc);
    let mut m = ColMatrix::zeros(n_samples, 2 * order + offset);
    if include_dc {
        m.col_mut(0).fill(1.0);
    }
    let mut cos_k = vec![0.0; order];
    let mut sin_k = vec![0.0; order];
    for n in 0..n_samples {
        let theta = 2.0 * PI * n as f64 * f0_hz / sample_rate_hz;
        let (s1, c1) = theta.sin_cos();
        let (mut c, mut s) = (c1, s1);
        for k in 0..order {
            cos_k[k] = c;
            sin_k[k] = s;
            let next_c = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = next_c;
        }
        for k in 0..order {
            let ci = offset + k;
            let si = offset + order + k;
            m.col_mut(ci)[n] = cos_k[k];
            m.col_mut(si)[n] = sin_k[k];
        }
    }
    m
}

pub(crate) fn check_block(
    f0_hz: f64,
    order: usize,
    sample_rate_hz: f64,
) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidParameter("model order must be at least 1".into()));
    }
    if !(f0_hz.is_finite() && f0_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fundamental must be positive, got {f0_hz}"
        )));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    check_nyquist(f0_hz, order, sample_rate_hz)
}

/// Builds the `N x (2M [+1])` design for one harmonic series.
pub fn build_design(
    f0_hz: f64,
    order: usize,
    n_samples: usize,
    sample_rate_hz: f64,
    include_dc: bool,
) -> Result<DesignMatrix> {
    check_block(f0_hz, order, sample_rate_hz)?;
    let block = HarmonicBlock {
        f0_hz,
        order,
        include_dc,
    };
    if n_samples <= block.n_cols() {
        return Err(Error::Underdetermined {
            rows: n_samples,
            cols: block.n_cols(),
        });
    }
    Ok(DesignMatrix::from_parts(
        harmonic_columns(f0_hz, order, n_samples, sample_rate_hz, include_dc),
        vec![block],
    ))
}

/// Least-squares amplitudes with a rank diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitudes {
    pub values: Vec<f64>,
    pub se: f64,
    pub rank_deficient: bool,
}

fn check_rows(design: &DesignMatrix, window: &[f64]) -> Result<()> {
    if design.rows() != window.len() {
        return Err(Error::LengthMismatch {
            what: "design rows vs window length",
            left: design.rows(),
            right: window.len(),
        });
    }
    Ok(())
}

/// Minimum-norm least-squares amplitudes for `design * a ~ window`.
pub fn solve_amplitudes(design: &DesignMatrix, window: &[f64]) -> Result<Amplitudes> {
    check_rows(design, window)?;
    let sol = lstsq::solve(design.matrix(), window);
    Ok(Amplitudes {
        values: sol.coeffs,
        se: sol.residual_energy,
        rank_deficient: sol.rank_deficient,
    })
}

/// Residual energy `||x - W a_opt||^2` of the least-squares fit.
pub fn squared_error(design: &DesignMatrix, window: &[f64]) -> Result<f64> {
    solve_amplitudes(design, window).map(|a| a.se)
}

/// Closed frequency grid `{f_min, f_min + step, ..} <= f_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub step_hz: f64,
}

impl GridSpec {
    pub fn new(f_min_hz: f64, f_max_hz: f64, step_hz: f64) -> Result<Self> {
        let g = Self {
            f_min_hz,
            f_max_hz,
            step_hz,
        };
        g.validate()?;
        Ok(g)
    }

    /// Default accelerometer grid, 1 to 3 Hz in 0.01 Hz steps.
    pub fn motion_default() -> Self {
        Self {
            f_min_hz: 1.0,
            f_max_hz: 3.0,
            step_hz: 0.01,
        }
    }

    /// Default heart grid, 0.5 to 3 Hz in 0.01 Hz steps.
    pub fn heart_default() -> Self {
        Self {
            f_min_hz: 0.5,
            f_max_hz: 3.0,
            step_hz: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.f_min_hz.is_finite() && self.f_max_hz.is_finite() && self.step_hz.is_finite();
        if !finite || self.f_min_hz <= 0.0 || self.step_hz <= 0.0 || self.f_min_hz >= self.f_max_hz {
            return Err(Error::EmptyGrid {
                f_min: self.f_min_hz,
                f_max: self.f_max_hz,
                step: self.step_hz,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.f_max_hz - self.f_min_hz) / self.step_hz + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.validate().is_err()
    }

    /// Grid points, snapped to 1e-9 Hz so that decimal grids hit their
    /// decimal values exactly (`1.0 + 50 * 0.01 == 1.5`).
    pub fn frequencies(&self) -> Vec<f64> {
        if self.is_empty() {
            return Vec::new();
        }
        (0..self.len())
            .map(|i| snap(self.f_min_hz + i as f64 * self.step_hz))
            .collect()
    }
}

fn snap(f: f64) -> f64 {
    (f * 1e9).round() / 1e9
}

impl FromStr for GridSpec {
    type Err = Error;

    /// Parses `min:max:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidParameter(format!(
                "grid must be min:max:step, got `{s}`"
            )));
        }
        let mut v = [0.0; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("bad number `{p}` in grid `{s}`"))
            })?;
        }
        GridSpec::new(v[0], v[1], v[2])
    }
}

/// Fitted harmonic-sum model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsumFit {
    pub f0_hz: f64,
    /// `(a0, a1..aM, b1..bM)`, without `a0` when the fit excludes DC.
    pub amplitudes: Vec<f64>,
    pub se: f64,
    pub order: usize,
    pub include_dc: bool,
    /// `se` over window energy; 1 for an all-zero window.
    pub relative_se: f64,
    pub rank_deficient: bool,
}

impl HsumFit {
    pub fn dc(&self) -> f64 {
        if self.include_dc {
            self.amplitudes[0]
        } else {
            0.0
        }
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        let o = usize::from(self.include_dc);
        &self.amplitudes[o..o + self.order]
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        let o = usize::from(self.include_dc) + self.order;
        &self.amplitudes[o..o + self.order]
    }
}

pub(crate) fn relative(se: f64, window_energy: f64) -> f64 {
    if window_energy > 0.0 {
        (se / window_energy).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Index of the smallest value; ties go to the lowest index.
pub(crate) fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if !(v < values[b]) => {}
            _ if v.is_nan() => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Grid-search fitter with the QR factorisation of every grid design cached.
/// The designs depend only on frequency, window length and rate, so one
/// fitter serves every window and axis of a recording.
#[derive(Debug, Clone)]
pub struct HarmonicFitter {
    frequencies: Vec<f64>,
    order: usize,
    n_samples: usize,
    sample_rate_hz: f64,
    include_dc: bool,
    factors: Vec<QrFactor>,
}

impl HarmonicFitter {
    pub fn new(
        grid: &GridSpec,
        order: usize,
        n_samples: usize,
        sample_rate_hz: f64,
        include_dc: bool,
    ) -> Result<Self> {
        grid.validate()?;
        check_block(grid.f_max_hz, order, sample_rate_hz)?;
        let frequencies = grid.frequencies();
        let mut factors = Vec::with_capacity(frequencies.len());
        for &f in &frequencies {
            let design = build_design(f, order, n_samples, sample_rate_hz, include_dc)?;
            factors.push(QrFactor::new(design.matrix()));
        }
        Ok(Self {
            frequencies,
            order,
            n_samples,
            sample_rate_hz,
            include_dc,
            factors,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn include_dc(&self) -> bool {
        self.include_dc
    }

    /// Cached factorisation of the design at grid index `i`.
    pub fn factor(&self, i: usize) -> &QrFactor {
        &self.factors[i]
    }

    /// Grid index of `f0_hz`, if it is a grid point.
    pub fn index_of(&self, f0_hz: f64) -> Option<usize> {
        self.frequencies.iter().position(|&f| f == f0_hz)
    }

    fn check_len(&self, window: &[f64]) -> Result<()> {
        if window.len() != self.n_samples {
            return Err(Error::LengthMismatch {
                what: "fitter window length vs window",
                left: self.n_samples,
                right: window.len(),
            });
        }
        Ok(())
    }

    /// Residual energy at every grid frequency.
    pub fn sweep(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.check_len(window)?;
        let mut scratch = vec![0.0; window.len()];
        Ok(self
            .factors
            .iter()
            .map(|qr| {
                scratch.copy_from_slice(window);
                qr.apply_qt(&mut scratch);
                let r = qr.rank();
                lstsq::dot(&scratch[r..], &scratch[r..])
            })
            .collect())
    }

    pub fn fit(&self, window: &[f64]) -> Result<HsumFit> {
        let se = self.sweep(window)?;
        let best = argmin(&se).ok_or_else(|| Error::Numerical("no finite SE on grid".into()))?;
        self.fit_at(window, self.frequencies[best])
    }

    /// Full fit (amplitudes and direct residual) at a given frequency.
    pub fn fit_at(&self, window: &[f64], f0_hz: f64) -> Result<HsumFit> {
        let design = build_design(
            f0_hz,
            self.order,
            self.n_samples,
            self.sample_rate_hz,
            self.include_dc,
        )?;
        let amps = solve_amplitudes(&design, window)?;
        Ok(HsumFit {
            f0_hz,
            relative_se: relative(amps.se, energy(window)),
            se: amps.se,
            amplitudes: amps.values,
            order: self.order,
            include_dc: self.include_dc,
            rank_deficient: amps.rank_deficient,
        })
    }
}

/// Grid-searched single-series fit of one window.
pub fn fit_fundamental(
    window: &[f64],
    grid: &GridSpec,
    order: usize,
    sample_rate_hz: f64,
    include_dc: bool,
) -> Result<HsumFit> {
    HarmonicFitter::new(grid, order, window.len(), sample_rate_hz, include_dc)?.fit(window)
}

/// How the three accelerometer axes are reduced to one motion fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CombineMode {
    /// Fit every axis and keep the one with the smallest relative SE.
    #[default]
    BestAxis,
    /// Fit the per-sample Euclidean magnitude.
    L2Magnitude,
    FixedAxis(usize),
}

impl FromStr for CombineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best-axis" | "best" => Ok(CombineMode::BestAxis),
            "l2" | "l2-magnitude" => Ok(CombineMode::L2Magnitude),
            other => {
                let idx = other
                    .strip_prefix("axis:")
                    .and_then(|i| i.parse::<usize>().ok())
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "combine mode must be best-axis, l2 or axis:<0|1|2>, got `{other}`"
                        ))
                    })?;
                let mode = CombineMode::FixedAxis(idx);
                mode.validate()?;
                Ok(mode)
            }
        }
    }
}

impl std::fmt::Display for CombineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CombineMode::BestAxis => write!(f, "best-axis"),
            CombineMode::L2Magnitude => write!(f, "l2"),
            CombineMode::FixedAxis(i) => write!(f, "axis:{i}"),
        }
    }
}

impl CombineMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            CombineMode::FixedAxis(i) if *i > 2 => Err(Error::InvalidParameter(format!(
                "accelerometer axis must be 0, 1 or 2, got {i}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Which signal produced a multi-axis fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionSource {
    Axis(usize),
    Magnitude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiAxisFit {
    pub fit: HsumFit,
    pub source: MotionSource,
    /// Energy of the fitted signal window.
    pub energy: f64,
}

/// Reduces three same-time accelerometer windows to one motion fit.
pub fn fit_multiaxis(
    axes: [&[f64]; 3],
    fitter: &HarmonicFitter,
    mode: CombineMode,
) -> Result<MultiAxisFit> {
    mode.validate()?;
    let single = |samples: &[f64], source| -> Result<MultiAxisFit> {
        Ok(MultiAxisFit {
            fit: fitter.fit(samples)?,
            source,
            energy: energy(samples),
        })
    };
    match mode {
        CombineMode::FixedAxis(i) => single(axes[i], MotionSource::Axis(i)),
        CombineMode::L2Magnitude => {
            let mag: Vec<f64> = (0..axes[0].len())
                .map(|n| {
                    let (x, y, z) = (axes[0][n], axes[1][n], axes[2][n]);
                    (x * x + y * y + z * z).sqrt()
                })
                .collect();
            single(&mag, MotionSource::Magnitude)
        }
        CombineMode::BestAxis => {
            let mut best: Option<MultiAxisFit> = None;
            for (i, samples) in axes.iter().enumerate() {
                let cand = single(samples, MotionSource::Axis(i))?;
                if best
                    .as_ref()
                    .map_or(true, |b| cand.fit.relative_se < b.fit.relative_se)
                {
                    best = Some(cand);
                }
            }
            Ok(best.expect("three axes"))
        }
    }
}
