//! Joint motion + heart harmonic model for a PPG window.
//!
//! With the motion fundamental `f_oa` fixed from the accelerometer, each PPG
//! window is fitted on `[W_oa | W_h(f_h)]`: a DC column plus `M_a` harmonic
//! pairs at `f_oa`, and `M_h` harmonic pairs at the candidate heart
//! fundamental `f_h`. The heart fundamental is the grid point with the
//! smallest residual energy.
//!
//! Exact harmonic collisions (`kappa * f_h == k * f_oa`) duplicate columns.
//! Those grid points are still evaluated: the residual only depends on the
//! column span, and the amplitudes come from a minimum-norm solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{
    argmin, check_block, harmonic_columns, solve_amplitudes, DesignMatrix, GridSpec,
    HarmonicBlock,
};
use crate::lstsq::{ColMatrix, QrFactor};
use crate::signal::{energy, harmonic_sum, SampledSignal};

/// Heart energy below this fraction of the window energy is reported as a
/// weak heart component.
pub const WEAK_HEART_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub heart_grid: GridSpec,
    pub motion_order: usize,
    pub heart_order: usize,
    pub collision_tol_hz: f64,
    /// Lower the heart order per grid frequency so every harmonic stays below
    /// Nyquist, instead of rejecting the grid.
    pub cap_heart_order: bool,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            heart_grid: GridSpec::heart_default(),
            motion_order: 17,
            heart_order: 7,
            collision_tol_hz: 0.02,
            cap_heart_order: false,
        }
    }
}

/// Fitted joint model of one PPG window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointFit {
    pub f_oa_hz: f64,
    pub f_oh_hz: f64,
    pub hr_bpm: f64,
    /// `(a'0, a'1..a'Ma, b'1..b'Ma)`.
    pub amplitudes_motion: Vec<f64>,
    /// `(c1..cMh, d1..dMh)`.
    pub amplitudes_heart: Vec<f64>,
    pub motion_order: usize,
    pub heart_order: usize,
    pub se_p: f64,
    /// Some heart harmonic lies within the collision tolerance of a motion
    /// harmonic.
    pub collision_flag: bool,
    pub rank_deficient: bool,
    /// Heart-component energy is below `WEAK_HEART_FLOOR` of the window energy.
    pub weak_heart: bool,
}

impl JointFit {
    pub fn motion_dc(&self) -> f64 {
        self.amplitudes_motion[0]
    }

    pub fn motion_cos(&self) -> &[f64] {
        &self.amplitudes_motion[1..1 + self.motion_order]
    }

    pub fn motion_sin(&self) -> &[f64] {
        &self.amplitudes_motion[1 + self.motion_order..]
    }

    pub fn heart_cos(&self) -> &[f64] {
        &self.amplitudes_heart[..self.heart_order]
    }

    pub fn heart_sin(&self) -> &[f64] {
        &self.amplitudes_heart[self.heart_order..]
    }
}

/// True when some heart harmonic is within `tol_hz` of some motion harmonic.
pub fn harmonics_collide(
    f_oa_hz: f64,
    motion_order: usize,
    f_h_hz: f64,
    heart_order: usize,
    tol_hz: f64,
) -> bool {
    (1..=heart_order).any(|kappa| {
        (1..=motion_order).any(|k| (kappa as f64 * f_h_hz - k as f64 * f_oa_hz).abs() < tol_hz)
    })
}

/// `[W_oa | W_h]`: DC and `motion_order` pairs at `f_oa`, then
/// `heart_order` pairs at `f_h` without DC.
pub fn build_joint_design(
    f_oa_hz: f64,
    motion_order: usize,
    f_h_hz: f64,
    heart_order: usize,
    n_samples: usize,
    sample_rate_hz: f64,
) -> Result<DesignMatrix> {
    check_block(f_oa_hz, motion_order, sample_rate_hz)?;
    check_block(f_h_hz, heart_order, sample_rate_hz)?;
    let cols = 2 * motion_order + 1 + 2 * heart_order;
    if n_samples <= cols {
        return Err(Error::Underdetermined {
            rows: n_samples,
            cols,
        });
    }
    let motion = harmonic_columns(f_oa_hz, motion_order, n_samples, sample_rate_hz, true);
    let heart = harmonic_columns(f_h_hz, heart_order, n_samples, sample_rate_hz, false);
    Ok(DesignMatrix::from_parts(
        motion.hcat(&heart),
        vec![
            HarmonicBlock {
                f0_hz: f_oa_hz,
                order: motion_order,
                include_dc: true,
            },
            HarmonicBlock {
                f0_hz: f_h_hz,
                order: heart_order,
                include_dc: false,
            },
        ],
    ))
}

fn capped_order(order: usize, f_hz: f64, sample_rate_hz: f64) -> usize {
    let nyquist = sample_rate_hz / 2.0;
    let mut m = order;
    while m > 0 && m as f64 * f_hz >= nyquist {
        m -= 1;
    }
    m
}

/// Heart-grid sweeper with every heart basis precomputed.
#[derive(Debug, Clone)]
pub struct JointFitter {
    config: JointConfig,
    n_samples: usize,
    sample_rate_hz: f64,
    frequencies: Vec<f64>,
    heart_designs: Vec<ColMatrix>,
}

impl JointFitter {
    pub fn new(config: JointConfig, n_samples: usize, sample_rate_hz: f64) -> Result<Self> {
        config.heart_grid.validate()?;
        if !(config.collision_tol_hz >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "collision tolerance must be non-negative, got {}",
                config.collision_tol_hz
            )));
        }
        if !config.cap_heart_order {
            check_block(config.heart_grid.f_max_hz, config.heart_order, sample_rate_hz)?;
        } else if config.heart_order == 0 {
            return Err(Error::InvalidParameter("model order must be at least 1".into()));
        }
        let cols = 2 * config.motion_order + 1 + 2 * config.heart_order;
        if n_samples <= cols {
            return Err(Error::Underdetermined {
                rows: n_samples,
                cols,
            });
        }
        let frequencies = config.heart_grid.frequencies();
        let heart_designs = frequencies
            .iter()
            .map(|&f| {
                let m = Self::order_for(&config, f, sample_rate_hz);
                if m == 0 {
                    return Err(Error::Nyquist {
                        harmonic: 1,
                        freq_hz: f,
                        nyquist_hz: sample_rate_hz / 2.0,
                    });
                }
                Ok(harmonic_columns(f, m, n_samples, sample_rate_hz, false))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            n_samples,
            sample_rate_hz,
            frequencies,
            heart_designs,
        })
    }

    fn order_for(config: &JointConfig, f_hz: f64, sample_rate_hz: f64) -> usize {
        if config.cap_heart_order {
            capped_order(config.heart_order, f_hz, sample_rate_hz)
        } else {
            config.heart_order
        }
    }

    pub fn config(&self) -> &JointConfig {
        &self.config
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Factorisation of the motion block `W_oa` at `f_oa_hz`.
    pub fn motion_factor(&self, f_oa_hz: f64) -> Result<QrFactor> {
        check_block(f_oa_hz, self.config.motion_order, self.sample_rate_hz)?;
        let w = harmonic_columns(
            f_oa_hz,
            self.config.motion_order,
            self.n_samples,
            self.sample_rate_hz,
            true,
        );
        Ok(QrFactor::new(&w))
    }

    fn check_window(&self, window: &[f64], motion: &QrFactor) -> Result<()> {
        if window.len() != self.n_samples {
            return Err(Error::LengthMismatch {
                what: "joint fitter window length vs window",
                left: self.n_samples,
                right: window.len(),
            });
        }
        if motion.rows() != self.n_samples || motion.cols() != 2 * self.config.motion_order + 1 {
            return Err(Error::InvalidParameter(
                "motion factorisation does not match the joint model".into(),
            ));
        }
        Ok(())
    }

    /// `SE_p` at every heart grid frequency. `motion` must factor `W_oa`
    /// at the window's motion fundamental.
    pub fn sweep(&self, window: &[f64], motion: &QrFactor) -> Result<Vec<f64>> {
        self.check_window(window, motion)?;
        let mut qtx = window.to_vec();
        motion.apply_qt(&mut qtx);
        let mut scratch = Vec::with_capacity(window.len());
        let mut work = ColMatrix::zeros(0, 0);
        Ok(self
            .heart_designs
            .iter()
            .map(|heart| {
                work.clone_from(heart);
                motion
                    .extended_residual_energy(&qtx, &mut work, &mut scratch)
                    .energy
            })
            .collect())
    }

    /// Grid-searched heart fundamental. `motion` optionally supplies a
    /// cached factorisation of `W_oa`.
    pub fn fit(&self, window: &[f64], f_oa_hz: f64, motion: Option<&QrFactor>) -> Result<JointFit> {
        let owned;
        let motion = match motion {
            Some(m) => m,
            None => {
                owned = self.motion_factor(f_oa_hz)?;
                &owned
            }
        };
        let se = self.sweep(window, motion)?;
        let best = argmin(&se).ok_or_else(|| Error::Numerical("no finite SE_p on grid".into()))?;
        self.fit_at(window, f_oa_hz, self.frequencies[best])
    }

    /// Amplitudes and diagnostics at a given heart frequency.
    pub fn fit_at(&self, window: &[f64], f_oa_hz: f64, f_h_hz: f64) -> Result<JointFit> {
        let heart_order = Self::order_for(&self.config, f_h_hz, self.sample_rate_hz);
        let motion_order = self.config.motion_order;
        let design = build_joint_design(
            f_oa_hz,
            motion_order,
            f_h_hz,
            heart_order,
            window.len(),
            self.sample_rate_hz,
        )?;
        let amps = solve_amplitudes(&design, window)?;
        let split = 2 * motion_order + 1;
        let heart = &amps.values[split..];
        let heart_energy = {
            let mut hb = vec![0.0; window.len()];
            for (j, &c) in heart.iter().enumerate() {
                crate::lstsq::axpy(c, design.column(split + j), &mut hb);
            }
            energy(&hb)
        };
        Ok(JointFit {
            f_oa_hz,
            f_oh_hz: f_h_hz,
            hr_bpm: 60.0 * f_h_hz,
            amplitudes_motion: amps.values[..split].to_vec(),
            amplitudes_heart: heart.to_vec(),
            motion_order,
            heart_order,
            se_p: amps.se,
            collision_flag: harmonics_collide(
                f_oa_hz,
                motion_order,
                f_h_hz,
                heart_order,
                self.config.collision_tol_hz,
            ),
            rank_deficient: amps.rank_deficient,
            weak_heart: heart_energy < WEAK_HEART_FLOOR * energy(window),
        })
    }
}

/// One-off joint fit of a PPG window.
pub fn fit_heart_fundamental(
    ppg_window: &[f64],
    f_oa_hz: f64,
    heart_grid: &GridSpec,
    motion_order: usize,
    heart_order: usize,
    sample_rate_hz: f64,
) -> Result<JointFit> {
    let config = JointConfig {
        heart_grid: *heart_grid,
        motion_order,
        heart_order,
        ..JointConfig::default()
    };
    JointFitter::new(config, ppg_window.len(), sample_rate_hz)?.fit(ppg_window, f_oa_hz, None)
}

/// Heart-beat component `sum c cos + d sin` at `f_oh`.
pub fn reconstruct_heartbeat(fit: &JointFit, n_samples: usize, sample_rate_hz: f64) -> SampledSignal {
    let samples = harmonic_sum(
        fit.f_oh_hz,
        fit.heart_cos(),
        fit.heart_sin(),
        0.0,
        n_samples,
        sample_rate_hz,
    );
    SampledSignal::new(samples, sample_rate_hz).expect("fitted amplitudes are finite")
}

/// Motion-artifact component at `f_oa`, excluding the DC term (see
/// [`JointFit::motion_dc`]).
pub fn reconstruct_artifact(fit: &JointFit, n_samples: usize, sample_rate_hz: f64) -> SampledSignal {
    let samples = harmonic_sum(
        fit.f_oa_hz,
        fit.motion_cos(),
        fit.motion_sin(),
        0.0,
        n_samples,
        sample_rate_hz,
    );
    SampledSignal::new(samples, sample_rate_hz).expect("fitted amplitudes are finite")
}
