use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signal too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("harmonic {harmonic} at {freq_hz} Hz is at or above Nyquist ({nyquist_hz} Hz)")]
    Nyquist {
        harmonic: usize,
        freq_hz: f64,
        nyquist_hz: f64,
    },

    #[error("underdetermined fit: {rows} rows for {cols} columns")]
    Underdetermined { rows: usize, cols: usize },

    #[error("empty grid: [{f_min}, {f_max}] with step {step}")]
    EmptyGrid { f_min: f64, f_max: f64, step: f64 },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("need at least 2 windows to evaluate, got {0} (n < 2)")]
    TooFewSamples(usize),

    #[error("window {window}: no spectral peak (all-zero spectrum in band)")]
    NoSpectralPeak { window: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the failure is caused by the caller's input rather than by
    /// the estimator itself.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}
