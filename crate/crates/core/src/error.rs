use thiserror::Error;

use crate::model::ValidationReport;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system specification: {0}")]
    InvalidSpec(ValidationReport),

    #[error("dispersion is only defined for a clean lattice (found nonzero offsets)")]
    DisorderedDispersion,

    #[error("matrix is not Hermitian (max residual {0:e})")]
    NotHermitian(f64),

    #[error("eigenpair residual {0:e} exceeds tolerance")]
    EigenResidual(f64),

    #[error("state is not normalized (norm squared {0})")]
    Unnormalized(f64),

    #[error("state has no atomic component to condition on")]
    NoAtomicWeight,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("atom {atom} is off resonance (Ω − ω_c = {detuning}); the kernel is only valid at band center")]
    OffResonance { atom: usize, detuning: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("step limit reached at t = {t}")]
    TooManySteps { t: f64 },

    #[error("trace drift {drift:e} at t = {t}")]
    TraceDrift { t: f64, drift: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("no local maximum of the fidelity within the search window (ends at {window})")]
    NoLocalMaximum {
        window: f64,
        times: Vec<f64>,
        fidelity: Vec<f64>,
    },

    #[error("configuration `{name}` is not usable here: {reason}")]
    WrongConfiguration { name: String, reason: String },

    #[error("ring too small for a wrap-free run: need n_sites >= {required}, got {got}")]
    RingTooSmall { required: usize, got: usize },

    #[error("unknown figure `{0}`")]
    UnknownFigure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotHermitian(_)
                | Error::EigenResidual(_)
                | Error::StepUnderflow { .. }
                | Error::TooManySteps { .. }
                | Error::TraceDrift { .. }
                | Error::NoLocalMaximum { .. }
                | Error::InvalidDensity(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
