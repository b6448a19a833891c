use thiserror::Error;

use crate::fitting::DipFit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A filter passband (or requested spectral feature) is not inside the sampled grid.
    #[error("grid coverage: {0}")]
    Coverage(String),

    /// The filtered joint spectrum has no weight anywhere on the grid.
    #[error("empty state: filtered joint spectral amplitude has zero norm")]
    EmptyState,

    #[error("grid mismatch: states are sampled on different frequency grids")]
    GridMismatch,

    #[error("insufficient baseline: no samples with |delay| >= {threshold_ps} ps")]
    InsufficientBaseline { threshold_ps: f64 },

    #[error("dip reaches the scan edge; half-depth crossing not found")]
    DipAtEdge,

    #[error("no dip found in scan")]
    NoDip,

    #[error("fit did not converge after {iterations} iterations")]
    FitFailure {
        iterations: usize,
        best: Box<DipFit>,
    },

    #[error("calibration: {0}")]
    Calibration(String),

    /// No accidental coincidences were recorded; `lower_bound` is the CAR
    /// obtained by assuming a single accidental event.
    #[error("CAR undefined: zero accidental coincidences (CAR > {lower_bound})")]
    UndefinedCar { lower_bound: f64 },
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidInput(msg()))
    }
}
