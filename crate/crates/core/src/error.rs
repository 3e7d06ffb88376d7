use thiserror::Error;

use crate::io::ParseErrors;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("state (rho={rho}, w={w}) is outside [0,{r}]x[{w_min},{w_max}]")]
    InvalidState {
        rho: f64,
        w: f64,
        r: f64,
        w_min: f64,
        w_max: f64,
    },

    #[error("both Riemann data are free; the solution has no middle state")]
    NoMiddleState,

    #[error("time step {dt} exceeds the CFL bound {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("gap ratio {ratio} fell below 1 at t={t}; reduce the time step")]
    StepTooLarge { t: f64, ratio: f64 },

    #[error("macroscopic datum is inconsistent: {0}")]
    DatumInconsistent(String),

    #[error("test function is under-resolved: {0}")]
    UnderResolved(String),

    #[error("cell {cell} left the invariant domain: rho={rho}, w={w}")]
    LeftInvariantDomain { cell: usize, rho: f64, w: f64 },

    #[error(transparent)]
    Parse(#[from] ParseErrors),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
