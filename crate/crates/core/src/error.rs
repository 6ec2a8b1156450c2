use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state is not normalized: integral of density is {norm}")]
    NotNormalized { norm: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("split-step propagation requires a periodic grid")]
    SplitStepNeedsPeriodic,

    #[error("CFL violation at step {step}: courant number {courant:.4} exceeds 0.5")]
    Cfl { step: usize, courant: f64 },

    #[error(
        "phase ramp slope {slope:?} is off the momentum lattice and the state is not \
         boundary-localized (mass near boundary {boundary_mass:.3e})"
    )]
    OffLatticeRamp { slope: [f64; 3], boundary_mass: f64 },

    #[error("trajectory speed {speed} is not below the light speed {c_light}")]
    Superluminal { speed: f64, c_light: f64 },

    #[error("state touches the domain boundary (mass {mass:.3e} in the boundary layer)")]
    BoundaryContact { mass: f64 },

    #[error("snapshot schedules differ: {0}")]
    ScheduleMismatch(String),

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
