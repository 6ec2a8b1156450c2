//! Entropic quantum dynamics on uniform grids.
//!
//! A particle's state is the pair (ρ, φ) of probability density and phase,
//! or equivalently the wavefunction `Ψ = ρ^{1/2} e^{iφ}`. The density is
//! carried by a Fokker-Planck flow with current velocity `v = b + u`, where
//! the drift `b = (ħ/m)∇S` climbs the entropy field `S = φ + ½ log ρ` and the
//! osmotic velocity `u = −(ħ/2m)∇log ρ` descends the density gradient.
//! Requiring energy conservation turns the pair into the Schrödinger
//! equation.
//!
//! The crate provides
//!
//! * [`field`]: grids, fields, spectral and stencil differential operators;
//! * [`madelung`]: Ψ ↔ (ρ, φ), the entropy field, velocity fields and energy;
//! * [`dynamics`]: Schrödinger and Fokker-Planck evolution plus residual checks;
//! * [`walkers`]: Monte-Carlo walkers sampling the Gaussian transition kernel;
//! * [`frames`]: the extended Galilean transformation `x̃ = x + ξ(t)`, its
//!   phase shift, effective gravitational potential and proper-time residue;
//! * [`verify`]: executable symmetry and equivalence checks with JSON reports.
//!
//! ```
//! use entropic::prelude::*;
//!
//! let grid = Grid::periodic_1d(256, 40.0, -20.0).unwrap();
//! let c = Constants::default();
//! let psi = free_gaussian_analytic([0.0; 3], [1.0, 0.0, 0.0], 1.0, 0.0, &c, &grid);
//! let state = decompose(&psi, 0.0).unwrap().state;
//! let v = current_velocity(&state, &c);
//! // a packet with momentum 1 moves at unit speed near its centre
//! assert!((v.components[0].values()[128] - 1.0).abs() < 1e-10);
//! ```

pub mod constants;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod frames;
pub mod madelung;
pub(crate) mod numerics;
pub mod verify;
pub mod walkers;

pub use constants::Constants;
pub use error::{Error, Result};

pub mod prelude {
    pub use crate::constants::Constants;
    pub use crate::dynamics::{
        energy_rate_check, evolve_fokker_planck, evolve_schrodinger, free_gaussian_analytic,
        hj_residual, EvolutionLog, EvolveOptions, Method, Potential, Propagator,
    };
    pub use crate::error::{Error, Result};
    pub use crate::field::{
        gradient, integrate, laplacian, shift_field, Boundary, ComplexField, Field, Grid, RealField,
        Vec3,
    };
    pub use crate::frames::{
        c_of_t, entropy_shift, inverse_transform_state, proper_time_residue, transform_potential,
        transform_state, FrameTrajectory, GaugeTerm,
    };
    pub use crate::madelung::{
        compose, current_velocity, decompose, drift_velocity, energy, entropy_field,
        osmotic_velocity, EntropyField, State, VelocityField, VelocityKind,
    };
    pub use crate::walkers::{
        histogram_density, init_ensemble, run_coupled, step_ensemble, transition_kernel,
        WalkerEnsemble,
    };
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/madelung.md")]
    mod madelung {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/walkers.md")]
    mod walkers {}
    #[doc = include_str!("../../../book/src/frames.md")]
    mod frames {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
