//! Time evolution: the Schrödinger equation for Ψ, the Fokker-Planck
//! (continuity) equation for ρ, and residual checks of the Hamilton-Jacobi
//! equation and of the energy balance `dE/dt = ∫ρ ∂_tV`.

mod analytic;
mod checks;
mod fokker_planck;
mod potential;
mod schrodinger;

pub use analytic::{free_gaussian_analytic, free_gaussian_width};
pub use checks::{energy_rate_check, hj_residual, EnergyRateReport, Residual};
pub use fokker_planck::{evolve_fokker_planck, fp_step, MAX_COURANT};
pub use potential::{Potential, TimeDependent};
pub use schrodinger::{evolve_psi, evolve_schrodinger, EvolutionLog, EvolveOptions, Method, Propagator, Snapshot};
