use serde::Serialize;

use super::schrodinger::EvolutionLog;
use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::{density_floor, laplacian, reliable_mask, RealField, MASK_RELATIVE};
use crate::madelung::{compose, psi_gradients, State};

/// A residual field restricted to the density-reliable region.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub field: RealField,
    pub mask: Vec<bool>,
    /// Midpoint time at which the residual is evaluated.
    pub time: f64,
}

impl Residual {
    /// `max |r|` over the masked nodes.
    pub fn masked_max(&self) -> f64 {
        self.field
            .values()
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .fold(0.0, |acc, (r, _)| acc.max(r.abs()))
    }
}

/// Residual of `ħ∂_tφ + (ħ²/2m)|∇φ|² + V − (ħ²/2m)∇²√ρ/√ρ` between two
/// consecutive states.
///
/// `∂_tφ` is the central difference `arg(Ψ_after Ψ*_before)/Δt`, so the phase
/// must turn by less than π per step; the spatial terms are the average of
/// the two states and `potential` should be V at the midpoint. The mask is
/// `ρ > 1e-6·max ρ` for both states.
pub fn hj_residual(before: &State, after: &State, potential: &RealField, constants: &Constants) -> Result<Residual> {
    before.rho.check_grid(&after.rho)?;
    before.rho.check_grid(potential)?;
    let dt = after.time - before.time;
    if !(dt > 0.0) {
        return Err(Error::param("after.time", "must be later than before.time"));
    }
    let (m, hbar) = (constants.mass, constants.hbar);
    let psi_b = compose(before);
    let psi_a = compose(after);
    let spatial = |state: &State, psi| {
        let (gp, _) = psi_gradients(psi);
        let sqrt_rho = state.rho.map(f64::sqrt);
        let lap = laplacian(&sqrt_rho);
        let floor = density_floor(&state.rho).sqrt();
        let mut out = vec![0.0; state.rho.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let grad2: f64 = gp.iter().map(|g| g.values()[i].powi(2)).sum();
            let s = sqrt_rho.values()[i];
            let quantum = if s > floor { lap.values()[i] / s } else { 0.0 };
            *o = hbar * hbar / (2.0 * m) * (grad2 - quantum);
        }
        out
    };
    let sb = spatial(before, &psi_b);
    let sa = spatial(after, &psi_a);
    let values = (0..sb.len())
        .map(|i| {
            let dphi = (psi_a.values()[i] * psi_b.values()[i].conj()).arg();
            hbar * dphi / dt + 0.5 * (sb[i] + sa[i]) + potential.values()[i]
        })
        .collect();
    let mb = reliable_mask(&before.rho, MASK_RELATIVE);
    let ma = reliable_mask(&after.rho, MASK_RELATIVE);
    Ok(Residual {
        field: before.rho.with_values(values),
        mask: mb.iter().zip(&ma).map(|(a, b)| *a && *b).collect(),
        time: 0.5 * (before.time + after.time),
    })
}

/// Outcome of comparing `dE/dt` with `∫ρ ∂_tV` along a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRateReport {
    /// `max_n |(E_{n+1} − E_n)/Δt − ½(P_n + P_{n+1})|` with `P = ∫ρ∂_tV`.
    pub max_rate_deviation: f64,
    /// `max(K̄/T, max|P|)` with K̄ the mean kinetic energy and T the run length.
    pub scale: f64,
    pub normalized: f64,
    /// `max_n |E_n − E_0| / |E_0|`.
    pub max_relative_drift: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks the energy balance `dE/dt = ∫ρ ∂_tV` step by step. Passes when the
/// normalized deviation is at most `tolerance`.
pub fn energy_rate_check(log: &EvolutionLog, tolerance: f64) -> Result<EnergyRateReport> {
    let n = log.energies.len();
    if n < 2 || log.power.len() != n || log.kinetic.len() != n {
        return Err(Error::param("log", "needs at least two recorded steps"));
    }
    let mut worst: f64 = 0.0;
    for k in 0..n - 1 {
        let dt = log.times[k + 1] - log.times[k];
        let rate = (log.energies[k + 1] - log.energies[k]) / dt;
        let power = 0.5 * (log.power[k] + log.power[k + 1]);
        worst = worst.max((rate - power).abs());
    }
    let duration = log.duration();
    let mean_kinetic = log.kinetic.iter().sum::<f64>() / n as f64;
    let max_power = log.power.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let scale = (mean_kinetic.abs() / duration).max(max_power).max(f64::MIN_POSITIVE);
    let e0 = log.energies[0];
    let max_relative_drift = log
        .energies
        .iter()
        .map(|e| (e - e0).abs() / e0.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let normalized = worst / scale;
    Ok(EnergyRateReport {
        max_rate_deviation: worst,
        scale,
        normalized,
        max_relative_drift,
        tolerance,
        pass: normalized <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_psi, free_gaussian_analytic, EvolveOptions, Method, Potential};
    use crate::field::{Field, Grid};
    use crate::madelung::decompose;
    use std::f64::consts::PI;

    #[test]
    fn plane_wave_eigenstate() {
        let g = Grid::periodic_1d(64, 10.0, 0.0).unwrap();
        let k = 2.0 * PI * 3.0 / 10.0;
        let c = Constants::default();
        let dt = 1e-3;
        let s0 = State::from_fns(g, |_| 1.0, |x| k * x[0], 0.0).unwrap();
        let s1 = State::from_fns(g, |_| 1.0, |x| k * x[0] - 0.5 * k * k * dt, dt).unwrap();
        let r = hj_residual(&s0, &s1, &RealField::zeros(g), &c).unwrap();
        assert!(r.masked_max() < 1e-8, "{}", r.masked_max());
        assert!(hj_residual(&s1, &s0, &RealField::zeros(g), &c).is_err());
    }

    #[test]
    fn harmonic_ground_state_is_stationary() {
        let g = Grid::periodic_1d(256, 24.0, -12.0).unwrap();
        let c = Constants::default();
        let v = Potential::Harmonic {
            stiffness: 1.0,
            center: [0.0; 3],
        };
        let psi0 = Field::from_fn(g, |x| {
            num_complex::Complex64::new(PI.powf(-0.25) * (-x[0] * x[0] / 2.0).exp(), 0.0)
        });
        let dt = 2e-4;
        let opts = EvolveOptions::new(dt, 1, Method::SplitStep);
        let (psi1, _) = evolve_psi(&psi0, 0.0, &v, &c, &opts).unwrap();
        let s0 = decompose(&psi0, 0.0).unwrap().state;
        let s1 = decompose(&psi1, dt).unwrap().state;
        let r = hj_residual(&s0, &s1, &v.evaluate(&g, 0.0), &c).unwrap();
        assert!(r.masked_max() < 1e-6, "{}", r.masked_max());
    }

    #[test]
    fn free_packet_energy_is_flat() {
        let g = Grid::periodic_1d(512, 60.0, -30.0).unwrap();
        let c = Constants::default();
        let psi = free_gaussian_analytic([0.0; 3], [1.0, 0., 0.], 1.0, 0.0, &c, &g);
        let opts = EvolveOptions::new(1e-3, 200, Method::SplitStep);
        let (_, log) = evolve_psi(&psi, 0.0, &Potential::Zero, &c, &opts).unwrap();
        let report = energy_rate_check(&log, 1e-8).unwrap();
        assert!(report.max_relative_drift < 1e-8, "{report:?}");
        assert!(report.pass);
    }
}
