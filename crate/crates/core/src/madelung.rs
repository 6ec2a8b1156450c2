//! The Madelung picture: wavefunction ↔ (density, phase), the entropy field
//! and the three velocity fields of the entropic walk.
//!
//! Gradients of the phase and of `log ρ` are never taken by differentiating
//! φ or `log ρ` directly. Both may carry non-periodic ramps or floor kinks,
//! so they are read off the smooth carrier `Ψ*∇Ψ = ½∇ρ + iρ∇φ` instead.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::{
    density_floor, gradient, integrate, ComplexField, Field, Grid, RealField,
    Vec3,
};

/// Tolerance on `∫ρ = 1` for a [`State`].
pub const STATE_NORM_TOLERANCE: f64 = 1e-10;
/// Tolerance on `∫|Ψ|² = 1` accepted by [`decompose`].
pub const DECOMPOSE_NORM_TOLERANCE: f64 = 1e-8;

/// Probability density and phase at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub rho: RealField,
    pub phi: RealField,
    pub time: f64,
}

impl State {
    /// Validates normalization and non-negativity. Round-off negatives of
    /// the density (≥ −1e-12·max ρ) are clamped to zero.
    pub fn new(rho: RealField, phi: RealField, time: f64) -> Result<Self> {
        rho.check_grid(&phi)?;
        if !rho.all_finite() || !phi.all_finite() {
            return Err(Error::NonFinite("State::new"));
        }
        let max = rho.max();
        if rho.min() < -1e-12 * max.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::param("rho", "density has negative values"));
        }
        let rho = rho.map(|r| r.max(0.0));
        let norm = integrate(&rho);
        if (norm - 1.0).abs() > STATE_NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm });
        }
        Ok(State { rho, phi, time })
    }

    /// Builds a state from samples of an unnormalized density and a phase,
    /// normalizing the density.
    pub fn from_fns(
        grid: Grid,
        density: impl Fn(Vec3) -> f64,
        phase: impl Fn(Vec3) -> f64,
        time: f64,
    ) -> Result<Self> {
        let rho = Field::from_fn(grid, density);
        let norm = integrate(&rho);
        if !(norm > 0.0) {
            return Err(Error::param("rho", "density integrates to zero"));
        }
        State::new(rho.scale(1.0 / norm), Field::from_fn(grid, phase), time)
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn norm(&self) -> f64 {
        integrate(&self.rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityKind {
    Drift,
    Osmotic,
    Current,
}

/// One velocity component per spatial axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub kind: VelocityKind,
    pub components: Vec<RealField>,
}

impl VelocityField {
    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    /// Velocity vector at node `i`.
    pub fn at(&self, i: usize) -> Vec3 {
        let mut v = [0.0; 3];
        for (a, c) in self.components.iter().enumerate() {
            v[a] = c.values()[i];
        }
        v
    }

    /// Largest component-wise deviation from `other` over the nodes where
    /// `mask` is set.
    pub fn masked_max_diff(&self, other: &VelocityField, mask: &[bool]) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b) in self.components.iter().zip(&other.components) {
            for ((x, y), &m) in a.values().iter().zip(b.values()).zip(mask) {
                if m {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.values().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &VelocityField, kind: VelocityKind) -> VelocityField {
        VelocityField {
            kind,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    /// Adds a uniform vector to every node.
    pub fn offset(&self, by: Vec3) -> VelocityField {
        VelocityField {
            kind: self.kind,
            components: self
                .components
                .iter()
                .enumerate()
                .map(|(a, c)| c.map(|v| v + by[a]))
                .collect(),
        }
    }
}

/// `Ψ = √ρ e^{iφ}` pointwise.
pub fn compose(state: &State) -> ComplexField {
    state
        .rho
        .zip_map(&state.phi, |r, p| Complex64::from_polar(r.max(0.0).sqrt(), p))
}

/// A decomposed wavefunction together with the nodes whose phase could not
/// be measured (density below the floor) and was extrapolated.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposed {
    pub state: State,
    pub unreliable: Vec<bool>,
}

impl Decomposed {
    pub fn unreliable_count(&self) -> usize {
        self.unreliable.iter().filter(|&&u| u).count()
    }
}

/// Splits a normalized wavefunction into density and a continuous phase.
///
/// The phase gradient `Im(Ψ*∇Ψ)/ρ` is integrated along grid lines starting
/// from the node of maximal density, where φ equals the principal argument
/// of Ψ. At every step the integrated value only selects the 2π branch; the
/// stored value is the branch of `arg Ψ` nearest to it, so the result is
/// exact wherever the density is above the floor. Below the floor the
/// gradient is not trusted: the branch nearest the previous node's value is
/// taken and the node is flagged. Either way `compose(decompose(Ψ)) = Ψ`.
pub fn decompose(psi: &ComplexField, time: f64) -> Result<Decomposed> {
    if !psi.all_finite() {
        return Err(Error::NonFinite("decompose"));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > DECOMPOSE_NORM_TOLERANCE {
        return Err(Error::NotNormalized { norm });
    }
    let grid = *psi.grid();
    let rho = psi.norm_sqr();
    let floor = density_floor(&rho);
    let reliable: Vec<bool> = rho.values().iter().map(|&r| r > floor).collect();
    let carrier = carrier(psi);
    let phase_grad: Vec<Vec<f64>> = carrier
        .iter()
        .map(|j| {
            j.values()
                .iter()
                .zip(rho.values())
                .zip(&reliable)
                .map(|((j, &r), &ok)| if ok { j.im / r } else { 0.0 })
                .collect()
        })
        .collect();
    let args: Vec<f64> = psi.values().iter().map(|z| z.arg()).collect();

    let reference = rho.argmax();
    let ref_idx = grid.unravel(reference);
    let mut phi = vec![0.0; grid.len()];
    let mut unreliable = vec![false; grid.len()];
    phi[reference] = args[reference];

    for axis in 0..grid.dim() {
        let n = grid.points()[axis];
        let stride = grid.stride(axis);
        let h = grid.spacing(axis);
        // Seeds: nodes already fixed that agree with the reference on all
        // axes from `axis` on.
        for seed in 0..grid.len() {
            let idx = grid.unravel(seed);
            if (axis..grid.dim()).any(|b| idx[b] != ref_idx[b]) {
                continue;
            }
            for dir in [1isize, -1] {
                let mut k = idx[axis] as isize;
                let mut prev = seed;
                loop {
                    k += dir;
                    if k < 0 || k >= n as isize {
                        break;
                    }
                    let next = (prev as isize + dir * stride as isize) as usize;
                    let guess = if reliable[prev] && reliable[next] {
                        phi[prev] + dir as f64 * h * 0.5 * (phase_grad[axis][prev] + phase_grad[axis][next])
                    } else {
                        phi[prev]
                    };
                    let turns = ((guess - args[next]) / (2.0 * PI)).round();
                    phi[next] = args[next] + 2.0 * PI * turns;
                    unreliable[next] = !reliable[next];
                    prev = next;
                }
            }
        }
    }

    let state = State {
        rho: rho.scale(1.0 / norm),
        phi: psi.with_values(phi),
        time,
    };
    Ok(Decomposed { state, unreliable })
}

/// `Ψ*∂_aΨ` per axis; its real part is `½∂_aρ` and its imaginary part `ρ∂_aφ`.
///
/// The real and imaginary parts are differentiated separately so that a
/// real Ψ yields an exactly real carrier.
pub(crate) fn carrier(psi: &ComplexField) -> Vec<ComplexField> {
    let (re, im) = (psi.re(), psi.im());
    gradient(&re)
        .into_iter()
        .zip(gradient(&im))
        .map(|(gr, gi)| {
            let d = gr.zip_map(&gi, Complex64::new);
            psi.zip_map(&d, |z, dz| z.conj() * dz)
        })
        .collect()
}

/// Phase gradient and half log-density gradient read from a wavefunction.
/// Below the density floor both are set to zero.
pub(crate) fn psi_gradients(psi: &ComplexField) -> (Vec<RealField>, Vec<RealField>) {
    let rho = psi.norm_sqr();
    let floor = density_floor(&rho);
    let mut grad_phase = Vec::new();
    let mut half_grad_log = Vec::new();
    for j in carrier(psi) {
        let gp: Vec<f64> = j
            .values()
            .iter()
            .zip(rho.values())
            .map(|(j, &r)| if r > floor { j.im / r } else { 0.0 })
            .collect();
        let gl: Vec<f64> = j
            .values()
            .iter()
            .zip(rho.values())
            .map(|(j, &r)| if r > floor { j.re / r } else { 0.0 })
            .collect();
        grad_phase.push(rho.with_values(gp));
        half_grad_log.push(rho.with_values(gl));
    }
    (grad_phase, half_grad_log)
}

/// The entropy field `S = φ + ½ log ρ` together with its gradient.
///
/// The gradient is stored alongside the values because S inherits the
/// non-periodic phase ramps of φ and the floor kinks of `log ρ`; see the
/// module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyField {
    pub values: RealField,
    pub gradient: Vec<RealField>,
}

impl EntropyField {
    /// Wraps an arbitrary smooth field, differentiating it with
    /// [`gradient`]. On periodic grids the field must itself be periodic.
    pub fn from_values(values: RealField) -> Self {
        let gradient = gradient(&values);
        EntropyField { values, gradient }
    }

    /// `S(x) = slope · x + offset`, with its exact gradient.
    pub fn linear(grid: Grid, slope: Vec3, offset: f64) -> Self {
        let values = Field::from_fn(grid, |x| {
            offset + (0..grid.dim()).map(|a| slope[a] * x[a]).sum::<f64>()
        });
        let gradient = (0..grid.dim()).map(|a| RealField::filled(grid, slope[a])).collect();
        EntropyField { values, gradient }
    }

    /// Entropy of the state carried by a wavefunction, without
    /// reconstructing the phase values.
    pub(crate) fn gradient_from_psi(psi: &ComplexField) -> Vec<RealField> {
        let (gp, gl) = psi_gradients(psi);
        gp.iter().zip(&gl).map(|(a, b)| a.add(b)).collect()
    }
}

/// `S = φ + ½ log ρ` with ρ floored at `1e-12 · max ρ`.
pub fn entropy_field(state: &State) -> EntropyField {
    let floor = density_floor(&state.rho);
    let values = state
        .rho
        .zip_map(&state.phi, |r, p| p + 0.5 * r.max(floor).ln());
    EntropyField {
        values,
        gradient: EntropyField::gradient_from_psi(&compose(state)),
    }
}

/// Drift `b = (ħ/m)∇S`.
pub fn drift_velocity(entropy: &EntropyField, constants: &Constants) -> VelocityField {
    let k = constants.velocity_scale();
    VelocityField {
        kind: VelocityKind::Drift,
        components: entropy.gradient.iter().map(|g| g.scale(k)).collect(),
    }
}

/// Osmotic velocity `u = −(ħ/2m)∇log ρ`, evaluated as `∇ρ/ρ` with the floor.
pub fn osmotic_velocity(rho: &RealField, constants: &Constants) -> VelocityField {
    let floor = density_floor(rho);
    let k = -constants.diffusion();
    VelocityField {
        kind: VelocityKind::Osmotic,
        components: gradient(rho)
            .into_iter()
            .map(|g| g.zip_map(rho, |d, r| if r > floor { k * d / r } else { 0.0 }))
            .collect(),
    }
}

/// Current velocity `v = (ħ/m)∇φ`.
///
/// Needs the density as well as the phase: the phase gradient is read off
/// `Im(Ψ*∇Ψ)/ρ`.
pub fn current_velocity(state: &State, constants: &Constants) -> VelocityField {
    current_velocity_psi(&compose(state), constants)
}

pub(crate) fn current_velocity_psi(psi: &ComplexField, constants: &Constants) -> VelocityField {
    let k = constants.velocity_scale();
    let (gp, _) = psi_gradients(psi);
    VelocityField {
        kind: VelocityKind::Current,
        components: gp.into_iter().map(|g| g.scale(k)).collect(),
    }
}

/// `E = ∫ρ(½mv² + ½mu² + V)`.
pub fn energy(state: &State, potential: &RealField, constants: &Constants) -> f64 {
    energy_psi(&compose(state), potential, constants)
}

pub(crate) fn energy_psi(psi: &ComplexField, potential: &RealField, constants: &Constants) -> f64 {
    let rho = psi.norm_sqr();
    let m = constants.mass;
    let (gp, gl) = psi_gradients(psi);
    let vs = constants.velocity_scale();
    let us = -2.0 * constants.diffusion();
    let mut density = vec![0.0; rho.len()];
    for (i, d) in density.iter_mut().enumerate() {
        let mut v2 = 0.0;
        let mut u2 = 0.0;
        for a in 0..gp.len() {
            v2 += (vs * gp[a].values()[i]).powi(2);
            u2 += (us * gl[a].values()[i]).powi(2);
        }
        let r = rho.values()[i];
        *d = r * (0.5 * m * v2 + 0.5 * m * u2 + potential.values()[i]);
    }
    integrate(&rho.with_values(density))
}
