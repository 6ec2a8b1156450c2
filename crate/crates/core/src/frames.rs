//! The extended Galilean transformation `x̃ = x + ξ(t)`.
//!
//! Under it the density is carried along, `ρ̃(x̃) = ρ(x̃ − ξ)`, while the
//! phase picks up a ramp and a time-dependent constant,
//!
//! ```text
//! φ̃(x̃) = φ(x̃ − ξ) + (m/ħ)(ξ̇·x̃ + c(t)),   c(t) = −½∫₀ᵗ (ξ̇² − 2ξ̈·d) dt',
//! ```
//!
//! and the potential acquires the effective gravitational term,
//! `Ṽ(x̃) = V(x̃ − ξ) − mξ̈·(x̃ + d)`. The constant vector `d` only moves the
//! zero of the potential; see [`GaugeTerm`].

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::constants::Constants;
use crate::dynamics::Potential;
use crate::error::{Error, Result};
use crate::field::{
    boundary_layer_mass, gradient, interpolate_linear, reliable_mask, shift_field, shift_field_complex,
    ComplexField, Field, Grid, RealField, Vec3, MASK_RELATIVE,
};
use crate::madelung::{compose, decompose, drift_velocity, entropy_field, osmotic_velocity, current_velocity, State};
use crate::numerics::{adaptive_trapezoid, CubicSpline};

/// Fraction of the domain, measured from each face, that must be empty for
/// a state to count as boundary-localized.
pub const LOCALIZATION_MARGIN: f64 = 0.05;
/// Largest mass allowed in that margin.
pub const LOCALIZATION_MASS: f64 = 1e-10;

const QUADRATURE_TOLERANCE: f64 = 1e-12;

/// A frame displacement `ξ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameTrajectory {
    Rest,
    /// `ξ = v t`.
    Boost { velocity: Vec3 },
    /// `ξ = ½ g t²`.
    UniformAccel { acceleration: Vec3 },
    /// `ξ = A sin ωt`.
    Oscillation { amplitude: Vec3, omega: f64 },
    Tabulated(TabulatedTrajectory),
}

/// `ξ(t)` sampled at increasing times and interpolated by a natural cubic
/// spline per axis. Derivatives are those of the spline.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedTrajectory {
    splines: Vec<CubicSpline>,
}

impl TabulatedTrajectory {
    /// `times` strictly increasing with at least two entries; `samples[a]`
    /// holds ξ_a at those times, one vector per axis (at most three).
    pub fn new(times: &[f64], samples: &[Vec<f64>]) -> Result<Self> {
        if samples.is_empty() || samples.len() > 3 {
            return Err(Error::param("trajectory", "need samples for one to three axes"));
        }
        let splines = samples
            .iter()
            .map(|s| CubicSpline::new(times.to_vec(), s.clone()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| {
                Error::param(
                    "trajectory",
                    "sample times must be strictly increasing, with one value per time",
                )
            })?;
        if times.iter().chain(samples.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated trajectory"));
        }
        Ok(TabulatedTrajectory { splines })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.splines[0].domain()
    }

    fn derivative(&self, t: f64, order: usize) -> Vec3 {
        let mut out = [0.0; 3];
        for (a, s) in self.splines.iter().enumerate() {
            out[a] = s.eval(t)[order];
        }
        out
    }
}

fn scale(v: Vec3, s: f64) -> Vec3 {
    v.map(|x| x * s)
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl FrameTrajectory {
    /// Derivative of order 0–3 of ξ at t.
    fn derivative(&self, t: f64, order: usize) -> Vec3 {
        match self {
            FrameTrajectory::Rest => [0.0; 3],
            FrameTrajectory::Boost { velocity } => match order {
                0 => scale(*velocity, t),
                1 => *velocity,
                _ => [0.0; 3],
            },
            FrameTrajectory::UniformAccel { acceleration } => match order {
                0 => scale(*acceleration, 0.5 * t * t),
                1 => scale(*acceleration, t),
                2 => *acceleration,
                _ => [0.0; 3],
            },
            FrameTrajectory::Oscillation { amplitude, omega } => {
                let w = *omega;
                let f = match order {
                    0 => (w * t).sin(),
                    1 => w * (w * t).cos(),
                    2 => -w * w * (w * t).sin(),
                    _ => -w * w * w * (w * t).cos(),
                };
                scale(*amplitude, f)
            }
            FrameTrajectory::Tabulated(tab) => tab.derivative(t, order),
        }
    }

    pub fn xi(&self, t: f64) -> Vec3 {
        self.derivative(t, 0)
    }

    pub fn xi_dot(&self, t: f64) -> Vec3 {
        self.derivative(t, 1)
    }

    pub fn xi_ddot(&self, t: f64) -> Vec3 {
        self.derivative(t, 2)
    }

    pub fn xi_dddot(&self, t: f64) -> Vec3 {
        self.derivative(t, 3)
    }

    /// Time interval on which the trajectory is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            FrameTrajectory::Tabulated(tab) => tab.domain(),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn is_rest(&self) -> bool {
        matches!(self, FrameTrajectory::Rest)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if !t.is_finite() || t < lo || t > hi {
            return Err(Error::param("t", format!("{t} is outside the trajectory domain [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// `max |ξ̇|` on `[0, t_end]`, exact for the analytic families and sampled
    /// otherwise.
    pub fn max_speed(&self, t_end: f64) -> f64 {
        let norm = |v: Vec3| dot(v, v).sqrt();
        match self {
            FrameTrajectory::Rest => 0.0,
            FrameTrajectory::Boost { velocity } => norm(*velocity),
            FrameTrajectory::UniformAccel { acceleration } => norm(*acceleration) * t_end.abs(),
            FrameTrajectory::Oscillation { amplitude, omega } => {
                if (omega * t_end).abs() >= PI {
                    norm(*amplitude) * omega.abs()
                } else {
                    norm(self.xi_dot(0.0)).max(norm(self.xi_dot(t_end)))
                }
            }
            FrameTrajectory::Tabulated(_) => (0..=4096)
                .map(|i| norm(self.xi_dot(t_end * i as f64 / 4096.0)))
                .fold(0.0, f64::max),
        }
    }
}

/// Constant gauge vector `d` of the effective potential. Only constant
/// gauges are supported.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaugeTerm {
    pub d: Vec3,
}

impl GaugeTerm {
    pub fn zero() -> Self {
        GaugeTerm::default()
    }
}

/// `c(t) = −½∫₀ᵗ (|ξ̇|² − 2ξ̈·d) dt'`, in closed form for the analytic
/// families and by adaptive quadrature for tabulated ones.
pub fn c_of_t(trajectory: &FrameTrajectory, gauge: &GaugeTerm, t: f64) -> Result<f64> {
    trajectory.check_time(t)?;
    let d = gauge.d;
    // ∫ξ̈·d = d·(ξ̇(t) − ξ̇(0)) for constant d
    let gauge_part = dot(d, trajectory.xi_dot(t)) - dot(d, trajectory.xi_dot(0.0));
    let kinetic = match trajectory {
        FrameTrajectory::Rest => 0.0,
        FrameTrajectory::Boost { velocity } => -0.5 * dot(*velocity, *velocity) * t,
        FrameTrajectory::UniformAccel { acceleration } => -dot(*acceleration, *acceleration) * t.powi(3) / 6.0,
        FrameTrajectory::Oscillation { amplitude, omega } => {
            let w = *omega;
            let a2 = dot(*amplitude, *amplitude);
            if w == 0.0 {
                0.0
            } else {
                -0.5 * a2 * w * w * (0.5 * t + (2.0 * w * t).sin() / (4.0 * w))
            }
        }
        FrameTrajectory::Tabulated(_) => return c_of_t_quadrature(trajectory, gauge, t),
    };
    Ok(kinetic + gauge_part)
}

/// [`c_of_t`] by adaptive trapezoid quadrature of the integrand, for any
/// family.
pub fn c_of_t_quadrature(trajectory: &FrameTrajectory, gauge: &GaugeTerm, t: f64) -> Result<f64> {
    trajectory.check_time(t)?;
    let integrand = |s: f64| {
        let v = trajectory.xi_dot(s);
        -0.5 * (dot(v, v) - 2.0 * dot(trajectory.xi_ddot(s), gauge.d))
    };
    let scale = integrand(0.0).abs().max(integrand(t).abs()).max(integrand(0.5 * t).abs()).max(1.0);
    Ok(adaptive_trapezoid(&integrand, 0.0, t, QUADRATURE_TOLERANCE * scale * t.abs().max(1.0)))
}

/// Whether a state on a periodic grid may carry a non-lattice phase ramp:
/// the mass within [`LOCALIZATION_MARGIN`] of the faces is below
/// [`LOCALIZATION_MASS`].
pub fn is_boundary_localized(rho: &RealField) -> bool {
    boundary_layer_mass(rho, LOCALIZATION_MARGIN) < LOCALIZATION_MASS
}

fn ramp(grid: &Grid, k: Vec3, offset: f64) -> ComplexField {
    Field::from_fn(*grid, |x| Complex64::from_polar(1.0, dot(k, x) + offset))
}

fn check_ramp(rho: &RealField, k: Vec3) -> Result<()> {
    let grid = rho.grid();
    if grid.is_periodic() && !grid.on_momentum_lattice(k, 1e-9) {
        let mass = boundary_layer_mass(rho, LOCALIZATION_MARGIN);
        if mass >= LOCALIZATION_MASS {
            return Err(Error::OffLatticeRamp {
                slope: k,
                boundary_mass: mass,
            });
        }
    }
    Ok(())
}

fn shift_checked(psi: &ComplexField, by: Vec3) -> Result<ComplexField> {
    let shifted = shift_field_complex(psi, by);
    if shifted.touches_boundary() {
        return Err(Error::BoundaryContact {
            mass: shifted.boundary_loss,
        });
    }
    Ok(shifted.field)
}

/// `Ψ̃(x̃) = Ψ(x̃ − ξ) exp(i(m/ħ)(ξ̇·x̃ + c))` at time `t`.
///
/// On periodic grids an off-lattice ramp is only accepted for
/// boundary-localized wavefunctions; on Dirichlet grids the displaced
/// packet must not lose mass through the walls.
pub fn transform_psi(
    psi: &ComplexField,
    trajectory: &FrameTrajectory,
    gauge: &GaugeTerm,
    t: f64,
    constants: &Constants,
) -> Result<ComplexField> {
    let c = c_of_t(trajectory, gauge, t)?;
    let k = scale(trajectory.xi_dot(t), constants.phase_scale());
    check_ramp(&psi.norm_sqr(), k)?;
    let shifted = shift_checked(psi, trajectory.xi(t))?;
    let phase = ramp(psi.grid(), k, constants.phase_scale() * c);
    Ok(shifted.zip_map(&phase, |a, b| a * b))
}

/// Exact inverse of [`transform_psi`].
pub fn inverse_transform_psi(
    psi: &ComplexField,
    trajectory: &FrameTrajectory,
    gauge: &GaugeTerm,
    t: f64,
    constants: &Constants,
) -> Result<ComplexField> {
    let c = c_of_t(trajectory, gauge, t)?;
    let k = scale(trajectory.xi_dot(t), constants.phase_scale());
    check_ramp(&psi.norm_sqr(), k)?;
    let phase = ramp(psi.grid(), scale(k, -1.0), -constants.phase_scale() * c);
    shift_checked(&psi.zip_map(&phase, |a, b| a * b), scale(trajectory.xi(t), -1.0))
}

/// Decomposes a transformed wavefunction and moves its phase onto the 2π
/// branch predicted from `expected` at the densest node.
fn align(psi: &ComplexField, time: f64, expected: impl Fn(Vec3) -> f64) -> Result<State> {
    let mut state = decompose(psi, time)?.state;
    let i = state.rho.argmax();
    let target = expected(state.grid().node(i));
    let turns = ((target - state.phi.values()[i]) / (2.0 * PI)).round();
    if turns != 0.0 {
        state.phi = state.phi.map(|p| p + 2.0 * PI * turns);
    }
    Ok(state)
}

/// Observer frame state: `ρ̃(x̃) = ρ(x̃ − ξ)` and
/// `φ̃(x̃) = φ(x̃ − ξ) + (m/ħ)(ξ̇·x̃ + c)` at the state's time.
///
/// The phase is recomputed from the transformed wavefunction and placed on
/// the 2π branch of the formula at the densest node.
pub fn transform_state(
    state: &State,
    trajectory: &FrameTrajectory,
    gauge: &GaugeTerm,
    constants: &Constants,
) -> Result<State> {
    let t = state.time;
    let psi = transform_psi(&compose(state), trajectory, gauge, t, constants)?;
    let xi = trajectory.xi(t);
    let k = scale(trajectory.xi_dot(t), constants.phase_scale());
    let offset = constants.phase_scale() * c_of_t(trajectory, gauge, t)?;
    align(&psi, t, |x| {
        let src = [x[0] - xi[0], x[1] - xi[1], x[2] - xi[2]];
        interpolate_linear(&state.phi, src) + dot(k, x) + offset
    })
}

/// Exact inverse of [`transform_state`].
pub fn inverse_transform_state(
    state: &State,
    trajectory: &FrameTrajectory,
    gauge: &GaugeTerm,
    constants: &Constants,
) -> Result<State> {
    let t = state.time;
    let psi = inverse_transform_psi(&compose(state), trajectory, gauge, t, constants)?;
    let xi = trajectory.xi(t);
    let k = scale(trajectory.xi_dot(t), constants.phase_scale());
    let offset = constants.phase_scale() * c_of_t(trajectory, gauge, t)?;
    align(&psi, t, |x| {
        let dst = [x[0] + xi[0], x[1] + xi[1], x[2] + xi[2]];
        interpolate_linear(&state.phi, dst) - dot(k, dst) - offset
    })
}

/// The state displaced by `ξ(t)` without any phase change: `ρ(x̃ − ξ)`,
/// `φ(x̃ − ξ)`. This is how an inertial field is compared point by point with
/// its transformed counterpart.
pub fn displace_psi(psi: &ComplexField, trajectory: &FrameTrajectory, t: f64) -> Result<ComplexField> {
    shift_checked(psi, trajectory.xi(t))
}

/// `Ṽ(x̃, t) = V(x̃ − ξ(t), t) − mξ̈(t)·(x̃ + d)`, with its exact time
/// derivative where V is analytic.
pub fn transform_potential(
    potential: &Potential,
    trajectory: &FrameTrajectory,
    gauge: &GaugeTerm,
    constants: &Constants,
) -> Potential {
    effective_potential(potential, trajectory, gauge, constants, 1.0)
}

/// [`transform_potential`] with the gravitational term multiplied by
/// `sign`. `sign = −1` gives the mis-signed potential used as a negative
/// control.
pub fn effective_potential(
    potential: &Potential,
    trajectory: &FrameTrajectory,
    gauge: &GaugeTerm,
    constants: &Constants,
    sign: f64,
) -> Potential {
    if trajectory.is_rest() {
        return potential.clone();
    }
    let (v, traj, d, m) = (potential.clone(), trajectory.clone(), gauge.d, constants.mass);
    let value = {
        let (v, traj) = (v.clone(), traj.clone());
        move |grid: &Grid, t: f64| {
            let a = traj.xi_ddot(t);
            let base = displaced_potential(&v, grid, traj.xi(t), t);
            let dim = grid.dim();
            Field::from_fn(*grid, |x| {
                -sign * m * (0..dim).map(|i| a[i] * (x[i] + d[i])).sum::<f64>()
            })
            .add(&base)
        }
    };
    let rate = move |grid: &Grid, t: f64| {
        let (xi, xi_dot, jerk) = (traj.xi(t), traj.xi_dot(t), traj.xi_dddot(t));
        let dim = grid.dim();
        let gravity = Field::from_fn(*grid, |x| {
            -sign * m * (0..dim).map(|i| jerk[i] * (x[i] + d[i])).sum::<f64>()
        });
        let moving = match &v {
            Potential::Zero => RealField::zeros(*grid),
            Potential::Linear { slope } => RealField::filled(*grid, -dot(*slope, xi_dot)),
            Potential::Harmonic { stiffness, center } => Field::from_fn(*grid, |x| {
                -stiffness * (0..dim).map(|i| (x[i] - xi[i] - center[i]) * xi_dot[i]).sum::<f64>()
            }),
            other => {
                // ∂_t[V(x̃ − ξ, t)] = (∂_tV)(x̃ − ξ) − ξ̇·∇V(x̃ − ξ)
                let shifted = displaced_potential(other, grid, xi, t);
                let own = shift_field(&other.rate(grid, t), xi).field;
                gradient(&shifted)
                    .iter()
                    .enumerate()
                    .fold(own, |acc, (i, g)| acc.sub(&g.scale(xi_dot[i])))
            }
        };
        gravity.add(&moving)
    };
    Potential::time_dependent_with_rate(value, rate)
}

/// `V(x̃ − ξ, t)` on the grid: analytic kinds are re-centred exactly,
/// sampled ones are shifted.
fn displaced_potential(v: &Potential, grid: &Grid, xi: Vec3, t: f64) -> RealField {
    match v {
        Potential::Zero => RealField::zeros(*grid),
        Potential::Harmonic { stiffness, center } => Potential::Harmonic {
            stiffness: *stiffness,
            center: [center[0] + xi[0], center[1] + xi[1], center[2] + xi[2]],
        }
        .evaluate(grid, t),
        Potential::Linear { slope } => {
            let off = -dot(*slope, xi);
            Potential::Linear { slope: *slope }.evaluate(grid, t).map(|x| x + off)
        }
        other => shift_field(&other.evaluate(grid, t), xi).field,
    }
}

/// `S̃ − S = (m/ħ)(ξ̇·x̃ − ½∫₀ᵗ|ξ̇|²)` at one observer point (zero gauge).
pub fn entropy_shift_at(trajectory: &FrameTrajectory, t: f64, x_tilde: Vec3, constants: &Constants) -> Result<f64> {
    let c = c_of_t(trajectory, &GaugeTerm::zero(), t)?;
    Ok(constants.phase_scale() * (dot(trajectory.xi_dot(t), x_tilde) + c))
}

/// [`entropy_shift_at`] at every node of `grid`.
pub fn entropy_shift(trajectory: &FrameTrajectory, t: f64, grid: &Grid, constants: &Constants) -> Result<RealField> {
    let c = c_of_t(trajectory, &GaugeTerm::zero(), t)?;
    let v = trajectory.xi_dot(t);
    let k = constants.phase_scale();
    Ok(Field::from_fn(*grid, |x| k * (dot(v, x) + c)))
}

/// First-order and exact proper-time defects of a moving frame.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProperTimeResidue {
    /// `(1/2c²)∫₀ᵀ|ξ̇|² dt`.
    pub first_order: f64,
    /// `T − ∫₀ᵀ(1 − |ξ̇|²/c²)^{1/2} dt`.
    pub exact: f64,
    /// `|first_order − exact| / exact`, zero when both vanish.
    pub rel_error: f64,
}

/// Compares the `½∫ξ̇²` phase term, read as a first-order proper-time
/// defect, with the exact special-relativistic one.
pub fn proper_time_residue(trajectory: &FrameTrajectory, t_end: f64, c_light: f64) -> Result<ProperTimeResidue> {
    if !(c_light > 0.0 && c_light.is_finite()) {
        return Err(Error::param("c_light", "must be positive"));
    }
    if !(t_end >= 0.0) {
        return Err(Error::param("T", "must be non-negative"));
    }
    trajectory.check_time(t_end)?;
    let speed = trajectory.max_speed(t_end);
    if speed >= c_light {
        return Err(Error::Superluminal { speed, c_light });
    }
    let beta2 = |s: f64| {
        let v = trajectory.xi_dot(s);
        dot(v, v) / (c_light * c_light)
    };
    let first_integrand = |s: f64| 0.5 * beta2(s);
    // 1 − √(1 − β²) written without cancellation
    let exact_integrand = |s: f64| {
        let b2 = beta2(s);
        b2 / (1.0 + (1.0 - b2).sqrt())
    };
    let magnitude = (0..=16)
        .map(|i| first_integrand(t_end * i as f64 / 16.0))
        .fold(0.0, f64::max)
        * t_end;
    let tol = QUADRATURE_TOLERANCE * magnitude.max(f64::MIN_POSITIVE);
    let first_order = adaptive_trapezoid(&first_integrand, 0.0, t_end, tol);
    let exact = adaptive_trapezoid(&exact_integrand, 0.0, t_end, tol);
    let rel_error = if exact == 0.0 {
        0.0
    } else {
        (first_order - exact).abs() / exact
    };
    Ok(ProperTimeResidue {
        first_order,
        exact,
        rel_error,
    })
}

/// Deviations from `b̃ = b + ξ̇`, `ũ = u` and `ṽ = v + ξ̇` over the region
/// where `ρ̃ > 1e-6·max ρ̃`. The inertial fields are taken from the displaced
/// state `Ψ(x̃ − ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DriftCheck {
    pub drift: f64,
    pub osmotic: f64,
    pub current: f64,
}

pub fn transformed_drift_check(
    state: &State,
    trajectory: &FrameTrajectory,
    constants: &Constants,
) -> Result<DriftCheck> {
    let t = state.time;
    let gauge = GaugeTerm::zero();
    let moved = transform_state(state, trajectory, &gauge, constants)?;
    let displaced = decompose(&displace_psi(&compose(state), trajectory, t)?, t)?.state;
    let mask = reliable_mask(&moved.rho, MASK_RELATIVE);
    let xi_dot = trajectory.xi_dot(t);
    let b = drift_velocity(&entropy_field(&displaced), constants).offset(xi_dot);
    let b_t = drift_velocity(&entropy_field(&moved), constants);
    let u = osmotic_velocity(&displaced.rho, constants);
    let u_t = osmotic_velocity(&moved.rho, constants);
    let v = current_velocity(&displaced, constants).offset(xi_dot);
    let v_t = current_velocity(&moved, constants);
    Ok(DriftCheck {
        drift: b_t.masked_max_diff(&b, &mask),
        osmotic: u_t.masked_max_diff(&u, &mask),
        current: v_t.masked_max_diff(&v, &mask),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::free_gaussian_analytic;
    use crate::field::{integrate, Boundary};

    fn families() -> Vec<FrameTrajectory> {
        vec![
            FrameTrajectory::Boost {
                velocity: [0.7, -0.2, 0.1],
            },
            FrameTrajectory::UniformAccel {
                acceleration: [1.0, 0.5, 0.0],
            },
            FrameTrajectory::Oscillation {
                amplitude: [0.3, 0.0, 0.2],
                omega: 2.5,
            },
        ]
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let h = 1e-4;
        for f in families() {
            for t in [0.0, 0.4, 1.3] {
                for order in 0..3 {
                    let fd = {
                        let a = f.derivative(t + h, order);
                        let b = f.derivative(t - h, order);
                        [0, 1, 2].map(|i| (a[i] - b[i]) / (2.0 * h))
                    };
                    let exact = f.derivative(t, order + 1);
                    for i in 0..3 {
                        assert!((fd[i] - exact[i]).abs() < 1e-6, "{f:?} {order}");
                    }
                }
            }
        }
    }

    #[test]
    fn closed_form_c() {
        let boost = FrameTrajectory::Boost { velocity: [1.0, 0., 0.] };
        assert_eq!(c_of_t(&boost, &GaugeTerm::zero(), 2.0).unwrap(), -1.0);
        let accel = FrameTrajectory::UniformAccel {
            acceleration: [1.0, 0., 0.],
        };
        let c = c_of_t(&accel, &GaugeTerm::zero(), 1.0).unwrap();
        assert!((c + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(c_of_t(&FrameTrajectory::Rest, &GaugeTerm::zero(), 5.0).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_agrees_with_closed_forms() {
        let gauge = GaugeTerm { d: [0.4, -1.0, 2.0] };
        for f in families() {
            for t in [0.3, 1.0, 2.7] {
                for g in [GaugeTerm::zero(), gauge] {
                    let a = c_of_t(&f, &g, t).unwrap();
                    let b = c_of_t_quadrature(&f, &g, t).unwrap();
                    assert!((a - b).abs() < 1e-9, "{f:?} t={t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn tabulated_follows_samples() {
        let times: Vec<f64> = (0..201).map(|i| i as f64 * 0.01).collect();
        let xs: Vec<f64> = times.iter().map(|t| 0.5 * t * t).collect();
        let tab = FrameTrajectory::Tabulated(TabulatedTrajectory::new(&times, &[xs]).unwrap());
        let c = c_of_t(&tab, &GaugeTerm::zero(), 1.0).unwrap();
        assert!((c + 1.0 / 6.0).abs() < 1e-4, "{c}");
        assert!((tab.xi_ddot(1.0)[0] - 1.0).abs() < 1e-3);
        assert!(c_of_t(&tab, &GaugeTerm::zero(), 2.5).is_err());
        assert!(TabulatedTrajectory::new(&[0.0, 0.0], &[vec![1.0, 2.0]]).is_err());
    }

    fn packet(grid: &Grid) -> State {
        let c = Constants::default();
        let psi = free_gaussian_analytic([0.5, 0., 0.], [0.8, 0., 0.], 1.0, 0.0, &c, grid);
        decompose(&psi, 0.4).unwrap().state
    }

    #[test]
    fn rest_frame_is_identity() {
        let g = Grid::periodic_1d(256, 40.0, -20.0).unwrap();
        let s = packet(&g);
        let t = transform_state(&s, &FrameTrajectory::Rest, &GaugeTerm::zero(), &Constants::default()).unwrap();
        assert!(t.rho.max_abs_diff(&s.rho) < 1e-12);
        assert!(t.phi.max_abs_diff(&s.phi) < 1e-12);
    }

    #[test]
    fn boost_round_trip_and_momentum() {
        let g = Grid::periodic_1d(512, 40.0, -20.0).unwrap();
        let c = Constants::new(2.0, 1.0).unwrap();
        let s = packet(&g);
        let boost = FrameTrajectory::Boost { velocity: [0.37, 0., 0.] };
        let t = transform_state(&s, &boost, &GaugeTerm::zero(), &c).unwrap();
        assert!((integrate(&t.rho) - 1.0).abs() < 1e-10);
        let p = |st: &State| {
            let v = current_velocity(st, &c);
            c.mass * integrate(&v.components[0].mul(&st.rho))
        };
        assert!((p(&t) - p(&s) - c.mass * 0.37).abs() < 1e-10);
        let back = inverse_transform_state(&t, &boost, &GaugeTerm::zero(), &c).unwrap();
        assert!(compose(&back).l2_distance(&compose(&s)) < 1e-10);
        let mask = reliable_mask(&s.rho, MASK_RELATIVE);
        let dev = back.phi.sub(&s.phi);
        let c0 = dev.values()[s.rho.argmax()];
        for (i, &m) in mask.iter().enumerate() {
            if m {
                assert!((dev.values()[i] - c0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn density_is_carried_along() {
        let g = Grid::periodic_1d(512, 40.0, -20.0).unwrap();
        let s = packet(&g);
        let accel = FrameTrajectory::UniformAccel {
            acceleration: [1.3, 0., 0.],
        };
        let t = transform_state(&s, &accel, &GaugeTerm::zero(), &Constants::default()).unwrap();
        let expect = shift_field(&s.rho, accel.xi(0.4)).field;
        assert!(t.rho.max_abs_diff(&expect) < 1e-10);
    }

    #[test]
    fn boosts_compose() {
        let g = Grid::periodic_1d(512, 40.0, -20.0).unwrap();
        let c = Constants::default();
        let psi = compose(&packet(&g));
        let z = GaugeTerm::zero();
        let b = |v: f64| FrameTrajectory::Boost { velocity: [v, 0., 0.] };
        let two = transform_psi(&transform_psi(&psi, &b(0.3), &z, 0.4, &c).unwrap(), &b(-0.9), &z, 0.4, &c).unwrap();
        let one = transform_psi(&psi, &b(-0.6), &z, 0.4, &c).unwrap();
        let i = one.norm_sqr().argmax();
        let phase = one.values()[i] / two.values()[i];
        let phase = phase / phase.norm();
        assert!(two.scale(phase).l2_distance(&one) < 1e-9);
    }

    #[test]
    fn off_lattice_ramp_needs_localization() {
        let g = Grid::periodic_1d(64, 10.0, 0.0).unwrap();
        let s = State::from_fns(g, |_| 1.0, |_| 0.0, 1.0).unwrap();
        let c = Constants::default();
        let off = FrameTrajectory::Boost { velocity: [0.1, 0., 0.] };
        assert!(matches!(
            transform_state(&s, &off, &GaugeTerm::zero(), &c),
            Err(Error::OffLatticeRamp { .. })
        ));
        let on = FrameTrajectory::Boost {
            velocity: [2.0 * PI / 10.0, 0., 0.],
        };
        assert!(transform_state(&s, &on, &GaugeTerm::zero(), &c).is_ok());
    }

    #[test]
    fn dirichlet_wall_contact() {
        let g = Grid::new(&[201], &[20.0], &[-10.0], Boundary::DirichletZero).unwrap();
        let s = packet(&g);
        let far = FrameTrajectory::Boost { velocity: [20.0, 0., 0.] };
        assert!(matches!(
            transform_state(&s, &far, &GaugeTerm::zero(), &Constants::default()),
            Err(Error::BoundaryContact { .. })
        ));
    }

    #[test]
    fn effective_potential_of_uniform_acceleration() {
        let g = Grid::periodic_1d(16, 16.0, -8.0).unwrap();
        let c = Constants::new(2.0, 1.0).unwrap();
        let accel = FrameTrajectory::UniformAccel {
            acceleration: [1.5, 0., 0.],
        };
        let v = transform_potential(&Potential::Zero, &accel, &GaugeTerm::zero(), &c);
        let expect = Field::from_fn(g, |x| -2.0 * 1.5 * x[0]);
        assert!(v.evaluate(&g, 0.7).max_abs_diff(&expect) < 1e-12);
        assert!(v.rate(&g, 0.7).max() == 0.0);
        let gauged = transform_potential(&Potential::Zero, &accel, &GaugeTerm { d: [1.0, 0., 0.] }, &c);
        let diff = gauged.evaluate(&g, 0.7).sub(&v.evaluate(&g, 0.7));
        assert!(diff.values().iter().all(|&x| (x + 3.0).abs() < 1e-12));
    }

    #[test]
    fn inertial_frame_shifts_potential() {
        let g = Grid::periodic_1d(64, 16.0, -8.0).unwrap();
        let c = Constants::default();
        let boost = FrameTrajectory::Boost { velocity: [0.5, 0., 0.] };
        let h = Potential::Harmonic {
            stiffness: 2.0,
            center: [0.0; 3],
        };
        let v = transform_potential(&h, &boost, &GaugeTerm::zero(), &c);
        let expect = Field::from_fn(g, |x| (x[0] - 0.5).powi(2));
        assert!(v.evaluate(&g, 1.0).max_abs_diff(&expect) < 1e-12);
        let fd = v.evaluate(&g, 1.0 + 1e-6).sub(&v.evaluate(&g, 1.0 - 1e-6)).scale(0.5e6);
        assert!(v.rate(&g, 1.0).max_abs_diff(&fd) < 1e-6);
    }

    #[test]
    fn oscillating_frame_rate_matches_difference() {
        let g = Grid::periodic_1d(128, 16.0, -8.0).unwrap();
        let c = Constants::default();
        let osc = FrameTrajectory::Oscillation {
            amplitude: [0.4, 0., 0.],
            omega: 3.0,
        };
        let tab = Potential::Tabulated(Field::from_fn(g, |x| (-(x[0] * x[0])).exp()));
        let v = transform_potential(&tab, &osc, &GaugeTerm::zero(), &c);
        let t = 0.3;
        let fd = v.evaluate(&g, t + 1e-6).sub(&v.evaluate(&g, t - 1e-6)).scale(0.5e6);
        assert!(v.rate(&g, t).max_abs_diff(&fd) < 1e-5);
    }

    #[test]
    fn entropy_shift_example() {
        let boost = FrameTrajectory::Boost { velocity: [1.0, 0., 0.] };
        let s = entropy_shift_at(&boost, 2.0, [3.0, 0., 0.], &Constants::default()).unwrap();
        assert!((s - 2.0).abs() < 1e-15);
        let g = Grid::periodic_1d(8, 8.0, 0.0).unwrap();
        assert!(entropy_shift(&FrameTrajectory::Rest, 1.0, &g, &Constants::default())
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn proper_time_scaling() {
        let c_light = 10.0;
        let boost = |v: f64| FrameTrajectory::Boost { velocity: [v, 0., 0.] };
        let r = proper_time_residue(&boost(0.1), 1.0, c_light).unwrap();
        let beta2 = 1e-4;
        assert!(r.rel_error > beta2 / 8.0 && r.rel_error < beta2 / 2.0, "{r:?}");
        let half = proper_time_residue(&boost(0.05), 1.0, c_light).unwrap();
        let ratio = r.rel_error / half.rel_error;
        assert!((2.0..8.0).contains(&ratio), "{ratio}");
        let zero = proper_time_residue(&FrameTrajectory::Rest, 1.0, c_light).unwrap();
        assert_eq!((zero.first_order, zero.exact, zero.rel_error), (0.0, 0.0, 0.0));
        assert!(matches!(
            proper_time_residue(&boost(11.0), 1.0, c_light),
            Err(Error::Superluminal { .. })
        ));
    }

    #[test]
    fn velocity_identities_in_moving_frames() {
        let g = Grid::periodic_1d(512, 40.0, -20.0).unwrap();
        let c = Constants::default();
        let s = packet(&g);
        let rest = transformed_drift_check(&s, &FrameTrajectory::Rest, &c).unwrap();
        assert!(rest.drift < 1e-12 && rest.osmotic < 1e-12 && rest.current < 1e-12, "{rest:?}");
        for f in families() {
            let d = transformed_drift_check(&s, &f, &c).unwrap();
            assert!(d.drift < 1e-8 && d.osmotic < 1e-8 && d.current < 1e-8, "{f:?} {d:?}");
        }
    }
}
