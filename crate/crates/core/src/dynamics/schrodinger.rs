use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::potential::Potential;
use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::{integrate, spectral, ComplexField, Grid, RealField};
use crate::madelung::{compose, decompose, energy_psi, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Strang splitting `e^{-iVΔt/2ħ} e^{-iTΔt/ħ} e^{-iVΔt/2ħ}` with V taken
    /// at the half step. Periodic grids only.
    SplitStep,
    /// Trapezoidal (Cayley) step, solved iteratively. Periodic grids use the
    /// spectral kinetic operator, Dirichlet grids the three-point stencil
    /// with zero boundary values.
    CrankNicolson,
}

/// One saved wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub psi: ComplexField,
}

impl Snapshot {
    pub fn state(&self) -> Result<State> {
        Ok(decompose(&self.psi, self.time)?.state)
    }
}

/// Per-step diagnostics of an evolution run. Entry `n` refers to the state
/// after `n` steps (entry 0 is the initial state).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolutionLog {
    pub dt: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// `E = ∫ρ(½mv² + ½mu² + V)` with V at the same instant.
    pub energies: Vec<f64>,
    /// The kinetic part `∫ρ(½mv² + ½mu²)`.
    pub kinetic: Vec<f64>,
    /// `∫ρ ∂_tV`.
    pub power: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Set when `dt > Δx² m/(ħπ)`: split-step stays stable beyond that, but
    /// loses accuracy for the highest resolved momenta.
    pub exceeds_accuracy_limit: bool,
}

impl EvolutionLog {
    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    fn record(&mut self, psi: &ComplexField, t: f64, potential: &Potential, constants: &Constants) {
        let grid = psi.grid();
        let v = potential.evaluate(grid, t);
        let rho = psi.norm_sqr();
        let energy = energy_psi(psi, &v, constants);
        let potential_energy = integrate(&rho.mul(&v));
        let power = if potential.is_static() {
            0.0
        } else {
            integrate(&rho.mul(&potential.rate(grid, t)))
        };
        self.times.push(t);
        self.norms.push(integrate(&rho));
        self.energies.push(energy);
        self.kinetic.push(energy - potential_energy);
        self.power.push(power);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    pub steps: usize,
    pub method: Method,
    /// Save a snapshot every this many steps (plus the initial state). `None`
    /// keeps only the initial and final states.
    pub snapshot_stride: Option<usize>,
}

impl EvolveOptions {
    pub fn new(dt: f64, steps: usize, method: Method) -> Self {
        EvolveOptions {
            dt,
            steps,
            method,
            snapshot_stride: None,
        }
    }

    pub fn with_snapshots(mut self, stride: usize) -> Self {
        self.snapshot_stride = Some(stride.max(1));
        self
    }
}

/// Advances a wavefunction by one time step of fixed size.
pub struct Propagator {
    grid: Grid,
    constants: Constants,
    dt: f64,
    method: Method,
    potential: Potential,
    /// Split-step: `e^{-iħk²Δt/2m}` per mode. Crank-Nicolson on a periodic
    /// grid: `ħ²k²/2m` per mode (stored in the real part).
    kinetic: Vec<Complex64>,
    /// Half-step potential phase for static potentials.
    static_half_kick: Option<Vec<Complex64>>,
    static_v: Option<RealField>,
}

const CN_TOLERANCE: f64 = 1e-13;
const CN_MAX_ITER: usize = 500;

impl Propagator {
    pub fn new(
        grid: Grid,
        potential: Potential,
        constants: Constants,
        dt: f64,
        method: Method,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("{dt} is not positive")));
        }
        if method == Method::SplitStep && !grid.is_periodic() {
            return Err(Error::SplitStepNeedsPeriodic);
        }
        let hbar = constants.hbar;
        let m = constants.mass;
        let kinetic = if grid.is_periodic() {
            spectral::squared_wavenumbers(&grid)
                .into_iter()
                .map(|k2| {
                    let t = hbar * hbar * k2 / (2.0 * m);
                    match method {
                        Method::SplitStep => Complex64::from_polar(1.0, -t * dt / hbar),
                        Method::CrankNicolson => Complex64::new(t, 0.0),
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        let static_v = potential.is_static().then(|| potential.evaluate(&grid, 0.0));
        let static_half_kick = match (&static_v, method) {
            (Some(v), Method::SplitStep) => Some(half_kick(v, dt, hbar)),
            _ => None,
        };
        Ok(Propagator {
            grid,
            constants,
            dt,
            method,
            potential,
            kinetic,
            static_half_kick,
            static_v,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// Largest step for which the fastest resolved mode turns by less than
    /// π per step: `Δx² m/(ħπ)` on the finest axis.
    pub fn accuracy_limit(&self) -> f64 {
        let dx = self.grid.spacings().into_iter().fold(f64::INFINITY, f64::min);
        dx * dx * self.constants.mass / (self.constants.hbar * PI)
    }

    /// `ψ(t) → ψ(t + Δt)`.
    pub fn step(&self, psi: &ComplexField, t: f64) -> Result<ComplexField> {
        if psi.grid() != &self.grid {
            return Err(Error::GridMismatch("wavefunction and propagator grids differ".into()));
        }
        let out = match self.method {
            Method::SplitStep => self.split_step(psi, t),
            Method::CrankNicolson => self.crank_nicolson(psi, t)?,
        };
        if !out.all_finite() {
            return Err(Error::NonFinite("Schrödinger step"));
        }
        Ok(out)
    }

    fn potential_at(&self, t: f64) -> std::borrow::Cow<'_, RealField> {
        match &self.static_v {
            Some(v) => std::borrow::Cow::Borrowed(v),
            None => std::borrow::Cow::Owned(self.potential.evaluate(&self.grid, t)),
        }
    }

    fn split_step(&self, psi: &ComplexField, t: f64) -> ComplexField {
        let kick_owned;
        let kick: &[Complex64] = match &self.static_half_kick {
            Some(k) => k,
            None => {
                kick_owned = half_kick(&self.potential.evaluate(&self.grid, t + 0.5 * self.dt), self.dt, self.constants.hbar);
                &kick_owned
            }
        };
        let mut out = psi.clone();
        let buf = out.values_mut();
        buf.iter_mut().zip(kick).for_each(|(z, k)| *z *= k);
        spectral::fft_all(buf, &self.grid, true);
        buf.iter_mut().zip(&self.kinetic).for_each(|(z, k)| *z *= k);
        spectral::fft_all(buf, &self.grid, false);
        buf.iter_mut().zip(kick).for_each(|(z, k)| *z *= k);
        out
    }

    /// `H ψ` with the method's kinetic operator and the given potential.
    fn apply_h(&self, psi: &[Complex64], v: &[f64]) -> Vec<Complex64> {
        let mut out = if self.grid.is_periodic() {
            let mut buf = psi.to_vec();
            spectral::fft_all(&mut buf, &self.grid, true);
            buf.iter_mut().zip(&self.kinetic).for_each(|(z, k)| *z *= k.re);
            spectral::fft_all(&mut buf, &self.grid, false);
            buf
        } else {
            self.dirichlet_kinetic(psi)
        };
        out.iter_mut().zip(psi).zip(v).for_each(|((o, p), v)| *o += p * v);
        out
    }

    fn is_boundary_node(&self, i: usize) -> bool {
        let idx = self.grid.unravel(i);
        (0..self.grid.dim()).any(|a| idx[a] == 0 || idx[a] == self.grid.points()[a] - 1)
    }

    fn dirichlet_kinetic(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let coef = -self.constants.hbar * self.constants.hbar / (2.0 * self.constants.mass);
        let mut out = vec![Complex64::default(); psi.len()];
        for (i, o) in out.iter_mut().enumerate() {
            if self.is_boundary_node(i) {
                continue;
            }
            let mut acc = Complex64::default();
            for a in 0..self.grid.dim() {
                let s = self.grid.stride(a);
                let h2 = self.grid.spacing(a).powi(2);
                acc += (psi[i + s] - 2.0 * psi[i] + psi[i - s]) / h2;
            }
            *o = coef * acc;
        }
        out
    }

    fn crank_nicolson(&self, psi: &ComplexField, t: f64) -> Result<ComplexField> {
        let v = self.potential_at(t + 0.5 * self.dt);
        let v = v.values();
        let half = Complex64::new(0.0, 0.5 * self.dt / self.constants.hbar);
        let dirichlet = !self.grid.is_periodic();
        let mask = |x: &mut [Complex64]| {
            if dirichlet {
                for (i, z) in x.iter_mut().enumerate() {
                    if self.is_boundary_node(i) {
                        *z = Complex64::default();
                    }
                }
            }
        };
        let h_psi = self.apply_h(psi.values(), v);
        let mut rhs: Vec<Complex64> = psi.values().iter().zip(&h_psi).map(|(p, h)| p - half * h).collect();
        mask(&mut rhs);
        let apply_a = |x: &[Complex64]| -> Vec<Complex64> {
            let hx = self.apply_h(x, v);
            let mut out: Vec<Complex64> = x.iter().zip(&hx).map(|(p, h)| p + half * h).collect();
            if dirichlet {
                for (i, z) in out.iter_mut().enumerate() {
                    if self.is_boundary_node(i) {
                        *z = x[i];
                    }
                }
            }
            out
        };
        let precondition = |x: &[Complex64]| -> Vec<Complex64> {
            if self.grid.is_periodic() {
                let mut buf = x.to_vec();
                spectral::fft_all(&mut buf, &self.grid, true);
                buf.iter_mut()
                    .zip(&self.kinetic)
                    .for_each(|(z, k)| *z /= Complex64::new(1.0, 0.0) + half * k.re);
                spectral::fft_all(&mut buf, &self.grid, false);
                buf
            } else {
                let coef = self.constants.hbar * self.constants.hbar / self.constants.mass;
                let diag_kin: f64 = (0..self.grid.dim()).map(|a| coef / self.grid.spacing(a).powi(2)).sum();
                x.iter()
                    .enumerate()
                    .map(|(i, z)| {
                        if self.is_boundary_node(i) {
                            *z
                        } else {
                            z / (Complex64::new(1.0, 0.0) + half * (diag_kin + v[i]))
                        }
                    })
                    .collect()
            }
        };
        let mut x0 = psi.values().to_vec();
        mask(&mut x0);
        let x = bicgstab(&apply_a, &precondition, &rhs, x0, CN_TOLERANCE, CN_MAX_ITER)?;
        Ok(psi.with_values(x))
    }
}

fn half_kick(v: &RealField, dt: f64, hbar: f64) -> Vec<Complex64> {
    v.values()
        .iter()
        .map(|&v| Complex64::from_polar(1.0, -0.5 * v * dt / hbar))
        .collect()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Right-preconditioned BiCGSTAB for complex systems.
fn bicgstab(
    apply_a: &dyn Fn(&[Complex64]) -> Vec<Complex64>,
    precondition: &dyn Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    mut x: Vec<Complex64>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Complex64>> {
    let b_norm = norm(b).max(f64::MIN_POSITIVE);
    let ax = apply_a(&x);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if norm(&r) <= tol * b_norm {
        return Ok(x);
    }
    let r_hat = r.clone();
    let one = Complex64::new(1.0, 0.0);
    let (mut rho_old, mut alpha, mut omega) = (one, one, one);
    let mut v = vec![Complex64::default(); b.len()];
    let mut p = vec![Complex64::default(); b.len()];
    let mut residual = norm(&r) / b_norm;
    for _ in 0..max_iter {
        let rho = dot(&r_hat, &r);
        let beta = (rho / rho_old) * (alpha / omega);
        for i in 0..p.len() {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precondition(&p);
        v = apply_a(&p_hat);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<Complex64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        if norm(&s) <= tol * b_norm {
            x.iter_mut().zip(&p_hat).for_each(|(x, p)| *x += alpha * p);
            return Ok(x);
        }
        let s_hat = precondition(&s);
        let t = apply_a(&s_hat);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..x.len() {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        residual = norm(&r) / b_norm;
        if residual <= tol {
            return Ok(x);
        }
        rho_old = rho;
    }
    Err(Error::SolverDiverged {
        iterations: max_iter,
        residual,
    })
}

/// Evolves a wavefunction, recording norm, energy and power every step.
pub fn evolve_psi(
    psi0: &ComplexField,
    t0: f64,
    potential: &Potential,
    constants: &Constants,
    options: &EvolveOptions,
) -> Result<(ComplexField, EvolutionLog)> {
    let propagator = Propagator::new(*psi0.grid(), potential.clone(), *constants, options.dt, options.method)?;
    let mut log = EvolutionLog {
        dt: options.dt,
        exceeds_accuracy_limit: options.dt > propagator.accuracy_limit(),
        ..Default::default()
    };
    if log.exceeds_accuracy_limit {
        warn!(
            "dt = {} exceeds the accuracy limit {:.3e}; high momenta will be inaccurate",
            options.dt,
            propagator.accuracy_limit()
        );
    }
    let mut psi = psi0.clone();
    log.record(&psi, t0, potential, constants);
    log.snapshots.push(Snapshot {
        step: 0,
        time: t0,
        psi: psi.clone(),
    });
    for n in 0..options.steps {
        let t = t0 + n as f64 * options.dt;
        psi = propagator.step(&psi, t)?;
        let t_next = t0 + (n + 1) as f64 * options.dt;
        log.record(&psi, t_next, potential, constants);
        let save = match options.snapshot_stride {
            Some(stride) => (n + 1) % stride == 0 || n + 1 == options.steps,
            None => n + 1 == options.steps,
        };
        if save {
            log.snapshots.push(Snapshot {
                step: n + 1,
                time: t_next,
                psi: psi.clone(),
            });
        }
    }
    Ok((psi, log))
}

/// Schrödinger evolution of a state: `iħ∂_tΨ = −(ħ²/2m)∇²Ψ + VΨ`.
pub fn evolve_schrodinger(
    state: &State,
    potential: &Potential,
    constants: &Constants,
    options: &EvolveOptions,
) -> Result<(State, EvolutionLog)> {
    let (psi, log) = evolve_psi(&compose(state), state.time, potential, constants, options)?;
    let t = state.time + options.steps as f64 * options.dt;
    Ok((decompose(&psi, t)?.state, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::free_gaussian_analytic;
    use crate::field::{Boundary, Field};

    fn plane_wave(g: Grid, k: f64) -> ComplexField {
        let a = (1.0 / g.domain_volume()).sqrt();
        Field::from_fn(g, |x| Complex64::from_polar(a, k * x[0]))
    }

    #[test]
    fn plane_wave_phase_is_exact() {
        let g = Grid::periodic_1d(64, 10.0, 0.0).unwrap();
        let k = 2.0 * PI * 4.0 / 10.0;
        let c = Constants::default();
        let opts = EvolveOptions::new(1e-3, 500, Method::SplitStep);
        let (psi, log) = evolve_psi(&plane_wave(g, k), 0.0, &Potential::Zero, &c, &opts).unwrap();
        let t = 0.5;
        let exact = plane_wave(g, k).scale(Complex64::from_polar(1.0, -k * k * t / 2.0));
        assert!(psi.values().iter().zip(exact.values()).all(|(a, b)| (a - b).norm() < 1e-12));
        assert!(log.norms.iter().all(|n| (n - 1.0).abs() < 1e-12));
    }

    #[test]
    fn split_step_rejects_dirichlet() {
        let g = Grid::new(&[16], &[1.0], &[0.0], Boundary::DirichletZero).unwrap();
        assert!(matches!(
            Propagator::new(g, Potential::Zero, Constants::default(), 0.1, Method::SplitStep),
            Err(Error::SplitStepNeedsPeriodic)
        ));
        let p = Grid::periodic_1d(16, 1.0, 0.0).unwrap();
        assert!(Propagator::new(p, Potential::Zero, Constants::default(), 0.0, Method::SplitStep).is_err());
    }

    #[test]
    fn crank_nicolson_preserves_norm() {
        let g = Grid::periodic_1d(256, 40.0, -20.0).unwrap();
        let c = Constants::default();
        let psi = free_gaussian_analytic([0.0; 3], [1.0, 0., 0.], 1.0, 0.0, &c, &g);
        let v = Potential::Harmonic {
            stiffness: 1.0,
            center: [0.0; 3],
        };
        let opts = EvolveOptions::new(1e-2, 50, Method::CrankNicolson);
        let (_, log) = evolve_psi(&psi, 0.0, &v, &c, &opts).unwrap();
        for w in log.norms.windows(2) {
            assert!((w[1] - w[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn dirichlet_crank_nicolson_tracks_free_packet() {
        let g = Grid::new(&[801], &[40.0], &[-20.0], Boundary::DirichletZero).unwrap();
        let c = Constants::default();
        let psi0 = free_gaussian_analytic([0.0; 3], [0.5, 0., 0.], 1.0, 0.0, &c, &g);
        let opts = EvolveOptions::new(5e-3, 200, Method::CrankNicolson);
        let (psi, log) = evolve_psi(&psi0, 0.0, &Potential::Zero, &c, &opts).unwrap();
        let exact = free_gaussian_analytic([0.0; 3], [0.5, 0., 0.], 1.0, 1.0, &c, &g);
        assert!(psi.l2_distance(&exact) < 2e-3, "{}", psi.l2_distance(&exact));
        assert!((log.norms.last().unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn time_dependent_crank_nicolson_in_two_dimensions() {
        let g = Grid::centered(&[32, 32], &[16.0, 16.0], Boundary::Periodic).unwrap();
        let c = Constants::default();
        let psi0 = free_gaussian_analytic([0.0; 3], [0.3, -0.2, 0.], 1.0, 0.0, &c, &g);
        let v = Potential::time_dependent(|g, t| Field::from_fn(*g, |x| 0.1 * t * x[0]));
        let split = EvolveOptions::new(1e-2, 50, Method::SplitStep);
        let cn = EvolveOptions::new(1e-2, 50, Method::CrankNicolson);
        let (a, _) = evolve_psi(&psi0, 0.0, &v, &c, &split).unwrap();
        let (b, _) = evolve_psi(&psi0, 0.0, &v, &c, &cn).unwrap();
        assert!(a.l2_distance(&b) < 1e-3, "{}", a.l2_distance(&b));
    }
}
