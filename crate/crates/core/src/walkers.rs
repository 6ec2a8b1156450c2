//! Monte-Carlo walkers sampling the Gaussian transition kernel
//! `P(x'|x) ∝ exp(−m|x' − x − bΔt|²/2ħΔt)`.
//!
//! Each step draws `Δx = b(x)Δt + Δw` with `Var(Δw) = (ħ/m)Δt` per axis
//! (Euler-Maruyama). The noise for walker `i` at step `n` is a pure
//! function of `(seed, i, n)`, so trajectories do not depend on evaluation
//! order.

use std::io::{self, Write};

use log::warn;

use crate::constants::Constants;
use crate::dynamics::{EvolveOptions, Method, Potential, Propagator};
use crate::error::{Error, Result};
use crate::field::{density_floor, integrate, ComplexField, Field, Grid, RealField, Vec3};
use crate::madelung::{decompose, drift_velocity, EntropyField, State, VelocityField, VelocityKind};
use crate::numerics::CounterRng;

const INIT_STREAM: u64 = 1;
const STEP_STREAM: u64 = 2;

/// `P(x'|x)` for a single pair of points, `x' − x` taken as given (no
/// periodic image).
pub fn kernel_density(x: Vec3, x_prime: Vec3, drift: Vec3, dt: f64, dim: usize, constants: &Constants) -> f64 {
    let var = constants.velocity_scale() * dt;
    let r2: f64 = (0..dim).map(|a| (x_prime[a] - x[a] - drift[a] * dt).powi(2)).sum();
    (2.0 * std::f64::consts::PI * var).powf(-0.5 * dim as f64) * (-r2 / (2.0 * var)).exp()
}

/// The transition density out of `x` with drift `b`, sampled on `grid`.
/// Periodic grids use the nearest image of every node.
pub fn transition_kernel(grid: &Grid, x: Vec3, drift: Vec3, dt: f64, constants: &Constants) -> Result<RealField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("{dt} is not positive")));
    }
    let dim = grid.dim();
    let mut mean = [0.0; 3];
    for a in 0..dim {
        mean[a] = x[a] + drift[a] * dt;
    }
    Ok(Field::from_fn(*grid, |node| {
        let mut target = node;
        if grid.is_periodic() {
            for a in 0..dim {
                let l = grid.extents()[a];
                target[a] = mean[a] + (node[a] - mean[a] - l * ((node[a] - mean[a]) / l).round());
            }
        }
        kernel_density(mean, target, [0.0; 3], dt, dim, constants)
    }))
}

/// Multilinear (cloud-in-cell) weights of a point: the nodes of its cell and
/// their weights, which sum to one.
fn cic(grid: &Grid, x: &Vec3) -> ([usize; 8], [f64; 8], usize) {
    let dim = grid.dim();
    let mut base = [0usize; 3];
    let mut next = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..dim {
        let n = grid.points()[a];
        let s = (x[a] - grid.origin()[a]) / grid.spacing(a);
        if grid.is_periodic() {
            let s = s.rem_euclid(n as f64);
            let i = (s.floor() as usize).min(n - 1);
            base[a] = i;
            next[a] = (i + 1) % n;
            frac[a] = s - i as f64;
        } else {
            let s = s.clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            base[a] = i;
            next[a] = i + 1;
            frac[a] = s - i as f64;
        }
    }
    let count = 1usize << dim;
    let mut nodes = [0usize; 8];
    let mut weights = [0.0; 8];
    for corner in 0..count {
        let mut idx = [0usize; 3];
        let mut w = 1.0;
        for a in 0..dim {
            if corner >> a & 1 == 1 {
                idx[a] = next[a];
                w *= frac[a];
            } else {
                idx[a] = base[a];
                w *= 1.0 - frac[a];
            }
        }
        nodes[corner] = grid.ravel(idx);
        weights[corner] = w;
    }
    (nodes, weights, count)
}

/// N walkers on a grid's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerEnsemble {
    grid: Grid,
    /// Positions inside the domain (wrapped on periodic grids).
    pub positions: Vec<Vec3>,
    /// Accumulated displacement since initialization, not wrapped.
    pub displacements: Vec<Vec3>,
    pub time: f64,
    pub seed: u64,
    pub steps: u64,
    /// Walker-steps skipped because the drift was undefined.
    pub held: u64,
}

/// Draws `n` walkers from the density `rho0`.
///
/// A node is chosen by inverse CDF over the flattened grid in row-major
/// order, which is the per-axis conditional inverse CDF with the axes taken
/// slowest first. The walker is then placed uniformly within half a spacing
/// of that node on every axis.
pub fn init_ensemble(rho0: &RealField, n: usize, seed: u64) -> Result<WalkerEnsemble> {
    if n == 0 {
        return Err(Error::param("walkers", "need at least one walker"));
    }
    if rho0.min() < 0.0 || !rho0.all_finite() {
        return Err(Error::param("rho0", "density must be finite and non-negative"));
    }
    let grid = *rho0.grid();
    let mut cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for &r in rho0.values() {
        acc += r;
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::param("rho0", "density is identically zero"));
    }
    let rng = CounterRng::new(seed, INIT_STREAM);
    let dim = grid.dim();
    let mut positions = Vec::with_capacity(n);
    for w in 0..n as u64 {
        let u = rng.uniform(4 * w) * acc;
        let node = cdf.partition_point(|&c| c < u).min(grid.len() - 1);
        let mut x = grid.node(node);
        for a in 0..dim {
            let h = grid.spacing(a);
            x[a] += (rng.uniform(4 * w + 1 + a as u64) - 0.5) * h;
        }
        positions.push(confine(&grid, x));
    }
    Ok(WalkerEnsemble {
        grid,
        displacements: vec![[0.0; 3]; n],
        positions,
        time: 0.0,
        seed,
        steps: 0,
        held: 0,
    })
}

/// Wraps into a periodic domain or reflects off Dirichlet walls.
fn confine(grid: &Grid, x: Vec3) -> Vec3 {
    if grid.is_periodic() {
        return grid.wrap(x);
    }
    let mut out = x;
    for a in 0..grid.dim() {
        let lo = grid.origin()[a];
        let hi = lo + grid.extents()[a];
        let span = 2.0 * (hi - lo);
        let s = (out[a] - lo).rem_euclid(span);
        out[a] = if s <= hi - lo { lo + s } else { lo + span - s };
    }
    out
}

impl WalkerEnsemble {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// One Euler-Maruyama step with drift `b` interpolated multilinearly.
    ///
    /// Walkers whose interpolated drift is non-finite, or whose surrounding
    /// nodes are all flagged in `unreliable`, stay where they are; the
    /// number of such walkers is returned.
    pub fn advance(
        &mut self,
        drift: &VelocityField,
        unreliable: Option<&[bool]>,
        dt: f64,
        constants: &Constants,
    ) -> Result<usize> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("{dt} is not positive")));
        }
        if !drift.grid().same_shape(&self.grid) {
            return Err(Error::GridMismatch("drift and ensemble grids differ".into()));
        }
        let dim = self.grid.dim();
        let sigma = (constants.velocity_scale() * dt).sqrt();
        let rng = CounterRng::new(self.seed, STEP_STREAM);
        let bmax = drift.max_abs();
        let hmin = self.grid.spacings().into_iter().fold(f64::INFINITY, f64::min);
        if bmax * dt > hmin {
            warn!("drift step {:.3e} exceeds the grid spacing {hmin:.3e}", bmax * dt);
        }
        let mut held = 0;
        for (w, (x, disp)) in self.positions.iter_mut().zip(&mut self.displacements).enumerate() {
            let (nodes, weights, count) = cic(&self.grid, x);
            if let Some(mask) = unreliable {
                if nodes[..count].iter().all(|&i| mask[i]) {
                    held += 1;
                    continue;
                }
            }
            let mut b = [0.0; 3];
            for a in 0..dim {
                let c = drift.components[a].values();
                b[a] = (0..count).map(|k| weights[k] * c[nodes[k]]).sum();
            }
            if b[..dim].iter().any(|v| !v.is_finite()) {
                held += 1;
                continue;
            }
            let counter = ((self.steps << 32) | w as u64).wrapping_mul(2);
            let (n0, n1) = rng.normal_pair(counter);
            let (n2, _) = if dim == 3 { rng.normal_pair(counter + 1) } else { (0.0, 0.0) };
            let noise = [n0, n1, n2];
            let mut y = *x;
            for a in 0..dim {
                let step = b[a] * dt + sigma * noise[a];
                y[a] += step;
                disp[a] += step;
            }
            *x = confine(&self.grid, y);
        }
        self.steps += 1;
        self.time += dt;
        self.held += held as u64;
        Ok(held)
    }

    /// Per-axis mean of the accumulated displacements.
    pub fn mean_displacement(&self) -> Vec3 {
        let mut m = [0.0; 3];
        for d in &self.displacements {
            for a in 0..3 {
                m[a] += d[a];
            }
        }
        m.map(|v| v / self.len() as f64)
    }

    /// Per-axis mean-square displacement `⟨Δx_a²⟩`.
    pub fn mean_square_displacement(&self) -> Vec3 {
        let mut m = [0.0; 3];
        for d in &self.displacements {
            for a in 0..3 {
                m[a] += d[a] * d[a];
            }
        }
        m.map(|v| v / self.len() as f64)
    }

    /// Writes `id,x[,y,z]` rows with round-trip precision.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        let names = ["x", "y", "z"];
        let dim = self.grid.dim();
        writeln!(out, "id,{}", names[..dim].join(","))?;
        for (i, x) in self.positions.iter().enumerate() {
            write!(out, "{i}")?;
            for v in &x[..dim] {
                write!(out, ",{v:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Advances every walker once along the drift `b = (ħ/m)∇S` and returns
/// the new ensemble.
pub fn step_ensemble(
    ensemble: &WalkerEnsemble,
    entropy: &EntropyField,
    dt: f64,
    constants: &Constants,
) -> Result<WalkerEnsemble> {
    let mut next = ensemble.clone();
    next.advance(&drift_velocity(entropy, constants), None, dt, constants)?;
    Ok(next)
}

/// Cloud-in-cell density estimate, normalized to unit integral.
pub fn histogram_density(ensemble: &WalkerEnsemble, grid: &Grid) -> Result<RealField> {
    if ensemble.is_empty() {
        return Err(Error::param("ensemble", "is empty"));
    }
    let mut values = vec![0.0; grid.len()];
    for x in &ensemble.positions {
        let (nodes, weights, count) = cic(grid, x);
        for k in 0..count {
            values[nodes[k]] += weights[k];
        }
    }
    let field = RealField::new(*grid, values)?;
    let total = integrate(&field);
    Ok(field.scale(1.0 / total))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledOptions {
    pub evolve: EvolveOptions,
    pub walkers: usize,
    pub seed: u64,
    /// Record the histogram distance every this many steps (and at the end).
    pub record_stride: usize,
}

/// L1 distance between the walker histogram and ρ at one instant.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DistanceRecord {
    pub step: usize,
    pub time: f64,
    pub l1: f64,
    pub held: u64,
}

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub state: State,
    pub ensemble: WalkerEnsemble,
    pub distances: Vec<DistanceRecord>,
}

impl CoupledRun {
    pub fn final_distance(&self) -> f64 {
        self.distances.last().map_or(f64::NAN, |d| d.l1)
    }
}

/// Evolves Ψ and a walker ensemble together. Each step the walkers move
/// with the drift of the entropy field of Ψ at the start of the step, then
/// Ψ advances by one step.
pub fn run_coupled(
    psi0: &ComplexField,
    t0: f64,
    potential: &Potential,
    constants: &Constants,
    options: &CoupledOptions,
) -> Result<CoupledRun> {
    let grid = *psi0.grid();
    let opts = options.evolve;
    let propagator = Propagator::new(grid, potential.clone(), *constants, opts.dt, opts.method)?;
    let rho0 = psi0.norm_sqr();
    let mut ensemble = init_ensemble(&rho0, options.walkers, options.seed)?;
    ensemble.time = t0;
    let stride = options.record_stride.max(1);
    let mut distances = vec![DistanceRecord {
        step: 0,
        time: t0,
        l1: histogram_density(&ensemble, &grid)?.l1_distance(&rho0),
        held: 0,
    }];
    let mut psi = psi0.clone();
    for n in 0..opts.steps {
        let t = t0 + n as f64 * opts.dt;
        let rho = psi.norm_sqr();
        let floor = density_floor(&rho);
        let unreliable: Vec<bool> = rho.values().iter().map(|&r| r <= floor).collect();
        let drift = VelocityField {
            kind: VelocityKind::Drift,
            components: EntropyField::gradient_from_psi(&psi)
                .into_iter()
                .map(|g| g.scale(constants.velocity_scale()))
                .collect(),
        };
        ensemble.advance(&drift, Some(&unreliable), opts.dt, constants)?;
        psi = propagator.step(&psi, t)?;
        let done = n + 1;
        if done % stride == 0 || done == opts.steps {
            let hist = histogram_density(&ensemble, &grid)?;
            distances.push(DistanceRecord {
                step: done,
                time: t + opts.dt,
                l1: hist.l1_distance(&psi.norm_sqr()),
                held: ensemble.held,
            });
        }
    }
    let t_end = t0 + opts.steps as f64 * opts.dt;
    let state = decompose(&psi, t_end)?.state;
    Ok(CoupledRun {
        state,
        ensemble,
        distances,
    })
}

impl Default for CoupledOptions {
    fn default() -> Self {
        CoupledOptions {
            evolve: EvolveOptions::new(1e-3, 1000, Method::SplitStep),
            walkers: 100_000,
            seed: 0,
            record_stride: 100,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Boundary;

    #[test]
    fn kernel_is_normalized_gaussian() {
        let g = Grid::periodic_1d(512, 4.0, -2.0).unwrap();
        let c = Constants::default();
        let k = transition_kernel(&g, [0.3, 0., 0.], [2.0, 0., 0.], 0.01, &c).unwrap();
        assert!((integrate(&k) - 1.0).abs() < 1e-10);
        let x = Field::from_fn(g, |x| x[0]);
        let mean = integrate(&k.mul(&x));
        assert!((mean - 0.32).abs() < 1e-10);
        let var = integrate(&k.mul(&x.map(|v| (v - 0.32).powi(2))));
        assert!((var - 0.01).abs() < 1e-10);
    }

    #[test]
    fn kernel_wraps_periodic_images() {
        let g = Grid::periodic_1d(256, 2.0, 0.0).unwrap();
        let c = Constants::default();
        let k = transition_kernel(&g, [1.98, 0., 0.], [0.0; 3], 0.01, &c).unwrap();
        assert!((integrate(&k) - 1.0).abs() < 1e-10);
        assert!(k.values()[0] > k.values()[128]);
    }

    #[test]
    fn hot_node_init() {
        let g = Grid::new(&[32], &[31.0], &[0.0], Boundary::DirichletZero).unwrap();
        let mut rho = RealField::zeros(g).into_values();
        rho[10] = 1.0;
        let rho = RealField::new(g, rho).unwrap();
        let e = init_ensemble(&rho, 1000, 7).unwrap();
        assert!(e.positions.iter().all(|x| (x[0] - 10.0).abs() <= 0.5));
        let h = histogram_density(&e, &g).unwrap();
        assert!((integrate(&h) - 1.0).abs() < 1e-12);
        assert!(init_ensemble(&rho, 0, 7).is_err());
    }

    #[test]
    fn uniform_init_counts() {
        let g = Grid::periodic_1d(50, 1.0, 0.0).unwrap();
        let rho = RealField::filled(g, 1.0);
        let n = 200_000;
        let e = init_ensemble(&rho, n, 3).unwrap();
        let mut counts = vec![0usize; 50];
        for x in &e.positions {
            counts[((x[0] * 50.0).floor() as usize).min(49)] += 1;
        }
        let expect = n as f64 / 50.0;
        let sd = (expect * (1.0 - 1.0 / 50.0)).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 - expect).abs() < 5.0 * sd));
    }

    #[test]
    fn gaussian_init_mean() {
        let g = Grid::periodic_1d(512, 40.0, -20.0).unwrap();
        let s0 = 1.5;
        let rho = Field::from_fn(g, |x| (-(x[0] - 2.0).powi(2) / (2.0 * s0 * s0)).exp());
        let rho = rho.scale(1.0 / integrate(&rho));
        let n = 100_000;
        let e = init_ensemble(&rho, n, 11).unwrap();
        let mean = e.positions.iter().map(|x| x[0]).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 4.0 * s0 / (n as f64).sqrt());
    }

    #[test]
    fn pure_diffusion_and_drift() {
        let g = Grid::centered(&[64, 64], &[10.0, 10.0], Boundary::Periodic).unwrap();
        let c = Constants::new(1.0, 0.5).unwrap();
        let rho = RealField::filled(g, 1.0 / 100.0);
        let n = 20_000;
        let mut e = init_ensemble(&rho, n, 5).unwrap();
        let s = EntropyField::linear(g, [0.8, 0.0, 0.0], 0.0);
        let (dt, steps) = (0.01, 100);
        for _ in 0..steps {
            e = step_ensemble(&e, &s, dt, &c).unwrap();
        }
        let t = dt * steps as f64;
        let mean = e.mean_displacement();
        let var = c.velocity_scale() * t;
        let band = 4.0 * (var / n as f64).sqrt();
        assert!((mean[0] - 0.8 * c.velocity_scale() * t).abs() < band);
        assert!(mean[1].abs() < band);
        let msd = e.mean_square_displacement();
        assert!((msd[1] - var).abs() < 4.0 * var * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn stepping_is_reproducible() {
        let g = Grid::periodic_1d(64, 10.0, 0.0).unwrap();
        let c = Constants::default();
        let rho = RealField::filled(g, 0.1);
        let s = EntropyField::linear(g, [0.3, 0., 0.], 0.0);
        let run = || {
            let mut e = init_ensemble(&rho, 500, 99).unwrap();
            for _ in 0..20 {
                e = step_ensemble(&e, &s, 0.01, &c).unwrap();
            }
            let mut buf = Vec::new();
            e.write_csv(&mut buf).unwrap();
            buf
        };
        assert_eq!(run(), run());
        let other = {
            let mut e = init_ensemble(&rho, 500, 100).unwrap();
            e = step_ensemble(&e, &s, 0.01, &c).unwrap();
            e.positions
        };
        assert_ne!(other, init_ensemble(&rho, 500, 99).unwrap().positions);
    }

    #[test]
    fn dirichlet_walls_reflect() {
        let g = Grid::new(&[11], &[1.0], &[0.0], Boundary::DirichletZero).unwrap();
        assert_eq!(confine(&g, [1.25, 0., 0.])[0], 0.75);
        assert_eq!(confine(&g, [-0.25, 0., 0.])[0], 0.25);
    }

    #[test]
    fn non_finite_drift_holds_walker() {
        let g = Grid::periodic_1d(16, 16.0, 0.0).unwrap();
        let c = Constants::default();
        let mut e = init_ensemble(&RealField::filled(g, 1.0 / 16.0), 10, 1).unwrap();
        let before = e.positions.clone();
        let b = VelocityField {
            kind: VelocityKind::Drift,
            components: vec![RealField::filled(g, f64::NAN)],
        };
        assert_eq!(e.advance(&b, None, 0.1, &c).unwrap(), 10);
        assert_eq!(e.positions, before);
        assert_eq!(e.held, 10);
    }
}
