use crate::error::{Error, Result};
use crate::field::{Grid, RealField};
use crate::madelung::VelocityField;

/// Largest Courant number `max|v|·Δt/Δx` accepted per step.
pub const MAX_COURANT: f64 = 0.5;

/// Integrates `∂_tρ = −∇·(vρ)` with one forward-Euler step per entry of
/// `velocities`, each entry holding `v(x, t_k)` at the start of step k.
///
/// Fluxes are MUSCL-reconstructed with a van Leer limiter and upwinded on
/// the face velocity (mean of the two neighbouring nodes). Periodic grids
/// wrap; Dirichlet grids have closed (zero-flux) outer faces. Mass is
/// conserved to round-off because every face flux enters two cells with
/// opposite signs.
pub fn evolve_fokker_planck(rho: &RealField, velocities: &[VelocityField], dt: f64) -> Result<RealField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("{dt} is not positive")));
    }
    let mut rho = rho.clone();
    for (step, v) in velocities.iter().enumerate() {
        rho = fp_step(&rho, v, dt, step)?;
    }
    Ok(rho)
}

/// One step of [`evolve_fokker_planck`]; `step` only labels errors.
pub fn fp_step(rho: &RealField, velocity: &VelocityField, dt: f64, step: usize) -> Result<RealField> {
    let grid = *rho.grid();
    if velocity.components.len() != grid.dim() || !velocity.grid().same_shape(&grid) {
        return Err(Error::GridMismatch("velocity field does not match the density grid".into()));
    }
    let courant = (0..grid.dim())
        .map(|a| {
            let vmax = velocity.components[a].values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            vmax * dt / grid.spacing(a)
        })
        .fold(0.0, f64::max);
    if !courant.is_finite() {
        return Err(Error::NonFinite("Fokker-Planck velocity"));
    }
    if courant > MAX_COURANT {
        return Err(Error::Cfl { step, courant });
    }
    let mut out = rho.values().to_vec();
    for a in 0..grid.dim() {
        let ratio = dt / grid.spacing(a);
        let div = flux_divergence(&grid, a, rho.values(), velocity.components[a].values());
        out.iter_mut().zip(&div).for_each(|(r, d)| *r -= ratio * d);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Fokker-Planck step"));
    }
    Ok(rho.with_values(out))
}

fn van_leer(d1: f64, d2: f64) -> f64 {
    if d1 * d2 > 0.0 {
        2.0 * d1 * d2 / (d1 + d2)
    } else {
        0.0
    }
}

/// `F_{i+½} − F_{i−½}` along one axis for every node.
fn flux_divergence(grid: &Grid, axis: usize, rho: &[f64], v: &[f64]) -> Vec<f64> {
    let n = grid.points()[axis];
    let stride = grid.stride(axis);
    let periodic = grid.is_periodic();
    let mut div = vec![0.0; rho.len()];
    let mut line_rho = vec![0.0; n];
    let mut line_v = vec![0.0; n];
    let mut slope = vec![0.0; n];
    let mut flux = vec![0.0; n];
    for base in 0..grid.len() {
        if grid.unravel(base)[axis] != 0 {
            continue;
        }
        for k in 0..n {
            line_rho[k] = rho[base + k * stride];
            line_v[k] = v[base + k * stride];
        }
        for k in 0..n {
            slope[k] = if periodic {
                van_leer(line_rho[k] - line_rho[(k + n - 1) % n], line_rho[(k + 1) % n] - line_rho[k])
            } else if k == 0 || k == n - 1 {
                0.0
            } else {
                van_leer(line_rho[k] - line_rho[k - 1], line_rho[k + 1] - line_rho[k])
            };
        }
        // flux[k] is the flux through the face between k and k+1
        for k in 0..n {
            let r = if periodic {
                (k + 1) % n
            } else if k + 1 < n {
                k + 1
            } else {
                flux[k] = 0.0;
                continue;
            };
            let face_v = 0.5 * (line_v[k] + line_v[r]);
            flux[k] = if face_v > 0.0 {
                face_v * (line_rho[k] + 0.5 * slope[k])
            } else {
                face_v * (line_rho[r] - 0.5 * slope[r])
            };
        }
        for k in 0..n {
            let left = if k > 0 {
                flux[k - 1]
            } else if periodic {
                flux[n - 1]
            } else {
                0.0
            };
            div[base + k * stride] = flux[k] - left;
        }
    }
    div
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{integrate, shift_field, Boundary, Field};
    use crate::madelung::VelocityKind;

    fn uniform(g: Grid, c: &[f64]) -> VelocityField {
        VelocityField {
            kind: VelocityKind::Current,
            components: c.iter().map(|&c| RealField::filled(g, c)).collect(),
        }
    }

    fn gaussian(g: Grid) -> RealField {
        let f = Field::from_fn(g, |x| (-(x[0] * x[0]) / 2.0).exp());
        let n = integrate(&f);
        f.scale(1.0 / n)
    }

    #[test]
    fn zero_velocity_is_identity() {
        let g = Grid::periodic_1d(128, 20.0, -10.0).unwrap();
        let rho = gaussian(g);
        let out = evolve_fokker_planck(&rho, &vec![uniform(g, &[0.0]); 10], 0.01).unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn uniform_advection_matches_shift() {
        let g = Grid::periodic_1d(512, 20.0, -10.0).unwrap();
        let rho = gaussian(g);
        let (c, dt, n) = (0.7, 0.01, 200);
        let out = evolve_fokker_planck(&rho, &vec![uniform(g, &[c]); n], dt).unwrap();
        let exact = shift_field(&rho, [c * dt * n as f64, 0.0, 0.0]).field;
        assert!(out.l1_distance(&exact) < 1e-2, "{}", out.l1_distance(&exact));
        assert!((integrate(&out) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cfl_violation_names_step() {
        let g = Grid::periodic_1d(64, 1.0, 0.0).unwrap();
        let rho = RealField::filled(g, 1.0);
        let mut vs = vec![uniform(g, &[0.1]); 3];
        vs.push(uniform(g, &[100.0]));
        match evolve_fokker_planck(&rho, &vs, 0.01) {
            Err(Error::Cfl { step, courant }) => {
                assert_eq!(step, 3);
                assert!(courant > 0.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn closed_dirichlet_box_conserves_mass() {
        let g = Grid::new(&[100, 80], &[10.0, 8.0], &[-5.0, -4.0], Boundary::DirichletZero).unwrap();
        let rho = Field::from_fn(g, |x| (-(x[0] - 3.0).powi(2) - x[1] * x[1]).exp());
        let m0 = integrate(&rho);
        let out = evolve_fokker_planck(&rho, &vec![uniform(g, &[1.0, -0.5]); 300], 0.02).unwrap();
        assert!((integrate(&out) - m0).abs() < 1e-12 * m0);
        assert!(out.min() >= 0.0);
    }
}
