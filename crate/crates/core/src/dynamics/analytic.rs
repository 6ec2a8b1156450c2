use log::warn;
use num_complex::Complex64;

use crate::constants::Constants;
use crate::field::{ComplexField, Field, Grid, Vec3};

/// Width `s(t) = s0 (1 + (ħt/2ms0²)²)^{1/2}` of a free Gaussian packet whose
/// density has standard deviation `s0` at t = 0.
pub fn free_gaussian_width(s0: f64, t: f64, constants: &Constants) -> f64 {
    let tau = constants.hbar * t / (2.0 * constants.mass * s0 * s0);
    s0 * (1.0 + tau * tau).sqrt()
}

/// Closed-form free Gaussian packet at time `t`: density standard deviation
/// `s0` per axis at t = 0, centre `x0`, momentum `p0`.
///
/// The phase convention is the exact solution of the free Schrödinger
/// equation started from `ψ(x, 0) ∝ exp(−|x − x0|²/4s0² + ip0·(x − x0)/ħ)`.
/// Logs a warning when the packet comes within ten widths of a boundary of a
/// non-periodic grid, or overlaps itself on a periodic one.
pub fn free_gaussian_analytic(
    x0: Vec3,
    p0: Vec3,
    s0: f64,
    t: f64,
    constants: &Constants,
    grid: &Grid,
) -> ComplexField {
    let (m, hbar) = (constants.mass, constants.hbar);
    let alpha = Complex64::new(1.0, hbar * t / (2.0 * m * s0 * s0));
    let dim = grid.dim();
    let width = free_gaussian_width(s0, t, constants);
    let mut centre = [0.0; 3];
    for a in 0..dim {
        centre[a] = x0[a] + p0[a] * t / m;
        let lo = grid.origin()[a];
        let hi = lo + grid.extents()[a];
        let margin = (centre[a] - lo).min(hi - centre[a]);
        if margin < 10.0 * width {
            warn!(
                "free Gaussian within {:.2} widths of the domain edge on axis {a}",
                margin / width
            );
        }
    }
    let prefactor = (2.0 * std::f64::consts::PI * s0 * s0).powf(-0.25 * dim as f64) * alpha.powf(-0.5 * dim as f64);
    Field::from_fn(*grid, |x| {
        let mut exponent = Complex64::default();
        for a in 0..dim {
            let v = p0[a] / m;
            let d = x[a] - x0[a] - v * t;
            exponent += -d * d / (4.0 * s0 * s0 * alpha)
                + Complex64::i() * (m * v * (x[a] - x0[a]) / hbar - m * v * v * t / (2.0 * hbar));
        }
        prefactor * exponent.exp()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{integrate, Boundary};

    #[test]
    fn normalized_and_moving() {
        let g = Grid::periodic_1d(1024, 80.0, -40.0).unwrap();
        let c = Constants::default();
        for t in [0.0, 0.7, 2.0] {
            let psi = free_gaussian_analytic([-3.0, 0., 0.], [1.5, 0., 0.], 1.2, t, &c, &g);
            let rho = psi.norm_sqr();
            assert!((integrate(&rho) - 1.0).abs() < 1e-12);
            let mean = integrate(&Field::from_fn(g, |x| x[0]).mul(&rho));
            assert!((mean - (-3.0 + 1.5 * t)).abs() < 1e-10);
            let var = integrate(&Field::from_fn(g, |x| (x[0] - mean).powi(2)).mul(&rho));
            let s = free_gaussian_width(1.2, t, &c);
            assert!((var - s * s).abs() < 1e-10);
        }
    }

    #[test]
    fn satisfies_free_schrodinger_equation() {
        // iψ_t = -ψ_xx/2, checked by central differences in t and spectral xx
        let g = Grid::centered(&[256, 256], &[30.0, 30.0], Boundary::Periodic).unwrap();
        let c = Constants::new(2.0, 0.5).unwrap();
        let (x0, p0) = ([0.5, -0.5, 0.0], [0.4, 0.2, 0.0]);
        let h = 1e-4;
        let t = 0.3;
        let plus = free_gaussian_analytic(x0, p0, 1.0, t + h, &c, &g);
        let minus = free_gaussian_analytic(x0, p0, 1.0, t - h, &c, &g);
        let now = free_gaussian_analytic(x0, p0, 1.0, t, &c, &g);
        let lap = crate::field::laplacian_complex(&now);
        let k = -c.hbar * c.hbar / (2.0 * c.mass);
        let mut worst: f64 = 0.0;
        for i in 0..g.len() {
            let dt = (plus.values()[i] - minus.values()[i]) / (2.0 * h);
            let lhs = Complex64::i() * c.hbar * dt;
            let rhs = k * lap.values()[i];
            worst = worst.max((lhs - rhs).norm());
        }
        assert!(worst < 1e-7, "{worst}");
    }
}
