use log::warn;
use num_complex::Complex64;

use super::{spectral, ComplexField, Grid, RealField, Vec3};

/// Mass change above which a Dirichlet shift reports boundary contact.
const SHIFT_LOSS_TOLERANCE: f64 = 1e-10;

/// Gradient `∂_a f`, one field per axis.
///
/// Spectral on periodic grids; second-order central differences with
/// one-sided second-order edges on Dirichlet grids.
pub fn gradient(field: &RealField) -> Vec<RealField> {
    gradient_complex(&field.to_complex())
        .into_iter()
        .map(|c| c.re())
        .collect()
}

pub fn gradient_complex(field: &ComplexField) -> Vec<ComplexField> {
    let grid = *field.grid();
    (0..grid.dim())
        .map(|axis| {
            let values = if grid.is_periodic() {
                spectral::derivative(field.values(), &grid, axis)
            } else {
                stencil_derivative(field.values(), &grid, axis)
            };
            field.with_values(values)
        })
        .collect()
}

/// `∇²f`: spectral on periodic grids, three-point stencil per axis otherwise.
pub fn laplacian(field: &RealField) -> RealField {
    laplacian_complex(&field.to_complex()).re()
}

pub fn laplacian_complex(field: &ComplexField) -> ComplexField {
    let grid = *field.grid();
    let values = if grid.is_periodic() {
        spectral::laplacian(field.values(), &grid)
    } else {
        let mut acc = vec![Complex64::default(); grid.len()];
        for axis in 0..grid.dim() {
            let d2 = stencil_second_derivative(field.values(), &grid, axis);
            acc.iter_mut().zip(d2).for_each(|(a, b)| *a += b);
        }
        acc
    };
    field.with_values(values)
}

/// Riemann sum times the node volume.
pub fn integrate(field: &RealField) -> f64 {
    // Pairwise summation keeps the round-off of long sums near 1e-16.
    pairwise_sum(field.values()) * field.grid().cell_volume()
}

pub fn integrate_complex(field: &ComplexField) -> Complex64 {
    let re: Vec<f64> = field.values().iter().map(|z| z.re).collect();
    let im: Vec<f64> = field.values().iter().map(|z| z.im).collect();
    Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) * field.grid().cell_volume()
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Result of a field translation.
#[derive(Debug, Clone, PartialEq)]
pub struct Shifted<F> {
    pub field: F,
    /// Mass (∫|f| for real fields, ∫|f|² for complex ones) lost through a
    /// Dirichlet boundary. Always zero on periodic grids.
    pub boundary_loss: f64,
}

impl<F> Shifted<F> {
    pub fn touches_boundary(&self) -> bool {
        self.boundary_loss > SHIFT_LOSS_TOLERANCE
    }
}

/// Translates a field by `displacement`: the result at `x` is the input at
/// `x − displacement`.
///
/// Periodic grids apply an exact phase ramp in Fourier space. Dirichlet grids
/// use cubic Lagrange interpolation with zero fill outside the domain.
pub fn shift_field(field: &RealField, displacement: Vec3) -> Shifted<RealField> {
    let grid = *field.grid();
    if grid.is_periodic() {
        let shifted = shift_field_complex(&field.to_complex(), displacement);
        return Shifted {
            field: shifted.field.re(),
            boundary_loss: 0.0,
        };
    }
    let mut values: Vec<f64> = field.values().to_vec();
    for axis in 0..grid.dim() {
        values = cubic_shift_axis(&values, &grid, axis, displacement[axis]);
    }
    let before: f64 = field.values().iter().map(|v| v.abs()).sum();
    let after: f64 = values.iter().map(|v| v.abs()).sum();
    let out = Shifted {
        field: field.with_values(values),
        boundary_loss: ((before - after) * grid.cell_volume()).max(0.0),
    };
    if out.touches_boundary() {
        warn!("shifted field lost {:.3e} through the boundary", out.boundary_loss);
    }
    out
}

pub fn shift_field_complex(field: &ComplexField, displacement: Vec3) -> Shifted<ComplexField> {
    let grid = *field.grid();
    if grid.is_periodic() {
        if displacement.iter().all(|&d| d == 0.0) {
            return Shifted {
                field: field.clone(),
                boundary_loss: 0.0,
            };
        }
        return Shifted {
            field: field.with_values(spectral::shift(field.values(), &grid, displacement)),
            boundary_loss: 0.0,
        };
    }
    let mut re: Vec<f64> = field.values().iter().map(|z| z.re).collect();
    let mut im: Vec<f64> = field.values().iter().map(|z| z.im).collect();
    for axis in 0..grid.dim() {
        re = cubic_shift_axis(&re, &grid, axis, displacement[axis]);
        im = cubic_shift_axis(&im, &grid, axis, displacement[axis]);
    }
    let values: Vec<Complex64> = re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect();
    let shifted = field.with_values(values);
    let loss = (field.norm() - shifted.norm()).max(0.0);
    let out = Shifted {
        field: shifted,
        boundary_loss: loss,
    };
    if out.touches_boundary() {
        warn!("shifted field lost {:.3e} through the boundary", out.boundary_loss);
    }
    out
}

/// Multilinear interpolation at an arbitrary point. Periodic grids wrap;
/// Dirichlet grids clamp to the domain.
pub fn interpolate_linear(field: &RealField, x: Vec3) -> f64 {
    let grid = field.grid();
    let mut base = [0usize; 3];
    let mut next = [0usize; 3];
    let mut frac = [0.0; 3];
    for axis in 0..grid.dim() {
        let n = grid.points()[axis];
        let s = (x[axis] - grid.origin()[axis]) / grid.spacing(axis);
        if grid.is_periodic() {
            let s = s.rem_euclid(n as f64);
            let i = (s.floor() as usize).min(n - 1);
            base[axis] = i;
            next[axis] = (i + 1) % n;
            frac[axis] = s - i as f64;
        } else {
            let s = s.clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            base[axis] = i;
            next[axis] = i + 1;
            frac[axis] = s - i as f64;
        }
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << grid.dim()) {
        let mut idx = [0usize; 3];
        let mut w = 1.0;
        for axis in 0..grid.dim() {
            if corner >> axis & 1 == 1 {
                idx[axis] = next[axis];
                w *= frac[axis];
            } else {
                idx[axis] = base[axis];
                w *= 1.0 - frac[axis];
            }
        }
        acc += w * field.values()[grid.ravel(idx)];
    }
    acc
}

fn stencil_derivative(values: &[Complex64], grid: &Grid, axis: usize) -> Vec<Complex64> {
    let n = grid.points()[axis];
    let stride = grid.stride(axis);
    let h = grid.spacing(axis);
    let mut out = vec![Complex64::default(); values.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let k = (i / stride) % n;
        let at = |j: usize| values[i - k * stride + j * stride];
        *o = if k == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if k == n - 1 {
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
        } else {
            (at(k + 1) - at(k - 1)) / (2.0 * h)
        };
    }
    out
}

fn stencil_second_derivative(values: &[Complex64], grid: &Grid, axis: usize) -> Vec<Complex64> {
    let n = grid.points()[axis];
    let stride = grid.stride(axis);
    let h2 = grid.spacing(axis).powi(2);
    let mut out = vec![Complex64::default(); values.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let k = (i / stride) % n;
        let at = |j: usize| values[i - k * stride + j * stride];
        *o = if k == 0 {
            (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2
        } else if k == n - 1 {
            (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / h2
        } else {
            (at(k + 1) - 2.0 * at(k) + at(k - 1)) / h2
        };
    }
    out
}

/// Four-point Lagrange interpolation of every line along `axis` at
/// `x − displacement`, treating values outside the domain as zero.
fn cubic_shift_axis(values: &[f64], grid: &Grid, axis: usize, displacement: f64) -> Vec<f64> {
    if displacement == 0.0 {
        return values.to_vec();
    }
    let n = grid.points()[axis] as isize;
    let stride = grid.stride(axis);
    let s = displacement / grid.spacing(axis);
    let whole = s.floor();
    let t = s - whole;
    let whole = whole as isize;
    // Source position k − s = (k − whole − 1) + (1 − t); nodes k−whole−2 ..= k−whole+1.
    let u = 1.0 - t;
    let w = [
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    ];
    let mut out = vec![0.0; values.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let k = ((i / stride) as isize) % n;
        let line0 = i as isize - k * stride as isize;
        let first = k - whole - 2;
        let mut acc = 0.0;
        for (m, wm) in w.iter().enumerate() {
            let j = first + m as isize;
            if (0..n).contains(&j) {
                acc += wm * values[(line0 + j * stride as isize) as usize];
            }
        }
        *o = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::field::{Boundary, Field};

    fn periodic(n: usize, l: f64) -> Grid {
        Grid::periodic_1d(n, l, 0.0).unwrap()
    }

    fn dirichlet(n: usize, l: f64) -> Grid {
        Grid::new(&[n], &[l], &[0.0], Boundary::DirichletZero).unwrap()
    }

    #[test]
    fn spectral_gradient_of_sine() {
        let l = 3.0;
        let g = periodic(64, l);
        let k = 2.0 * PI / l;
        let f = Field::from_fn(g, |x| (k * x[0]).sin());
        let d = &gradient(&f)[0];
        let exact = Field::from_fn(g, |x| k * (k * x[0]).cos());
        assert!(d.max_abs_diff(&exact) < 1e-10);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = periodic(32, 1.0);
        let f = RealField::filled(g, 2.5);
        assert!(gradient(&f)[0].values().iter().all(|&v| v.abs() < 1e-14));
        let g = dirichlet(32, 1.0);
        let f = RealField::filled(g, 2.5);
        assert!(gradient(&f)[0].values().iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn stencil_is_exact_on_low_order_polynomials() {
        let g = dirichlet(17, 2.0);
        let lin = Field::from_fn(g, |x| x[0]);
        assert!(gradient(&lin)[0].values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let quad = Field::from_fn(g, |x| x[0] * x[0]);
        let lap = laplacian(&quad);
        assert!(lap.values().iter().all(|&v| (v - 2.0).abs() < 1e-9), "{:?}", lap.values());
    }

    #[test]
    fn spectral_laplacian_of_sine() {
        let l = 5.0;
        let g = periodic(64, l);
        let k = 3.0 * 2.0 * PI / l;
        let f = Field::from_fn(g, |x| (k * x[0]).sin());
        let exact = f.scale(-k * k);
        assert!(laplacian(&f).max_abs_diff(&exact) < 1e-9);
        assert!(laplacian(&RealField::filled(g, 1.0)).values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn integrals() {
        let g = periodic(50, 4.0);
        let rho = RealField::filled(g, 0.25);
        assert!((integrate(&rho) - 1.0).abs() < 1e-15);
        let s = Field::from_fn(g, |x| (2.0 * PI * x[0] / 4.0).sin());
        assert!(integrate(&s).abs() < 1e-14);
    }

    #[test]
    fn gaussian_quadrature_oracle() {
        // The Riemann sum of a well-resolved Gaussian converges spectrally;
        // compare against the closed-form normalization.
        let g = Grid::periodic_1d(256, 20.0, -10.0).unwrap();
        let s: f64 = 0.7;
        let f = Field::from_fn(g, |x| (-x[0] * x[0] / (2.0 * s * s)).exp() / (2.0 * PI * s * s).sqrt());
        assert!((integrate(&f) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shift_by_one_spacing_permutes() {
        let g = periodic(16, 16.0);
        let f = Field::from_fn(g, |x| (x[0] * 0.7).sin() + 0.1 * x[0]);
        let shifted = shift_field(&f, [1.0, 0.0, 0.0]).field;
        for i in 0..16 {
            let j = (i + 15) % 16;
            assert!((shifted.values()[i] - f.values()[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_shift_is_identity() {
        let g = periodic(32, 2.0);
        let f = Field::from_fn(g, |x| (-(x[0] - 1.0).powi(2) * 10.0).exp());
        let s = shift_field(&f, [0.0; 3]).field;
        assert!(s.max_abs_diff(&f) < 1e-13);
    }

    #[test]
    fn subgrid_shift_preserves_norm() {
        let g = Grid::periodic_1d(128, 10.0, -5.0).unwrap();
        let f = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
        let dx = g.spacing(0);
        let s = shift_field(&f, [0.3 * dx, 0.0, 0.0]).field;
        let n0 = integrate(&f.map(|v| v * v));
        let n1 = integrate(&s.map(|v| v * v));
        assert!((n0 - n1).abs() < 1e-12);
        let exact = Field::from_fn(g, |x| (-(x[0] - 0.3 * dx).powi(2)).exp());
        assert!(s.max_abs_diff(&exact) < 1e-10);
    }

    #[test]
    fn dirichlet_shift_interpolates_and_flags_loss() {
        let g = Grid::new(&[201], &[20.0], &[-10.0], Boundary::DirichletZero).unwrap();
        let f = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
        let s = shift_field(&f, [0.37, 0.0, 0.0]);
        let exact = Field::from_fn(g, |x| (-(x[0] - 0.37).powi(2)).exp());
        assert!(s.field.max_abs_diff(&exact) < 1e-4);
        assert!(!s.touches_boundary());
        let out = shift_field(&f, [9.5, 0.0, 0.0]);
        assert!(out.touches_boundary());
    }

    #[test]
    fn linear_interpolation_wraps() {
        let g = periodic(8, 8.0);
        let f = Field::from_fn(g, |x| x[0]);
        assert!((interpolate_linear(&f, [2.25, 0., 0.]) - 2.25).abs() < 1e-15);
        // between node 7 (value 7) and its image node 0 (value 0)
        assert!((interpolate_linear(&f, [7.5, 0., 0.]) - 3.5).abs() < 1e-15);
        assert!((interpolate_linear(&f, [-0.5, 0., 0.]) - 3.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_in_two_dimensions() {
        let g = Grid::new(&[32, 16], &[2.0 * PI, 2.0 * PI], &[0.0, 0.0], Boundary::Periodic).unwrap();
        let f = Field::from_fn(g, |x| x[0].sin() * (2.0 * x[1]).cos());
        let grad = gradient(&f);
        let gx = Field::from_fn(g, |x| x[0].cos() * (2.0 * x[1]).cos());
        let gy = Field::from_fn(g, |x| -2.0 * x[0].sin() * (2.0 * x[1]).sin());
        assert!(grad[0].max_abs_diff(&gx) < 1e-12);
        assert!(grad[1].max_abs_diff(&gy) < 1e-12);
    }
}
