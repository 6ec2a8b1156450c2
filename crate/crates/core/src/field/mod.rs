//! Uniform grids and the scalar fields that live on them.
//!
//! Fields are plain values: every operation returns a new field and leaves
//! its inputs untouched. Periodic grids use spectral (FFT) differentiation
//! and shifting; Dirichlet grids use second-order stencils and cubic
//! interpolation.

mod grid;
mod ops;
pub(crate) mod spectral;

pub use grid::{Boundary, Grid, Vec3, MIN_POINTS};
pub use ops::{
    gradient, gradient_complex, integrate, integrate_complex, interpolate_linear, laplacian,
    laplacian_complex, shift_field, shift_field_complex, Shifted,
};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values sampled at every node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Grid,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Copy> Field<T> {
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn filled(grid: Grid, value: T) -> Self {
        Field {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f` at every node coordinate.
    pub fn from_fn(grid: Grid, f: impl Fn(Vec3) -> T) -> Self {
        let values = grid.nodes().map(f).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map<U: Copy, V: Copy>(&self, other: &Field<U>, f: impl Fn(T, U) -> V) -> Field<V> {
        assert!(
            self.grid.same_shape(&other.grid),
            "zip_map on fields from different grids"
        );
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub(crate) fn with_values<U>(&self, values: Vec<U>) -> Field<U> {
        debug_assert_eq!(values.len(), self.grid.len());
        Field {
            grid: self.grid,
            values,
        }
    }

    pub(crate) fn check_grid<U>(&self, other: &Field<U>) -> Result<()> {
        if self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }
}

impl RealField {
    pub fn zeros(grid: Grid) -> Self {
        Field::filled(grid, 0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Flat index of the largest value (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &RealField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RealField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &RealField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// Discrete L1 distance `∫|a - b|`.
    pub fn l1_distance(&self, other: &RealField) -> f64 {
        integrate(&self.zip_map(other, |a, b| (a - b).abs()))
    }

    /// Largest absolute pointwise difference.
    pub fn max_abs_diff(&self, other: &RealField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

impl ComplexField {
    pub fn norm_sqr(&self) -> RealField {
        self.map(|z| z.norm_sqr())
    }

    pub fn re(&self) -> RealField {
        self.map(|z| z.re)
    }

    pub fn im(&self) -> RealField {
        self.map(|z| z.im)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `∫|ψ|²`.
    pub fn norm(&self) -> f64 {
        integrate(&self.norm_sqr())
    }

    /// Discrete L2 distance `(∫|a - b|²)^{1/2}`.
    pub fn l2_distance(&self, other: &ComplexField) -> f64 {
        integrate(&self.zip_map(other, |a, b| (a - b).norm_sqr())).sqrt()
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
}

/// Density floor `1e-12 · max ρ` applied before any logarithm of or division by ρ.
pub fn density_floor(rho: &RealField) -> f64 {
    DENSITY_FLOOR_RELATIVE * rho.max().max(0.0)
}

pub const DENSITY_FLOOR_RELATIVE: f64 = 1e-12;

/// Default relative threshold for the "density-reliable" region used by
/// residuals, velocity checks and phase comparisons.
pub const MASK_RELATIVE: f64 = 1e-6;

/// Nodes where `ρ > rel · max ρ`.
pub fn reliable_mask(rho: &RealField, rel: f64) -> Vec<bool> {
    let threshold = rel * rho.max();
    rho.values().iter().map(|&r| r > threshold).collect()
}

/// Mass within `fraction` of the domain extent from any face.
///
/// Used to decide whether a state is boundary-localized. Returns 0 for
/// fractions ≤ 0.
pub fn boundary_layer_mass(rho: &RealField, fraction: f64) -> f64 {
    let grid = rho.grid();
    let dv = grid.cell_volume();
    let mut mass = 0.0;
    for (i, &r) in rho.values().iter().enumerate() {
        let idx = grid.unravel(i);
        let near = (0..grid.dim()).any(|a| {
            let n = grid.points()[a] as f64;
            let pos = idx[a] as f64 / (n - 1.0);
            pos < fraction || pos > 1.0 - fraction
        });
        if near {
            mass += r.abs();
        }
    }
    mass * dv
}
