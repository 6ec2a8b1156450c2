use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or displacement in configuration space. Axes beyond the grid
/// dimension are ignored and conventionally zero.
pub type Vec3 = [f64; 3];

/// Minimum number of nodes per axis.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    DirichletZero,
}

/// Uniform rectangular lattice in one to three dimensions.
///
/// Node `k` along an axis sits at `origin + k * spacing`. On a periodic grid
/// the spacing is `L / N` and the node at `origin + L` is the image of node 0;
/// on a Dirichlet grid the spacing is `L / (N - 1)` and both end nodes are
/// boundary nodes.
///
/// Flat indices are row-major: the last axis varies fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    points: [usize; 3],
    extents: [f64; 3],
    origin: [f64; 3],
    boundary: Boundary,
}

impl Grid {
    pub fn new(points: &[usize], extents: &[f64], origin: &[f64], boundary: Boundary) -> Result<Self> {
        let dim = points.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} is not in 1..=3")));
        }
        if extents.len() != dim || origin.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} extents and origins, got {} and {}",
                extents.len(),
                origin.len()
            )));
        }
        let mut grid = Grid {
            dim,
            points: [1; 3],
            extents: [0.0; 3],
            origin: [0.0; 3],
            boundary,
        };
        for axis in 0..dim {
            if points[axis] < MIN_POINTS {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has {} points, need at least {MIN_POINTS}",
                    points[axis]
                )));
            }
            if !(extents[axis] > 0.0 && extents[axis].is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} extent {} is not positive",
                    extents[axis]
                )));
            }
            if !origin[axis].is_finite() {
                return Err(Error::InvalidGrid(format!("axis {axis} origin is not finite")));
            }
            grid.points[axis] = points[axis];
            grid.extents[axis] = extents[axis];
            grid.origin[axis] = origin[axis];
        }
        Ok(grid)
    }

    /// One-dimensional periodic grid.
    pub fn periodic_1d(points: usize, length: f64, origin: f64) -> Result<Self> {
        Grid::new(&[points], &[length], &[origin], Boundary::Periodic)
    }

    /// Periodic grid centred on the coordinate origin.
    pub fn centered(points: &[usize], extents: &[f64], boundary: Boundary) -> Result<Self> {
        let origin: Vec<f64> = extents.iter().map(|l| -0.5 * l).collect();
        Grid::new(points, extents, &origin, boundary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn points(&self) -> &[usize] {
        &self.points[..self.dim]
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let n = self.points[axis];
        match self.boundary {
            Boundary::Periodic => self.extents[axis] / n as f64,
            Boundary::DirichletZero => self.extents[axis] / (n - 1) as f64,
        }
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim).map(|a| self.spacing(a)).collect()
    }

    /// Volume element of one node.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Volume of the whole domain.
    pub fn domain_volume(&self) -> f64 {
        self.extents().iter().product()
    }

    /// Node coordinates along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        let dx = self.spacing(axis);
        (0..self.points[axis])
            .map(|k| self.origin[axis] + k as f64 * dx)
            .collect()
    }

    /// Distance in the flat index between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points[axis + 1..].iter().product()
    }

    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut rest = flat;
        for axis in (0..3).rev() {
            idx[axis] = rest % self.points[axis];
            rest /= self.points[axis];
        }
        idx
    }

    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.points[1] + idx[1]) * self.points[2] + idx[2]
    }

    /// Coordinates of the node with flat index `flat`.
    pub fn node(&self, flat: usize) -> Vec3 {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.origin[axis] + idx[axis] as f64 * self.spacing(axis);
        }
        x
    }

    /// Iterator over all node coordinates in flat-index order.
    pub fn nodes(&self) -> impl Iterator<Item = Vec3> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// Angular wavenumbers of the discrete Fourier modes along `axis`, in FFT order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        let dk = 2.0 * PI / (n as f64 * self.spacing(axis));
        (0..n)
            .map(|j| {
                let j = j as isize;
                let m = if j <= (n as isize - 1) / 2 { j } else { j - n as isize };
                m as f64 * dk
            })
            .collect()
    }

    /// Whether a wavevector is an integer multiple of 2π/L along every axis.
    pub fn on_momentum_lattice(&self, k: Vec3, tol: f64) -> bool {
        (0..self.dim).all(|a| {
            let m = k[a] * self.extents[a] / (2.0 * PI);
            (m - m.round()).abs() <= tol
        })
    }

    /// Maps a coordinate back into the primary cell of a periodic grid;
    /// identity on Dirichlet grids.
    pub fn wrap(&self, mut x: Vec3) -> Vec3 {
        if self.is_periodic() {
            for axis in 0..self.dim {
                let l = self.extents[axis];
                let rel = (x[axis] - self.origin[axis]).rem_euclid(l);
                x[axis] = self.origin[axis] + rel;
            }
        }
        x
    }

    pub(crate) fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }
}
