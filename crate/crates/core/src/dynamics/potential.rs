use std::fmt;
use std::sync::Arc;

use crate::field::{Field, Grid, RealField, Vec3};

type FieldFn = Arc<dyn Fn(&Grid, f64) -> RealField + Send + Sync>;

/// External potential `V(x, t)`.
#[derive(Clone)]
pub enum Potential {
    Zero,
    /// `V = ½ k |x − center|²`.
    Harmonic { stiffness: f64, center: Vec3 },
    /// `V = slope · x`; uniform gravity of strength g along −ẑ is
    /// `slope = m g ẑ`.
    Linear { slope: Vec3 },
    /// Fixed samples on a grid.
    Tabulated(RealField),
    TimeDependent(TimeDependent),
}

/// A potential given as a closure of time, with an optional exact time
/// derivative. Without one, `∂_t V` is taken by a central difference.
#[derive(Clone)]
pub struct TimeDependent {
    value: FieldFn,
    rate: Option<FieldFn>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Harmonic { stiffness, center } => f
                .debug_struct("Harmonic")
                .field("stiffness", stiffness)
                .field("center", center)
                .finish(),
            Potential::Linear { slope } => f.debug_struct("Linear").field("slope", slope).finish(),
            Potential::Tabulated(_) => write!(f, "Tabulated(..)"),
            Potential::TimeDependent(td) => write!(f, "TimeDependent(exact rate: {})", td.rate.is_some()),
        }
    }
}

const RATE_STEP: f64 = 1e-5;

impl Potential {
    pub fn time_dependent(value: impl Fn(&Grid, f64) -> RealField + Send + Sync + 'static) -> Self {
        Potential::TimeDependent(TimeDependent {
            value: Arc::new(value),
            rate: None,
        })
    }

    pub fn time_dependent_with_rate(
        value: impl Fn(&Grid, f64) -> RealField + Send + Sync + 'static,
        rate: impl Fn(&Grid, f64) -> RealField + Send + Sync + 'static,
    ) -> Self {
        Potential::TimeDependent(TimeDependent {
            value: Arc::new(value),
            rate: Some(Arc::new(rate)),
        })
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, Potential::TimeDependent(_))
    }

    /// Samples `V(·, t)` on `grid`.
    pub fn evaluate(&self, grid: &Grid, t: f64) -> RealField {
        match self {
            Potential::Zero => RealField::zeros(*grid),
            Potential::Harmonic { stiffness, center } => Field::from_fn(*grid, |x| {
                0.5 * stiffness * (0..grid.dim()).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>()
            }),
            Potential::Linear { slope } => {
                Field::from_fn(*grid, |x| (0..grid.dim()).map(|a| slope[a] * x[a]).sum())
            }
            Potential::Tabulated(v) => {
                assert_eq!(v.grid(), grid, "tabulated potential sampled on a different grid");
                v.clone()
            }
            Potential::TimeDependent(td) => (td.value)(grid, t),
        }
    }

    /// `∂_t V(·, t)`.
    pub fn rate(&self, grid: &Grid, t: f64) -> RealField {
        match self {
            Potential::TimeDependent(td) => match &td.rate {
                Some(rate) => rate(grid, t),
                None => {
                    let hi = (td.value)(grid, t + RATE_STEP);
                    let lo = (td.value)(grid, t - RATE_STEP);
                    hi.sub(&lo).scale(0.5 / RATE_STEP)
                }
            },
            _ => RealField::zeros(*grid),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_kinds() {
        let g = Grid::periodic_1d(8, 8.0, -4.0).unwrap();
        let h = Potential::Harmonic {
            stiffness: 2.0,
            center: [1.0, 0.0, 0.0],
        }
        .evaluate(&g, 0.0);
        assert_eq!(h.values()[0], 25.0);
        let l = Potential::Linear { slope: [-2.0, 0.0, 0.0] }.evaluate(&g, 3.0);
        assert_eq!(l.values()[7], -6.0);
        assert!(Potential::Zero.is_static());
    }

    #[test]
    fn finite_difference_rate() {
        let g = Grid::periodic_1d(8, 8.0, -4.0).unwrap();
        let p = Potential::time_dependent(|g, t| Field::from_fn(*g, |x| t * t * x[0]));
        let r = p.rate(&g, 0.5);
        let exact = Field::from_fn(g, |x| x[0]);
        assert!(r.max_abs_diff(&exact) < 1e-9);
    }
}
