use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Particle mass and action scale.
///
/// The diffusion constant of the underlying walk is fixed by the identity
/// `ħ = m σ²/τ`, so only the ratio `ħ/m` ever enters the kinematics and σ, τ
/// are never needed separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub mass: f64,
    pub hbar: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            mass: 1.0,
            hbar: 1.0,
        }
    }
}

impl Constants {
    pub fn new(mass: f64, hbar: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::param("mass", format!("{mass} is not positive")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::param("hbar", format!("{hbar} is not positive")));
        }
        Ok(Constants { mass, hbar })
    }

    /// `σ²/τ = ħ/m`, the factor turning gradients of S or φ into velocities.
    pub fn velocity_scale(&self) -> f64 {
        self.hbar / self.mass
    }

    /// `D = ħ/2m`.
    pub fn diffusion(&self) -> f64 {
        0.5 * self.hbar / self.mass
    }

    /// `m/ħ`, the factor in front of the frame phase shift.
    pub fn phase_scale(&self) -> f64 {
        self.mass / self.hbar
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_scales() {
        let c = Constants::new(2.0, 0.5).unwrap();
        assert_eq!(c.velocity_scale(), 0.25);
        assert_eq!(c.diffusion(), 0.125);
        assert_eq!(c.phase_scale(), 4.0);
        assert!(Constants::new(0.0, 1.0).is_err());
        assert!(Constants::new(1.0, -1.0).is_err());
    }
}
