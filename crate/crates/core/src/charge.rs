use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

/// Position `ξ` and velocity `η` of the point charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointChargeState {
    pub xi: Vec3,
    pub eta: Vec3,
}

impl PointChargeState {
    pub fn new(xi: Vec3, eta: Vec3) -> Result<Self> {
        let s = Self { xi, eta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.xi.iter().chain(self.eta.iter()).any(|c| !c.is_finite()) {
            return Err(Error::validation("charge", "non-finite component"));
        }
        Ok(())
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * geom::norm2(&self.eta)
    }

    /// Energy bounds on the charge at time `t`: `|η| ≤ √(2 H0)` and
    /// `|ξ| ≤ |ξ0| + t √(2 H0)`, each with multiplicative `slack`.
    pub fn within_energy_bounds(&self, xi0: &Vec3, h0: f64, t: f64, slack: f64) -> bool {
        let (eta_max, xi_max) = energy_bounds(xi0, h0, t);
        geom::norm(&self.eta) <= eta_max * (1.0 + slack) && geom::norm(&self.xi) <= xi_max * (1.0 + slack)
    }
}

/// `(√(2 H0), |ξ0| + t √(2 H0))`.
pub fn energy_bounds(xi0: &Vec3, h0: f64, t: f64) -> (f64, f64) {
    let s = (2.0 * h0).sqrt();
    (s, geom::norm(xi0) + t * s)
}
