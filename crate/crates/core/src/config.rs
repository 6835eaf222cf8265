//! Run configuration shared by the dynamics, the CLI, and the tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorNorm {
    /// Largest scaled component.
    Max,
    /// Root mean square of scaled components.
    Rms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub horizon: f64,
    /// Regularization index of the cutoff.
    pub n: u32,
    pub particles: usize,
    pub atol: f64,
    pub rtol: f64,
    /// Plasma-plasma softening length; `1/(2n)` when absent.
    pub softening: Option<f64>,
    pub output_interval: f64,
    pub seed: u64,
    pub integrator: String,
    pub point_set: String,
    pub error_norm: ErrorNorm,
    /// Step cap `dt ≤ κ d^{3/2}` with `d` the closest particle-charge distance.
    pub distance_cap: f64,
    /// Runs abort when a charged particle comes within this multiple of `1/n`
    /// of the point charge.
    pub closest_approach_floor: f64,
    pub min_dt: f64,
    pub max_steps: u64,
    /// Whether the point charge takes part in the dynamics.
    pub with_charge: bool,
    /// Interaction sign. Only the repulsive value `+1` is supported.
    pub sign: i32,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            n: 8,
            particles: 4096,
            atol: 1e-8,
            rtol: 1e-8,
            softening: None,
            output_interval: 0.05,
            seed: 1,
            integrator: "dopri5".into(),
            point_set: "halton".into(),
            error_norm: ErrorNorm::Max,
            distance_cap: 0.1,
            closest_approach_floor: 1e-4,
            min_dt: 1e-13,
            max_steps: 5_000_000,
            with_charge: true,
            sign: 1,
        }
    }
}

impl SimulationConfig {
    pub fn softening(&self) -> f64 {
        self.softening.unwrap_or(0.5 / self.n.max(1) as f64)
    }

    pub fn floor_radius(&self) -> f64 {
        self.closest_approach_floor / self.n.max(1) as f64
    }

    /// Stored times `0, Δ, 2Δ, …, T`; the last interval may be shorter.
    pub fn output_times(&self) -> Vec<f64> {
        let mut times = vec![0.0];
        if self.horizon <= 0.0 {
            return times;
        }
        let k = (self.horizon / self.output_interval - 1e-9).ceil().max(1.0) as usize;
        for i in 1..k {
            times.push(i as f64 * self.output_interval);
        }
        times.push(self.horizon);
        times
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(field, format!("must be finite and > 0, got {x}")))
            }
        };
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::validation("horizon", "must be finite and >= 0"));
        }
        if self.n == 0 {
            return Err(Error::validation("n", "must be >= 1"));
        }
        if self.particles == 0 {
            return Err(Error::validation("particles", "must be >= 1"));
        }
        positive("atol", self.atol)?;
        positive("rtol", self.rtol)?;
        positive("output_interval", self.output_interval)?;
        positive("distance_cap", self.distance_cap)?;
        positive("min_dt", self.min_dt)?;
        if !(self.closest_approach_floor.is_finite() && self.closest_approach_floor >= 0.0) {
            return Err(Error::validation("closest_approach_floor", "must be finite and >= 0"));
        }
        if let Some(eps) = self.softening {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::validation("softening", "must be finite and >= 0"));
            }
        }
        if self.sign != 1 {
            return Err(Error::validation(
                "sign",
                "only the repulsive interaction (+1) is supported",
            ));
        }
        Ok(())
    }
}
