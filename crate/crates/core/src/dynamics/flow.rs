//! Stored trajectories of a whole seed set.
//!
//! Binary layout (little-endian): magic `VPDFLOW1`; `n: u32`; `softening: f64`;
//! `N: u64`; `K: u64`; `has_charge: u8`; columns `id: [u64; N]`, `w: [f64; N]`,
//! `w_ref: [f64; N]`, `flagged: [u8; N]`; `times: [f64; K]`; then for every
//! stored time the six columns `X1, X2, X3, V1, V2, V3: [f64; N]`; then, if
//! present, `K` rows of `xi1..3, eta1..3`; finally the integrator statistics
//! `steps, rejected, rhs_evals: u64`, `min_distance, min_dt, max_dt: f64`,
//! `min_distance_seed: u64` (`u64::MAX` when absent).

use std::io::{Read, Write};

use serde::Serialize;

use crate::charge::PointChargeState;
use crate::ensemble::{read_f64, read_u64, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::geom::Vec3;

pub const FLOW_MAGIC: &[u8; 8] = b"VPDFLOW1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub steps: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
    /// Closest particle-charge distance seen at accepted states.
    pub min_distance: f64,
    pub min_distance_seed: Option<u64>,
    pub min_dt: f64,
    pub max_dt: f64,
}

impl Default for IntegratorStats {
    fn default() -> Self {
        Self {
            steps: 0,
            rejected: 0,
            rhs_evals: 0,
            min_distance: f64::INFINITY,
            min_distance_seed: None,
            min_dt: f64::INFINITY,
            max_dt: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub n: u32,
    pub softening: f64,
    pub seed_ids: Vec<u64>,
    /// Weights that drove this flow (after the cutoff).
    pub weights: Vec<f64>,
    /// Uncut weights, the seed measure `μ`.
    pub reference_weights: Vec<f64>,
    pub times: Vec<f64>,
    /// `positions[k][i]` is `X(s_k)` of seed `i`.
    pub positions: Vec<Vec<Vec3>>,
    pub velocities: Vec<Vec<Vec3>>,
    pub charge: Option<Vec<PointChargeState>>,
    /// Seeds frozen after reaching the closest-approach floor.
    pub flagged: Vec<bool>,
    pub stats: IntegratorStats,
}

impl FlowRecord {
    pub fn len(&self) -> usize {
        self.seed_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seed_ids.is_empty()
    }

    pub fn stored(&self) -> usize {
        self.times.len()
    }

    /// Phase-space point of seed `i` at stored time `k`.
    pub fn z(&self, k: usize, i: usize) -> (Vec3, Vec3) {
        (self.positions[k][i], self.velocities[k][i])
    }

    pub fn charge_at(&self, k: usize) -> Option<PointChargeState> {
        self.charge.as_ref().map(|c| c[k])
    }

    /// Ensemble at stored time `k` carrying this flow's weights.
    pub fn ensemble_at(&self, k: usize) -> ParticleEnsemble {
        ParticleEnsemble {
            positions: self.positions[k].clone(),
            velocities: self.velocities[k].clone(),
            weights: self.weights.clone(),
            reference_weights: self.reference_weights.clone(),
            seed_ids: self.seed_ids.clone(),
            f0_ref: None,
        }
    }

    /// Index of the stored time closest to `s`.
    pub fn index_near(&self, s: f64) -> usize {
        let mut best = 0;
        for (k, t) in self.times.iter().enumerate() {
            if (t - s).abs() < (self.times[best] - s).abs() {
                best = k;
            }
        }
        best
    }

    pub fn check_same_seeds(&self, other: &FlowRecord) -> Result<()> {
        if self.seed_ids != other.seed_ids
            || self.reference_weights != other.reference_weights
            || self.times.len() != other.times.len()
        {
            return Err(Error::MismatchedSeeds);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let k = self.stored();
        let consistent = self.weights.len() == n
            && self.reference_weights.len() == n
            && self.flagged.len() == n
            && self.positions.len() == k
            && self.velocities.len() == k
            && self.positions.iter().chain(self.velocities.iter()).all(|c| c.len() == n)
            && self.charge.as_ref().map_or(true, |c| c.len() == k);
        if !consistent {
            return Err(Error::validation("flow", "inconsistent column lengths"));
        }
        let finite = self
            .positions
            .iter()
            .chain(self.velocities.iter())
            .flatten()
            .flatten()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::validation("flow", "non-finite stored values"));
        }
        Ok(())
    }

    /// Trajectory table `s,id,X1,X2,X3,V1,V2,V3`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "s,id,X1,X2,X3,V1,V2,V3")?;
        for k in 0..self.stored() {
            for i in 0..self.len() {
                let (x, v) = self.z(k, i);
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    self.times[k], self.seed_ids[i], x[0], x[1], x[2], v[0], v[1], v[2]
                )?;
            }
        }
        Ok(())
    }

    /// Charge track `s,xi1,xi2,xi3,eta1,eta2,eta3`; header only without a charge.
    pub fn write_charge_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "s,xi1,xi2,xi3,eta1,eta2,eta3")?;
        if let Some(track) = &self.charge {
            for (t, c) in self.times.iter().zip(track) {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    t, c.xi[0], c.xi[1], c.xi[2], c.eta[0], c.eta[1], c.eta[2]
                )?;
            }
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let f = |out: &mut W, x: f64| out.write_all(&x.to_le_bytes());
        out.write_all(FLOW_MAGIC)?;
        out.write_all(&self.n.to_le_bytes())?;
        f(&mut out, self.softening)?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        out.write_all(&(self.stored() as u64).to_le_bytes())?;
        out.write_all(&[u8::from(self.charge.is_some())])?;
        for id in &self.seed_ids {
            out.write_all(&id.to_le_bytes())?;
        }
        for &w in self.weights.iter().chain(self.reference_weights.iter()) {
            f(&mut out, w)?;
        }
        for &flag in &self.flagged {
            out.write_all(&[u8::from(flag)])?;
        }
        for &t in &self.times {
            f(&mut out, t)?;
        }
        for k in 0..self.stored() {
            for col in [&self.positions[k], &self.velocities[k]] {
                for c in 0..3 {
                    for p in col.iter() {
                        f(&mut out, p[c])?;
                    }
                }
            }
        }
        if let Some(track) = &self.charge {
            for c in track {
                for &x in c.xi.iter().chain(c.eta.iter()) {
                    f(&mut out, x)?;
                }
            }
        }
        let s = &self.stats;
        for v in [s.steps, s.rejected, s.rhs_evals] {
            out.write_all(&v.to_le_bytes())?;
        }
        for v in [s.min_distance, s.min_dt, s.max_dt] {
            f(&mut out, v)?;
        }
        out.write_all(&s.min_distance_seed.unwrap_or(u64::MAX).to_le_bytes())?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != FLOW_MAGIC {
            return Err(Error::Format("not a flow record (bad magic)".into()));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4)?;
        let n_cut = u32::from_le_bytes(b4);
        let softening = read_f64(&mut input)?;
        let n = read_u64(&mut input)? as usize;
        let k = read_u64(&mut input)? as usize;
        let mut b1 = [0u8; 1];
        input.read_exact(&mut b1)?;
        let has_charge = b1[0] != 0;
        let read_vec = |input: &mut R, len: usize| -> Result<Vec<f64>> { (0..len).map(|_| read_f64(input)).collect() };
        let seed_ids = (0..n).map(|_| read_u64(&mut input)).collect::<Result<Vec<_>>>()?;
        let weights = read_vec(&mut input, n)?;
        let reference_weights = read_vec(&mut input, n)?;
        let mut flags = vec![0u8; n];
        input.read_exact(&mut flags)?;
        let times = read_vec(&mut input, k)?;
        let mut positions = Vec::with_capacity(k);
        let mut velocities = Vec::with_capacity(k);
        for _ in 0..k {
            for target in [&mut positions, &mut velocities] {
                let cols: Vec<Vec<f64>> = (0..3).map(|_| read_vec(&mut input, n)).collect::<Result<_>>()?;
                target.push((0..n).map(|i| [cols[0][i], cols[1][i], cols[2][i]]).collect());
            }
        }
        let charge = if has_charge {
            let mut track = Vec::with_capacity(k);
            for _ in 0..k {
                let v = read_vec(&mut input, 6)?;
                track.push(PointChargeState { xi: [v[0], v[1], v[2]], eta: [v[3], v[4], v[5]] });
            }
            Some(track)
        } else {
            None
        };
        let steps = read_u64(&mut input)?;
        let rejected = read_u64(&mut input)?;
        let rhs_evals = read_u64(&mut input)?;
        let min_distance = read_f64(&mut input)?;
        let min_dt = read_f64(&mut input)?;
        let max_dt = read_f64(&mut input)?;
        let seed = read_u64(&mut input)?;
        let flow = Self {
            n: n_cut,
            softening,
            seed_ids,
            weights,
            reference_weights,
            times,
            positions,
            velocities,
            charge,
            flagged: flags.into_iter().map(|b| b != 0).collect(),
            stats: IntegratorStats {
                steps,
                rejected,
                rhs_evals,
                min_distance,
                min_distance_seed: (seed != u64::MAX).then_some(seed),
                min_dt,
                max_dt,
            },
        };
        flow.validate()?;
        Ok(flow)
    }
}
