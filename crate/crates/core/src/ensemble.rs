//! Weighted particle ensembles: quadrature of the initial density, the
//! cutoff regularization, and file formats.
//!
//! Binary layout (all little-endian): the 8-byte magic `VPDENS01`, a `u64`
//! particle count `N`, then the columns `id: [u64; N]`, `x1, x2, x3, v1, v2,
//! v3, w, w_ref: [f64; N]` one after another.

use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use crate::density::{DensityProfile, InitialDensity};
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::pointset::{self, PointSet};

#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Weights before any cutoff. They realize the seed measure `μ = f0 dx dv`
    /// that flows at different regularization levels are compared on.
    pub reference_weights: Vec<f64>,
    pub seed_ids: Vec<u64>,
    pub f0_ref: Option<Arc<InitialDensity>>,
}

impl ParticleEnsemble {
    /// Ensemble with seed ids `0..N` and reference weights equal to `weights`.
    pub fn from_parts(positions: Vec<Vec3>, velocities: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        let ens = Self {
            seed_ids: (0..positions.len() as u64).collect(),
            reference_weights: weights.clone(),
            positions,
            velocities,
            weights,
            f0_ref: None,
        };
        ens.validate()?;
        Ok(ens)
    }

    pub fn empty() -> Self {
        Self {
            positions: Vec::new(),
            velocities: Vec::new(),
            weights: Vec::new(),
            reference_weights: Vec::new(),
            seed_ids: Vec::new(),
            f0_ref: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `Σ w_i`, summed in index order.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if [self.velocities.len(), self.weights.len(), self.reference_weights.len(), self.seed_ids.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::validation("ensemble", "column lengths differ"));
        }
        for i in 0..n {
            let w = self.weights[i];
            if !(w.is_finite() && w >= 0.0) || !(self.reference_weights[i].is_finite() && self.reference_weights[i] >= 0.0) {
                return Err(Error::validation("ensemble.weights", format!("weight {i} is {w}")));
            }
            if self.positions[i].iter().chain(self.velocities[i].iter()).any(|c| !c.is_finite()) {
                return Err(Error::validation("ensemble", format!("particle {i} has non-finite coordinates")));
            }
        }
        let mut ids = self.seed_ids.clone();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("ensemble.seed_ids", "must be unique"));
        }
        Ok(())
    }

    /// Cutoff `f0^n = f0 · 1{1/n < |x - ξ0| < n, |v - η0| < n}` about the
    /// charge state stored in `f0_ref`.
    pub fn apply_cutoff(&self, n: u32) -> Result<Self> {
        let d = self
            .f0_ref
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("ensemble carries no initial density".into()))?;
        self.apply_cutoff_about(n, &d.charge_center, &d.charge_velocity)
    }

    /// Weights become the reference weight inside the indicator region and 0
    /// outside; coordinates and ids are untouched.
    pub fn apply_cutoff_about(&self, n: u32, xi0: &Vec3, eta0: &Vec3) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("cutoff index n must be >= 1".into()));
        }
        let nf = n as f64;
        let mut out = self.clone();
        for i in 0..self.len() {
            let r = geom::dist(&self.positions[i], xi0);
            let u = geom::dist(&self.velocities[i], eta0);
            let inside = r > 1.0 / nf && r < nf && u < nf;
            out.weights[i] = if inside { self.reference_weights[i] } else { 0.0 };
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "id,x1,x2,x3,v1,v2,v3,w")?;
        for i in 0..self.len() {
            let (x, v) = (self.positions[i], self.velocities[i]);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.seed_ids[i], x[0], x[1], x[2], v[0], v[1], v[2], self.weights[i]
            )?;
        }
        Ok(())
    }

    /// Reads the CSV form; reference weights are set to the stored weights.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut ens = Self::empty();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                if line.trim() != "id,x1,x2,x3,v1,v2,v3,w" {
                    return Err(Error::Format(format!("unexpected ensemble header `{line}`")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 {
                return Err(Error::Format(format!("line {}: expected 8 columns", lineno + 1)));
            }
            let id: u64 = cols[0]
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
            let mut vals = [0.0; 7];
            for (k, c) in cols[1..].iter().enumerate() {
                vals[k] = c
                    .trim()
                    .parse()
                    .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
            }
            ens.seed_ids.push(id);
            ens.positions.push([vals[0], vals[1], vals[2]]);
            ens.velocities.push([vals[3], vals[4], vals[5]]);
            ens.weights.push(vals[6]);
            ens.reference_weights.push(vals[6]);
        }
        ens.validate()?;
        Ok(ens)
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(ENSEMBLE_MAGIC)?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        for id in &self.seed_ids {
            out.write_all(&id.to_le_bytes())?;
        }
        for col in self.columns() {
            for x in col {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != ENSEMBLE_MAGIC {
            return Err(Error::Format("not an ensemble file (bad magic)".into()));
        }
        let n = read_u64(&mut input)? as usize;
        let mut ens = Self::empty();
        for _ in 0..n {
            ens.seed_ids.push(read_u64(&mut input)?);
        }
        let mut cols = vec![Vec::with_capacity(n); 8];
        for col in cols.iter_mut() {
            for _ in 0..n {
                col.push(read_f64(&mut input)?);
            }
        }
        ens.positions = (0..n).map(|i| [cols[0][i], cols[1][i], cols[2][i]]).collect();
        ens.velocities = (0..n).map(|i| [cols[3][i], cols[4][i], cols[5][i]]).collect();
        ens.weights = cols[6].clone();
        ens.reference_weights = cols[7].clone();
        ens.validate()?;
        Ok(ens)
    }

    fn columns(&self) -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = (0..3).map(|k| self.positions.iter().map(|x| x[k]).collect()).collect();
        cols.extend((0..3).map(|k| self.velocities.iter().map(|v| v[k]).collect::<Vec<_>>()));
        cols.push(self.weights.clone());
        cols.push(self.reference_weights.clone());
        cols
    }
}

pub const ENSEMBLE_MAGIC: &[u8; 8] = b"VPDENS01";

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Particle quadrature of an arbitrary profile: points of `points` are pushed
/// through the profile's transport map and weighted by `f0 / (N q)`.
pub fn sample_profile(
    profile: &dyn DensityProfile,
    count: usize,
    seed: u64,
    points: &dyn PointSet,
) -> Result<ParticleEnsemble> {
    if count == 0 {
        return Err(Error::InvalidArgument("particle count must be >= 1".into()));
    }
    let mass = profile.mass();
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::NotNormalizable {
            profile: profile.name().into(),
            reason: format!("total mass {mass}"),
        });
    }
    let n = count as f64;
    let mut positions = Vec::with_capacity(count);
    let mut velocities = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for u in points.points(count, seed) {
        let p = profile.transport(&u);
        let w = if p.proposal > 0.0 { profile.value(&p.x, &p.v) / (n * p.proposal) } else { 0.0 };
        positions.push(p.x);
        velocities.push(p.v);
        weights.push(w);
    }
    ParticleEnsemble::from_parts(positions, velocities, weights)
}

/// Samples `density` with the default Halton point set.
pub fn sample_initial_ensemble(density: &Arc<InitialDensity>, count: usize, seed: u64) -> Result<ParticleEnsemble> {
    let points = pointset::build(pointset::DEFAULT_POINT_SET)?;
    sample_initial_ensemble_with(density, count, seed, points.as_ref())
}

pub fn sample_initial_ensemble_with(
    density: &Arc<InitialDensity>,
    count: usize,
    seed: u64,
    points: &dyn PointSet,
) -> Result<ParticleEnsemble> {
    let mut ens = sample_profile(density.profile(), count, seed, points)?;
    ens.f0_ref = Some(density.clone());
    Ok(ens)
}
