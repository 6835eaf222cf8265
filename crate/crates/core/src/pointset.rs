//! Unit-cube point sets feeding the phase-space samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::params::{ParamMap, ParamReader};
use crate::registry::Registry;

pub const DIM: usize = 6;
pub const DEFAULT_POINT_SET: &str = "halton";

/// A deterministic generator of points in the open unit cube `(0,1)^6`.
pub trait PointSet: Send + Sync {
    fn name(&self) -> &'static str;
    fn points(&self, count: usize, seed: u64) -> Vec<[f64; DIM]>;
}

const HALTON_BASES: [u64; DIM] = [2, 3, 5, 7, 11, 13];
const EDGE: f64 = 1e-15;

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

fn clamp_open(u: f64) -> f64 {
    u.clamp(EDGE, 1.0 - EDGE)
}

/// Halton sequence with a seeded Cranley-Patterson rotation.
#[derive(Debug, Clone)]
pub struct Halton {
    /// Number of leading indices skipped.
    pub skip: u64,
}

impl Default for Halton {
    fn default() -> Self {
        Self { skip: 20 }
    }
}

impl PointSet for Halton {
    fn name(&self) -> &'static str {
        "halton"
    }

    fn points(&self, count: usize, seed: u64) -> Vec<[f64; DIM]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: [f64; DIM] = std::array::from_fn(|_| rng.gen::<f64>());
        (0..count as u64)
            .map(|i| {
                std::array::from_fn(|d| {
                    let u = radical_inverse(i + self.skip, HALTON_BASES[d]) + shift[d];
                    clamp_open(u.fract())
                })
            })
            .collect()
    }
}

/// Independent uniform draws; kept for comparison against the stratified set.
#[derive(Debug, Clone, Default)]
pub struct Independent;

impl PointSet for Independent {
    fn name(&self) -> &'static str {
        "iid"
    }

    fn points(&self, count: usize, seed: u64) -> Vec<[f64; DIM]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| std::array::from_fn(|_| clamp_open(rng.gen::<f64>())))
            .collect()
    }
}

pub fn registry() -> Registry<dyn PointSet> {
    let mut reg: Registry<dyn PointSet> = Registry::new("point set");
    reg.register("halton", |p: &ParamMap| {
        let mut r = ParamReader::new("sampler", p);
        let skip = r.number("skip", 20.0)?;
        r.finish()?;
        Ok(Box::new(Halton { skip: skip as u64 }))
    });
    reg.register("iid", |p: &ParamMap| {
        ParamReader::new("sampler", p).finish()?;
        Ok(Box::new(Independent))
    });
    reg
}

pub fn build(name: &str) -> Result<Box<dyn PointSet>> {
    registry().build(name, &ParamMap::new())
}
