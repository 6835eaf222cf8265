//! Direct-summation Coulomb fields.
//!
//! Sources are stored as padded structure-of-arrays columns and summed in
//! interleaved lanes with a fixed final reduction. Parallelism only ever
//! splits the targets, so every target sees the same summation order and
//! results are bit-identical for any thread count on a given machine.
//!
//! On x86-64 CPUs with AVX-512F the softened kernel runs eight lanes wide and
//! computes `1/sqrt` by a hardware estimate refined with two Newton steps
//! (relative error near 1e-16). Other CPUs use the portable four-lane loop.

use std::io::Write;

use rayon::prelude::*;

use crate::charge::PointChargeState;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::geom::{self, Mat3, Vec3};

const LANES: usize = 4;
/// Source columns are padded to this multiple so the wide kernel needs no tail.
const PADDING: usize = 8;
/// Coordinate given to padding sources (weight 0); far enough to never be hit.
const PAD: f64 = 1e100;

/// Positive-weight point sources, padded to a multiple of eight.
#[derive(Debug, Clone)]
pub struct SourceSet {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    w: Vec<f64>,
    /// Caller index of each retained source.
    origin: Vec<usize>,
}

impl SourceSet {
    /// Keeps the sources with `w > 0`.
    pub fn new(points: impl IntoIterator<Item = (Vec3, f64)>) -> Self {
        let mut s = Self {
            x: Vec::new(),
            y: Vec::new(),
            z: Vec::new(),
            w: Vec::new(),
            origin: Vec::new(),
        };
        for (i, (p, w)) in points.into_iter().enumerate() {
            if w > 0.0 {
                s.x.push(p[0]);
                s.y.push(p[1]);
                s.z.push(p[2]);
                s.w.push(w);
                s.origin.push(i);
            }
        }
        while s.x.len() % PADDING != 0 {
            s.x.push(PAD);
            s.y.push(PAD);
            s.z.push(PAD);
            s.w.push(0.0);
        }
        s
    }

    pub fn from_ensemble(ens: &ParticleEnsemble) -> Self {
        Self::new(ens.positions.iter().copied().zip(ens.weights.iter().copied()))
    }

    /// Number of real (non-padding) sources.
    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }

    /// `Σ w_j (t - y_j)/(|t - y_j|^2 + ε^2)^{3/2}` with exact coincidences
    /// (`t = y_j`) skipped; returns the field and the number of coincidences.
    #[inline]
    pub fn field(&self, t: &Vec3, eps2: f64) -> (Vec3, usize) {
        if eps2 > 0.0 {
            return (self.softened_field(t, eps2), 0);
        }
        let mut ax = [0.0; LANES];
        let mut ay = [0.0; LANES];
        let mut az = [0.0; LANES];
        let mut hits = [0.0; LANES];
        let cols = self
            .x
            .chunks_exact(LANES)
            .zip(self.y.chunks_exact(LANES))
            .zip(self.z.chunks_exact(LANES))
            .zip(self.w.chunks_exact(LANES));
        for (((xs, ys), zs), ws) in cols {
            for l in 0..LANES {
                let dx = t[0] - xs[l];
                let dy = t[1] - ys[l];
                let dz = t[2] - zs[l];
                let d2 = dx * dx + dy * dy + dz * dz;
                let hit = d2 == 0.0;
                let r2 = if hit { 1.0 } else { d2 + eps2 };
                let s = if hit { 0.0 } else { ws[l] / (r2 * r2.sqrt()) };
                ax[l] += s * dx;
                ay[l] += s * dy;
                az[l] += s * dz;
                hits[l] += if hit { 1.0 } else { 0.0 };
            }
        }
        let red = |a: [f64; LANES]| (a[0] + a[1]) + (a[2] + a[3]);
        ([red(ax), red(ay), red(az)], red(hits) as usize)
    }

    /// Branch-free variant for `ε > 0`, where a coincidence contributes 0.
    #[inline]
    fn softened_field(&self, t: &Vec3, eps2: f64) -> Vec3 {
        #[cfg(target_arch = "x86_64")]
        if simd::available() {
            // SAFETY: the CPU supports AVX-512F and the columns have equal
            // lengths that are multiples of eight.
            return unsafe { simd::softened_field(&self.x, &self.y, &self.z, &self.w, t, eps2) };
        }
        let mut ax = [0.0; LANES];
        let mut ay = [0.0; LANES];
        let mut az = [0.0; LANES];
        let cols = self
            .x
            .chunks_exact(LANES)
            .zip(self.y.chunks_exact(LANES))
            .zip(self.z.chunks_exact(LANES))
            .zip(self.w.chunks_exact(LANES));
        for (((xs, ys), zs), ws) in cols {
            for l in 0..LANES {
                let dx = t[0] - xs[l];
                let dy = t[1] - ys[l];
                let dz = t[2] - zs[l];
                let r2 = dx * dx + dy * dy + dz * dz + eps2;
                let s = ws[l] / (r2 * r2.sqrt());
                ax[l] += s * dx;
                ay[l] += s * dy;
                az[l] += s * dz;
            }
        }
        let red = |a: [f64; LANES]| (a[0] + a[1]) + (a[2] + a[3]);
        [red(ax), red(ay), red(az)]
    }

    /// `Σ w_j / sqrt(|t - y_j|^2 + ε^2)` with coincidences skipped.
    #[inline]
    pub fn potential(&self, t: &Vec3, eps2: f64) -> (f64, usize) {
        let mut acc = [0.0; LANES];
        let mut hits = [0.0; LANES];
        let cols = self
            .x
            .chunks_exact(LANES)
            .zip(self.y.chunks_exact(LANES))
            .zip(self.z.chunks_exact(LANES))
            .zip(self.w.chunks_exact(LANES));
        for (((xs, ys), zs), ws) in cols {
            for l in 0..LANES {
                let dx = t[0] - xs[l];
                let dy = t[1] - ys[l];
                let dz = t[2] - zs[l];
                let d2 = dx * dx + dy * dy + dz * dz;
                let hit = d2 == 0.0;
                let r2 = if hit { 1.0 } else { d2 + eps2 };
                acc[l] += if hit { 0.0 } else { ws[l] / r2.sqrt() };
                hits[l] += if hit { 1.0 } else { 0.0 };
            }
        }
        ((acc[0] + acc[1]) + (acc[2] + acc[3]), ((hits[0] + hits[1]) + (hits[2] + hits[3])) as usize)
    }

    /// `Σ w_j K(t - y_j)`; coincidences are an error.
    pub fn gradient(&self, t: &Vec3) -> Result<Mat3> {
        let mut m = [[0.0; 3]; 3];
        for j in 0..self.len() {
            let k = gradient_kernel(&geom::sub(t, &[self.x[j], self.y[j], self.z[j]]))
                .map_err(|_| Error::NearSingularity { index: self.origin[j], distance: 0.0 })?;
            m = geom::mat_add(&m, &geom::mat_scale(&k, self.w[j]));
        }
        Ok(m)
    }

    /// First retained source located exactly at `t`, other than `skip`.
    fn coincident(&self, t: &Vec3, skip: Option<usize>) -> Option<usize> {
        (0..self.len())
            .find(|&j| Some(self.origin[j]) != skip && self.x[j] == t[0] && self.y[j] == t[1] && self.z[j] == t[2])
            .map(|j| self.origin[j])
    }

    /// Weight and exact potential contribution of coincident sources other
    /// than `skip` at softening `eps`.
    fn coincident_potential(&self, t: &Vec3, skip: Option<usize>, eps: f64) -> f64 {
        (0..self.len())
            .filter(|&j| Some(self.origin[j]) != skip && self.x[j] == t[0] && self.y[j] == t[1] && self.z[j] == t[2])
            .map(|j| self.w[j] / eps)
            .sum()
    }

    fn is_source(&self, i: usize) -> bool {
        self.origin.binary_search(&i).is_ok()
    }
}

/// Plasma field at arbitrary targets.
pub fn plasma_field(ens: &ParticleEnsemble, targets: &[Vec3], eps: f64) -> Result<Vec<Vec3>> {
    check_softening(eps)?;
    let src = SourceSet::from_ensemble(ens);
    field_at(&src, targets, eps, None)
}

/// Plasma field at every particle of the ensemble, self-interaction excluded.
pub fn self_field(ens: &ParticleEnsemble, eps: f64) -> Result<Vec<Vec3>> {
    check_softening(eps)?;
    let src = SourceSet::from_ensemble(ens);
    field_at(&src, &ens.positions, eps, Some(&|i| src.is_source(i)))
}

/// Field of `src` at `targets`. When `is_self` is given, target `i` is the
/// source with caller index `i` (if that source is retained) and its own
/// contribution is excluded.
pub fn field_at(
    src: &SourceSet,
    targets: &[Vec3],
    eps: f64,
    is_self: Option<&(dyn Fn(usize) -> bool + Sync)>,
) -> Result<Vec<Vec3>> {
    let eps2 = eps * eps;
    let out: Vec<(Vec3, usize)> = targets.par_iter().map(|t| src.field(t, eps2)).collect();
    if eps == 0.0 {
        for (i, (_, hits)) in out.iter().enumerate() {
            let expected = usize::from(is_self.is_some_and(|f| f(i)));
            if *hits > expected {
                let skip = is_self.map(|_| i);
                let index = src.coincident(&targets[i], skip).unwrap_or(i);
                return Err(Error::NearSingularity { index, distance: 0.0 });
            }
        }
    }
    Ok(out.into_iter().map(|(e, _)| e).collect())
}

fn check_softening(eps: f64) -> Result<()> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation("softening", format!("must be finite and >= 0, got {eps}")))
    }
}

/// `F(x) = (x - ξ)/|x - ξ|^3`; targets within `exclusion` of `ξ` are an error.
pub fn point_charge_field(xi: &Vec3, targets: &[Vec3], exclusion: f64) -> Result<Vec<Vec3>> {
    targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let d = geom::sub(t, xi);
            let r = geom::norm(&d);
            if r <= exclusion || r == 0.0 {
                return Err(Error::NearSingularity { index: i, distance: r });
            }
            Ok(geom::scale(&d, 1.0 / (r * r * r)))
        })
        .collect()
}

/// Unsoftened plasma field at the charge, `Σ w_i (ξ - x_i)/|ξ - x_i|^3`.
pub fn field_at_charge(src: &SourceSet, xi: &Vec3) -> Result<Vec3> {
    let (e, hits) = src.field(xi, 0.0);
    if hits > 0 {
        let index = src.coincident(xi, None).unwrap_or(0);
        return Err(Error::NearSingularity { index, distance: 0.0 });
    }
    Ok(e)
}

/// `K_ij(y) = (δ_ij |y|^2 - 3 y_i y_j)/|y|^5`, the kernel of `∇E`.
pub fn gradient_kernel(y: &Vec3) -> Result<Mat3> {
    let r2 = geom::norm2(y);
    if r2 == 0.0 || !r2.is_finite() {
        return Err(Error::SingularKernel);
    }
    let r5 = r2 * r2 * r2.sqrt();
    Ok(std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let delta = if i == j { r2 } else { 0.0 };
            (delta - 3.0 * (y[i] * y[j])) / r5
        })
    }))
}

/// `(1/2) Σ_{i≠j} w_i w_j / sqrt(|x_i - x_j|^2 + ε^2)`.
pub fn plasma_potential_energy(ens: &ParticleEnsemble, eps: f64) -> Result<f64> {
    check_softening(eps)?;
    let src = SourceSet::from_ensemble(ens);
    let eps2 = eps * eps;
    let terms: Vec<Result<f64>> = (0..ens.len())
        .into_par_iter()
        .map(|i| {
            let w = ens.weights[i];
            if w == 0.0 {
                return Ok(0.0);
            }
            let t = &ens.positions[i];
            let (phi, hits) = src.potential(t, eps2);
            if hits > 1 {
                if eps == 0.0 {
                    let index = src.coincident(t, Some(i)).unwrap_or(i);
                    return Err(Error::NearSingularity { index, distance: 0.0 });
                }
                return Ok(w * (phi + src.coincident_potential(t, Some(i), eps)));
            }
            Ok(w * phi)
        })
        .collect();
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(0.5 * total)
}

/// `Σ_i w_i / |x_i - ξ|` over positive-weight particles.
pub fn charge_potential_energy(ens: &ParticleEnsemble, xi: &Vec3) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..ens.len() {
        let w = ens.weights[i];
        if w == 0.0 {
            continue;
        }
        let r = geom::dist(&ens.positions[i], xi);
        if r == 0.0 {
            return Err(Error::NearSingularity { index: i, distance: 0.0 });
        }
        total += w / r;
    }
    Ok(total)
}

/// Field of a uniformly charged ball.
pub fn uniform_ball_field(center: &Vec3, radius: f64, mass: f64, x: &Vec3) -> Vec3 {
    let d = geom::sub(x, center);
    let r = geom::norm(&d);
    if r >= radius {
        geom::scale(&d, mass / (r * r * r))
    } else {
        geom::scale(&d, mass / (radius * radius * radius))
    }
}

/// Plasma and point-charge fields sampled at a set of targets.
#[derive(Debug, Clone)]
pub struct FieldEvaluation {
    pub targets: Vec<Vec3>,
    pub e: Vec<Vec3>,
    pub f: Vec<Vec3>,
    pub softening: f64,
}

impl FieldEvaluation {
    pub fn evaluate(
        ens: &ParticleEnsemble,
        charge: Option<&PointChargeState>,
        targets: Vec<Vec3>,
        eps: f64,
        exclusion: f64,
    ) -> Result<Self> {
        let e = plasma_field(ens, &targets, eps)?;
        let f = match charge {
            Some(c) => point_charge_field(&c.xi, &targets, exclusion)?,
            None => vec![geom::ZERO; targets.len()],
        };
        Ok(Self { targets, e, f, softening: eps })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x1,x2,x3,E1,E2,E3,F1,F2,F3")?;
        for i in 0..self.targets.len() {
            let (x, e, f) = (self.targets[i], self.e[i], self.f[i]);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                x[0], x[1], x[2], e[0], e[1], e[2], f[0], f[1], f[2]
            )?;
        }
        Ok(())
    }
}

#[cfg(target_arch = "x86_64")]
mod simd {
    use std::arch::x86_64::*;
    use std::sync::OnceLock;

    use crate::geom::Vec3;

    pub fn available() -> bool {
        static AVX512: OnceLock<bool> = OnceLock::new();
        *AVX512.get_or_init(|| {
            std::env::var_os("VPDIRAC_NO_SIMD").is_none() && is_x86_feature_detected!("avx512f")
        })
    }

    #[target_feature(enable = "avx512f")]
    pub unsafe fn softened_field(x: &[f64], y: &[f64], z: &[f64], w: &[f64], t: &Vec3, eps2: f64) -> Vec3 {
        let tx = _mm512_set1_pd(t[0]);
        let ty = _mm512_set1_pd(t[1]);
        let tz = _mm512_set1_pd(t[2]);
        let e2 = _mm512_set1_pd(eps2);
        let half = _mm512_set1_pd(0.5);
        let three_halves = _mm512_set1_pd(1.5);
        let mut ax = _mm512_setzero_pd();
        let mut ay = _mm512_setzero_pd();
        let mut az = _mm512_setzero_pd();
        for c in (0..x.len()).step_by(8) {
            let dx = _mm512_sub_pd(tx, _mm512_loadu_pd(x.as_ptr().add(c)));
            let dy = _mm512_sub_pd(ty, _mm512_loadu_pd(y.as_ptr().add(c)));
            let dz = _mm512_sub_pd(tz, _mm512_loadu_pd(z.as_ptr().add(c)));
            let r2 = _mm512_fmadd_pd(dx, dx, _mm512_fmadd_pd(dy, dy, _mm512_fmadd_pd(dz, dz, e2)));
            let h = _mm512_mul_pd(half, r2);
            let mut r = _mm512_rsqrt14_pd(r2);
            r = _mm512_mul_pd(r, _mm512_fnmadd_pd(h, _mm512_mul_pd(r, r), three_halves));
            r = _mm512_mul_pd(r, _mm512_fnmadd_pd(h, _mm512_mul_pd(r, r), three_halves));
            let s = _mm512_mul_pd(_mm512_loadu_pd(w.as_ptr().add(c)), _mm512_mul_pd(r, _mm512_mul_pd(r, r)));
            ax = _mm512_fmadd_pd(s, dx, ax);
            ay = _mm512_fmadd_pd(s, dy, ay);
            az = _mm512_fmadd_pd(s, dz, az);
        }
        [_mm512_reduce_add_pd(ax), _mm512_reduce_add_pd(ay), _mm512_reduce_add_pd(az)]
    }
}
