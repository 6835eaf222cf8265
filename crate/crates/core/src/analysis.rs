//! Grid fields, weak-Lᵖ pseudo-norms, the gradient kernel convolution,
//! smooth maximal functions and the related interpolation inequality.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::fields::{self, gradient_kernel};
use crate::geom::{self, Mat3, Vec3};
use crate::params::{ParamMap, ParamReader};
use crate::registry::Registry;

// ---------------------------------------------------------------------------
// grids

/// Uniform grid of `dims` nodes `origin + h (i, j, k)`. When used for
/// densities each node stands for the cube of side `h` centered on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Vec3,
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: Vec3, spacing: f64, dims: [usize; 3]) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::DegenerateGrid(format!("spacing {spacing}")));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::EmptyGrid);
        }
        if origin.iter().any(|c| !c.is_finite()) {
            return Err(Error::DegenerateGrid("non-finite origin".into()));
        }
        Ok(Self { origin, spacing, dims })
    }

    /// `nodes` nodes per axis spanning `[center - half, center + half]`.
    pub fn cube(center: Vec3, half: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::DegenerateGrid("need at least two nodes per axis".into()));
        }
        let h = 2.0 * half / (nodes - 1) as f64;
        Self::new(geom::sub(&center, &[half; 3]), h, [nodes; 3])
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    /// Largest side length `(dims - 1) h`.
    pub fn extent(&self) -> f64 {
        self.dims.iter().map(|&d| (d - 1) as f64).fold(0.0, f64::max) * self.spacing
    }

    /// Smallest side length.
    pub fn min_extent(&self) -> f64 {
        self.dims.iter().map(|&d| (d - 1) as f64).fold(f64::INFINITY, f64::min) * self.spacing
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        (ijk[0] * self.dims[1] + ijk[1]) * self.dims[2] + ijk[2]
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        [i, j, k]
    }

    pub fn node(&self, idx: usize) -> Vec3 {
        let c = self.coords(idx);
        std::array::from_fn(|a| self.origin[a] + c[a] as f64 * self.spacing)
    }

    pub fn nodes(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Indices of the nodes whose coordinates are multiples of `stride`.
    pub fn sublattice(&self, stride: usize) -> Vec<usize> {
        let stride = stride.max(1);
        let mut out = Vec::new();
        for i in (0..self.dims[0]).step_by(stride) {
            for j in (0..self.dims[1]).step_by(stride) {
                for k in (0..self.dims[2]).step_by(stride) {
                    out.push(self.index([i, j, k]));
                }
            }
        }
        out
    }
}

/// Values with `ncomp` components at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub spec: GridSpec,
    pub ncomp: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: GridSpec, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() * ncomp {
            return Err(Error::validation("grid field", "value count does not match the grid"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("grid field", "non-finite value"));
        }
        Ok(Self { spec, ncomp, values })
    }

    pub fn from_scalars(spec: GridSpec, v: Vec<f64>) -> Result<Self> {
        Self::new(spec, 1, v)
    }

    pub fn from_vectors(spec: GridSpec, v: &[Vec3]) -> Result<Self> {
        Self::new(spec, 3, v.iter().flatten().copied().collect())
    }

    pub fn from_matrices(spec: GridSpec, v: &[Mat3]) -> Result<Self> {
        Self::new(spec, 9, v.iter().flatten().flatten().copied().collect())
    }

    /// Samples `f` at every node.
    pub fn sample(spec: GridSpec, ncomp: usize, f: impl Fn(&Vec3) -> Vec<f64> + Sync) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..spec.len()).into_par_iter().map(|i| f(&spec.node(i))).collect();
        Self::new(spec, ncomp, rows.into_iter().flatten().collect())
    }

    pub fn at(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.ncomp..(idx + 1) * self.ncomp]
    }

    /// Euclidean (Frobenius for matrices) norm of the node value.
    pub fn magnitude(&self, idx: usize) -> f64 {
        self.at(idx).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        (0..self.spec.len()).map(|i| self.magnitude(i)).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            spec: self.spec,
            ncomp: self.ncomp,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// weak pseudo-norms

/// Lebesgue measure of superlevel sets `{|g| > λ}`.
pub trait SuperlevelMeasure: Send + Sync {
    fn name(&self) -> &'static str;
    fn measure(&self, lambda: f64) -> f64;
}

/// Cell counting: every sample stands for a cell of volume `cell_volume`.
#[derive(Debug, Clone)]
pub struct CellCount {
    sorted: Vec<f64>,
    cell_volume: f64,
}

impl CellCount {
    pub fn new(magnitudes: &[f64], cell_volume: f64) -> Result<Self> {
        if magnitudes.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let mut sorted: Vec<f64> = magnitudes.iter().map(|m| m.abs()).collect();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { sorted, cell_volume })
    }

    pub fn from_field(field: &GridField) -> Result<Self> {
        Self::new(&field.magnitudes(), field.spec.cell_volume())
    }
}

impl SuperlevelMeasure for CellCount {
    fn name(&self) -> &'static str {
        "grid"
    }
    fn measure(&self, lambda: f64) -> f64 {
        let above = self.sorted.len() - self.sorted.partition_point(|&m| m <= lambda);
        above as f64 * self.cell_volume
    }
}

/// Exact superlevel volumes of `c |x - x0|^{-a}`: balls of radius `(c/λ)^{1/a}`.
#[derive(Debug, Clone, Copy)]
pub struct RadialPowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

impl RadialPowerLaw {
    /// `|F|` of a point charge `q`: `q |x - ξ|^{-2}`.
    pub fn point_charge(charge: f64) -> Self {
        Self { coefficient: charge.abs(), exponent: 2.0 }
    }
}

impl SuperlevelMeasure for RadialPowerLaw {
    fn name(&self) -> &'static str {
        "analytic"
    }
    fn measure(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return f64::INFINITY;
        }
        4.0 * PI / 3.0 * (self.coefficient / lambda).powf(3.0 / self.exponent)
    }
}

/// `count` log-spaced values from `lo` to `hi`.
pub fn log_lambdas(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

/// `(sup_λ λ^p |{|g| > λ}|)^{1/p}` over the given thresholds.
pub fn weak_pseudo_norm(measure: &dyn SuperlevelMeasure, p: f64, lambdas: &[f64]) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("weak norm exponent p = {p} must be >= 1")));
    }
    if lambdas.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let sup = lambdas
        .iter()
        .filter(|l| **l > 0.0)
        .map(|&l| l.powf(p) * measure.measure(l))
        .fold(0.0, f64::max);
    Ok(sup.powf(1.0 / p))
}

/// Weak norm of sampled values using their own range for the thresholds.
pub fn weak_pseudo_norm_of_samples(magnitudes: &[f64], cell_volume: f64, p: f64) -> Result<f64> {
    weak_pseudo_norm_resolved(magnitudes, cell_volume, p, 1)
}

/// As [`weak_pseudo_norm_of_samples`], but only superlevel sets containing at
/// least `min_count` samples enter the supremum. Use this when the samples
/// are a sparse subset of the grid, where a single sample near a singularity
/// would otherwise stand for a whole coarse cell.
pub fn weak_pseudo_norm_resolved(magnitudes: &[f64], cell_volume: f64, p: f64, min_count: usize) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("weak norm exponent p = {p} must be >= 1")));
    }
    let count = CellCount::new(magnitudes, cell_volume)?;
    // the supremum over λ is attained just below one of the sampled values
    let mut best: f64 = 0.0;
    let n = count.sorted.len();
    for (k, &m) in count.sorted.iter().enumerate() {
        if m <= 0.0 || n - k < min_count.max(1) {
            continue;
        }
        let above = (n - k) as f64 * cell_volume;
        best = best.max(m.powf(p) * above);
    }
    Ok(best.powf(1.0 / p))
}

// ---------------------------------------------------------------------------
// gradient kernel convolution

/// `Σ_j w_j K(x - y_j)` at `points`, plus `K(x - ξ)` for a unit charge atom.
/// Points closer than `min_separation` to an atom are an error.
pub fn singular_convolution_at(
    atoms: &ParticleEnsemble,
    charge: Option<&Vec3>,
    points: &[Vec3],
    min_separation: f64,
) -> Result<Vec<Mat3>> {
    let mut sources: Vec<(Vec3, f64)> = atoms
        .positions
        .iter()
        .zip(&atoms.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(p, w)| (*p, *w))
        .collect();
    let mut labels: Vec<usize> = (0..atoms.len()).filter(|&i| atoms.weights[i] > 0.0).collect();
    if let Some(xi) = charge {
        sources.push((*xi, 1.0));
        labels.push(atoms.len());
    }
    points
        .par_iter()
        .enumerate()
        .map(|(node, x)| {
            let mut m = [[0.0; 3]; 3];
            for (j, (y, w)) in sources.iter().enumerate() {
                let d = geom::sub(x, y);
                let r = geom::norm(&d);
                if r < min_separation || r == 0.0 {
                    return Err(Error::NodeAtomCollision { node, atom: labels[j], distance: r });
                }
                let k = gradient_kernel(&d)?;
                for a in 0..3 {
                    for b in 0..3 {
                        m[a][b] += w * k[a][b];
                    }
                }
            }
            Ok(m)
        })
        .collect()
}

/// [`singular_convolution_at`] on every node of `grid`, requiring nodes to
/// stay half a cell away from every atom.
pub fn singular_convolution(atoms: &ParticleEnsemble, charge: Option<&Vec3>, grid: &GridSpec) -> Result<GridField> {
    let m = singular_convolution_at(atoms, charge, &grid.nodes(), 0.5 * grid.spacing)?;
    GridField::from_matrices(*grid, &m)
}

/// The local term `(4π/3) ρ(x) I` that turns the principal value `K ∗ ρ` of
/// a smooth density into `∇E`.
pub fn local_term(rho: f64) -> Mat3 {
    let c = 4.0 * PI / 3.0 * rho;
    [[c, 0.0, 0.0], [0.0, c, 0.0], [0.0, 0.0, c]]
}

/// Central finite differences `∂_j E_i` of the plasma field with step `h`.
pub fn field_gradient_fd(atoms: &ParticleEnsemble, points: &[Vec3], h: f64, eps: f64) -> Result<Vec<Mat3>> {
    let mut targets = Vec::with_capacity(6 * points.len());
    for x in points {
        for j in 0..3 {
            let mut p = *x;
            p[j] += h;
            targets.push(p);
            p[j] -= 2.0 * h;
            targets.push(p);
        }
    }
    let e = fields::plasma_field(atoms, &targets, eps)?;
    Ok((0..points.len())
        .map(|n| {
            let mut m = [[0.0; 3]; 3];
            for j in 0..3 {
                let (plus, minus) = (e[6 * n + 2 * j], e[6 * n + 2 * j + 1]);
                for i in 0..3 {
                    m[i][j] = (plus[i] - minus[i]) / (2.0 * h);
                }
            }
            m
        })
        .collect())
}

// ---------------------------------------------------------------------------
// smooth maximal functions

/// `(1 - |x|^2)^2` on the unit ball.
pub fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 - r2) * (1.0 - r2)
    } else {
        0.0
    }
}

/// Dyadic scales `2h, 4h, …` up to a quarter of the smallest grid side.
pub fn dyadic_scales(spec: &GridSpec) -> Result<Vec<f64>> {
    let top = 0.25 * spec.min_extent();
    let mut scales = Vec::new();
    let mut r = 2.0 * spec.spacing;
    while r <= top * (1.0 + 1e-12) {
        scales.push(r);
        r *= 2.0;
    }
    if scales.len() < 3 {
        return Err(Error::ScaleExceedsGrid { scale: 8.0 * spec.spacing, extent: spec.min_extent() });
    }
    Ok(scales)
}

/// `U(x) = max_r` of a bump-weighted average at scale `r`, evaluated at the
/// given nodes.
pub trait MaximalOperator: Send + Sync {
    fn name(&self) -> &'static str;
    fn apply(&self, field: &GridField, scales: &[f64], nodes: &[usize]) -> Result<Vec<f64>>;

    fn apply_all(&self, field: &GridField, scales: &[f64]) -> Result<Vec<f64>> {
        let nodes: Vec<usize> = (0..field.spec.len()).collect();
        self.apply(field, scales, &nodes)
    }
}

/// Inclusive prefix sums of per-node channel values, padded with a zero
/// layer, so that any box of nodes can be summed in constant time.
struct BlockSums {
    dims: [usize; 3],
    width: usize,
    data: Vec<f64>,
}

impl BlockSums {
    fn new(field: &GridField, absolute: bool) -> Self {
        let spec = &field.spec;
        let width = if absolute { 1 } else { field.ncomp };
        let dims = [spec.dims[0] + 1, spec.dims[1] + 1, spec.dims[2] + 1];
        let mut data = vec![0.0; dims[0] * dims[1] * dims[2] * width];
        let at = |i: usize, j: usize, k: usize| ((i * dims[1] + j) * dims[2] + k) * width;
        for i in 1..dims[0] {
            for j in 1..dims[1] {
                for k in 1..dims[2] {
                    let v = field.at(spec.index([i - 1, j - 1, k - 1]));
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    for c in 0..width {
                        let own = if absolute { norm } else { v[c] };
                        data[at(i, j, k) + c] = own + data[at(i - 1, j, k) + c] + data[at(i, j - 1, k) + c]
                            + data[at(i, j, k - 1) + c]
                            - data[at(i - 1, j - 1, k) + c]
                            - data[at(i - 1, j, k - 1) + c]
                            - data[at(i, j - 1, k - 1) + c]
                            + data[at(i - 1, j - 1, k - 1) + c];
                    }
                }
            }
        }
        Self { dims, width, data }
    }

    /// Mean over the nodes `lo..hi` (exclusive) per axis; the box must be non-empty.
    fn mean(&self, lo: [usize; 3], hi: [usize; 3], out: &mut [f64]) {
        let (d, w) = (self.dims, self.width);
        let at = |i: usize, j: usize, k: usize| ((i * d[1] + j) * d[2] + k) * w;
        let count = ((hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2])) as f64;
        for (c, o) in out.iter_mut().enumerate().take(w) {
            let s = self.data[at(hi[0], hi[1], hi[2]) + c] - self.data[at(lo[0], hi[1], hi[2]) + c]
                - self.data[at(hi[0], lo[1], hi[2]) + c]
                - self.data[at(hi[0], hi[1], lo[2]) + c]
                + self.data[at(lo[0], lo[1], hi[2]) + c]
                + self.data[at(lo[0], hi[1], lo[2]) + c]
                + self.data[at(hi[0], lo[1], lo[2]) + c]
                - self.data[at(lo[0], lo[1], lo[2]) + c];
            *o = s / count;
        }
    }
}

/// Bump average at one node and scale. Large stencils are coarsened to at
/// most `taps` points per axis; each coarse tap carries the mean of the block
/// of nodes it stands for, so singular fields keep their local cancellation.
/// Weights are normalized over the taps inside the grid.
fn bump_average(sums: &BlockSums, spec: &GridSpec, node: usize, r: f64, taps: usize, out: &mut [f64]) {
    let c = spec.coords(node);
    let reach = (r / spec.spacing).floor() as isize;
    let mut stride = ((2 * reach + 1) as usize).div_ceil(taps).max(1) as isize;
    if stride % 2 == 0 {
        stride += 1;
    }
    let half = stride / 2;
    let mut total = 0.0;
    let mut block = vec![0.0; out.len()];
    out.iter_mut().for_each(|o| *o = 0.0);
    // offsets are multiples of `stride` so the stencil stays centered
    let start = -(reach / stride) * stride;
    let span = |center: isize, axis: usize| -> Option<(usize, usize)> {
        let lo = (center - half).max(0);
        let hi = (center + half + 1).min(spec.dims[axis] as isize);
        (center >= 0 && center < spec.dims[axis] as isize).then_some((lo as usize, hi as usize))
    };
    let mut a = start;
    while a <= reach {
        if let Some((i0, i1)) = span(c[0] as isize + a, 0) {
            let mut b = start;
            while b <= reach {
                if let Some((j0, j1)) = span(c[1] as isize + b, 1) {
                    let mut g = start;
                    while g <= reach {
                        if let Some((k0, k1)) = span(c[2] as isize + g, 2) {
                            let d2 = ((a * a + b * b + g * g) as f64) * spec.spacing * spec.spacing / (r * r);
                            let w = bump(d2);
                            if w > 0.0 {
                                sums.mean([i0, j0, k0], [i1, j1, k1], &mut block);
                                for (o, x) in out.iter_mut().zip(&block) {
                                    *o += w * x;
                                }
                                total += w;
                            }
                        }
                        g += stride;
                    }
                }
                b += stride;
            }
        }
        a += stride;
    }
    if total > 0.0 {
        out.iter_mut().for_each(|o| *o /= total);
    }
}

fn check_scales(spec: &GridSpec, scales: &[f64]) -> Result<()> {
    if scales.len() < 3 {
        return Err(Error::InvalidArgument("at least three scales are required".into()));
    }
    for &r in scales {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("scale {r} must be positive")));
        }
        if r > 0.5 * spec.extent() {
            return Err(Error::ScaleExceedsGrid { scale: r, extent: spec.extent() });
        }
    }
    Ok(())
}

fn maximal(field: &GridField, scales: &[f64], nodes: &[usize], taps: usize, absolute: bool) -> Result<Vec<f64>> {
    check_scales(&field.spec, scales)?;
    let sums = BlockSums::new(field, absolute);
    Ok(nodes
        .par_iter()
        .map(|&node| {
            let mut buf = vec![0.0; sums.width];
            let mut best: f64 = 0.0;
            for &r in scales {
                bump_average(&sums, &field.spec, node, r, taps, &mut buf);
                let v = if absolute { buf[0] } else { buf.iter().map(|x| x * x).sum::<f64>().sqrt() };
                best = best.max(v);
            }
            best
        })
        .collect())
}

/// Averages `|g|` (Euclidean/Frobenius norm of the node value).
#[derive(Debug, Clone)]
pub struct SmoothAbsolute {
    pub taps: usize,
}

/// Averages the components of `g` and takes the norm of the average.
#[derive(Debug, Clone)]
pub struct SmoothSigned {
    pub taps: usize,
}

impl MaximalOperator for SmoothAbsolute {
    fn name(&self) -> &'static str {
        "smooth-absolute"
    }
    fn apply(&self, field: &GridField, scales: &[f64], nodes: &[usize]) -> Result<Vec<f64>> {
        maximal(field, scales, nodes, self.taps, true)
    }
}

impl MaximalOperator for SmoothSigned {
    fn name(&self) -> &'static str {
        "smooth-signed"
    }
    fn apply(&self, field: &GridField, scales: &[f64], nodes: &[usize]) -> Result<Vec<f64>> {
        maximal(field, scales, nodes, self.taps, false)
    }
}

pub const DEFAULT_MAXIMAL: &str = "smooth-signed";
const DEFAULT_TAPS: f64 = 17.0;

pub fn maximal_registry() -> Registry<dyn MaximalOperator> {
    let mut reg: Registry<dyn MaximalOperator> = Registry::new("maximal operator");
    reg.register("smooth-absolute", |p: &ParamMap| {
        let mut r = ParamReader::new("maximal", p);
        let taps = r.number("taps", DEFAULT_TAPS)?;
        r.finish()?;
        Ok(Box::new(SmoothAbsolute { taps: taps.max(3.0) as usize }))
    });
    reg.register("smooth-signed", |p: &ParamMap| {
        let mut r = ParamReader::new("maximal", p);
        let taps = r.number("taps", DEFAULT_TAPS)?;
        r.finish()?;
        Ok(Box::new(SmoothSigned { taps: taps.max(3.0) as usize }))
    });
    reg
}

pub fn build_maximal(name: &str) -> Result<Box<dyn MaximalOperator>> {
    maximal_registry().build(name, &ParamMap::new())
}

/// Grid smooth maximal function `sup_r |φ_r * g|` of `field` at all nodes over
/// the dyadic scales.
pub fn smooth_maximal(field: &GridField, scales: &[f64]) -> Result<GridField> {
    let u = build_maximal(DEFAULT_MAXIMAL)?.apply_all(field, scales)?;
    GridField::from_scalars(field.spec, u)
}

// ---------------------------------------------------------------------------
// difference quotients

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DifferenceQuotientReport {
    pub pairs: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Largest raw quotient `|b(x) - b(y)| / |x - y|`.
    pub max_quotient: f64,
}

/// Ratios `|b(x) - b(y)| / |x - y| / (U(x) + U(y))` over node pairs. `u` holds
/// `U` at every node (NaN where it was not evaluated).
pub fn difference_quotient_check(b: &GridField, u: &[f64], pairs: &[(usize, usize)]) -> Result<DifferenceQuotientReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no pairs".into()));
    }
    let mut max_ratio: f64 = 0.0;
    let mut max_quotient: f64 = 0.0;
    let mut sum = 0.0;
    for &(p, q) in pairs {
        let d = geom::dist(&b.spec.node(p), &b.spec.node(q));
        if d == 0.0 {
            return Err(Error::InvalidArgument(format!("zero-distance pair ({p}, {q})")));
        }
        let diff: f64 = b.at(p).iter().zip(b.at(q)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let quotient = diff / d;
        let denom = u[p] + u[q];
        if denom.is_nan() {
            return Err(Error::InvalidArgument(format!("maximal function missing at pair ({p}, {q})")));
        }
        let ratio = if quotient == 0.0 { 0.0 } else { quotient / denom };
        max_ratio = max_ratio.max(ratio);
        max_quotient = max_quotient.max(quotient);
        sum += ratio;
    }
    Ok(DifferenceQuotientReport {
        pairs: pairs.len(),
        max_ratio,
        mean_ratio: sum / pairs.len() as f64,
        max_quotient,
    })
}

// ---------------------------------------------------------------------------
// M¹ / Lᵖ interpolation

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct InterpolationReport {
    pub l1: f64,
    pub m1: f64,
    pub lp: f64,
    pub volume: f64,
    /// `‖Ψ‖_{L¹} / (|||Ψ|||_{M¹} [1 + log(|Ω|^{1-1/p} ‖Ψ‖_{Lᵖ} / |||Ψ|||_{M¹})])`,
    /// at most `p/(p-1)`.
    pub ratio: f64,
}

/// Norms of a sample `Ψ` given cell values and cell volumes over a domain
/// `Ω` of total volume `Σ dv`.
pub fn interpolation_m1_lp(values: &[f64], volumes: &[f64], p: f64) -> Result<InterpolationReport> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must exceed 1")));
    }
    if values.len() != volumes.len() || values.is_empty() {
        return Err(Error::InvalidArgument("values and volumes must be non-empty and aligned".into()));
    }
    let volume: f64 = volumes.iter().sum();
    let l1: f64 = values.iter().zip(volumes).map(|(v, dv)| v.abs() * dv).sum();
    if l1 == 0.0 {
        return Ok(InterpolationReport { l1: 0.0, m1: 0.0, lp: 0.0, volume, ratio: 0.0 });
    }
    let lp = values.iter().zip(volumes).map(|(v, dv)| v.abs().powf(p) * dv).sum::<f64>().powf(1.0 / p);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    // sup_λ λ |{|Ψ| > λ}| is approached as λ rises to one of the values
    let mut m1: f64 = 0.0;
    let mut acc = 0.0;
    let mut k = 0;
    while k < order.len() {
        let a = values[order[k]].abs();
        while k < order.len() && values[order[k]].abs() == a {
            acc += volumes[order[k]];
            k += 1;
        }
        m1 = m1.max(a * acc);
    }
    let ratio = l1 / (m1 * (1.0 + (volume.powf(1.0 - 1.0 / p) * lp / m1).ln()));
    Ok(InterpolationReport { l1, m1, lp, volume, ratio })
}
