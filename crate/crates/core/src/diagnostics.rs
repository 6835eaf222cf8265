//! Conserved quantities, energy moments, the virial integral, and grid norms
//! of the density and field, as time series along a flow.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{self, GridField, GridSpec, RadialPowerLaw};
use crate::charge::{energy_bounds, PointChargeState};
use crate::dynamics::FlowRecord;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::fields;
use crate::geom::{self, Vec3};
use crate::params::{ParamMap, ParamReader};
use crate::registry::Registry;

/// `Σ w_i` in index order.
pub fn total_mass(ens: &ParticleEnsemble) -> f64 {
    ens.total_weight()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyComponents {
    pub plasma_kinetic: f64,
    pub charge_kinetic: f64,
    pub plasma_potential: f64,
    pub charge_potential: f64,
}

impl EnergyComponents {
    pub fn total(&self) -> f64 {
        self.plasma_kinetic + self.charge_kinetic + self.plasma_potential + self.charge_potential
    }

    pub fn min_component(&self) -> f64 {
        self.plasma_kinetic
            .min(self.charge_kinetic)
            .min(self.plasma_potential)
            .min(self.charge_potential)
    }
}

/// `Σ w|v|²/2 + |η|²/2 + (1/2) Σ_{i≠j} w_i w_j / sqrt(r² + ε²) + Σ w_i/|x_i - ξ|`.
pub fn total_energy(ens: &ParticleEnsemble, charge: Option<&PointChargeState>, eps: f64) -> Result<EnergyComponents> {
    let plasma_kinetic = ens
        .velocities
        .iter()
        .zip(&ens.weights)
        .map(|(v, w)| 0.5 * w * geom::norm2(v))
        .sum();
    let plasma_potential = fields::plasma_potential_energy(ens, eps)?;
    let (charge_kinetic, charge_potential) = match charge {
        Some(c) => (c.kinetic_energy(), fields::charge_potential_energy(ens, &c.xi)?),
        None => (0.0, 0.0),
    };
    Ok(EnergyComponents { plasma_kinetic, charge_kinetic, plasma_potential, charge_potential })
}

/// `Σ w_i (|v_i|² + 1/|x_i - ξ|)^{m/2}`; without a charge the potential term is dropped.
pub fn energy_moment(ens: &ParticleEnsemble, xi: Option<&Vec3>, m: f64) -> Result<f64> {
    if !(m >= 0.0) {
        return Err(Error::InvalidArgument(format!("moment order {m} must be >= 0")));
    }
    let mut total = 0.0;
    for i in 0..ens.len() {
        let w = ens.weights[i];
        if w == 0.0 {
            continue;
        }
        let mut e = geom::norm2(&ens.velocities[i]);
        if let Some(xi) = xi {
            let r = geom::dist(&ens.positions[i], xi);
            if r == 0.0 {
                return Err(Error::NearSingularity { index: i, distance: 0.0 });
            }
            e += 1.0 / r;
        }
        total += w * if m == 0.0 { 1.0 } else { e.powf(0.5 * m) };
    }
    Ok(total)
}

/// `Σ w_i / |x_i - ξ|²`.
pub fn virial_rate(ens: &ParticleEnsemble, xi: &Vec3) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..ens.len() {
        let w = ens.weights[i];
        if w == 0.0 {
            continue;
        }
        let r2 = geom::norm2(&geom::sub(&ens.positions[i], xi));
        if r2 == 0.0 {
            return Err(Error::NearSingularity { index: i, distance: 0.0 });
        }
        total += w / r2;
    }
    Ok(total)
}

/// Running trapezoid integral of `rates` over `times`.
pub fn virial_accumulate(times: &[f64], rates: &[f64]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(times.len());
    let mut s = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            s += 0.5 * (rates[k] + rates[k - 1]) * (times[k] - times[k - 1]);
        }
        acc.push(s);
    }
    acc
}

// ---------------------------------------------------------------------------
// density estimation

/// Grid density `ρ` (charge per unit volume at each node's cell).
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub field: GridField,
    /// Weight of particles that fell outside the grid.
    pub outside: f64,
}

pub trait DensityEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn estimate(&self, ens: &ParticleEnsemble, grid: &GridSpec) -> Result<DensityGrid>;
}

#[derive(Debug, Clone)]
pub struct NearestGridPoint;

#[derive(Debug, Clone)]
pub struct CloudInCell;

/// Cloud-in-cell followed by a separable Gaussian of width `bandwidth` cells.
#[derive(Debug, Clone)]
pub struct CicKde {
    pub bandwidth: f64,
}

fn deposit(ens: &ParticleEnsemble, grid: &GridSpec, linear: bool) -> DensityGrid {
    let mut mass = vec![0.0; grid.len()];
    let mut outside = 0.0;
    let h = grid.spacing;
    for (x, &w) in ens.positions.iter().zip(&ens.weights) {
        if w == 0.0 {
            continue;
        }
        let u: Vec3 = std::array::from_fn(|a| (x[a] - grid.origin[a]) / h);
        if !linear {
            let c: Vec<isize> = u.iter().map(|v| v.round() as isize).collect();
            if (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < grid.dims[a]) {
                mass[grid.index([c[0] as usize, c[1] as usize, c[2] as usize])] += w;
            } else {
                outside += w;
            }
            continue;
        }
        let base: [isize; 3] = std::array::from_fn(|a| u[a].floor() as isize);
        let frac: Vec3 = std::array::from_fn(|a| u[a] - base[a] as f64);
        for corner in 0..8 {
            let mut share = w;
            let mut ijk = [0usize; 3];
            let mut inside = true;
            for a in 0..3 {
                let up = (corner >> a) & 1 == 1;
                share *= if up { frac[a] } else { 1.0 - frac[a] };
                let c = base[a] + isize::from(up);
                if c < 0 || c as usize >= grid.dims[a] {
                    inside = false;
                } else {
                    ijk[a] = c as usize;
                }
            }
            if inside {
                mass[grid.index(ijk)] += share;
            } else {
                outside += share;
            }
        }
    }
    let vol = grid.cell_volume();
    let values = mass.into_iter().map(|m| m / vol).collect();
    DensityGrid { field: GridField { spec: *grid, ncomp: 1, values }, outside }
}

fn smooth_axis(values: &mut [f64], grid: &GridSpec, axis: usize, taps: &[f64]) {
    let reach = (taps.len() / 2) as isize;
    let mut out = vec![0.0; values.len()];
    for idx in 0..grid.len() {
        let c = grid.coords(idx);
        let mut acc = 0.0;
        for (t, &k) in taps.iter().enumerate() {
            let p = c[axis] as isize + t as isize - reach;
            if p >= 0 && (p as usize) < grid.dims[axis] {
                let mut q = c;
                q[axis] = p as usize;
                acc += k * values[grid.index(q)];
            }
        }
        out[idx] = acc;
    }
    values.copy_from_slice(&out);
}

impl DensityEstimator for NearestGridPoint {
    fn name(&self) -> &'static str {
        "ngp"
    }
    fn estimate(&self, ens: &ParticleEnsemble, grid: &GridSpec) -> Result<DensityGrid> {
        Ok(deposit(ens, grid, false))
    }
}

impl DensityEstimator for CloudInCell {
    fn name(&self) -> &'static str {
        "cic"
    }
    fn estimate(&self, ens: &ParticleEnsemble, grid: &GridSpec) -> Result<DensityGrid> {
        Ok(deposit(ens, grid, true))
    }
}

impl DensityEstimator for CicKde {
    fn name(&self) -> &'static str {
        "cic-kde"
    }
    fn estimate(&self, ens: &ParticleEnsemble, grid: &GridSpec) -> Result<DensityGrid> {
        let mut d = deposit(ens, grid, true);
        let reach = (3.0 * self.bandwidth).ceil() as isize;
        let mut taps: Vec<f64> = (-reach..=reach)
            .map(|k| (-0.5 * (k as f64 / self.bandwidth).powi(2)).exp())
            .collect();
        let s: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= s);
        for axis in 0..3 {
            smooth_axis(&mut d.field.values, grid, axis, &taps);
        }
        Ok(d)
    }
}

pub const DEFAULT_ESTIMATOR: &str = "cic";

pub fn estimator_registry() -> Registry<dyn DensityEstimator> {
    let mut reg: Registry<dyn DensityEstimator> = Registry::new("density estimator");
    reg.register("ngp", |p: &ParamMap| {
        ParamReader::new("estimator", p).finish()?;
        Ok(Box::new(NearestGridPoint))
    });
    reg.register("cic", |p: &ParamMap| {
        ParamReader::new("estimator", p).finish()?;
        Ok(Box::new(CloudInCell))
    });
    reg.register("cic-kde", |p: &ParamMap| {
        let mut r = ParamReader::new("estimator", p);
        let bandwidth = r.number("bandwidth", 2.0)?;
        r.finish()?;
        if !(bandwidth > 0.0) {
            return Err(Error::validation("estimator.bandwidth", "must be positive"));
        }
        Ok(Box::new(CicKde { bandwidth }))
    });
    reg
}

pub fn build_estimator(name: &str) -> Result<Box<dyn DensityEstimator>> {
    estimator_registry().build(name, &ParamMap::new())
}

/// `L^p` norm of grid values; `p = ∞` gives the maximum.
pub fn grid_lp_norm(values: &[f64], cell_volume: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    } else {
        (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell_volume).powf(1.0 / p)
    }
}

/// `‖ρ‖_{L^p}` of the estimated density.
pub fn density_norm(ens: &ParticleEnsemble, p: f64, grid: &GridSpec, estimator: &dyn DensityEstimator) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must be >= 1")));
    }
    if grid.spacing <= 0.0 || grid.is_empty() {
        return Err(Error::DegenerateGrid("empty density grid".into()));
    }
    let d = estimator.estimate(ens, grid)?;
    Ok(grid_lp_norm(&d.field.values, grid.cell_volume(), p))
}

/// `‖g‖_{L^q}` of a grid field (node magnitudes).
pub fn field_norm(field: &GridField, q: f64) -> Result<f64> {
    if field.spec.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(grid_lp_norm(&field.magnitudes(), field.spec.cell_volume(), q))
}

/// `max |g(x) - g(y)| / |x - y|^α` over all node pairs of a sublattice of at
/// most about 1500 nodes.
pub fn holder_seminorm(field: &GridField, alpha: f64) -> Result<f64> {
    if field.spec.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("Hölder exponent {alpha} must lie in (0, 1]")));
    }
    let mut stride = 1;
    while field.spec.sublattice(stride).len() > 1500 {
        stride += 1;
    }
    let nodes = field.spec.sublattice(stride);
    let pts: Vec<Vec3> = nodes.iter().map(|&i| field.spec.node(i)).collect();
    let best = (0..nodes.len())
        .into_par_iter()
        .map(|a| {
            let mut best: f64 = 0.0;
            for b in a + 1..nodes.len() {
                let d = geom::dist(&pts[a], &pts[b]);
                let diff: f64 = field
                    .at(nodes[a])
                    .iter()
                    .zip(field.at(nodes[b]))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                best = best.max(diff / d.powf(alpha));
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Explicit constant of `‖ρ‖_{L^{(m+3)/3}} ≤ C(m) ‖f‖_∞^{m/(m+3)} (∬|v|^m f)^{3/(m+3)}`
/// from optimizing `ρ ≤ (4π/3) R³ ‖f‖_∞ + R^{-m} ∫|v|^m f dv` over `R`.
pub fn interpolation_constant(m: f64) -> f64 {
    let e = m / (m + 3.0);
    (m + 3.0) / m * (4.0 * PI / 3.0).powf(e) * (m / 3.0).powf(3.0 / (m + 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpolationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Ratio of both sides of the velocity-moment interpolation inequality, with
/// `f_sup = ‖f‖_∞` supplied by the caller (it is transported unchanged).
pub fn interpolation_check(
    ens: &ParticleEnsemble,
    m: f64,
    f_sup: f64,
    grid: &GridSpec,
    estimator: &dyn DensityEstimator,
) -> Result<InterpolationCheck> {
    if !(m > 0.0) {
        return Err(Error::InvalidArgument(format!("m = {m} must be positive")));
    }
    if ens.total_weight() == 0.0 {
        return Ok(InterpolationCheck { lhs: 0.0, rhs: 0.0, ratio: 0.0 });
    }
    let lhs = density_norm(ens, (m + 3.0) / 3.0, grid, estimator)?;
    let kinetic: f64 = ens.velocities.iter().zip(&ens.weights).map(|(v, w)| w * geom::norm(v).powf(m)).sum();
    let rhs = interpolation_constant(m) * f_sup.powf(m / (m + 3.0)) * kinetic.powf(3.0 / (m + 3.0));
    Ok(InterpolationCheck { lhs, rhs, ratio: if rhs > 0.0 { lhs / rhs } else { f64::INFINITY } })
}

// ---------------------------------------------------------------------------
// series

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticOptions {
    pub moments: Vec<f64>,
    pub density_p: Vec<f64>,
    pub density_grid: GridSpec,
    pub estimator: String,
    /// Field norms, Hölder seminorm and the weak norm of `E` are evaluated on
    /// this grid when present.
    pub field_grid: Option<GridSpec>,
    pub field_q: Vec<f64>,
    pub holder_alpha: f64,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        Self {
            moments: vec![2.0, 4.0, 6.0],
            density_p: vec![1.0, 5.0 / 3.0, f64::INFINITY],
            density_grid: GridSpec::cube([0.0; 3], 6.0, 49).expect("static grid"),
            estimator: DEFAULT_ESTIMATOR.into(),
            field_grid: Some(GridSpec::cube([0.0; 3], 3.0, 13).expect("static grid")),
            field_q: vec![15.0 / 4.0],
            holder_alpha: 0.25,
        }
    }
}

/// Functionals of a flow at each stored time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticSeries {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<EnergyComponents>,
    pub moment_orders: Vec<f64>,
    /// `moments[j][k]` is `H_{m_j}` at stored time `k`.
    pub moments: Vec<Vec<f64>>,
    pub virial_rate: Vec<f64>,
    pub virial: Vec<f64>,
    pub density_p: Vec<f64>,
    pub density_norms: Vec<Vec<f64>>,
    pub field_q: Vec<f64>,
    pub field_norms: Vec<Vec<f64>>,
    pub holder_alpha: f64,
    pub holder: Vec<f64>,
    /// `|||E|||_{M^{3/2}}` by cell counting on the field grid.
    pub weak_norm_e: Vec<f64>,
    /// `|||F|||_{M^{3/2}}` of the unit charge, evaluated analytically.
    pub weak_norm_f: Vec<f64>,
    pub charge: Option<Vec<PointChargeState>>,
}

impl DiagnosticSeries {
    pub fn from_flow(flow: &FlowRecord, opts: &DiagnosticOptions) -> Result<Self> {
        let estimator = build_estimator(&opts.estimator)?;
        let k_max = flow.stored();
        let mut s = Self {
            times: flow.times.clone(),
            mass: Vec::with_capacity(k_max),
            energy: Vec::with_capacity(k_max),
            moment_orders: opts.moments.clone(),
            moments: vec![Vec::with_capacity(k_max); opts.moments.len()],
            virial_rate: Vec::with_capacity(k_max),
            virial: Vec::new(),
            density_p: opts.density_p.clone(),
            density_norms: vec![Vec::with_capacity(k_max); opts.density_p.len()],
            field_q: opts.field_q.clone(),
            field_norms: vec![Vec::new(); opts.field_q.len()],
            holder_alpha: opts.holder_alpha,
            holder: Vec::new(),
            weak_norm_e: Vec::new(),
            weak_norm_f: Vec::new(),
            charge: flow.charge.clone(),
        };
        let lambdas = analysis::log_lambdas(1e-3, 1e3, 61);
        for k in 0..k_max {
            let ens = flow.ensemble_at(k);
            let charge = flow.charge_at(k);
            let xi = charge.as_ref().map(|c| c.xi);
            s.mass.push(total_mass(&ens));
            s.energy.push(total_energy(&ens, charge.as_ref(), flow.softening)?);
            for (j, &m) in opts.moments.iter().enumerate() {
                s.moments[j].push(energy_moment(&ens, xi.as_ref(), m)?);
            }
            s.virial_rate.push(match &xi {
                Some(xi) => virial_rate(&ens, xi)?,
                None => 0.0,
            });
            if !opts.density_p.is_empty() {
                let d = estimator.estimate(&ens, &opts.density_grid)?;
                for (j, &p) in opts.density_p.iter().enumerate() {
                    s.density_norms[j].push(grid_lp_norm(&d.field.values, opts.density_grid.cell_volume(), p));
                }
            }
            if let Some(grid) = &opts.field_grid {
                let e = fields::plasma_field(&ens, &grid.nodes(), flow.softening)?;
                let field = GridField::from_vectors(*grid, &e)?;
                for (j, &q) in opts.field_q.iter().enumerate() {
                    s.field_norms[j].push(field_norm(&field, q)?);
                }
                s.holder.push(holder_seminorm(&field, opts.holder_alpha)?);
                s.weak_norm_e.push(analysis::weak_pseudo_norm_of_samples(
                    &field.magnitudes(),
                    grid.cell_volume(),
                    1.5,
                )?);
            }
            if charge.is_some() {
                s.weak_norm_f.push(analysis::weak_pseudo_norm(&RadialPowerLaw::point_charge(1.0), 1.5, &lambdas)?);
            }
        }
        s.virial = virial_accumulate(&s.times, &s.virial_rate);
        Ok(s)
    }

    pub fn max_relative_energy_drift(&self) -> f64 {
        let h0 = self.energy.first().map(|e| e.total()).unwrap_or(0.0);
        self.energy
            .iter()
            .map(|e| ((e.total() - h0) / h0).abs())
            .fold(0.0, f64::max)
    }

    /// Whether every stored mass equals the first one bit for bit.
    pub fn mass_bitwise_constant(&self) -> bool {
        self.mass.iter().all(|m| m.to_bits() == self.mass[0].to_bits())
    }

    /// `max_k ∫_0^{t_k} rate / (1 + t_k)`.
    pub fn virial_bound(&self) -> f64 {
        self.virial
            .iter()
            .zip(&self.times)
            .map(|(a, t)| a / (1.0 + t))
            .fold(0.0, f64::max)
    }

    pub fn moment_fits(&self) -> Vec<MomentFit> {
        self.moment_orders
            .iter()
            .zip(&self.moments)
            .map(|(&order, values)| {
                let (constant, exponent) = fit_growth(&self.times, values);
                MomentFit { order, constant, exponent }
            })
            .collect()
    }

    pub fn charge_bounds(&self, slack: f64) -> Option<ChargeBounds> {
        let track = self.charge.as_ref()?;
        let h0 = self.energy[0].total();
        let xi0 = track[0].xi;
        let horizon = *self.times.last().unwrap();
        let (eta_bound, xi_bound) = energy_bounds(&xi0, h0, horizon);
        let eta_max = track.iter().map(|c| geom::norm(&c.eta)).fold(0.0, f64::max);
        let xi_max = track.iter().map(|c| geom::norm(&c.xi)).fold(0.0, f64::max);
        let pointwise = track
            .iter()
            .zip(&self.times)
            .all(|(c, &t)| c.within_energy_bounds(&xi0, h0, t, slack));
        Some(ChargeBounds {
            eta_max,
            eta_bound,
            xi_max,
            xi_bound,
            holds: pointwise && eta_max <= eta_bound * (1.0 + slack) && xi_max <= xi_bound * (1.0 + slack),
        })
    }

    pub fn summary(&self) -> DiagnosticSummary {
        let mut verdicts = BTreeMap::new();
        let drift = self.max_relative_energy_drift();
        let min_component = self.energy.iter().map(|e| e.min_component()).fold(f64::INFINITY, f64::min);
        verdicts.insert("mass_bitwise_constant".to_string(), self.mass_bitwise_constant());
        verdicts.insert("energy_drift_le_1e-3".to_string(), drift <= 1e-3);
        verdicts.insert("energy_components_nonnegative".to_string(), min_component >= 0.0);
        let charge_bounds = self.charge_bounds(1e-6);
        if let Some(cb) = &charge_bounds {
            verdicts.insert("charge_bounds".to_string(), cb.holds);
        }
        DiagnosticSummary {
            initial_energy: self.energy.first().map(|e| e.total()).unwrap_or(0.0),
            max_relative_energy_drift: drift,
            min_energy_component: min_component,
            moment_fits: self.moment_fits(),
            virial_bound: self.virial_bound(),
            charge_bounds,
            verdicts,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec![
            "t".to_string(),
            "mass".into(),
            "energy".into(),
            "plasma_kinetic".into(),
            "charge_kinetic".into(),
            "plasma_potential".into(),
            "charge_potential".into(),
        ];
        header.extend(self.moment_orders.iter().map(|m| format!("moment_{m}")));
        header.push("virial_rate".into());
        header.push("virial".into());
        header.extend(self.density_p.iter().map(|p| format!("rho_L{p}")));
        if !self.holder.is_empty() {
            header.extend(self.field_q.iter().map(|q| format!("E_L{q}")));
            header.push(format!("E_holder_{}", self.holder_alpha));
            header.push("E_weak_3/2".into());
        }
        if !self.weak_norm_f.is_empty() {
            header.push("F_weak_3/2".into());
        }
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let e = &self.energy[k];
            let mut row = vec![
                self.times[k],
                self.mass[k],
                e.total(),
                e.plasma_kinetic,
                e.charge_kinetic,
                e.plasma_potential,
                e.charge_potential,
            ];
            row.extend(self.moments.iter().map(|m| m[k]));
            row.push(self.virial_rate[k]);
            row.push(self.virial[k]);
            row.extend(self.density_norms.iter().map(|d| d[k]));
            if !self.holder.is_empty() {
                row.extend(self.field_norms.iter().map(|f| f[k]));
                row.push(self.holder[k]);
                row.push(self.weak_norm_e[k]);
            }
            if !self.weak_norm_f.is_empty() {
                row.push(self.weak_norm_f[k]);
            }
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentFit {
    pub order: f64,
    pub constant: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChargeBounds {
    pub eta_max: f64,
    pub eta_bound: f64,
    pub xi_max: f64,
    pub xi_bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticSummary {
    pub initial_energy: f64,
    pub max_relative_energy_drift: f64,
    pub min_energy_component: f64,
    pub moment_fits: Vec<MomentFit>,
    pub virial_bound: f64,
    pub charge_bounds: Option<ChargeBounds>,
    pub verdicts: BTreeMap<String, bool>,
}

/// Fit `y(t) ≤ C (1 + t)^c`: `c` is the least-squares slope of `log y` against
/// `log(1 + t)` clipped at 0, and `C = max_k y_k / (1 + t_k)^c`.
pub fn fit_growth(times: &[f64], values: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| ((1.0 + t).ln(), v.ln()))
        .collect();
    let c = if pts.len() < 2 {
        0.0
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            (sxy / sxx).max(0.0)
        } else {
            0.0
        }
    };
    let constant = times
        .iter()
        .zip(values)
        .map(|(t, v)| v / (1.0 + t).powf(c))
        .fold(0.0, f64::max);
    (constant, c)
}
