//! Characteristics of the regularized problem: particles move under
//! `Ẋ = V, V̇ = E + F`, the charge under `ξ̇ = η, η̇ = E(ξ)`.
//!
//! Plasma-plasma forces use the softened kernel; both directions of the
//! plasma-charge coupling use the exact Coulomb kernel. The whole state is
//! advanced by one adaptive embedded Runge-Kutta pair with a per-step error
//! test on all components and an extra step cap `dt ≤ κ d^{3/2}`, where `d`
//! is the closest particle-charge distance.
//!
//! Particles that enter the closest-approach floor are handled as follows: a
//! particle carrying charge makes trial steps fail until the step size drops
//! below `min_dt`, at which point the run aborts with a state snapshot; a
//! zero-weight tracer is frozen in place and flagged.

pub mod flow;
pub mod integrator;

use std::sync::Arc;

use crate::charge::PointChargeState;
use crate::config::{ErrorNorm, SimulationConfig};
use crate::density::InitialDensity;
use crate::diagnostics::{DiagnosticOptions, DiagnosticSeries};
use crate::ensemble::{sample_initial_ensemble_with, ParticleEnsemble};
use crate::error::{Error, Result, StateSnapshot};
use crate::fields::{self, SourceSet};
use crate::geom::{self, Vec3};
use crate::pointset;

pub use flow::{FlowRecord, IntegratorStats};
pub use integrator::{Integrator, Rhs, Tableau};

use integrator::Workspace;

/// Right-hand side of the coupled particle/charge system on the flat state
/// `[X1.., X2.., X3.., V1.., V2.., V3.., ξ, η]`.
struct CoupledSystem {
    n: usize,
    weights: Vec<f64>,
    eps: f64,
    with_charge: bool,
    floor: f64,
    frozen: Vec<bool>,
    /// Closest non-frozen particle to the charge at the last evaluation.
    last_closest: (f64, usize),
    evals: u64,
}

impl CoupledSystem {
    fn positions(&self, y: &[f64]) -> Vec<Vec3> {
        let n = self.n;
        (0..n).map(|i| [y[i], y[n + i], y[2 * n + i]]).collect()
    }

    fn velocities(&self, y: &[f64]) -> Vec<Vec3> {
        let n = self.n;
        (0..n).map(|i| [y[3 * n + i], y[4 * n + i], y[5 * n + i]]).collect()
    }

    fn charge(&self, y: &[f64]) -> Option<PointChargeState> {
        let b = 6 * self.n;
        self.with_charge.then(|| PointChargeState {
            xi: [y[b], y[b + 1], y[b + 2]],
            eta: [y[b + 3], y[b + 4], y[b + 5]],
        })
    }

    fn dim(&self) -> usize {
        6 * self.n + if self.with_charge { 6 } else { 0 }
    }
}

impl Rhs for CoupledSystem {
    fn eval(&mut self, y: &[f64], dy: &mut [f64]) -> std::result::Result<(), String> {
        self.evals += 1;
        let n = self.n;
        let targets = self.positions(y);
        let src = SourceSet::new(targets.iter().copied().zip(self.weights.iter().copied()));
        let weights = &self.weights;
        let e = fields::field_at(&src, &targets, self.eps, Some(&|i| weights[i] > 0.0))
            .map_err(|err| err.to_string())?;
        let (head, tail) = dy.split_at_mut(3 * n);
        head.copy_from_slice(&y[3 * n..6 * n]);
        let charge = self.charge(y);
        let mut closest = (f64::INFINITY, usize::MAX);
        let mut pull = [0.0; 3];
        for i in 0..n {
            if self.frozen[i] {
                for c in 0..3 {
                    head[c * n + i] = 0.0;
                    tail[c * n + i] = 0.0;
                }
                continue;
            }
            let mut a = e[i];
            if let Some(ch) = &charge {
                let d = geom::sub(&targets[i], &ch.xi);
                let r2 = geom::norm2(&d);
                let r = r2.sqrt();
                if r < closest.0 {
                    closest = (r, i);
                }
                if self.weights[i] > 0.0 && r < self.floor {
                    return Err(format!("particle {i} within {r:e} of the charge"));
                }
                if r == 0.0 {
                    return Err(format!("particle {i} sits on the charge"));
                }
                let inv3 = 1.0 / (r2 * r);
                for c in 0..3 {
                    a[c] += d[c] * inv3;
                    pull[c] -= self.weights[i] * d[c] * inv3;
                }
            }
            for c in 0..3 {
                tail[c * n + i] = a[c];
            }
        }
        if let Some(ch) = &charge {
            let b = 3 * n;
            tail[b..b + 3].copy_from_slice(&ch.eta);
            tail[b + 3..b + 6].copy_from_slice(&pull);
        }
        self.last_closest = closest;
        Ok(())
    }
}

/// Adaptive integration of one ensemble (and optionally the charge).
pub struct Simulation {
    integrator: Box<dyn Integrator>,
    system: CoupledSystem,
    seed_ids: Vec<u64>,
    reference_weights: Vec<f64>,
    y: Vec<f64>,
    k1: Vec<f64>,
    t: f64,
    dt: f64,
    atol: f64,
    rtol: f64,
    norm: ErrorNorm,
    cap: f64,
    min_dt: f64,
    max_steps: u64,
    ws: Workspace,
    stats: IntegratorStats,
    /// Closest particle-charge distance at the current accepted state.
    closest_now: f64,
}

impl Simulation {
    pub fn new(cfg: &SimulationConfig, ens: &ParticleEnsemble, charge: Option<PointChargeState>) -> Result<Self> {
        cfg.validate()?;
        ens.validate()?;
        if let Some(c) = &charge {
            c.validate()?;
        }
        let integrator = integrator::build(&cfg.integrator)?;
        let n = ens.len();
        let mut y = Vec::with_capacity(6 * n + 6);
        for c in 0..3 {
            y.extend(ens.positions.iter().map(|p| p[c]));
        }
        for c in 0..3 {
            y.extend(ens.velocities.iter().map(|v| v[c]));
        }
        if let Some(c) = &charge {
            y.extend_from_slice(&c.xi);
            y.extend_from_slice(&c.eta);
        }
        let system = CoupledSystem {
            n,
            weights: ens.weights.clone(),
            eps: cfg.softening(),
            with_charge: charge.is_some(),
            floor: cfg.floor_radius(),
            frozen: vec![false; n],
            last_closest: (f64::INFINITY, usize::MAX),
            evals: 0,
        };
        let dim = system.dim();
        let mut sim = Self {
            integrator,
            system,
            seed_ids: ens.seed_ids.clone(),
            reference_weights: ens.reference_weights.clone(),
            y,
            k1: vec![0.0; dim],
            t: 0.0,
            dt: 0.0,
            atol: cfg.atol,
            rtol: cfg.rtol,
            norm: cfg.error_norm,
            cap: cfg.distance_cap,
            min_dt: cfg.min_dt,
            max_steps: cfg.max_steps,
            ws: Workspace::default(),
            stats: IntegratorStats::default(),
            closest_now: f64::INFINITY,
        };
        sim.freeze_tracers();
        sim.refresh_derivative()?;
        sim.note_closest();
        sim.dt = sim.initial_step();
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn stats(&self) -> &IntegratorStats {
        &self.stats
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.system.positions(&self.y)
    }

    pub fn velocities(&self) -> Vec<Vec3> {
        self.system.velocities(&self.y)
    }

    pub fn charge(&self) -> Option<PointChargeState> {
        self.system.charge(&self.y)
    }

    pub fn flagged(&self) -> &[bool] {
        &self.system.frozen
    }

    pub fn ensemble(&self) -> ParticleEnsemble {
        ParticleEnsemble {
            positions: self.positions(),
            velocities: self.velocities(),
            weights: self.system.weights.clone(),
            reference_weights: self.reference_weights.clone(),
            seed_ids: self.seed_ids.clone(),
            f0_ref: None,
        }
    }

    /// Negates all particle velocities and the charge velocity.
    pub fn reverse_velocities(&mut self) -> Result<()> {
        let n = self.system.n;
        for v in &mut self.y[3 * n..6 * n] {
            *v = -*v;
        }
        if self.system.with_charge {
            for v in &mut self.y[6 * n + 3..6 * n + 6] {
                *v = -*v;
            }
        }
        self.refresh_derivative()
    }

    fn refresh_derivative(&mut self) -> Result<()> {
        let mut k = std::mem::take(&mut self.k1);
        let res = self.system.eval(&self.y, &mut k);
        self.k1 = k;
        res.map_err(|reason| self.abort(reason))
    }

    /// Freezes zero-weight particles inside the floor; returns whether any
    /// particle was newly frozen.
    fn freeze_tracers(&mut self) -> bool {
        let Some(ch) = self.charge() else { return false };
        let n = self.system.n;
        let mut changed = false;
        for i in 0..n {
            if self.system.frozen[i] || self.system.weights[i] > 0.0 {
                continue;
            }
            let x = [self.y[i], self.y[n + i], self.y[2 * n + i]];
            if geom::dist(&x, &ch.xi) < self.system.floor {
                self.system.frozen[i] = true;
                changed = true;
            }
        }
        changed
    }

    fn note_closest(&mut self) {
        let (d, i) = self.system.last_closest;
        self.closest_now = d;
        if d < self.stats.min_distance {
            self.stats.min_distance = d;
            self.stats.min_distance_seed = Some(self.seed_ids[i]);
        }
    }

    fn step_cap(&self) -> f64 {
        let d = self.closest_now;
        if d.is_finite() {
            self.cap * d.powf(1.5)
        } else {
            f64::INFINITY
        }
    }

    fn initial_step(&self) -> f64 {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for (y, f) in self.y.iter().zip(&self.k1) {
            let sc = self.atol + self.rtol * y.abs();
            s0 += (y / sc).powi(2);
            s1 += (f / sc).powi(2);
        }
        let h = if s0 < 1e-10 || s1 < 1e-10 { 1e-6 } else { 0.01 * (s0 / s1).sqrt() };
        h.min(self.step_cap()).min(0.1)
    }

    fn abort(&self, reason: String) -> Error {
        let closest = {
            let (d, i) = self.system.last_closest;
            (i != usize::MAX).then(|| (self.seed_ids[i], d))
        };
        Error::Aborted {
            reason,
            snapshot: Box::new(StateSnapshot {
                time: self.t,
                dt: self.dt,
                positions: self.positions(),
                velocities: self.velocities(),
                charge: self.charge().map(|c| (c.xi, c.eta)),
                closest,
            }),
        }
    }

    /// Integrates until `t_end`, landing on it exactly.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        const SAFETY: f64 = 0.9;
        const MIN_FACTOR: f64 = 0.2;
        const MAX_FACTOR: f64 = 5.0;
        let expo = self.integrator.controller_exponent();
        while self.t < t_end {
            if self.stats.steps >= self.max_steps {
                return Err(self.abort(format!("step budget of {} exhausted", self.max_steps)));
            }
            let remaining = t_end - self.t;
            let proposal = self.dt.min(self.step_cap());
            let last = proposal >= remaining;
            let h = if last { remaining } else { proposal };
            let trial = self.integrator.attempt(
                &mut self.system,
                &self.y,
                &self.k1,
                h,
                self.atol,
                self.rtol,
                self.norm,
                &mut self.ws,
            );
            if trial.error <= 1.0 {
                std::mem::swap(&mut self.y, &mut self.ws.y_new);
                self.t = if last { t_end } else { self.t + h };
                self.stats.steps += 1;
                self.stats.min_dt = self.stats.min_dt.min(h);
                self.stats.max_dt = self.stats.max_dt.max(h);
                if self.freeze_tracers() || !self.integrator.tableau().fsal {
                    self.refresh_derivative()?;
                } else {
                    std::mem::swap(&mut self.k1, &mut self.ws.k_new);
                }
                self.note_closest();
                let factor = if trial.error == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * trial.error.powf(-expo)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // a step shortened to hit t_end says nothing about the next size
                if !last || h >= self.dt {
                    self.dt = h * factor;
                }
            } else {
                self.stats.rejected += 1;
                let factor = if trial.error.is_finite() {
                    (SAFETY * trial.error.powf(-expo)).clamp(MIN_FACTOR, 1.0)
                } else {
                    MIN_FACTOR
                };
                self.dt = h * factor;
                if self.dt < self.min_dt {
                    let why = trial.stage_failure.unwrap_or_else(|| format!("error norm {:e}", trial.error));
                    return Err(self.abort(format!("step size {:e} below floor ({why})", self.dt)));
                }
            }
        }
        self.stats.rhs_evals = self.system.evals;
        Ok(())
    }
}

/// Integrates `ens` (and the charge, if any) and stores the state at the
/// configured output times.
pub fn run_flow(cfg: &SimulationConfig, ens: &ParticleEnsemble, charge: Option<PointChargeState>) -> Result<FlowRecord> {
    let mut sim = Simulation::new(cfg, ens, charge)?;
    let times = cfg.output_times();
    let mut positions = Vec::with_capacity(times.len());
    let mut velocities = Vec::with_capacity(times.len());
    let mut track = Vec::with_capacity(times.len());
    for &t in &times {
        sim.advance_to(t)?;
        positions.push(sim.positions());
        velocities.push(sim.velocities());
        if let Some(c) = sim.charge() {
            track.push(c);
        }
    }
    let flow = FlowRecord {
        n: cfg.n,
        softening: cfg.softening(),
        seed_ids: ens.seed_ids.clone(),
        weights: ens.weights.clone(),
        reference_weights: ens.reference_weights.clone(),
        times,
        positions,
        velocities,
        charge: charge.map(|_| track),
        flagged: sim.flagged().to_vec(),
        stats: sim.stats().clone(),
    };
    flow.validate()?;
    Ok(flow)
}

/// Uncut particle sample of `density` as configured by `cfg`.
pub fn sample(cfg: &SimulationConfig, density: &Arc<InitialDensity>) -> Result<ParticleEnsemble> {
    let points = pointset::build(&cfg.point_set)?;
    sample_initial_ensemble_with(density, cfg.particles, cfg.seed, points.as_ref())
}

fn initial_charge(cfg: &SimulationConfig, density: &InitialDensity) -> Option<PointChargeState> {
    cfg.with_charge.then(|| PointChargeState { xi: density.charge_center, eta: density.charge_velocity })
}

/// Solves the problem regularized at level `cfg.n` and evaluates the default
/// diagnostics along it.
pub fn run(cfg: &SimulationConfig, density: &Arc<InitialDensity>) -> Result<(FlowRecord, DiagnosticSeries)> {
    cfg.validate()?;
    let ens = sample(cfg, density)?.apply_cutoff(cfg.n)?;
    let flow = run_flow(cfg, &ens, initial_charge(cfg, density))?;
    let series = DiagnosticSeries::from_flow(&flow, &DiagnosticOptions::default())?;
    Ok((flow, series))
}

/// Two flows of the same seed set, regularized at levels `n_a` and `n_b`.
pub fn run_pair(
    cfg: &SimulationConfig,
    density: &Arc<InitialDensity>,
    n_a: u32,
    n_b: u32,
) -> Result<(FlowRecord, FlowRecord)> {
    if n_a == n_b {
        return Err(Error::InvalidArgument(format!("run_pair needs distinct levels, got {n_a} twice")));
    }
    cfg.validate()?;
    let ens = sample(cfg, density)?;
    let charge = initial_charge(cfg, density);
    let mut flows = Vec::with_capacity(2);
    for n in [n_a, n_b] {
        let c = SimulationConfig { n, ..cfg.clone() };
        flows.push(run_flow(&c, &ens.apply_cutoff(n)?, charge)?);
    }
    let b = flows.pop().unwrap();
    let a = flows.pop().unwrap();
    Ok((a, b))
}

/// One unadapted step of `integrator` of size `dt`.
pub fn step(
    ens: &ParticleEnsemble,
    charge: Option<&PointChargeState>,
    dt: f64,
    eps: f64,
    integrator: &dyn Integrator,
) -> Result<(ParticleEnsemble, Option<PointChargeState>)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    let cfg = SimulationConfig {
        softening: Some(eps),
        closest_approach_floor: 0.0,
        ..Default::default()
    };
    let mut sim = Simulation::new(&cfg, ens, charge.copied())?;
    let trial = integrator.attempt(&mut sim.system, &sim.y, &sim.k1, dt, 1.0, 0.0, ErrorNorm::Max, &mut sim.ws);
    if let Some(reason) = trial.stage_failure {
        return Err(sim.abort(reason));
    }
    std::mem::swap(&mut sim.y, &mut sim.ws.y_new);
    let mut out = ens.clone();
    out.positions = sim.positions();
    out.velocities = sim.velocities();
    Ok((out, sim.charge()))
}
