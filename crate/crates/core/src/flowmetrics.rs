//! Comparison of computed flows seed by seed: sublevels, superlevel measures,
//! the log-log velocity moment, the anisotropic log-distance functional and
//! convergence in measure between regularization levels.
//!
//! Every measure uses the uncut seed weights (`reference_weights`). The ball
//! `B_r` lives in phase space and is centered at the charge's initial state
//! (the origin when the flow has no charge). "For almost all s" is read as
//! "at every stored time".

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::FlowRecord;
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricParams {
    pub r: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Start time of the comparison; flows are compared from the stored time
    /// nearest to it.
    pub t: f64,
    /// Sublevels are taken over stored times in `[t, tau]`.
    pub tau: f64,
}

impl MetricParams {
    pub fn new(r: f64, lambda: f64, gamma: f64, delta1: f64, delta2: f64, t: f64, tau: f64) -> Result<Self> {
        let p = Self { r, lambda, gamma, delta1, delta2, t, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("r", self.r),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
        ] {
            if !(x > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")));
            }
        }
        if self.delta1 > self.delta2 {
            return Err(Error::InvalidArgument(format!(
                "delta1 = {} must not exceed delta2 = {}",
                self.delta1, self.delta2
            )));
        }
        if !(self.t >= 0.0 && self.t <= self.tau) {
            return Err(Error::InvalidArgument(format!("need 0 <= t <= tau, got t = {}, tau = {}", self.t, self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublevelReport {
    pub flags: Vec<bool>,
    /// `μ(B_r ∖ G_λ)`, floor-frozen seeds included.
    pub superlevel: f64,
    /// `μ(B_r ∩ G_λ)`.
    pub retained: f64,
    /// Weight of the seeds in `B_r` that were frozen at the closest-approach floor.
    pub frozen: f64,
}

fn phase_dist(a: (Vec3, Vec3), b: (Vec3, Vec3)) -> f64 {
    geom::phase_dist(&a.0, &a.1, &b.0, &b.1)
}

/// `(ξ₀, η₀)` of the flow, or the origin without a charge.
pub fn ball_center(flow: &FlowRecord) -> (Vec3, Vec3) {
    match &flow.charge {
        Some(track) if !track.is_empty() => (track[0].xi, track[0].eta),
        _ => ([0.0; 3], [0.0; 3]),
    }
}

/// Whether seed `i` starts in `B_r`.
pub fn in_ball(flow: &FlowRecord, i: usize, r: f64) -> bool {
    let c = ball_center(flow);
    phase_dist(flow.z(0, i), c) < r
}

fn stored_range(flow: &FlowRecord, t: f64, tau: f64) -> std::ops::RangeInclusive<usize> {
    let lo = flow.times.iter().position(|&s| s >= t - 1e-12).unwrap_or(flow.stored());
    let hi = flow.times.iter().rposition(|&s| s <= tau + 1e-12).unwrap_or(0);
    lo..=hi
}

fn flags_over(flow: &FlowRecord, lambda: f64, range: std::ops::RangeInclusive<usize>) -> Vec<bool> {
    (0..flow.len())
        .into_par_iter()
        .map(|i| {
            !flow.flagged[i]
                && range.clone().all(|k| {
                    let (x, v) = flow.z(k, i);
                    geom::phase_norm(&x, &v) <= lambda
                })
        })
        .collect()
}

/// `true` for seeds with `|Z(s)| ≤ λ` at every stored time; frozen seeds are
/// never in the sublevel.
pub fn sublevel_flags(flow: &FlowRecord, lambda: f64) -> Vec<bool> {
    flags_over(flow, lambda, 0..=flow.stored().saturating_sub(1))
}

pub fn sublevel_report(flow: &FlowRecord, r: f64, lambda: f64) -> SublevelReport {
    let flags = sublevel_flags(flow, lambda);
    let (mut superlevel, mut retained, mut frozen) = (0.0, 0.0, 0.0);
    for i in 0..flow.len() {
        if !in_ball(flow, i, r) {
            continue;
        }
        let w = flow.reference_weights[i];
        if flags[i] {
            retained += w;
        } else {
            superlevel += w;
        }
        if flow.flagged[i] {
            frozen += w;
        }
    }
    SublevelReport { flags, superlevel, retained, frozen }
}

/// `μ(B_r ∖ G_λ)`.
pub fn superlevel_measure(flow: &FlowRecord, r: f64, lambda: f64) -> f64 {
    sublevel_report(flow, r, lambda).superlevel
}

/// `β(z) = log(1 + log(1 + |z|²/2))`.
pub fn beta(z: &[f64]) -> f64 {
    let q: f64 = z.iter().map(|c| c * c).sum();
    (0.5 * q).ln_1p().ln_1p()
}

/// `∇β(z) = z / ((1 + log(1 + |z|²/2)) (1 + |z|²/2))`.
pub fn beta_prime(z: &[f64]) -> Vec<f64> {
    let q: f64 = z.iter().map(|c| c * c).sum();
    let s = 1.0 / ((1.0 + (0.5 * q).ln_1p()) * (1.0 + 0.5 * q));
    z.iter().map(|c| c * s).collect()
}

/// `Σ_{i ∈ B_r} μ_i max_k β(V_i(s_k))`.
pub fn loglog_moment(flow: &FlowRecord, r: f64) -> f64 {
    (0..flow.len())
        .filter(|&i| in_ball(flow, i, r))
        .map(|i| {
            let worst = (0..flow.stored()).map(|k| beta(&flow.velocities[k][i])).fold(0.0, f64::max);
            flow.reference_weights[i] * worst
        })
        .fold(0.0, |a, b| a + b)
}

fn check_pair(a: &FlowRecord, b: &FlowRecord) -> Result<()> {
    a.check_same_seeds(b)?;
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::InvalidArgument("flows are stored at different times".into()));
    }
    Ok(())
}

fn anisotropic_log(a: (Vec3, Vec3), b: (Vec3, Vec3), d1: f64, d2: f64) -> f64 {
    let dx = geom::norm2(&geom::sub(&a.0, &b.0)) / (d1 * d1);
    let dv = geom::norm2(&geom::sub(&a.1, &b.1)) / (d2 * d2);
    (dx + dv).sqrt().ln_1p()
}

/// `Φ(s) = Σ μ_i log(1 + |A⁻¹(Z - Z̄)|)` over seeds of `B_r` in both sublevels,
/// with `A = diag(δ₁, δ₂)`.
pub fn phi_functional(a: &FlowRecord, b: &FlowRecord, p: &MetricParams, s: f64) -> Result<f64> {
    Ok(chebyshev_parts(a, b, p, s)?.phi)
}

/// `μ(B_r ∩ {|Z(s) - Z̄(s)| > γ})`.
pub fn convergence_in_measure(a: &FlowRecord, b: &FlowRecord, gamma: f64, r: f64, s: f64) -> Result<f64> {
    check_pair(a, b)?;
    let k = a.index_near(s);
    Ok((0..a.len())
        .filter(|&i| in_ball(a, i, r) && phase_dist(a.z(k, i), b.z(k, i)) > gamma)
        .map(|i| a.reference_weights[i])
        .fold(0.0, |a, b| a + b))
}

/// Largest `convergence_in_measure` over the stored times.
pub fn convergence_in_measure_sup(a: &FlowRecord, b: &FlowRecord, gamma: f64, r: f64) -> Result<f64> {
    let mut best: f64 = 0.0;
    for &s in &a.times {
        best = best.max(convergence_in_measure(a, b, gamma, r, s)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChebyshevParts {
    pub lhs: f64,
    pub phi: f64,
    pub superlevel_a: f64,
    pub superlevel_b: f64,
    pub rhs: f64,
}

pub fn chebyshev_parts(a: &FlowRecord, b: &FlowRecord, p: &MetricParams, s: f64) -> Result<ChebyshevParts> {
    p.validate()?;
    check_pair(a, b)?;
    let range = stored_range(a, p.t, p.tau);
    let ga = flags_over(a, p.lambda, range.clone());
    let gb = flags_over(b, p.lambda, range);
    let k = a.index_near(s);
    let (mut lhs, mut phi, mut sa, mut sb) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        if !in_ball(a, i, p.r) {
            continue;
        }
        let w = a.reference_weights[i];
        let (za, zb) = (a.z(k, i), b.z(k, i));
        if phase_dist(za, zb) > p.gamma {
            lhs += w;
        }
        if ga[i] && gb[i] {
            phi += w * anisotropic_log(za, zb, p.delta1, p.delta2);
        }
        if !ga[i] {
            sa += w;
        }
        if !gb[i] {
            sb += w;
        }
    }
    let rhs = phi / (p.gamma / p.delta2).ln_1p() + sa + sb;
    Ok(ChebyshevParts { lhs, phi, superlevel_a: sa, superlevel_b: sb, rhs })
}

/// Both sides of `μ(B_r ∩ {|Z - Z̄| > γ}) ≤ Φ / log(1 + γ/δ₂) + μ(B_r ∖ G_λ) + μ(B_r ∖ Ḡ_λ)`.
pub fn chebyshev_consistency(a: &FlowRecord, b: &FlowRecord, p: &MetricParams, s: f64) -> Result<(f64, f64)> {
    let parts = chebyshev_parts(a, b, p, s)?;
    Ok((parts.lhs, parts.rhs))
}

/// Axis-aligned box in phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseBox {
    pub lo: [f64; 6],
    pub hi: [f64; 6],
}

impl PhaseBox {
    pub fn contains(&self, x: &Vec3, v: &Vec3) -> bool {
        (0..3).all(|a| x[a] >= self.lo[a] && x[a] < self.hi[a] && v[a] >= self.lo[a + 3] && v[a] < self.hi[a + 3])
    }

    /// The cube of half-width `half` about `center` and its twelve halves
    /// split along each coordinate.
    pub fn family(center: [f64; 6], half: f64) -> Vec<PhaseBox> {
        let cube = PhaseBox {
            lo: std::array::from_fn(|a| center[a] - half),
            hi: std::array::from_fn(|a| center[a] + half),
        };
        let mut out = vec![cube];
        for a in 0..6 {
            let mut lower = cube;
            lower.hi[a] = center[a];
            let mut upper = cube;
            upper.lo[a] = center[a];
            out.push(lower);
            out.push(upper);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompressibilityReport {
    pub max_ratio: f64,
    pub min_ratio: f64,
}

/// Ratios `ν(Z(s)⁻¹ B) / ν(B)` over `boxes` and all stored times, where the
/// reference measure `ν` gives seed `i` the mass `seed_measure[i]`. Boxes
/// with no initial mass are skipped.
pub fn compressibility(flow: &FlowRecord, seed_measure: &[f64], boxes: &[PhaseBox]) -> Result<CompressibilityReport> {
    if seed_measure.len() != flow.len() {
        return Err(Error::InvalidArgument(format!(
            "{} seed masses for {} seeds",
            seed_measure.len(),
            flow.len()
        )));
    }
    let mass_in = |k: usize, b: &PhaseBox| -> f64 {
        (0..flow.len())
            .filter(|&i| {
                let (x, v) = flow.z(k, i);
                b.contains(&x, &v)
            })
            .map(|i| seed_measure[i])
            .sum()
    };
    let mut max_ratio: f64 = 0.0;
    let mut min_ratio = f64::INFINITY;
    for b in boxes {
        let base = mass_in(0, b);
        if base <= 0.0 {
            continue;
        }
        for k in 0..flow.stored() {
            let ratio = mass_in(k, b) / base;
            max_ratio = max_ratio.max(ratio);
            min_ratio = min_ratio.min(ratio);
        }
    }
    if !min_ratio.is_finite() {
        return Err(Error::InvalidArgument("no box carries initial mass".into()));
    }
    Ok(CompressibilityReport { max_ratio, min_ratio })
}
