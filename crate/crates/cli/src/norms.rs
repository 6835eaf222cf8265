//! Verification suite of the harmonic-analysis primitives on grids of
//! increasing resolution.

use std::f64::consts::PI;
use std::io::Write;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use vpdirac::analysis::{self, GridField, GridSpec, MaximalOperator, RadialPowerLaw};
use vpdirac::ensemble::ParticleEnsemble;
use vpdirac::fields;
use vpdirac::geom::{self, Mat3, Vec3};

use crate::report::{row, Artifacts};
use crate::run::Report;
use crate::scenario::Scenario;

fn smooth_density(y: &Vec3) -> f64 {
    let r2 = geom::norm2(y);
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - r2).powi(4)
    }
}

/// Radial field and Jacobian of the density `(1 - r²)⁴`.
fn smooth_field(x: &Vec3) -> (Vec3, Mat3) {
    let r = geom::norm(x);
    let m = |r: f64| {
        let r = r.min(1.0);
        let c = [1.0 / 3.0, -4.0 / 5.0, 6.0 / 7.0, -4.0 / 9.0, 1.0 / 11.0];
        4.0 * PI * c.iter().enumerate().map(|(k, c)| c * r.powi(3 + 2 * k as i32)).sum::<f64>()
    };
    let mr = m(r);
    let e = geom::scale(x, mr / (r * r * r));
    let g = 4.0 * PI * smooth_density(x) / (r * r) - 3.0 * mr / r.powi(5);
    let jac = std::array::from_fn(|i| std::array::from_fn(|j| if i == j { mr / r.powi(3) } else { 0.0 } + x[i] * x[j] * g));
    (e, jac)
}

struct Level {
    nodes: usize,
    spacing: f64,
    max_ratio: f64,
    mean_ratio: f64,
    atom_weak_m1: f64,
}

fn level(spec: GridSpec, pairs: usize, seed: u64, maximal: &dyn MaximalOperator) -> Result<Level> {
    let scales = analysis::dyadic_scales(&spec)?;
    let (e, jac): (Vec<Vec3>, Vec<Mat3>) = spec.nodes().iter().map(smooth_field).unzip();
    let b = GridField::from_vectors(spec, &e)?;
    let db = GridField::from_matrices(spec, &jac)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(pairs);
    while chosen.len() < pairs {
        let (p, q) = (rng.gen_range(0..spec.len()), rng.gen_range(0..spec.len()));
        if p != q {
            chosen.push((p, q));
        }
    }
    let mut used: Vec<usize> = chosen.iter().flat_map(|&(p, q)| [p, q]).collect();
    used.sort_unstable();
    used.dedup();
    let values = maximal.apply(&db, &scales, &used)?;
    let mut u = vec![f64::NAN; spec.len()];
    for (i, v) in used.iter().zip(values) {
        u[*i] = v;
    }
    let dq = analysis::difference_quotient_check(&b, &u, &chosen)?;

    let atom = ParticleEnsemble::from_parts(vec![[0.0; 3]], vec![[0.0; 3]], vec![1.0])?;
    let k = analysis::singular_convolution(&atom, None, &spec)?;
    let stride = (spec.dims[0] / 16).max(1);
    let sub = spec.sublattice(stride);
    let uk = maximal.apply(&k, &scales, &sub)?;
    let cell = spec.cell_volume() * (stride * stride * stride) as f64;
    let weak = analysis::weak_pseudo_norm_resolved(&uk, cell, 1.0, 8)?;
    Ok(Level {
        nodes: spec.dims[0],
        spacing: spec.spacing,
        max_ratio: dq.max_ratio,
        mean_ratio: dq.mean_ratio,
        atom_weak_m1: weak,
    })
}

fn drift(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    hi / lo
}

pub fn run(s: &Scenario, art: &mut Artifacts) -> Result<Report> {
    let cfg = &s.norms;
    let maximal = analysis::build_maximal(analysis::DEFAULT_MAXIMAL)?;
    let mut levels = Vec::new();
    for &nodes in &cfg.nodes {
        let spec = GridSpec::cube([0.0; 3], cfg.half, nodes)?;
        levels.push(level(spec, cfg.pairs, cfg.seed, maximal.as_ref())?);
    }
    art.csv("norms.csv", |w| {
        writeln!(w, "nodes,spacing,dq_max_ratio,dq_mean_ratio,atom_maximal_weak_m1")?;
        for l in &levels {
            writeln!(w, "{},{}", l.nodes, row(&[l.spacing, l.max_ratio, l.mean_ratio, l.atom_weak_m1]))?;
        }
        Ok(())
    })?;
    let ratios: Vec<f64> = levels.iter().map(|l| l.max_ratio).collect();
    let weak: Vec<f64> = levels.iter().map(|l| l.atom_weak_m1).collect();
    let finite = ratios.iter().chain(&weak).all(|x| x.is_finite() && *x > 0.0);

    let expected = (4.0 * PI / 3.0f64).powf(2.0 / 3.0);
    let lambdas = analysis::log_lambdas(1e-3, 1e3, 61);
    let weak_f = analysis::weak_pseudo_norm(&RadialPowerLaw::point_charge(1.0), 1.5, &lambdas)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut trace, mut asym): (f64, f64) = (0.0, 0.0);
    for _ in 0..cfg.kernel_samples {
        let y: Vec3 = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let k = fields::gradient_kernel(&y)?;
        let scale = geom::frobenius(&k);
        trace = trace.max(geom::trace(&k).abs() / scale);
        for a in 0..3 {
            for b in 0..3 {
                asym = asym.max((k[a][b] - k[b][a]).abs() / scale);
            }
        }
    }

    let mut report = Report::default();
    report.verdict("difference_quotient_drift_le_2", finite && drift(&ratios) <= 2.0);
    report.verdict("maximal_weak_norm_drift_le_2", finite && drift(&weak) <= 2.0);
    report.verdict("weak_norm_of_f_within_1pct", ((weak_f - expected) / expected).abs() <= 1e-2);
    report.verdict("kernel_trace_free", trace <= 1e-12);
    report.verdict("kernel_symmetric", asym <= 1e-12);
    report.field("difference_quotient_drift", json!(drift(&ratios)));
    report.field("maximal_weak_norm_drift", json!(drift(&weak)));
    report.field("weak_norm_of_f", json!({ "value": weak_f, "expected": expected }));
    report.field("kernel", json!({ "samples": cfg.kernel_samples, "max_trace": trace, "max_asymmetry": asym }));
    Ok(report)
}
