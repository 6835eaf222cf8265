//! Scenario runners. Each writes its tables into the artifact directory and
//! returns named verdicts plus summary fields; `run_scenario` adds the config
//! echo and `summary.json`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use vpdirac::charge::PointChargeState;
use vpdirac::config::SimulationConfig;
use vpdirac::density::InitialDensity;
use vpdirac::diagnostics::DiagnosticSeries;
use vpdirac::dynamics::{self, FlowRecord};
use vpdirac::ensemble::ParticleEnsemble;
use vpdirac::flowmetrics;

use crate::norms;
use crate::report::{row, Artifacts};
use crate::scenario::{Kind, Scenario};

#[derive(Debug)]
pub enum Failure {
    /// Invalid or unusable configuration (exit code 2).
    Config(String),
    /// A module failed while the scenario ran (exit code 3).
    Runtime(anyhow::Error),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Runtime(e) => write!(f, "runtime failure: {e:#}"),
        }
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub verdicts: BTreeMap<String, bool>,
    pub fields: Map<String, Value>,
}

impl Report {
    pub fn verdict(&mut self, name: &str, ok: bool) {
        self.verdicts.insert(name.to_string(), ok);
    }

    pub fn field(&mut self, name: &str, value: Value) {
        self.fields.insert(name.to_string(), value);
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub verdicts: BTreeMap<String, bool>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|v| *v)
    }
}

pub fn run_scenario(s: &Scenario) -> Result<Outcome, Failure> {
    if s.kind == Kind::Diagnose {
        let flow = s.diagnose.flow.as_ref().expect("validated scenario");
        if !flow.is_file() {
            return Err(Failure::Config(format!("diagnose.flow: no such file {}", flow.display())));
        }
    }
    let mut art = Artifacts::create(&s.output, &s.hash()).map_err(|e| Failure::Config(format!("{e:#}")))?;
    let echo = format!("{}{}", art.header(), s.canonical());
    let result = art.text("scenario.toml", &echo).and_then(|_| match s.kind {
        Kind::Simulate => simulate(s, &mut art),
        Kind::Converge => converge(s, &mut art),
        Kind::Stability => stability(s, &mut art),
        Kind::Diagnose => diagnose(s, &mut art),
        Kind::Norms => norms::run(s, &mut art),
    });
    let result = result.with_context(|| format!("{} scenario", s.kind));
    let mut doc = Map::new();
    doc.insert("kind".into(), json!(s.kind.as_str()));
    match result {
        Ok(report) => {
            let passed = report.verdicts.values().all(|v| *v);
            doc.insert("status".into(), json!(if passed { "pass" } else { "fail" }));
            doc.insert("verdicts".into(), json!(report.verdicts));
            doc.insert("artifacts".into(), json!(art.written()));
            doc.extend(report.fields);
            art.json("summary.json", doc).map_err(Failure::Runtime)?;
            Ok(Outcome { dir: s.output.clone(), verdicts: report.verdicts })
        }
        Err(e) => {
            doc.insert("status".into(), json!("error"));
            doc.insert("partial".into(), json!(true));
            doc.insert("error".into(), json!(format!("{e:#}")));
            doc.insert("artifacts".into(), json!(art.written()));
            // the primary error is what matters if the summary cannot be written
            let _ = art.json("summary.json", doc);
            Err(Failure::Runtime(e))
        }
    }
}

fn initial_charge(cfg: &SimulationConfig, density: &InitialDensity) -> Option<PointChargeState> {
    cfg.with_charge.then(|| PointChargeState { xi: density.charge_center, eta: density.charge_velocity })
}

/// Flows at several levels of one seed set, computed once per level.
struct Ladder {
    cfg: SimulationConfig,
    base: ParticleEnsemble,
    charge: Option<PointChargeState>,
    flows: BTreeMap<u32, FlowRecord>,
}

impl Ladder {
    fn new(cfg: &SimulationConfig, density: &Arc<InitialDensity>) -> Result<Self> {
        let base = dynamics::sample(cfg, density).context("sampling the initial datum")?;
        Ok(Self { cfg: cfg.clone(), base, charge: initial_charge(cfg, density), flows: BTreeMap::new() })
    }

    fn flow(&mut self, n: u32) -> Result<&FlowRecord> {
        if !self.flows.contains_key(&n) {
            let c = SimulationConfig { n, ..self.cfg.clone() };
            let ens = self.base.apply_cutoff(n).with_context(|| format!("cutoff at n = {n}"))?;
            let flow = dynamics::run_flow(&c, &ens, self.charge).with_context(|| format!("run at n = {n}"))?;
            self.flows.insert(n, flow);
        }
        Ok(&self.flows[&n])
    }
}

fn write_series(art: &mut Artifacts, series: &DiagnosticSeries, report: &mut Report) -> Result<()> {
    art.csv("series.csv", |w| Ok(series.write_csv(w)?))?;
    let summary = series.summary();
    for (k, v) in &summary.verdicts {
        report.verdict(k, *v);
    }
    report.field("diagnostics", serde_json::to_value(&summary)?);
    report.field("stored_times", json!(series.times.len()));
    Ok(())
}

fn simulate(s: &Scenario, art: &mut Artifacts) -> Result<Report> {
    let density = s.density.build()?;
    let cfg = &s.simulation;
    let mut ladder = Ladder::new(cfg, &density)?;
    let flow = ladder.flow(cfg.n)?;
    let mut bin = Vec::new();
    flow.write_binary(&mut bin)?;
    art.binary("flow.bin", &bin)?;
    if flow.charge.is_some() {
        art.csv("charge.csv", |w| Ok(flow.write_charge_csv(w)?))?;
    }
    let series = DiagnosticSeries::from_flow(flow, &s.diagnostics.options()?).context("diagnostics")?;
    let mut report = Report::default();
    write_series(art, &series, &mut report)?;
    report.field("initial_energy_exact", json!(density.initial_energy));
    report.field("integrator", serde_json::to_value(&flow.stats)?);
    report.field("frozen_tracers", json!(flow.flagged.iter().filter(|f| **f).count()));
    Ok(report)
}

fn diagnose(s: &Scenario, art: &mut Artifacts) -> Result<Report> {
    let path = s.diagnose.flow.as_ref().expect("validated scenario");
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let flow = FlowRecord::read_binary(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
    let series = DiagnosticSeries::from_flow(&flow, &s.diagnostics.options()?).context("diagnostics")?;
    let mut report = Report::default();
    write_series(art, &series, &mut report)?;
    report.field("flow", json!({ "n": flow.n, "particles": flow.len(), "softening": flow.softening }));
    Ok(report)
}

/// Count of strict increases along `seq`.
fn inversions(seq: &[f64]) -> usize {
    seq.windows(2).filter(|w| w[1] > w[0]).count()
}

fn converge(s: &Scenario, art: &mut Artifacts) -> Result<Report> {
    let c = &s.converge;
    let density = s.density.build()?;
    let mut ladder = Ladder::new(&s.simulation, &density)?;
    ladder.flow(c.reference)?;
    for &n in &c.ladder {
        ladder.flow(n)?;
    }
    let reference = &ladder.flows[&c.reference];
    let horizon = *reference.times.last().expect("stored times");
    let mut rows = Vec::new();
    for &n in &c.ladder {
        let flow = &ladder.flows[&n];
        let sup = flowmetrics::convergence_in_measure_sup(flow, reference, c.gamma, c.radius)?;
        let last = flowmetrics::convergence_in_measure(flow, reference, c.gamma, c.radius, horizon)?;
        rows.push((n, sup, last));
    }
    art.csv("convergence.csv", |w| {
        use std::io::Write;
        writeln!(w, "n,reference,gamma,radius,measure_sup,measure_final")?;
        for (n, sup, last) in &rows {
            writeln!(w, "{n},{},{}", c.reference, row(&[c.gamma, c.radius, *sup, *last]))?;
        }
        Ok(())
    })?;
    let sups: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let mut report = Report::default();
    report.verdict("measure_nonincreasing_up_to_one_inversion", inversions(&sups) <= 1);
    report.field(
        "rows",
        json!(rows.iter().map(|(n, sup, last)| json!({ "n": n, "measure_sup": sup, "measure_final": last })).collect::<Vec<_>>()),
    );
    report.field("reference", json!(c.reference));
    Ok(report)
}

fn stability(s: &Scenario, art: &mut Artifacts) -> Result<Report> {
    use std::io::Write;
    let st = &s.stability;
    let density = s.density.build()?;
    let mut ladder = Ladder::new(&s.simulation, &density)?;
    for p in &st.pairs {
        ladder.flow(p[0])?;
        ladder.flow(p[1])?;
    }
    let horizon = s.simulation.horizon;
    let grid = st.metric_grid(horizon)?;
    let mut report = Report::default();

    let mut cheb = Vec::new();
    let mut consistent = true;
    let mut worst: f64 = 0.0;
    for pair in &st.pairs {
        let (a, b) = (&ladder.flows[&pair[0]], &ladder.flows[&pair[1]]);
        for p in &grid {
            for &t in &a.times {
                let parts = flowmetrics::chebyshev_parts(a, b, p, t)
                    .with_context(|| format!("pair ({}, {}) at s = {t}", pair[0], pair[1]))?;
                consistent &= parts.lhs <= parts.rhs * (1.0 + 1e-12);
                if parts.rhs > 0.0 {
                    worst = worst.max(parts.lhs / parts.rhs);
                }
                cheb.push((*pair, *p, t, parts));
            }
        }
    }
    art.csv("chebyshev.csv", |w| {
        writeln!(w, "n_a,n_b,r,lambda,gamma,delta1,delta2,s,phi,lhs,superlevel_a,superlevel_b,rhs")?;
        for (pair, p, t, c) in &cheb {
            let vals = [p.r, p.lambda, p.gamma, p.delta1, p.delta2, *t, c.phi, c.lhs, c.superlevel_a, c.superlevel_b, c.rhs];
            writeln!(w, "{},{},{}", pair[0], pair[1], row(&vals))?;
        }
        Ok(())
    })?;
    report.verdict("chebyshev_consistency", consistent);
    report.field("chebyshev_checks", json!(cheb.len()));
    report.field("chebyshev_max_ratio", json!(worst));

    if st.pairs.len() >= 2 {
        let mut decreasing = true;
        let mut trends = Vec::new();
        for p in &grid {
            for &frac in &st.at {
                let time = frac * horizon;
                let mut phis = Vec::new();
                for pair in &st.pairs {
                    phis.push(flowmetrics::phi_functional(&ladder.flows[&pair[0]], &ladder.flows[&pair[1]], p, time)?);
                }
                decreasing &= phis.windows(2).all(|w| w[1] < w[0]);
                trends.push(json!({ "params": p, "s": time, "phi": phis }));
            }
        }
        report.verdict("phi_decreasing_across_pairs", decreasing);
        report.field("phi_trend", json!(trends));
    }

    let mut lambdas = st.superlevel_lambda.clone();
    lambdas.sort_by(f64::total_cmp);
    let mut monotone = true;
    let mut loglog = Vec::new();
    let mut levels = Vec::new();
    for (&n, flow) in &ladder.flows {
        for &r in &st.radius {
            let mut prev = f64::INFINITY;
            for &lambda in &lambdas {
                let sub = flowmetrics::sublevel_report(flow, r, lambda);
                monotone &= sub.superlevel <= prev;
                prev = sub.superlevel;
                levels.push((n, r, lambda, sub));
            }
            loglog.push(json!({ "n": n, "r": r, "loglog_moment": flowmetrics::loglog_moment(flow, r) }));
        }
    }
    art.csv("superlevels.csv", |w| {
        writeln!(w, "n,r,lambda,superlevel,retained,frozen")?;
        for (n, r, lambda, sub) in &levels {
            writeln!(w, "{n},{}", row(&[*r, *lambda, sub.superlevel, sub.retained, sub.frozen]))?;
        }
        Ok(())
    })?;
    report.verdict("superlevel_nonincreasing", monotone);
    report.field("loglog_moments", json!(loglog));
    Ok(report)
}
