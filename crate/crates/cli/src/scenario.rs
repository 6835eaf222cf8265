//! Scenario files: TOML schema, flag overrides, completion of defaults and
//! the canonical echo.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vpdirac::analysis::GridSpec;
use vpdirac::config::SimulationConfig;
use vpdirac::density::{self, InitialDensity, DEFAULT_CHARGE_VELOCITY, DEFAULT_MOMENT_ORDER};
use vpdirac::diagnostics::{self, DiagnosticOptions};
use vpdirac::flowmetrics::MetricParams;
use vpdirac::geom::Vec3;
use vpdirac::params::ParamMap;
use vpdirac::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Simulate,
    Converge,
    Stability,
    Diagnose,
    Norms,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Converge => "converge",
            Kind::Stability => "stability",
            Kind::Diagnose => "diagnose",
            Kind::Norms => "norms",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_kind")]
    pub kind: Kind,
    /// Directory receiving every artifact of the run.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub density: DensitySpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub converge: ConvergeSpec,
    #[serde(default)]
    pub stability: StabilitySpec,
    #[serde(default)]
    pub diagnose: DiagnoseSpec,
    #[serde(default)]
    pub norms: NormsSpec,
}

fn default_kind() -> Kind {
    Kind::Simulate
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            output: default_output(),
            simulation: SimulationConfig::default(),
            density: DensitySpec::default(),
            diagnostics: DiagnosticsSpec::default(),
            converge: ConvergeSpec::default(),
            stability: StabilitySpec::default(),
            diagnose: DiagnoseSpec::default(),
            norms: NormsSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySpec {
    pub profile: String,
    pub charge_center: Vec3,
    pub charge_velocity: Vec3,
    pub moment_order: f64,
    /// Profile parameters; omitted keys take the profile's defaults.
    pub params: ParamMap,
}

impl Default for DensitySpec {
    fn default() -> Self {
        Self {
            profile: density::DEFAULT_PROFILE.into(),
            charge_center: [0.0; 3],
            charge_velocity: DEFAULT_CHARGE_VELOCITY,
            moment_order: DEFAULT_MOMENT_ORDER,
            params: ParamMap::new(),
        }
    }
}

impl DensitySpec {
    pub fn build(&self) -> Result<Arc<InitialDensity>, CoreError> {
        let profile = density::build_profile(&self.profile, &self.params)?;
        let d = InitialDensity::builder(profile)
            .charge(self.charge_center, self.charge_velocity)
            .moment_order(self.moment_order)
            .build()?;
        Ok(Arc::new(d))
    }
}

/// Cube of `nodes³` grid points centered at `center` with half-width `half`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeSpec {
    pub center: Vec3,
    pub half: f64,
    pub nodes: usize,
}

impl CubeSpec {
    pub fn grid(&self) -> Result<GridSpec, CoreError> {
        GridSpec::cube(self.center, self.half, self.nodes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSpec {
    pub moments: Vec<f64>,
    pub density_p: Vec<f64>,
    pub estimator: String,
    pub density_grid: CubeSpec,
    /// Field norms, the Hölder seminorm and the weak norm of `E` are skipped
    /// when false.
    pub field_norms: bool,
    pub field_grid: CubeSpec,
    pub field_q: Vec<f64>,
    pub holder_alpha: f64,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        let d = DiagnosticOptions::default();
        Self {
            moments: d.moments,
            density_p: d.density_p,
            estimator: d.estimator,
            density_grid: CubeSpec { center: [0.0; 3], half: 6.0, nodes: 49 },
            field_norms: d.field_grid.is_some(),
            field_grid: CubeSpec { center: [0.0; 3], half: 3.0, nodes: 13 },
            field_q: d.field_q,
            holder_alpha: d.holder_alpha,
        }
    }
}

impl DiagnosticsSpec {
    pub fn options(&self) -> Result<DiagnosticOptions, CoreError> {
        Ok(DiagnosticOptions {
            moments: self.moments.clone(),
            density_p: self.density_p.clone(),
            density_grid: self.density_grid.grid()?,
            estimator: self.estimator.clone(),
            field_grid: if self.field_norms { Some(self.field_grid.grid()?) } else { None },
            field_q: self.field_q.clone(),
            holder_alpha: self.holder_alpha,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeSpec {
    pub ladder: Vec<u32>,
    pub reference: u32,
    pub gamma: f64,
    pub radius: f64,
}

impl Default for ConvergeSpec {
    fn default() -> Self {
        Self { ladder: vec![4, 8, 16, 32], reference: 64, gamma: 0.1, radius: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySpec {
    /// Regularization levels compared pairwise, each pair on the same seeds.
    pub pairs: Vec<[u32; 2]>,
    pub radius: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
    /// Start of the comparison window; the window ends at the horizon.
    pub start: f64,
    /// Times, as fractions of the horizon, at which Φ must decrease from one
    /// pair to the next. Consistency is checked at every stored time.
    pub at: Vec<f64>,
    pub superlevel_lambda: Vec<f64>,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self {
            pairs: vec![[8, 16], [16, 32]],
            radius: vec![5.0],
            lambda: vec![20.0],
            gamma: vec![0.1],
            delta1: vec![0.1],
            delta2: vec![0.1],
            start: 0.0,
            at: vec![0.5],
            superlevel_lambda: vec![5.0, 10.0, 20.0, 40.0],
        }
    }
}

impl StabilitySpec {
    /// Every combination of the parameter lists, radius varying slowest.
    pub fn metric_grid(&self, horizon: f64) -> Result<Vec<MetricParams>, CoreError> {
        let mut out = Vec::new();
        for &r in &self.radius {
            for &lambda in &self.lambda {
                for &gamma in &self.gamma {
                    for &d1 in &self.delta1 {
                        for &d2 in &self.delta2 {
                            out.push(MetricParams::new(r, lambda, gamma, d1, d2, self.start, horizon)?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSpec {
    /// Stored flow written by a `simulate` run (`flow.bin`).
    pub flow: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormsSpec {
    /// Node counts of the successive refinements of the cube `[-half, half]³`.
    pub nodes: Vec<usize>,
    pub half: f64,
    pub pairs: usize,
    pub kernel_samples: usize,
    pub seed: u64,
}

impl Default for NormsSpec {
    fn default() -> Self {
        Self { nodes: vec![34, 66, 130], half: 1.5, pairs: 1000, kernel_samples: 1000, seed: 13 }
    }
}

// ---------------------------------------------------------------------------
// errors

/// A configuration problem, located in the source when possible.
#[derive(Debug)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.origin, l, self.message),
            None => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

// ---------------------------------------------------------------------------
// parsing

/// One `key=value` assignment from the command line; `key` is a dotted path
/// and `value` a TOML value (bare words are read as strings).
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: toml::Value,
}

impl Override {
    pub fn parse(s: &str) -> Result<Self, String> {
        let (key, raw) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(|p| p.is_empty()) {
            return Err(format!("bad key in `{s}`"));
        }
        let raw = raw.trim();
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        Ok(Self { key: key.to_string(), value })
    }
}

fn apply_override(table: &mut toml::Table, o: &Override) -> Result<(), String> {
    let parts: Vec<&str> = o.key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("`{}`: `{p}` is not a table", o.key))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), o.value.clone());
    Ok(())
}

/// Reads and validates the scenario at `path`.
pub fn parse_config(path: &Path) -> Result<Scenario, ConfigError> {
    load(Some(path), None, &[])
}

/// Reads `path` (defaults when `None`), applies the overrides, forces the
/// kind when the subcommand names one, completes and validates.
pub fn load(path: Option<&Path>, kind: Option<Kind>, overrides: &[Override]) -> Result<Scenario, ConfigError> {
    let (origin, text) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError {
                origin: p.display().to_string(),
                line: None,
                message: format!("cannot read: {e}"),
            })?;
            (p.display().to_string(), text)
        }
        None => ("<defaults>".to_string(), String::new()),
    };
    parse_str(&text, &origin, kind, overrides)
}

pub fn parse_str(text: &str, origin: &str, kind: Option<Kind>, overrides: &[Override]) -> Result<Scenario, ConfigError> {
    let err = |line: Option<usize>, message: String| ConfigError { origin: origin.to_string(), line, message };
    // parse the text alone first so that schema errors point into the file
    let mut scenario: Scenario = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        err(line, e.message().trim().to_string())
    })?;
    let declared: toml::Table = toml::from_str(text).map_err(|e| err(None, e.to_string()))?;
    // overrides land on the default-completed form, so that a single key of a
    // nested table can be replaced
    let mut table = toml::Table::try_from(&scenario).map_err(|e| err(None, e.to_string()))?;
    if let Some(k) = kind {
        if declared.contains_key("kind") && scenario.kind != k {
            return Err(err(
                locate(text, "kind"),
                format!("file declares kind = \"{}\" but the subcommand is `{k}`", scenario.kind),
            ));
        }
        table.insert("kind".into(), toml::Value::String(k.as_str().into()));
    }
    if kind.is_some() || !overrides.is_empty() {
        for o in overrides {
            apply_override(&mut table, o).map_err(|m| err(None, format!("override {m}")))?;
        }
        scenario = Scenario::deserialize(table).map_err(|e| {
            err(None, format!("after command-line overrides: {}", e.message().trim()))
        })?;
    }
    scenario.complete().map_err(|(field, message)| {
        let line = if overrides.iter().any(|o| o.key == field) { None } else { locate(text, &field) };
        err(line, format!("invalid `{field}`: {message}"))
    })?;
    Ok(scenario)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the assignment to the dotted `path`, or of its nearest enclosing
/// table header.
pub fn locate(text: &str, path: &str) -> Option<usize> {
    let parts: Vec<&str> = path.split('.').collect();
    let mut table: Vec<String> = Vec::new();
    let mut best = None;
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(h) = line.strip_prefix('[') {
            let h = h.trim_start_matches('[').trim_end_matches(']').trim_end_matches(']');
            table = h.split('.').map(|s| s.trim().to_string()).collect();
            if parts.starts_with(&table.iter().map(String::as_str).collect::<Vec<_>>()) && best.is_none() {
                best = Some(no + 1);
            }
            continue;
        }
        let Some((key, _)) = line.split_once('=') else { continue };
        let mut full: Vec<String> = table.clone();
        full.extend(key.trim().split('.').map(|s| s.trim().trim_matches('"').to_string()));
        if full.iter().map(String::as_str).eq(parts.iter().copied()) {
            return Some(no + 1);
        }
    }
    best
}

type Invalid = (String, String);

fn invalid(field: &str, message: impl Into<String>) -> Invalid {
    (field.to_string(), message.into())
}

/// Maps a core validation error onto the scenario key it concerns.
fn core_error(section: &str, e: CoreError) -> Invalid {
    match e {
        CoreError::Validation { field, reason } => {
            let path = match (section, field.strip_prefix("profile.")) {
                ("density", Some(rest)) => format!("density.params.{rest}"),
                ("density", None) if field == "profile" => "density.profile".into(),
                ("density", None) if field == "charge" => "density.charge_center".into(),
                _ => format!("{section}.{field}"),
            };
            (path, reason)
        }
        other => (section.to_string(), other.to_string()),
    }
}

impl Scenario {
    /// Fills derived defaults (the profile's full parameter set) and checks
    /// every field the scenario kind needs.
    pub fn complete(&mut self) -> Result<(), Invalid> {
        self.simulation.validate().map_err(|e| core_error("simulation", e))?;
        let profile = density::build_profile(&self.density.profile, &self.density.params)
            .map_err(|e| core_error("density", e))?;
        self.density.profile = profile.name().to_string();
        self.density.params = profile.params();
        self.density.build().map_err(|e| core_error("density", e))?;
        self.check_diagnostics()?;
        match self.kind {
            Kind::Simulate => {}
            Kind::Converge => self.check_converge()?,
            Kind::Stability => self.check_stability()?,
            Kind::Diagnose => {
                if self.diagnose.flow.as_ref().map_or(true, |p| p.as_os_str().is_empty()) {
                    return Err(invalid("diagnose.flow", "required for kind = \"diagnose\""));
                }
            }
            Kind::Norms => self.check_norms()?,
        }
        if self.output.as_os_str().is_empty() {
            return Err(invalid("output", "must name a directory"));
        }
        Ok(())
    }

    fn check_diagnostics(&self) -> Result<(), Invalid> {
        let d = &self.diagnostics;
        d.density_grid.grid().map_err(|e| invalid("diagnostics.density_grid", e.to_string()))?;
        d.field_grid.grid().map_err(|e| invalid("diagnostics.field_grid", e.to_string()))?;
        diagnostics::estimator_registry()
            .contains(&d.estimator)
            .then_some(())
            .ok_or_else(|| {
                invalid(
                    "diagnostics.estimator",
                    format!("unknown estimator `{}` (known: {})", d.estimator, diagnostics::estimator_registry().names().join(", ")),
                )
            })?;
        if let Some(m) = d.moments.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(invalid("diagnostics.moments", format!("orders must be positive, got {m}")));
        }
        if let Some(p) = d.density_p.iter().find(|p| !(**p >= 1.0)) {
            return Err(invalid("diagnostics.density_p", format!("exponents must be >= 1, got {p}")));
        }
        if let Some(q) = d.field_q.iter().find(|q| !(**q >= 1.0)) {
            return Err(invalid("diagnostics.field_q", format!("exponents must be >= 1, got {q}")));
        }
        if !(d.holder_alpha > 0.0 && d.holder_alpha < 1.0) {
            return Err(invalid("diagnostics.holder_alpha", "must lie in (0, 1)"));
        }
        Ok(())
    }

    fn check_converge(&self) -> Result<(), Invalid> {
        let c = &self.converge;
        if c.ladder.is_empty() {
            return Err(invalid("converge.ladder", "must list at least one level"));
        }
        if c.ladder.contains(&0) {
            return Err(invalid("converge.ladder", "levels must be >= 1"));
        }
        if c.reference == 0 {
            return Err(invalid("converge.reference", "must be >= 1"));
        }
        if !(c.gamma > 0.0) {
            return Err(invalid("converge.gamma", "must be > 0"));
        }
        if !(c.radius > 0.0) {
            return Err(invalid("converge.radius", "must be > 0"));
        }
        Ok(())
    }

    fn check_stability(&self) -> Result<(), Invalid> {
        let s = &self.stability;
        if s.pairs.is_empty() {
            return Err(invalid("stability.pairs", "must list at least one pair"));
        }
        if let Some(p) = s.pairs.iter().find(|p| p[0] == p[1] || p[0] == 0 || p[1] == 0) {
            return Err(invalid("stability.pairs", format!("levels must be distinct and >= 1, got {p:?}")));
        }
        for (name, list) in [
            ("radius", &s.radius),
            ("lambda", &s.lambda),
            ("gamma", &s.gamma),
            ("delta1", &s.delta1),
            ("delta2", &s.delta2),
            ("at", &s.at),
        ] {
            if list.is_empty() {
                return Err(invalid(&format!("stability.{name}"), "must not be empty"));
            }
        }
        if let Some(a) = s.at.iter().find(|a| !(**a >= 0.0 && **a <= 1.0)) {
            return Err(invalid("stability.at", format!("fractions of the horizon must lie in [0, 1], got {a}")));
        }
        if let Some(l) = s.superlevel_lambda.iter().find(|l| !(**l > 0.0)) {
            return Err(invalid("stability.superlevel_lambda", format!("must be > 0, got {l}")));
        }
        s.metric_grid(self.simulation.horizon).map_err(|e| invalid("stability", e.to_string()))?;
        Ok(())
    }

    fn check_norms(&self) -> Result<(), Invalid> {
        let n = &self.norms;
        if n.nodes.len() < 2 {
            return Err(invalid("norms.nodes", "needs at least two refinements"));
        }
        // three dyadic scales 2h, 4h, 8h must fit in a quarter of the cube
        if let Some(k) = n.nodes.iter().find(|k| **k < 33) {
            return Err(invalid("norms.nodes", format!("node counts must be >= 33, got {k}")));
        }
        if !(n.half > 0.0 && n.half.is_finite()) {
            return Err(invalid("norms.half", "must be finite and > 0"));
        }
        if n.pairs == 0 {
            return Err(invalid("norms.pairs", "must be >= 1"));
        }
        if n.kernel_samples == 0 {
            return Err(invalid("norms.kernel_samples", "must be >= 1"));
        }
        Ok(())
    }

    /// Canonical TOML: every key present, in schema order.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
