//! Run configuration: a JSON document with the keys below. Everything except
//! `manifold`, `grid.n` and `initial.curve` has a default.
//!
//! ```json
//! {
//!   "manifold": { "name": "euclidean", "dim": 2 },
//!   "grid": { "n": 128, "stencil": "sixth" },
//!   "dt": "characteristic",
//!   "horizon": 1.0,
//!   "mode": "march",
//!   "initial": {
//!     "curve": { "name": "perturbed_circle", "mode": 2, "amplitude": 0.01 },
//!     "velocity": { "name": "zero" }
//!   },
//!   "tolerances": { "solver": 1e-8, "constraint": 1e-2, "bentness_min": 1e-3, "picard": 1e-8 },
//!   "backend": "banded",
//!   "output": { "snapshot_every": 0 },
//!   "diagnostics": { "every": 1, "bentness_every": 10 },
//!   "renormalize": false,
//!   "seed": 0,
//!   "picard": { "window_steps": 8, "max_iter": 40 },
//!   "study": { "levels": 3 }
//! }
//! ```
//!
//! `dt` is either `"characteristic"` (`dt = Δx = 1/N`) or a positive number
//! no larger than `1/N`. `mode` is one of `march`, `picard` and
//! `convergence-study`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::dynamics::initial::generate_curve;
use crate::dynamics::{CurveSpec, VelocitySpec};
use crate::elliptic::{Backend, EllipticOptions};
use crate::fields::{Grid, Stencil};
use crate::geometry::ManifoldModel;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum TimeStep {
    /// `dt = Δx`.
    #[default]
    Characteristic,
    Fixed(f64),
}

impl TimeStep {
    pub fn resolve(self, grid: &Grid) -> f64 {
        match self {
            TimeStep::Characteristic => grid.dx,
            TimeStep::Fixed(dt) => dt,
        }
    }
}

impl Serialize for TimeStep {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TimeStep::Characteristic => s.serialize_str("characteristic"),
            TimeStep::Fixed(dt) => s.serialize_f64(*dt),
        }
    }
}

impl<'de> Deserialize<'de> for TimeStep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(dt) => Ok(TimeStep::Fixed(dt)),
            Raw::Text(t) if t == "characteristic" => Ok(TimeStep::Characteristic),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected \"characteristic\" or a number, got \"{t}\""
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    March,
    Picard,
    ConvergenceStudy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default)]
    pub stencil: Stencil,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub curve: CurveSpec,
    #[serde(default)]
    pub velocity: VelocitySpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative residual accepted from the linear solvers.
    pub solver: f64,
    /// Runs abort once `max |‖ξ‖² - 1|` exceeds this.
    pub constraint: f64,
    /// Bentness threshold `B₀`.
    pub bentness_min: f64,
    /// Stopping tolerance of the coupled Picard iteration.
    pub picard: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { solver: 1e-8, constraint: 1e-2, bentness_min: 1e-3, picard: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write a snapshot every this many steps; `0` keeps only the first and
    /// last state.
    pub snapshot_every: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub every: usize,
    pub bentness_every: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { every: 1, bentness_every: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig {
    pub window_steps: usize,
    pub max_iter: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { window_steps: 8, max_iter: 40 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Number of resolutions `N, 2N, 4N, …`.
    pub levels: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { levels: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: ManifoldModel,
    pub grid: GridConfig,
    #[serde(default)]
    pub dt: TimeStep,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub mode: Mode,
    pub initial: InitialConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub renormalize: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub study: StudyConfig,
}

fn default_horizon() -> f64 {
    1.0
}

impl RunConfig {
    pub fn elliptic_options(&self) -> EllipticOptions {
        EllipticOptions {
            backend: self.backend,
            tolerance: self.tolerances.solver,
            bentness_min: self.tolerances.bentness_min,
        }
    }

    /// The same configuration at another resolution; a fixed `dt` is scaled
    /// with `Δx`.
    pub fn refined(&self, n: usize) -> RunConfig {
        let mut c = self.clone();
        if let TimeStep::Fixed(dt) = c.dt {
            c.dt = TimeStep::Fixed(dt * self.grid.n as f64 / n as f64);
        }
        c.grid.n = n;
        c
    }
}

/// One validation problem, located by a dotted path into the document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Keys of the fixed-shape sections. Tagged sections (manifold, curve,
/// velocity) are checked by their own deserializers.
const SECTIONS: &[(&str, &[&str])] = &[
    (
        "",
        &[
            "manifold",
            "grid",
            "dt",
            "horizon",
            "mode",
            "initial",
            "tolerances",
            "backend",
            "output",
            "diagnostics",
            "renormalize",
            "seed",
            "picard",
            "study",
        ],
    ),
    ("grid", &["n", "stencil"]),
    ("initial", &["curve", "velocity"]),
    ("tolerances", &["solver", "constraint", "bentness_min", "picard"]),
    ("output", &["snapshot_every"]),
    ("diagnostics", &["every", "bentness_every"]),
    ("picard", &["window_steps", "max_iter"]),
    ("study", &["levels"]),
];

fn unknown_keys(doc: &Value, issues: &mut Vec<ConfigIssue>) {
    for (section, allowed) in SECTIONS {
        let node = if section.is_empty() { Some(doc) } else { doc.get(section) };
        let Some(Value::Object(map)) = node else { continue };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                let path = if section.is_empty() { key.clone() } else { format!("{section}.{key}") };
                issues.push(ConfigIssue { path, message: "unknown key".into() });
            }
        }
    }
}

fn issue(issues: &mut Vec<ConfigIssue>, path: &str, message: impl Into<String>) {
    issues.push(ConfigIssue { path: path.into(), message: message.into() });
}

fn check_ranges(c: &RunConfig, issues: &mut Vec<ConfigIssue>) {
    let n = c.grid.n;
    if n < Grid::MIN_POINTS {
        issue(issues, "grid.n", format!("N ≥ 8 required, got {n}"));
    }
    if let TimeStep::Fixed(dt) = c.dt {
        if !(dt > 0.0) || !dt.is_finite() {
            issue(issues, "dt", format!("must be positive, got {dt}"));
        } else if n >= Grid::MIN_POINTS && dt > (1.0 + 1e-12) / n as f64 {
            issue(issues, "dt", format!("dt ≤ 1/N = {} required, got {dt}", 1.0 / n as f64));
        }
        if c.mode == Mode::Picard && (dt * n as f64 - 1.0).abs() > 1e-12 {
            issue(issues, "dt", "picard mode runs on the characteristic step dt = 1/N");
        }
    }
    if !(c.horizon > 0.0) || !c.horizon.is_finite() {
        issue(issues, "horizon", format!("must be positive, got {}", c.horizon));
    }
    let t = &c.tolerances;
    for (name, v) in [("solver", t.solver), ("constraint", t.constraint), ("picard", t.picard)] {
        if !(v > 0.0) || !v.is_finite() {
            issue(issues, &format!("tolerances.{name}"), format!("must be positive, got {v}"));
        }
    }
    if !(t.bentness_min >= 0.0) || !t.bentness_min.is_finite() {
        issue(issues, "tolerances.bentness_min", format!("must be non-negative, got {}", t.bentness_min));
    }
    if c.diagnostics.every == 0 {
        issue(issues, "diagnostics.every", "must be at least 1");
    }
    if c.picard.window_steps < 2 {
        issue(issues, "picard.window_steps", "must be at least 2");
    }
    if c.picard.max_iter == 0 {
        issue(issues, "picard.max_iter", "must be at least 1");
    }
    if c.study.levels < 2 {
        issue(issues, "study.levels", "a convergence study needs at least 2 levels");
    }
    check_manifold(&c.manifold, issues);
    check_initial(c, issues);
}

fn check_manifold(m: &ManifoldModel, issues: &mut Vec<ConfigIssue>) {
    match m {
        ManifoldModel::Euclidean { dim } | ManifoldModel::Conformal { dim, .. } if !(2..=3).contains(dim) => {
            issue(issues, "manifold.dim", format!("dimension 2 or 3 required, got {dim}"));
        }
        ManifoldModel::FlatTorus { periods } => {
            if !(2..=3).contains(&periods.len()) {
                issue(issues, "manifold.periods", format!("2 or 3 periods required, got {}", periods.len()));
            }
            if periods.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
                issue(issues, "manifold.periods", "periods must be positive");
            }
        }
        ManifoldModel::Conformal { dim, lambda } => {
            if let Some(v) = lambda.max_variable() {
                if v >= *dim {
                    issue(issues, "manifold.lambda", format!("uses coordinate {v} in dimension {dim}"));
                }
            }
        }
        _ => {}
    }
}

fn check_initial(c: &RunConfig, issues: &mut Vec<ConfigIssue>) {
    let dim = c.manifold.dim();
    match &c.initial.velocity {
        VelocitySpec::Translation { velocity } if velocity.len() != dim => {
            issue(issues, "initial.velocity.velocity", format!("expected {dim} components, got {}", velocity.len()));
        }
        VelocitySpec::NormalMode { mode, .. } if *mode == 0 => {
            issue(issues, "initial.velocity.mode", "mode must be at least 1");
        }
        VelocitySpec::Rotation { .. } | VelocitySpec::NormalMode { .. } if dim != 2 && !c.manifold.is_flat() => {
            issue(issues, "initial.velocity", "rotation and normal modes need a planar curve");
        }
        _ => {}
    }
    if let CurveSpec::PerturbedCircle { mode, amplitude, .. } = &c.initial.curve {
        if *mode == 0 {
            issue(issues, "initial.curve.mode", "mode must be at least 1");
        }
        if !(amplitude.abs() < 1.0) {
            issue(issues, "initial.curve.amplitude", format!("|ε| < 1 required, got {amplitude}"));
        }
    }
    if !issues.is_empty() {
        return;
    }
    // the generators know the chart domain and the model restrictions
    if let Err(e) = generate_curve(&c.manifold, &c.initial.curve, c.grid.n) {
        issue(issues, "initial.curve", e.to_string());
    }
}

/// Parses and validates a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        ConfigErrors(vec![ConfigIssue { path: "$".into(), message: format!("invalid JSON: {e}") }])
    })?;
    let mut issues = Vec::new();
    if !doc.is_object() {
        issue(&mut issues, "$", "the configuration must be a JSON object");
        return Err(ConfigErrors(issues));
    }
    unknown_keys(&doc, &mut issues);
    let config: RunConfig = match serde_path_to_error::deserialize(&doc) {
        Ok(c) => c,
        Err(e) => {
            let path = match e.path().to_string() {
                p if p == "." => "$".to_string(),
                p => p,
            };
            let message = e.inner().to_string();
            // unknown keys of fixed sections are already listed
            if !(message.starts_with("unknown field") && issues.iter().any(|i| message.contains(&format!("`{}`", i.path.rsplit('.').next().unwrap_or_default())))) {
                issues.push(ConfigIssue { path, message });
            }
            return Err(ConfigErrors(issues));
        }
    };
    check_ranges(&config, &mut issues);
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(ConfigErrors(issues))
    }
}
