use std::path::{Path, PathBuf};

use pertorb::biffun::BifConfig;
use pertorb::continuation::{DistanceKind, ShootConfig};
use pertorb::cycles::CycleConfig;
use pertorb::IntegratorConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "PERTORB_OUTPUT_DIR";

/// A configuration problem; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub params: Value,
    /// Replace the forcing by zero.
    pub zero_forcing: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self { name: "greenspan_holmes".into(), params: Value::Object(Default::default()), zero_forcing: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleSection {
    /// Initial guess for the cycle search; the scenario's reference cycle is used when absent.
    pub guess: Option<Vec<f64>>,
    /// Section normal for the cycle search.
    pub normal: Option<Vec<f64>>,
    pub target_period: Option<f64>,
    pub tolerances: CycleConfig,
    /// Samples written to the cycle record.
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    /// `s` values for `Phi^s` tables, as fractions of the period.
    pub s_fractions: Vec<f64>,
    /// Strictly decreasing `eps` list for sweeps.
    pub eps: Vec<f64>,
    /// Points of the `t` grid for the limit identity.
    pub t_points: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Self { s_fractions: vec![0.25, 0.5, 0.75, 1.0], eps: vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4], t_points: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "default_circle_points")]
    pub points: usize,
}

fn default_circle_points() -> usize {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegreeSection {
    /// `eps` for the direct `I - P_eps` winding and the degree formula.
    pub eps: Option<f64>,
    /// Boundary from a CSV file of `x,y` rows.
    pub curve_csv: Option<PathBuf>,
    /// Boundary circle.
    pub circle: Option<Circle>,
    /// Adaptive refinement budget for winding numbers.
    pub budget: usize,
}

impl Default for DegreeSection {
    fn default() -> Self {
        Self { eps: None, curve_csv: None, circle: None, budget: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Starting phase of the sweep; the Malkin zero nearest zero when absent.
    pub phase: Option<f64>,
    /// `eps` values for the two-sided multistart search (planar cycles).
    pub two_sided_eps: Vec<f64>,
    pub distance: DistanceKind,
    /// Phases of the transversal direction test (simple cycles).
    pub direction_points: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { phase: None, two_sided_eps: vec![1e-3], distance: DistanceKind::PhaseAligned, direction_points: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    pub s_points: usize,
    pub boundary_points: usize,
    pub isolation_offset: f64,
    pub isolation_tol: f64,
    pub probe_box: f64,
}

impl Default for PredictSection {
    fn default() -> Self {
        let d = pertorb::continuation::PredictOptions::default();
        Self {
            s_points: d.s_points,
            boundary_points: d.boundary_points,
            isolation_offset: d.isolation_offset,
            isolation_tol: d.isolation_tol,
            probe_box: d.probe_box,
        }
    }
}

/// Everything a run needs, from one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub integrator: IntegratorConfig,
    pub cycle: CycleSection,
    pub biffun: BifConfig,
    pub shoot: ShootConfig,
    pub grids: Grids,
    pub degree: DegreeSection,
    pub verify: VerifySection,
    pub predict: PredictSection,
    pub output_dir: PathBuf,
    /// Also write SVG line charts.
    pub svg: bool,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            integrator: IntegratorConfig::default(),
            cycle: CycleSection::default(),
            biffun: BifConfig::default(),
            shoot: ShootConfig::default(),
            grids: Grids::default(),
            degree: DegreeSection::default(),
            verify: VerifySection::default(),
            predict: PredictSection::default(),
            output_dir: PathBuf::from("pertorb-out"),
            svg: false,
            threads: None,
        }
    }
}

/// Parse `text` as a JSON value, falling back to a plain string.
fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Set a dotted `path` inside a JSON object, creating intermediate objects.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> anyhow::Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("bad override key `{path}`")));
    }
    let mut cur = root;
    for k in &keys[..keys.len() - 1] {
        let obj = cur.as_object_mut().ok_or_else(|| config_err(format!("`{path}`: `{k}` is not an object")))?;
        cur = obj.entry(k.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = cur.as_object_mut().ok_or_else(|| config_err(format!("`{path}` does not name an object member")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Overrides applied on top of the config file, in order.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    /// `key.path=value` pairs.
    pub set: Vec<String>,
    pub scenario: Option<String>,
    pub params: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub svg: bool,
}

impl RunConfig {
    /// Load from an optional file, then apply environment and flag overrides.
    pub fn resolve(path: Option<&Path>, ov: &Overrides) -> anyhow::Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
                let v: Value = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                if !v.is_object() {
                    return Err(config_err("config root must be a JSON object"));
                }
                v
            }
            None => Value::Object(Default::default()),
        };
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                set_path(&mut doc, "output_dir", Value::String(dir))?;
            }
        }
        if let Some(s) = &ov.scenario {
            set_path(&mut doc, "scenario.name", Value::String(s.clone()))?;
        }
        if let Some(p) = &ov.params {
            let v: Value = serde_json::from_str(p).map_err(|e| config_err(format!("--params: {e}")))?;
            set_path(&mut doc, "scenario.params", v)?;
        }
        if let Some(d) = &ov.output_dir {
            set_path(&mut doc, "output_dir", Value::String(d.display().to_string()))?;
        }
        if let Some(t) = ov.threads {
            set_path(&mut doc, "threads", Value::from(t))?;
        }
        if ov.svg {
            set_path(&mut doc, "svg", Value::Bool(true))?;
        }
        for kv in &ov.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| config_err(format!("--set expects key=value, got `{kv}`")))?;
            set_path(&mut doc, k.trim(), parse_value(v.trim()))?;
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.integrator.validate().map_err(|e| config_err(e.to_string()))?;
        let g = &self.grids;
        if g.eps.iter().any(|e| !(*e > 0.0)) || g.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config_err("grids.eps must be positive and strictly decreasing"));
        }
        if g.s_fractions.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(config_err("grids.s_fractions must lie in [0, 1]"));
        }
        if g.t_points == 0 || self.biffun.grid_points < 8 {
            return Err(config_err("grids.t_points must be positive and biffun.grid_points at least 8"));
        }
        if self.threads == Some(0) {
            return Err(config_err("threads must be positive"));
        }
        if let Some(c) = &self.degree.circle {
            if !(c.radius > 0.0) || c.points < 8 {
                return Err(config_err("degree.circle needs radius > 0 and at least 8 points"));
            }
        }
        if self.shoot.tol <= 0.0 || !(self.shoot.damping > 0.0 && self.shoot.damping < 1.0) {
            return Err(config_err("shoot.tol must be positive and shoot.damping in (0, 1)"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
